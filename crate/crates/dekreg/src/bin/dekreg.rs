use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dekreg::cli::run(std::env::args()) as u8)
}
