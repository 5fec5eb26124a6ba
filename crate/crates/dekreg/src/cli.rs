//! Command-line front end with reproducible, file-based I/O.
//!
//! Exit status contract: 0 success, 2 input error (bad flags, missing or
//! malformed files), 3 numeric/estimation failure. All randomness flows
//! from `--seed`; rerunning a command with identical flags produces
//! byte-identical primary output files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::asymptotics::{
    asymptotic_bias_variance, misspecified_bias, variance_ratio_study, AsymptoticSpec,
    DesignDensity, MisspecMethod, MisspecifiedTruth, SecondDerivMode, TableMethod,
};
use crate::bandwidth::{loocv_select, BandwidthGrid};
use crate::error::{Error, Result};
use crate::growth::{self, ExpansionOrder, GrowthLaw};
use crate::io;
use crate::kernel::{kernel_constants, Kernel};
use crate::localfit::{fit_curve, Dataset, FitMethod};
use crate::simlab::{
    draw_dataset, emit_tables, run_study_with, BandwidthPolicy, Design, LambdaMode, Scenario,
    StudyColumn, StudyMethod, StudyTables,
};
use crate::tumor::{run_tumor_pipeline, sparse_demo, PipelineConfig, SdDenominator, TumorData};

#[derive(Parser, Debug)]
#[command(
    name = "dekreg",
    version,
    about = "Differential-equation-assisted kernel regression"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one estimator to a CSV dataset over a grid.
    Fit(FitArgs),
    /// Monte Carlo comparison of the estimator battery on one scenario.
    Simulate(SimulateArgs),
    /// Evaluate the asymptotic bias/variance summary rows at a point.
    Asymptotics(AsymptoticsArgs),
    /// Finite-sample DE1-k/NW variance-ratio study on random designs.
    VarianceRatio(VarianceRatioArgs),
    /// Four-estimator demonstration on the sparse tumour data.
    TumorDemo(TumorDemoArgs),
    /// Log-scale tumour simulation pipeline with held-out observations.
    TumorPipeline(TumorPipelineArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TableFormat {
    Csv,
    Text,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Input CSV with header `x,y` (or `time,volume`).
    #[arg(long)]
    input: PathBuf,
    /// Output curve CSV (grid, fitted, defined).
    #[arg(long)]
    output: PathBuf,
    /// JSON sidecar with the method, bandwidth, and estimated parameters.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// nw | ll | lq | lc | de1 | subexp1 | subexp2 | nls | nls-subexp
    #[arg(long)]
    method: String,
    /// Taylor degree for de1 (1..=5).
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Growth rate; estimated from the data when omitted.
    #[arg(long)]
    lambda: Option<f64>,
    /// Sub-exponential exponent; estimated from the data when omitted.
    #[arg(long)]
    alpha: Option<f64>,
    /// Bandwidth; leave-one-out cross-validated when omitted.
    #[arg(long)]
    h: Option<f64>,
    /// gaussian | epanechnikov
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    grid_points: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario id 1..=3, or `all` for the full scenario-by-size grid.
    #[arg(long)]
    scenario: String,
    /// Sample size per replicate; ignored with `--scenario all`.
    #[arg(long, default_value_t = 25)]
    n: usize,
    /// uniform | beta
    #[arg(long, default_value = "uniform")]
    design: String,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Comma-separated battery subset, e.g. "NW,LL,DE1-1"; default all ten.
    #[arg(long)]
    methods: Option<String>,
    /// known:<value> or estimate
    #[arg(long, default_value = "known:1.0")]
    lambda_mode: String,
    /// calibrated[:<replicates>] (bandwidths fixed per cell from reference-
    /// scenario cross-validation) or per-replicate
    #[arg(long, default_value = "calibrated")]
    h_policy: String,
    /// Prefix for `<prefix>_mean` and `<prefix>_se` tables.
    #[arg(long)]
    output_prefix: PathBuf,
    /// Optional per-replicate MAD dump CSV.
    #[arg(long)]
    dump_mads: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

#[derive(Args, Debug)]
struct AsymptoticsArgs {
    /// Growth rate of the assumed exponential law.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Evaluation point.
    #[arg(long)]
    x: f64,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// g(x); defaults to e^{lambda x}.
    #[arg(long)]
    g_at_x: Option<f64>,
    /// uniform | beta
    #[arg(long, default_value = "uniform")]
    density: String,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Evaluate the misspecified-truth bias rows instead.
    #[arg(long)]
    misspecified: bool,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Use the calculus form of g'' in the misspecified rows.
    #[arg(long)]
    corrected_gpp: bool,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
}

#[derive(Args, Debug)]
struct VarianceRatioArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Bandwidth; rule-of-thumb of each drawn design when omitted.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// Number of consecutive seeds to pool.
    #[arg(long, default_value_t = 1)]
    repeat: u64,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Output CSV of per-point ratios.
    #[arg(long)]
    output: PathBuf,
    /// JSON summary sidecar.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TumorDemoArgs {
    /// Bandwidth of all four fits.
    #[arg(long, default_value_t = 3.5)]
    h: f64,
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    #[arg(long, default_value_t = 241)]
    grid_points: usize,
    /// Override the estimated growth rate of the DE1-1 curve.
    #[arg(long)]
    lambda: Option<f64>,
    /// Output CSV of the four curves (long format).
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Also export the embedded datasets into this directory.
    #[arg(long)]
    export_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TumorPipelineArgs {
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long)]
    seed: u64,
    /// Bandwidth of the truth-defining local linear fit.
    #[arg(long, default_value_t = 2.38)]
    h_truth: f64,
    /// n | n-2
    #[arg(long, default_value = "n")]
    sd_denominator: String,
    /// Estimate alpha/lambda once from the original sparse data instead of
    /// per replicate.
    #[arg(long)]
    fix_params: bool,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

/// Parse argv, run, and map errors onto the exit-status contract.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version with success status
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };

    init_thread_pool();

    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Asymptotics(args) => cmd_asymptotics(args),
        Command::VarianceRatio(args) => cmd_variance_ratio(args),
        Command::TumorDemo(args) => cmd_tumor_demo(args),
        Command::TumorPipeline(args) => cmd_tumor_pipeline(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                3
            } else {
                2
            }
        }
    }
}

/// Thread count comes from DEKREG_THREADS when set; replicate loops are
/// schedule-independent either way.
fn init_thread_pool() {
    if let Ok(v) = std::env::var("DEKREG_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
}

#[derive(Serialize)]
struct SelectionDiagnostics {
    grid: Vec<f64>,
    selected_h: f64,
    cv_score: f64,
}

#[derive(Serialize)]
struct FitSidecar {
    method: String,
    kernel: String,
    h: Option<f64>,
    lambda: Option<f64>,
    alpha: Option<f64>,
    c: Option<f64>,
    log_scale_fit_exponentiated: bool,
    selection: Option<SelectionDiagnostics>,
    defined_points: usize,
    grid_points: usize,
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let data = io::read_xy_csv(&args.input)?;
    let kernel = Kernel::by_name(&args.kernel)?;

    let lo = args
        .grid_min
        .unwrap_or_else(|| data.x().iter().cloned().fold(f64::INFINITY, f64::min));
    let hi = args
        .grid_max
        .unwrap_or_else(|| data.x().iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    if !(hi >= lo) || args.grid_points < 1 {
        return Err(Error::invalid("empty or inverted evaluation grid"));
    }
    let grid: Vec<f64> = if args.grid_points == 1 {
        vec![lo]
    } else {
        (0..args.grid_points)
            .map(|i| lo + (hi - lo) * i as f64 / (args.grid_points - 1) as f64)
            .collect()
    };

    // resolve the method and any estimated global parameters
    let mut sidecar = FitSidecar {
        method: String::new(),
        kernel: kernel.name().to_string(),
        h: None,
        lambda: None,
        alpha: None,
        c: None,
        log_scale_fit_exponentiated: false,
        selection: None,
        defined_points: 0,
        grid_points: grid.len(),
    };

    enum Prepared {
        Pointwise {
            method: FitMethod,
            data: Dataset,
            expback: bool,
        },
        Global {
            method: FitMethod,
        },
    }

    let prepared = match args.method.to_ascii_lowercase().as_str() {
        "nw" => Prepared::Pointwise {
            method: FitMethod::LocalPoly { degree: 0 },
            data: data.clone(),
            expback: false,
        },
        "ll" => Prepared::Pointwise {
            method: FitMethod::LocalPoly { degree: 1 },
            data: data.clone(),
            expback: false,
        },
        "lq" => Prepared::Pointwise {
            method: FitMethod::LocalPoly { degree: 2 },
            data: data.clone(),
            expback: false,
        },
        "lc" => Prepared::Pointwise {
            method: FitMethod::LocalPoly { degree: 3 },
            data: data.clone(),
            expback: false,
        },
        "de1" => {
            let lambda = match args.lambda {
                Some(v) => v,
                None => growth::loglinear_init(&data)?.1,
            };
            sidecar.lambda = Some(lambda);
            Prepared::Pointwise {
                method: FitMethod::De1 { k: args.k, lambda },
                data: data.clone(),
                expback: false,
            }
        }
        m @ ("subexp1" | "subexp2") => {
            if data.y().iter().any(|&v| v <= 0.0) {
                return Err(Error::invalid(
                    "sub-exponential methods need strictly positive responses",
                ));
            }
            let alpha = match args.alpha {
                Some(v) => v,
                None => growth::estimate_alpha(&data)?,
            };
            let lambda = match args.lambda {
                Some(v) => v,
                None => growth::estimate_lambda_subexp(&data, alpha)?,
            };
            sidecar.alpha = Some(alpha);
            sidecar.lambda = Some(lambda);
            sidecar.log_scale_fit_exponentiated = true;
            let law = GrowthLaw::sub_exponential(lambda, alpha)?;
            let order = if m == "subexp1" {
                ExpansionOrder::First
            } else {
                ExpansionOrder::Second
            };
            Prepared::Pointwise {
                method: FitMethod::SubExp { order, law },
                data: data.map_y(f64::ln)?,
                expback: true,
            }
        }
        "nls" => Prepared::Global {
            method: FitMethod::NlsExponential,
        },
        "nls-subexp" => Prepared::Global {
            method: FitMethod::NlsSubExp,
        },
        other => return Err(Error::invalid(format!("unknown method '{other}'"))),
    };

    let curve = match prepared {
        Prepared::Pointwise {
            method,
            data: fit_data,
            expback,
        } => {
            let h = match args.h {
                Some(h) => h,
                None => {
                    let grid_h = BandwidthGrid::default_for(&fit_data)?;
                    let (h, score) = loocv_select(&fit_data, &method, &kernel, &grid_h)?;
                    sidecar.selection = Some(SelectionDiagnostics {
                        grid: grid_h.values().to_vec(),
                        selected_h: h,
                        cv_score: score,
                    });
                    h
                }
            };
            sidecar.h = Some(h);
            sidecar.method = method.tag();
            let mut curve = fit_curve(&fit_data, &method, h, &kernel, &grid)?;
            if expback {
                for v in curve.values.iter_mut() {
                    *v = v.map(f64::exp);
                }
            }
            curve
        }
        Prepared::Global { method } => {
            sidecar.method = method.tag();
            if matches!(method, FitMethod::NlsExponential) {
                let (c, lambda) = growth::fit_nls_exponential(&data)?;
                sidecar.c = Some(c);
                sidecar.lambda = Some(lambda);
            } else {
                let alpha = growth::estimate_alpha(&data)?;
                let lambda = growth::estimate_lambda_subexp(&data, alpha)?;
                sidecar.alpha = Some(alpha);
                sidecar.lambda = Some(lambda);
            }
            fit_curve(&data, &method, 1.0, &kernel, &grid)?
        }
    };

    sidecar.defined_points = curve.defined_count();
    io::write_fit_curve_csv(&args.output, &curve)?;
    if let Some(path) = &args.sidecar {
        io::write_json(path, &sidecar)?;
    }
    Ok(())
}

fn parse_lambda_mode(s: &str) -> Result<LambdaMode> {
    let lower = s.to_ascii_lowercase();
    if lower == "estimate" {
        return Ok(LambdaMode::Estimate);
    }
    if let Some(v) = lower.strip_prefix("known:") {
        let v: f64 = v
            .parse()
            .map_err(|_| Error::invalid(format!("bad lambda value in '{s}'")))?;
        return Ok(LambdaMode::Known(v));
    }
    Err(Error::invalid(format!(
        "lambda-mode must be 'estimate' or 'known:<value>', got '{s}'"
    )))
}

fn parse_h_policy(s: &str) -> Result<BandwidthPolicy> {
    let lower = s.to_ascii_lowercase();
    if lower == "per-replicate" {
        return Ok(BandwidthPolicy::PerReplicate);
    }
    if lower == "calibrated" {
        return Ok(BandwidthPolicy::default());
    }
    if let Some(v) = lower.strip_prefix("calibrated:") {
        let replicates: usize = v
            .parse()
            .map_err(|_| Error::invalid(format!("bad calibration count in '{s}'")))?;
        return Ok(BandwidthPolicy::Calibrated { replicates });
    }
    Err(Error::invalid(format!(
        "h-policy must be 'per-replicate' or 'calibrated[:<replicates>]', got '{s}'"
    )))
}

fn table_to_csv(tables: &StudyTables, which: &str) -> String {
    let grid = if which == "mean" {
        &tables.means
    } else {
        &tables.ses
    };
    let mut out = String::from("method");
    for h in &tables.headers {
        let _ = write!(out, ",{h}");
    }
    out.push('\n');
    for (i, m) in tables.methods.iter().enumerate() {
        let _ = write!(out, "{m}");
        for cell in &grid[i] {
            match cell {
                Some(v) => {
                    let _ = write!(out, ",{}", io::fmt_f64(*v));
                }
                None => out.push_str(",NA"),
            }
        }
        out.push('\n');
    }
    out
}

fn table_to_text(tables: &StudyTables, which: &str) -> String {
    let grid = if which == "mean" {
        &tables.means
    } else {
        &tables.ses
    };
    let mut out = format!("{:<8}", "method");
    for h in &tables.headers {
        let _ = write!(out, "{h:>16}");
    }
    out.push('\n');
    for (i, m) in tables.methods.iter().enumerate() {
        let _ = write!(out, "{m:<8}");
        for cell in &grid[i] {
            match cell {
                Some(v) => {
                    let _ = write!(out, "{:>16.2}", v);
                }
                None => {
                    let _ = write!(out, "{:>16}", "NA");
                }
            }
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SimulateSidecar {
    scenario: String,
    n: usize,
    design: String,
    replicates: usize,
    seed: u64,
    noise_sd: f64,
    lambda_mode: String,
    h_policy: String,
    failures: Vec<(String, usize)>,
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let design = Design::by_name(&args.design)?;
    let lambda_mode = parse_lambda_mode(&args.lambda_mode)?;
    let policy = parse_h_policy(&args.h_policy)?;
    let methods = match &args.methods {
        None => StudyMethod::battery(),
        Some(list) => list
            .split(',')
            .map(|s| StudyMethod::parse(s.trim()))
            .collect::<Result<Vec<_>>>()?,
    };

    // published column order: sizes 25 then 10, scenarios 1..3 within each
    let cells: Vec<(u8, usize)> = match args.scenario.to_ascii_lowercase().as_str() {
        "all" => vec![(1, 25), (2, 25), (3, 25), (1, 10), (2, 10), (3, 10)],
        s => {
            let id: u8 = s.parse().map_err(|_| {
                Error::invalid(format!("scenario must be 1..=3 or 'all', got '{s}'"))
            })?;
            vec![(id, args.n)]
        }
    };

    let mut columns = Vec::new();
    let mut reports = Vec::new();
    for &(id, n) in &cells {
        let scenario = Scenario::new(id, design, n)?.with_noise_sd(args.noise)?;
        let report = run_study_with(
            &scenario,
            &methods,
            args.replicates,
            args.seed,
            lambda_mode,
            policy,
        )?;
        columns.push(StudyColumn::from(&report));
        reports.push(report);
    }
    let tables = emit_tables(&columns)?;
    for w in &tables.warnings {
        eprintln!("warning: {w}");
    }

    let prefix = args.output_prefix.as_os_str().to_string_lossy().to_string();
    let (ext, render): (&str, fn(&StudyTables, &str) -> String) = match args.format {
        TableFormat::Csv => ("csv", table_to_csv),
        TableFormat::Text => ("txt", table_to_text),
    };
    io::write_text(
        Path::new(&format!("{prefix}_mean.{ext}")),
        &render(&tables, "mean"),
    )?;
    io::write_text(
        Path::new(&format!("{prefix}_se.{ext}")),
        &render(&tables, "se"),
    )?;

    if let Some(path) = &args.dump_mads {
        let mut out = String::from("scenario,n,design,method,replicate,mad\n");
        for report in &reports {
            for rep in &report.reports {
                for (r, mad) in rep.mads.iter().enumerate() {
                    if let Some(m) = mad {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            report.scenario.id,
                            report.scenario.n,
                            design.label(),
                            rep.method,
                            r,
                            io::fmt_f64(*m)
                        );
                    }
                }
            }
        }
        io::write_text(path, &out)?;
    }

    let sidecar = SimulateSidecar {
        scenario: args.scenario.clone(),
        n: args.n,
        design: design.label().into(),
        replicates: args.replicates,
        seed: args.seed,
        noise_sd: args.noise,
        lambda_mode: lambda_mode.label(),
        h_policy: policy.label(),
        failures: reports
            .iter()
            .flat_map(|report| {
                report.reports.iter().map(move |r| {
                    (
                        format!("{} {}", report.scenario.label(), r.method),
                        r.failures,
                    )
                })
            })
            .collect(),
    };
    io::write_json(Path::new(&format!("{prefix}_meta.json")), &sidecar)?;
    Ok(())
}

fn cmd_asymptotics(args: AsymptoticsArgs) -> Result<()> {
    let kernel = Kernel::by_name(&args.kernel)?;
    let density = DesignDensity::by_name(&args.density)?;
    let constants = kernel_constants(&kernel)?;

    let mut rows: Vec<(String, f64, f64)> = Vec::new();
    if args.misspecified {
        let lambda1 = args
            .lambda1
            .ok_or_else(|| Error::invalid("--misspecified requires --lambda1"))?;
        let lambda2 = args
            .lambda2
            .ok_or_else(|| Error::invalid("--misspecified requires --lambda2"))?;
        let truth = MisspecifiedTruth::new(lambda1, lambda2)?;
        let mode = if args.corrected_gpp {
            SecondDerivMode::Corrected
        } else {
            SecondDerivMode::AsPrinted
        };
        for method in MisspecMethod::rows() {
            let bias = misspecified_bias(
                method,
                &truth,
                &density,
                &constants.moments,
                args.h,
                args.x,
                mode,
            )?;
            // the conditional variances are unchanged by misspecification
            let f = density.pdf(args.x);
            let var =
                args.sigma * args.sigma * constants.moments.v(0) / (args.n as f64 * args.h * f);
            rows.push((method.label().to_string(), bias, var));
        }
    } else {
        let g_at_x = args.g_at_x.unwrap_or_else(|| (args.lambda * args.x).exp());
        if !g_at_x.is_finite() {
            return Err(Error::invalid("g(x) must be finite"));
        }
        for method in TableMethod::summary_rows() {
            let spec = AsymptoticSpec::new(method, args.lambda, args.sigma, args.n, args.h)?;
            let (bias, var) =
                asymptotic_bias_variance(&spec, g_at_x, &density, &constants, args.x)?;
            rows.push((method.label(), bias, var));
        }
    }

    let content = match args.format {
        TableFormat::Csv => {
            let mut out = String::from("method,bias,variance\n");
            for (m, b, v) in &rows {
                let _ = writeln!(out, "{m},{},{}", io::fmt_f64(*b), io::fmt_f64(*v));
            }
            out
        }
        TableFormat::Text => {
            let mut out = format!("{:<8}{:>16}{:>16}\n", "method", "bias", "variance");
            for (m, b, v) in &rows {
                let _ = writeln!(
                    out,
                    "{m:<8}{:>16}{:>16}",
                    io::fmt_human(*b),
                    io::fmt_human(*v)
                );
            }
            out
        }
    };
    io::write_text(&args.output, &content)
}

#[derive(Serialize)]
struct VarianceRatioSidecar {
    n: usize,
    lambda: f64,
    k: usize,
    h: Option<f64>,
    seed: u64,
    repeat: u64,
    per_seed_mean: Vec<f64>,
    pooled_mean: f64,
    pooled_min: f64,
    pooled_max: f64,
    excluded: usize,
}

fn cmd_variance_ratio(args: VarianceRatioArgs) -> Result<()> {
    let kernel = Kernel::by_name(&args.kernel)?;
    if args.repeat < 1 {
        return Err(Error::invalid("--repeat must be at least 1"));
    }

    let mut out = String::from("seed,point,ratio\n");
    let mut per_seed_mean = Vec::new();
    let mut pooled = Vec::new();
    let mut excluded = 0;
    for offset in 0..args.repeat {
        let seed = args.seed + offset;
        let study = variance_ratio_study(args.n, args.lambda, args.k, args.h, &kernel, seed)?;
        for (i, r) in study.ratios.iter().enumerate() {
            let _ = writeln!(out, "{seed},{i},{}", io::fmt_f64(*r));
        }
        per_seed_mean.push(study.mean);
        pooled.extend_from_slice(&study.ratios);
        excluded += study.excluded;
    }
    io::write_text(&args.output, &out)?;

    let pooled_mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    let pooled_min = pooled.iter().cloned().fold(f64::INFINITY, f64::min);
    let pooled_max = pooled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "variance ratio: pooled mean {pooled_mean:.4}, range ({pooled_min:.4}, {pooled_max:.4}), {} ratios, {excluded} excluded",
        pooled.len()
    );
    if let Some(path) = &args.sidecar {
        io::write_json(
            path,
            &VarianceRatioSidecar {
                n: args.n,
                lambda: args.lambda,
                k: args.k,
                h: args.h,
                seed: args.seed,
                repeat: args.repeat,
                per_seed_mean,
                pooled_mean,
                pooled_min,
                pooled_max,
                excluded,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TumorDemoSidecar {
    h: f64,
    kernel: String,
    lambda_hat: f64,
    lambda_overridden: bool,
    grid_points: usize,
}

fn cmd_tumor_demo(args: TumorDemoArgs) -> Result<()> {
    let kernel = Kernel::by_name(&args.kernel)?;
    let demo = sparse_demo(args.h, &kernel, args.grid_points, args.lambda)?;
    io::write_curves_csv(&args.output, &demo.curves)?;

    if let Some(dir) = &args.export_data {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        io::write_xy_csv(
            &dir.join("full.csv"),
            &TumorData::full(),
            ("time", "volume"),
        )?;
        io::write_xy_csv(
            &dir.join("sparse.csv"),
            &TumorData::sparse(),
            ("time", "volume"),
        )?;
    }

    if let Some(path) = &args.sidecar {
        io::write_json(
            path,
            &TumorDemoSidecar {
                h: args.h,
                kernel: kernel.name().into(),
                lambda_hat: demo.lambda_hat,
                lambda_overridden: args.lambda.is_some(),
                grid_points: args.grid_points,
            },
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TumorPipelineSidecar {
    replicates: usize,
    seed: u64,
    truth_bandwidth: f64,
    sd_denominator: String,
    reestimate_per_replicate: bool,
    residual_sd: f64,
    failures: Vec<(String, usize)>,
}

fn cmd_tumor_pipeline(args: TumorPipelineArgs) -> Result<()> {
    let sd_denominator = match args.sd_denominator.to_ascii_lowercase().as_str() {
        "n" => SdDenominator::N,
        "n-2" => SdDenominator::NMinus2,
        other => {
            return Err(Error::invalid(format!(
                "--sd-denominator must be 'n' or 'n-2', got '{other}'"
            )))
        }
    };
    let config = PipelineConfig {
        truth_bandwidth: args.h_truth,
        replicates: args.replicates,
        sd_denominator,
        reestimate_per_replicate: !args.fix_params,
    };
    let report = run_tumor_pipeline(&config, args.seed)?;

    let mut out = String::from("method,log_scale,original_scale\n");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            row.method,
            io::fmt_f64(row.log_scale),
            io::fmt_f64(row.original_scale)
        );
    }
    io::write_text(&args.output, &out)?;

    if let Some(path) = &args.sidecar {
        io::write_json(
            path,
            &TumorPipelineSidecar {
                replicates: args.replicates,
                seed: args.seed,
                truth_bandwidth: args.h_truth,
                sd_denominator: args.sd_denominator.clone(),
                reestimate_per_replicate: !args.fix_params,
                residual_sd: report.residual_sd,
                failures: report
                    .rows
                    .iter()
                    .map(|r| (r.method.to_string(), r.failures))
                    .collect(),
            },
        )?;
    }
    Ok(())
}

/// Produce one scenario dataset on disk (used by tests and examples).
pub fn write_scenario_csv(
    path: &Path,
    scenario_id: u8,
    design: &str,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<()> {
    let scenario = Scenario::new(scenario_id, Design::by_name(design)?, n)?.with_noise_sd(noise)?;
    let data = draw_dataset(&scenario, seed)?;
    io::write_xy_csv(path, &data, ("x", "y"))
}
