fn main() {
    #[cfg(feature = "generate-header")]
    {
        let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
        let bindings = cbindgen::generate(&crate_dir).expect("cbindgen generation");
        bindings.write_to_file(format!("{crate_dir}/include/dekreg.h"));
    }
}
