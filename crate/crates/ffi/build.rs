use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    match cbindgen::Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        Ok(b) => {
            b.write_to_file(crate_dir.join("include").join("binarykin.h"));
        }
        // Keep building when the header cannot be regenerated (e.g. a
        // mid-edit parse error); the checked-in header stays.
        Err(e) => println!("cargo:warning=cbindgen: {e}"),
    }
}
