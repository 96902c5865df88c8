fn main() {
    let dir = std::env::var("CARGO_MANIFEST_DIR").expect("set by cargo");
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    cbindgen::generate(&dir)
        .expect("header generation failed")
        .write_to_file(std::path::Path::new(&dir).join("include/gkpmod.h"));
}
