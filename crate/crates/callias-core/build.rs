use std::path::Path;

// The netlib backend links `-lcblas`, which Debian does not ship as a
// standalone library. OpenBLAS exports the cblas symbols, so expose it
// under that name via a symlink in OUT_DIR.
fn main() {
    let out = std::env::var("OUT_DIR").unwrap();
    let shim = Path::new(&out).join("libcblas.so");
    if !shim.exists() {
        for cand in [
            "/usr/lib/x86_64-linux-gnu/libopenblas.so",
            "/usr/lib/libopenblas.so",
            "/usr/lib64/libopenblas.so",
        ] {
            if Path::new(cand).exists() {
                let _ = std::os::unix::fs::symlink(cand, &shim);
                break;
            }
        }
    }
    println!("cargo:rustc-link-search=native={out}");
}
