use std::path::Path;

// The netlib backend links `-lcblas`, but Debian-family systems ship the
// CBLAS symbols inside libopenblas / libblas without a libcblas.so alias.
// Provide one in OUT_DIR when the system lacks it.
fn main() {
    let have_system_cblas = [
        "/usr/lib/x86_64-linux-gnu/libcblas.so",
        "/usr/lib/libcblas.so",
        "/usr/local/lib/libcblas.so",
    ]
    .iter()
    .any(|p| Path::new(p).exists());
    if have_system_cblas {
        return;
    }
    let candidates = [
        "/usr/lib/x86_64-linux-gnu/libopenblas.so",
        "/usr/lib/x86_64-linux-gnu/libblas.so",
    ];
    let Some(src) = candidates.iter().find(|p| Path::new(p).exists()) else {
        return;
    };
    let out_dir = std::env::var("OUT_DIR").unwrap();
    let link = Path::new(&out_dir).join("libcblas.so");
    if !link.exists() {
        #[cfg(unix)]
        std::os::unix::fs::symlink(src, &link).expect("failed to create libcblas.so alias");
    }
    println!("cargo:rustc-link-search=native={out_dir}");
}
