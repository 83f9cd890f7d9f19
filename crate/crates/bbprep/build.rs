// Links the LAPACK symbols required by ndarray-linalg against the system
// OpenBLAS (which bundles LAPACK on Debian-family systems).
fn main() {
    println!("cargo:rustc-link-search=native=/usr/lib/x86_64-linux-gnu");
    println!("cargo:rustc-link-lib=dylib=openblas");
}
