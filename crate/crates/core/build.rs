fn main() {
    // Dense symmetric eigensolves go through the system LAPACK.
    println!("cargo:rustc-link-lib=lapack");
}
