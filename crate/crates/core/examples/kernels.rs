//! Mode wavenumbers and Green's functions on the admissible window.
//!
//! cargo run --example kernels

use rbtrap::kernels::{
    coupling, green_value, kernel_h, mu0, regularized_green, wavenumber, KernelParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let beta = 0.3;
    let mu = 0.05;
    println!(
        "beta = {beta}, mu0 = {:.12}, coupling c = {:.12}",
        mu0(beta),
        coupling(beta, mu)
    );
    for m in -3..=3 {
        let p = KernelParams::new(beta, mu, m);
        println!(
            "m = {m:+}: k = {:.10}  G(0.5) = {:.10e}  H(0.5) = {:.10e}",
            wavenumber(p)?,
            green_value(p, 0.5)?,
            kernel_h(p, 0.5)?
        );
    }
    for x in [0.0, 0.5, 2.0] {
        println!(
            "G_r(mu = {mu}, x = {x}) = {:+.12e}",
            regularized_green(mu, x)
        );
    }
    Ok(())
}
