//! Solve (1 − εT)A = rhs by fixed point and by dense LU, and compare.
//!
//! cargo run --example resolvent

use rbtrap::expr::parse_expression;
use rbtrap::kernels::mu0;
use rbtrap::modes::{
    power_norm_estimate, profile_vector, schur_bound, solve_resolvent, ResolventOptions,
};
use rbtrap::perturbation::{fourier_coefficients, SpatialGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (beta, eps, mu) = (0.3, 0.05, 0.01);
    let tree = parse_expression("(1+cos(y))*cosq(x,1)")?;
    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 101)?, 4, 64)?;

    let bound = schur_bound(&fp, beta, mu0(beta) / 2.0, 4)?;
    let estimate = power_norm_estimate(&fp, beta, mu, &profile_vector(&fp, 4), 50)?;
    println!("||T|| power estimate {estimate:.6e}, Schur bound {bound:.6e}");

    let opts = ResolventOptions::new(2, 1e-15, 1000);
    let fixed = solve_resolvent(&fp, beta, eps, mu, &opts)?;
    let dense = solve_resolvent(&fp, beta, eps, mu, &opts.dense())?;
    println!(
        "fixed point: {} iterations, last update {:.2e}, contraction {:.3}",
        fixed.iterations, fixed.final_update_norm, fixed.contraction
    );
    println!(
        "fixed point vs dense: {:.3e}",
        fixed.modes.distance(&dense.modes) / dense.modes.norm()
    );
    for n in fixed.modes.mode_indices() {
        println!("  ∫A_{n:+} = {:.10e}", fixed.modes.integral(n));
    }
    Ok(())
}
