//! μ at one (β, ε) against the leading-order term.
//!
//! cargo run --example dispersion_point -- 0.3 0.01

use rbtrap::dispersion::{solve_mu, MuOptions};
use rbtrap::expr::parse_expression;
use rbtrap::modes::ResolventOptions;
use rbtrap::perturbation::{fourier_coefficients, SpatialGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let beta: f64 = args.next().map_or(Ok(0.3), |s| s.parse())?;
    let eps: f64 = args.next().map_or(Ok(0.01), |s| s.parse())?;
    let tree = parse_expression("(1+cos(y))*cosq(x,1)")?;
    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 401)?, 4, 64)?;
    let p = solve_mu(
        &fp,
        beta,
        eps,
        &MuOptions::new(1e-13, 200, ResolventOptions::new(6, 1e-13, 500)),
    )?;
    println!("beta {beta}  eps {eps}");
    println!("mu          {:.12e}", p.mu);
    println!(
        "leading mu  {:.12e}  (ratio {:.6})",
        p.leading_mu,
        p.mu / p.leading_mu
    );
    println!("omega^2     {:.15}", p.omega_sq);
    println!(
        "iterations  {} outer, {} resolvent",
        p.iterations, p.resolvent_iterations_total
    );
    println!(
        "window margin {:.4e}, residual {:.2e}",
        p.window_margin, p.residual
    );
    Ok(())
}
