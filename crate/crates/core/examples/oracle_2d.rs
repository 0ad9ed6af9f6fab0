//! Brute-force strip eigenvalue compared with the series solver.
//!
//! cargo run --release --example oracle_2d

use std::time::Instant;

use rbtrap::dispersion::{self, MuOptions};
use rbtrap::expr::parse_expression;
use rbtrap::modes::ResolventOptions;
use rbtrap::oracle::{fd_strip_eigensolve, OracleOptions, StripDiscretization};
use rbtrap::perturbation::{fourier_coefficients, SpatialGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (beta, eps) = (0.35, 0.05);
    let tree = parse_expression("(1+cos(y))*cosq(x,1)")?;

    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 401)?, 4, 64)?;
    let opts = MuOptions::new(1e-12, 100, ResolventOptions::new(6, 1e-13, 500));
    let series = dispersion::solve_mu(&fp, beta, eps, &opts)?;
    println!("series  mu = {:.10e}", series.mu);

    let start = Instant::now();
    let disc = StripDiscretization::new(40.0, 1601, 64)?;
    let strip = fd_strip_eigensolve(&tree, beta, eps, &disc, &OracleOptions::default())?;
    println!(
        "strip   mu = {:.10e}  ({} outer, {} inverse steps, {:.1} s)",
        strip.mu,
        strip.outer_iterations,
        strip.inverse_iterations,
        start.elapsed().as_secs_f64()
    );
    println!(
        "relative difference {:.3e}",
        (strip.mu - series.mu).abs() / series.mu
    );
    Ok(())
}
