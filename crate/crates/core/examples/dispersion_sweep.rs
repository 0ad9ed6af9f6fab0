//! Trace ω(β) below the cut-off and write CSV plus an SVG plot.
//!
//! cargo run --example dispersion_sweep -- out_dir

use std::path::PathBuf;

use rbtrap::dispersion::{sweep, MuOptions};
use rbtrap::expr::parse_expression;
use rbtrap::modes::ResolventOptions;
use rbtrap::perturbation::{fourier_coefficients, SpatialGrid};
use rbtrap::plot::emit_svg_plot;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let tree = parse_expression("(1+cos(y))*cosq(x,1)")?;
    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 201)?, 4, 64)?;
    let opts = MuOptions::new(1e-12, 200, ResolventOptions::new(6, 1e-13, 500));
    let betas: Vec<f64> = (1..=16).map(|k| 0.45 * k as f64 / 16.0).collect();
    let curve = sweep(&fp, 0.1, &betas, &opts, 0);
    println!("{:>8} {:>14} {:>14} status", "beta", "mu", "omega");
    for cp in &curve.points {
        match &cp.result {
            Ok(p) => println!(
                "{:8.4} {:14.6e} {:14.10} ok",
                cp.beta,
                p.mu,
                p.omega_sq.sqrt()
            ),
            Err(e) => println!(
                "{:8.4} {:>14} {:>14} {} ({e})",
                cp.beta,
                "-",
                "-",
                cp.status()
            ),
        }
    }
    let svg = dir.join("dispersion.svg");
    emit_svg_plot(&curve, &svg)?;
    println!("plot written to {}", svg.display());
    Ok(())
}
