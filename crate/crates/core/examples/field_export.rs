//! Synthesize Ψ(x, y) from the converged amplitudes and write a CSV lattice.
//!
//! cargo run --example field_export -- field.csv

use rbtrap::dispersion::{eigenmode, solve_mu, MuOptions};
use rbtrap::expr::parse_expression;
use rbtrap::field::{decay_rate, default_xmax, mode_residual, synthesize_field, synthesize_modes};
use rbtrap::modes::ResolventOptions;
use rbtrap::perturbation::{fourier_coefficients, SpatialGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "field.csv".into());
    let (beta, eps) = (0.3, 0.05);
    let tree = parse_expression("(1+cos(y))*cosq(x,1)")?;
    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 401)?, 4, 64)?;
    let opts = MuOptions::new(1e-13, 200, ResolventOptions::new(6, 1e-13, 500));
    let p = solve_mu(&fp, beta, eps, &opts)?;
    let a = eigenmode(&fp, &p, &opts.resolvent)?;
    let fs = synthesize_modes(&a, beta, eps, p.mu, default_xmax(1.0, p.mu))?;
    println!("mu = {:.10e}, X = {:.2}", p.mu, fs.xmax);
    println!("mode residual {:.3e}", mode_residual(&fs, &fp)?);
    println!(
        "decay: Ψ0 {:.8e} (mu {:.8e}), Ψ1 {:.8} (k1 {:.8})",
        decay_rate(&fs, 0)?,
        p.mu,
        decay_rate(&fs, 1)?,
        fs.rate(1)?
    );
    let grid = synthesize_field(&fs, 121, 48, 20.0)?;
    println!(
        "quasiperiodicity defect {:.2e}",
        grid.quasiperiodicity_defect()
    );
    let meta = [
        ("beta", beta.to_string()),
        ("epsilon", eps.to_string()),
        ("mu", format!("{:.16e}", p.mu)),
    ];
    grid.write_csv(std::io::BufWriter::new(std::fs::File::create(&out)?), &meta)?;
    println!("wrote {out}");
    Ok(())
}
