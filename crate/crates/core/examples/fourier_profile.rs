//! y-Fourier coefficients f_j(x) of a profile and their decay in j.
//!
//! cargo run --example fourier_profile [-- table.csv]

use rbtrap::expr::parse_expression;
use rbtrap::perturbation::{decay_report, fourier_coefficients, mean_integral, SpatialGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = parse_expression("(1+cos(y)+0.5*sin(2*y))*cosq(x,1)")?;
    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 201)?, 4, 64)?;
    for (j, sup) in decay_report(&fp) {
        println!("max |f_{j:+}| = {sup:.6e}");
    }
    println!("hermitian defect {:.3e}", fp.hermitian_defect());
    println!("∬ f = {:.12}", mean_integral(&fp)?);
    let (re, im) = fp.reconstruct(0.3, 1.2)?;
    println!(
        "reconstructed f(0.3, 1.2) = {re:.12} {im:+.1e}i, direct {:.12}",
        tree.evaluate(0.3, 1.2)?
    );
    if let Some(path) = std::env::args().nth(1) {
        fp.write_csv(std::fs::File::create(&path)?)?;
        println!("coefficient table written to {path}");
    }
    Ok(())
}
