//! y-independent bump: series solver against the 1-D finite-difference oracle.
//!
//! cargo run --release --example oracle_1d

use rbtrap::dispersion::{solve_mu, MuOptions};
use rbtrap::expr::parse_expression;
use rbtrap::modes::ResolventOptions;
use rbtrap::oracle::{ode_1d_eigensolve, OracleOptions};
use rbtrap::perturbation::{fourier_coefficients, SpatialGrid};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = parse_expression("cosq(x,1)")?;
    let fp = fourier_coefficients(&tree, &SpatialGrid::new(1.0, 401)?, 4, 64)?;
    let opts = MuOptions::new(1e-14, 200, ResolventOptions::new(6, 1e-14, 500));
    println!(
        "{:>6} {:>16} {:>16} {:>10}",
        "eps", "series mu", "oracle mu", "rel diff"
    );
    for eps in [1e-3, 1e-2, 5e-2] {
        let series = solve_mu(&fp, 0.3, eps, &opts)?;
        let line = ode_1d_eigensolve(&tree, 0.3, eps, 200.0, 4001, &OracleOptions::default())?;
        println!(
            "{eps:6} {:16.10e} {:16.10e} {:10.2e}",
            series.mu,
            line.mu,
            (line.mu - series.mu).abs() / series.mu
        );
    }
    Ok(())
}
