//! Parse a perturbation expression, evaluate it and check its support.
//!
//! cargo run --example parse_profile -- "(1+cos(y))*cosq(x,1)"

use rbtrap::expr::{parse_expression, validate_profile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "(1+cos(y))*cosq(x,1)".into());
    let tree = parse_expression(&text)?;
    println!(
        "f(x,y) = {text}  (y-independent: {})",
        tree.is_y_independent()
    );
    for (x, y) in [(0.0, 0.0), (0.5, 1.0), (0.9, 3.0), (1.5, 0.0)] {
        println!("  f({x:4}, {y:4}) = {:+.12e}", tree.evaluate(x, y)?);
    }
    let r = validate_profile(&tree, 1.0, 256, 1e-12);
    println!("support violation  {:.3e}", r.support_violation);
    println!("periodicity defect {:.3e}", r.periodicity_defect);
    println!(
        "mean estimate      {:.6e}  (sign {})",
        r.mean_estimate, r.mean_sign
    );
    Ok(())
}
