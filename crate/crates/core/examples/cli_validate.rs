//! Drive the command layer directly: solve report and validation checks for a config file.
//!
//! cargo run --release --example cli_validate -- configs/reference.toml

use rbtrap::app::{build_report, validation_checks, Pipeline};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/line.toml").into());
    let p = Pipeline::from_path(&path)?;
    let report = build_report(&p, false, false)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    for c in validation_checks(&p)? {
        println!(
            "{:<22} {:.3e} <= {:.1e}  {}",
            c.name,
            c.value,
            c.threshold,
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    Ok(())
}
