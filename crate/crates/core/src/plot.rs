//! Minimal SVG line plot of a dispersion curve ω(β) against the cut-off ω = |β|.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::dispersion::DispersionCurve;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("curve has no converged points to plot")]
    EmptyCurve,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

pub fn render_svg(curve: &DispersionCurve) -> Result<String, PlotError> {
    let points: Vec<(f64, f64)> = curve
        .ok_points()
        .map(|p| (p.beta, p.omega_sq.sqrt()))
        .collect();
    if points.is_empty() {
        return Err(PlotError::EmptyCurve);
    }
    let (mut x0, mut x1) = points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.0), b.max(p.0))
        });
    if x1 - x0 < 1e-9 {
        x0 -= 0.05;
        x1 += 0.05;
    }
    let pad = 0.05 * (x1 - x0);
    let (x0, x1) = (x0 - pad, x1 + pad);
    let top = x0.abs().max(x1.abs());
    let low = points
        .iter()
        .map(|p| p.1)
        .fold(f64::INFINITY, f64::min)
        .min(x0.abs().min(x1.abs()));
    let (y0, y1) = (
        (low - 0.05 * (top - low)).max(0.0),
        top + 0.05 * (top - low).max(1e-3),
    );
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (left, right, bottom, upper) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {upper} L{left} {bottom} L{right} {bottom}" fill="none" stroke="black"/>"#
    );
    for k in 0..=4 {
        let bx = x0 + (x1 - x0) * k as f64 / 4.0;
        let wy = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{:.3}</text>"#,
            sx(bx),
            bottom + 16.0,
            bx
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{:.4}</text>"#,
            left - 6.0,
            sy(wy) + 4.0,
            wy
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">β</text>"#,
        WIDTH / 2.0,
        HEIGHT - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" font-size="14" text-anchor="middle">ω</text>"#,
        HEIGHT / 2.0
    );

    // Cut-off ω = |β|, sampled so a sign change in β keeps its kink.
    let cutoff: Vec<String> = (0..=64)
        .map(|k| {
            let b = x0 + (x1 - x0) * k as f64 / 64.0;
            format!("{:.2},{:.2}", sx(b), sy(b.abs()))
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="cutoff" points="{}" fill="none" stroke="gray" stroke-dasharray="6 4"/>"#,
        cutoff.join(" ")
    );
    let branch: Vec<String> = points
        .iter()
        .map(|&(b, w)| format!("{:.2},{:.2}", sx(b), sy(w)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="branch" points="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        branch.join(" ")
    );
    for &(b, w) in &points {
        let _ = writeln!(
            s,
            r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="3.5" fill="steelblue"/>"#,
            sx(b),
            sy(w)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_plot(curve: &DispersionCurve, path: impl AsRef<Path>) -> Result<(), PlotError> {
    let svg = render_svg(curve)?;
    std::fs::write(path, svg)?;
    Ok(())
}
