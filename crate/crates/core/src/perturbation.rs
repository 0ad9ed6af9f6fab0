//! Fourier coefficient functions of the perturbation in the periodic variable.
//!
//! For `f(x, y)` with period 2π in `y` we tabulate
//!
//! ```text
//! f_j(x) = ∫₀^{2π} f(x, y) e^{−ijy} dy
//! ```
//!
//! on a symmetric x-grid. Note the absence of a 1/2π factor: the operator and
//! right-hand-side constants downstream carry it instead, so
//! `f(x, y) = (1/2π) Σ_j f_j(x) e^{ijy}`.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{ExprError, ExpressionTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbationError {
    #[error("grid needs an odd point count >= 3 and positive half-width (got M={points}, R={half_width})")]
    InvalidGrid { half_width: f64, points: usize },
    #[error("y-quadrature size {q} is below 4J+4 = {min}")]
    QuadratureTooCoarse { q: usize, min: usize },
    #[error("coefficient tail not resolved: max |f_J| = {tail:.3e} exceeds {tol:.3e}; raise J")]
    TailNotResolved { tail: f64, tol: f64 },
    #[error("mean of the profile is {mean:.6e}; a trapped mode needs a positive mean")]
    NonPositiveMean { mean: f64 },
    #[error("mean integral has imaginary part {imag:.3e}")]
    ComplexMean { imag: f64 },
    #[error("x = {x} lies outside the grid [−{half_width}, {half_width}]")]
    OutOfRange { x: f64, half_width: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Uniform symmetric grid `x_i = −R + 2R·i/(M−1)` with odd `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    half_width: f64,
    points: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self, PerturbationError> {
        if points < 3 || points.is_multiple_of(2) || !(half_width > 0.0) || !half_width.is_finite()
        {
            return Err(PerturbationError::InvalidGrid { half_width, points });
        }
        Ok(Self { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        // Mirror the upper half so the grid is exactly symmetric and hits 0.
        let mid = self.points / 2;
        let h = self.spacing();
        if i >= mid {
            let k = i - mid;
            if k == mid {
                self.half_width
            } else {
                k as f64 * h
            }
        } else {
            -self.node(self.points - 1 - i)
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.points {
            0.5 * h
        } else {
            h
        }
    }

    pub fn integrate(&self, values: &[Complex64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.points);
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .sum()
    }
}

/// Tabulated `f_j(x_i)` for `j ∈ [−J, J]`.
#[derive(Debug, Clone)]
pub struct FourierProfile {
    grid: SpatialGrid,
    j_max: usize,
    quadrature: usize,
    tail_tol: f64,
    coefficients: Vec<Vec<Complex64>>,
}

pub const DEFAULT_TAIL_TOL: f64 = 1e-6;

/// Samples `f` on the grid and a `Q`-point periodic trapezoid rule in `y`.
pub fn fourier_coefficients(
    profile: &ExpressionTree,
    grid: &SpatialGrid,
    j_max: usize,
    quadrature: usize,
) -> Result<FourierProfile, PerturbationError> {
    fourier_coefficients_with_tol(profile, grid, j_max, quadrature, DEFAULT_TAIL_TOL)
}

pub fn fourier_coefficients_with_tol(
    profile: &ExpressionTree,
    grid: &SpatialGrid,
    j_max: usize,
    quadrature: usize,
    tail_tol: f64,
) -> Result<FourierProfile, PerturbationError> {
    let min = 4 * j_max + 4;
    if quadrature < min {
        return Err(PerturbationError::QuadratureTooCoarse { q: quadrature, min });
    }
    let hy = 2.0 * PI / quadrature as f64;
    let m = grid.len();
    let mut samples = vec![0.0; m * quadrature];
    for i in 0..m {
        let x = grid.node(i);
        for q in 0..quadrature {
            samples[i * quadrature + q] = profile.evaluate(x, hy * q as f64)?;
        }
    }
    // e^{−ijy_q} with the phase index reduced modulo Q, so the table is exact
    // on the lattice and j ↔ −j see conjugate phases.
    let phase = |j: i64, q: usize| -> Complex64 {
        let k = (j.rem_euclid(quadrature as i64) as usize * q) % quadrature;
        Complex64::from_polar(1.0, -2.0 * PI * k as f64 / quadrature as f64)
    };
    let coefficients: Vec<Vec<Complex64>> = (-(j_max as i64)..=j_max as i64)
        .map(|j| {
            (0..m)
                .map(|i| {
                    let row = &samples[i * quadrature..(i + 1) * quadrature];
                    let sum: Complex64 =
                        row.iter().enumerate().map(|(q, &f)| phase(j, q) * f).sum();
                    sum * hy
                })
                .collect()
        })
        .collect();

    let fp = FourierProfile {
        grid: grid.clone(),
        j_max,
        quadrature,
        tail_tol,
        coefficients,
    };
    let tail = fp.max_abs(j_max as i64).max(fp.max_abs(-(j_max as i64)));
    // With J = 0 the "tail" is the mean itself, which says nothing about resolution.
    if j_max > 0 && tail > tail_tol {
        return Err(PerturbationError::TailNotResolved {
            tail,
            tol: tail_tol,
        });
    }
    Ok(fp)
}

impl FourierProfile {
    /// Build directly from a coefficient table indexed `[j + J][i]`.
    pub fn from_table(grid: SpatialGrid, coefficients: Vec<Vec<Complex64>>) -> Self {
        assert!(coefficients.len() % 2 == 1, "need 2J+1 coefficient rows");
        assert!(coefficients.iter().all(|row| row.len() == grid.len()));
        let j_max = coefficients.len() / 2;
        Self {
            grid,
            j_max,
            quadrature: 0,
            tail_tol: f64::INFINITY,
            coefficients,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    /// Coefficient row `f_j`, or `None` when `|j| > J` (treated as zero).
    pub fn coefficient(&self, j: i64) -> Option<&[Complex64]> {
        if j.unsigned_abs() as usize > self.j_max {
            None
        } else {
            Some(&self.coefficients[(j + self.j_max as i64) as usize])
        }
    }

    pub fn max_abs(&self, j: i64) -> f64 {
        self.coefficient(j)
            .map(|row| row.iter().map(|c| c.norm()).fold(0.0, f64::max))
            .unwrap_or(0.0)
    }

    /// Same profile with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for row in &mut out.coefficients {
            for c in row.iter_mut() {
                *c *= factor;
            }
        }
        out
    }

    /// Largest |f_{−j} − conj(f_j)| over the table.
    pub fn hermitian_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for j in 0..=self.j_max as i64 {
            let (a, b) = (self.coefficient(j).unwrap(), self.coefficient(-j).unwrap());
            for (p, q) in a.iter().zip(b) {
                defect = defect.max((q - p.conj()).norm());
            }
        }
        defect
    }

    /// Complex value of ∬f = ∫ f_0(x) dx by the trapezoid rule.
    pub fn mean_integral_complex(&self) -> Complex64 {
        self.grid.integrate(self.coefficient(0).unwrap())
    }

    pub fn reconstruct(&self, x: f64, y: f64) -> Result<(f64, f64), PerturbationError> {
        reconstruct(self, x, y)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "j,x,re_f_j,im_f_j")?;
        for j in -(self.j_max as i64)..=self.j_max as i64 {
            for (i, c) in self.coefficient(j).unwrap().iter().enumerate() {
                writeln!(
                    out,
                    "{},{:.16e},{:.16e},{:.16e}",
                    j,
                    self.grid.node(i),
                    c.re,
                    c.im
                )?;
            }
        }
        Ok(())
    }
}

/// ∬_Π f dx dy; refuses a non-positive mean.
pub fn mean_integral(fp: &FourierProfile) -> Result<f64, PerturbationError> {
    let total = fp.mean_integral_complex();
    if total.im.abs() > 1e-12 {
        return Err(PerturbationError::ComplexMean { imag: total.im });
    }
    if total.re <= 0.0 {
        return Err(PerturbationError::NonPositiveMean { mean: total.re });
    }
    Ok(total.re)
}

/// Inverse transform with linear interpolation in `x`; returns (value, imaginary residue).
pub fn reconstruct(fp: &FourierProfile, x: f64, y: f64) -> Result<(f64, f64), PerturbationError> {
    let r = fp.grid.half_width();
    if !(x.abs() <= r) {
        return Err(PerturbationError::OutOfRange { x, half_width: r });
    }
    let h = fp.grid.spacing();
    let cell = (((x + r) / h).floor() as usize).min(fp.grid.len() - 2);
    let t = ((x - fp.grid.node(cell)) / h).clamp(0.0, 1.0);
    let mut sum = Complex64::new(0.0, 0.0);
    for j in -(fp.j_max as i64)..=fp.j_max as i64 {
        let row = fp.coefficient(j).unwrap();
        let value = row[cell] * (1.0 - t) + row[cell + 1] * t;
        sum += value * Complex64::from_polar(1.0, j as f64 * y);
    }
    sum /= 2.0 * PI;
    Ok((sum.re, sum.im))
}

/// `(j, max_i |f_j(x_i)|)` for every tabulated `j`.
pub fn decay_report(fp: &FourierProfile) -> Vec<(i64, f64)> {
    (-(fp.j_max as i64)..=fp.j_max as i64)
        .map(|j| (j, fp.max_abs(j)))
        .collect()
}
