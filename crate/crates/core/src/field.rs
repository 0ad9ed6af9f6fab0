//! Eigenfield synthesis `Ψ_m = G_m ∗ A_m` and its diagnostics.
//!
//! Inside the support the convolutions come from the sweep engine. Outside,
//! `A_m` vanishes and each mode is a pure exponential,
//! `Ψ_m(x) = Ψ_m(±R)·e^{−k_m(|x| − R)}`.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::convolution::{self, ConvolutionError};
use crate::kernels::{self, KernelError, KernelParams};
use crate::modes::ModeVector;
use crate::perturbation::{FourierProfile, SpatialGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Convolution(#[from] ConvolutionError),
    #[error("extent X = {xmax} is smaller than the support radius {radius}")]
    ExtentTooSmall { xmax: f64, radius: f64 },
    #[error("|Ψ_{mode}| underflows in the fit window [{from}, {to}]")]
    TailUnderflow { mode: i64, from: f64, to: f64 },
    #[error("mode {mode} is outside the synthesized range ±{n_max}")]
    ModeOutOfRange { mode: i64, n_max: usize },
    #[error("field lattice needs nx >= 2 and ny >= 1, got nx={nx}, ny={ny}")]
    InvalidLattice { nx: usize, ny: usize },
    #[error("profile and field live on different grids")]
    GridMismatch,
}

/// Extent used when none is given: 2R + 5/μ, at most 2R + 200.
pub fn default_xmax(radius: f64, mu: f64) -> f64 {
    2.0 * radius + (5.0 / mu).min(200.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub beta: f64,
    pub eps: f64,
    pub mu: f64,
    /// Half-width of the extended domain used for exports.
    pub xmax: f64,
    /// `∫A_0 dx` of the amplitudes the field was built from.
    pub a0_integral: Complex64,
    grid: SpatialGrid,
    n_max: usize,
    rates: Vec<f64>,
    interior: Vec<Vec<Complex64>>,
}

pub fn synthesize_modes(
    a: &ModeVector,
    beta: f64,
    eps: f64,
    mu: f64,
    xmax: f64,
) -> Result<FieldSolution, FieldError> {
    let grid = a.grid().clone();
    if xmax < grid.half_width() {
        return Err(FieldError::ExtentTooSmall {
            xmax,
            radius: grid.half_width(),
        });
    }
    let limit = kernels::mu0(beta) / 2.0;
    if !(mu > 0.0) || mu > limit {
        return Err(KernelError::OutsideUniformWindow { mu, limit }.into());
    }
    let indices: Vec<i64> = a.mode_indices().collect();
    let built: Vec<(f64, Vec<Complex64>)> = indices
        .par_iter()
        .map(|&m| -> Result<_, FieldError> {
            let k = kernels::wavenumber(KernelParams::new(beta, mu, m))?;
            let values = if m == 0 {
                // G_0 = G_r + 1/(2μ) keeps the large constant out of the sweep.
                let shift = a.integral(0) / (2.0 * mu);
                convolution::convolve_regularized(mu, &grid, a.mode(0))?
                    .into_iter()
                    .map(|v| v + shift)
                    .collect()
            } else {
                convolution::convolve_exponential(k, &grid, a.mode(m))?
            };
            Ok((k, values))
        })
        .collect::<Result<_, _>>()?;
    let (rates, interior) = built.into_iter().unzip();
    Ok(FieldSolution {
        beta,
        eps,
        mu,
        xmax,
        a0_integral: a.integral(0),
        grid,
        n_max: a.n_max(),
        rates,
        interior,
    })
}

impl FieldSolution {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = i64> {
        -(self.n_max as i64)..=self.n_max as i64
    }

    fn slot(&self, m: i64) -> Result<usize, FieldError> {
        if m.unsigned_abs() as usize > self.n_max {
            return Err(FieldError::ModeOutOfRange {
                mode: m,
                n_max: self.n_max,
            });
        }
        Ok((m + self.n_max as i64) as usize)
    }

    /// Decay rate k_m of mode m.
    pub fn rate(&self, m: i64) -> Result<f64, FieldError> {
        Ok(self.rates[self.slot(m)?])
    }

    /// Ψ_m on the support grid nodes.
    pub fn interior(&self, m: i64) -> Result<&[Complex64], FieldError> {
        Ok(&self.interior[self.slot(m)?])
    }

    /// Ψ_m(x) for any real x: linear interpolation inside, exponential tails outside.
    pub fn value(&self, m: i64, x: f64) -> Result<Complex64, FieldError> {
        let s = self.slot(m)?;
        let r = self.grid.half_width();
        let row = &self.interior[s];
        if x >= r {
            return Ok(row[row.len() - 1] * (-self.rates[s] * (x - r)).exp());
        }
        if x <= -r {
            return Ok(row[0] * (-self.rates[s] * (-x - r)).exp());
        }
        let t = (x + r) / self.grid.spacing();
        let i = (t.floor() as usize).min(row.len() - 2);
        let w = t - i as f64;
        Ok(row[i] * (1.0 - w) + row[i + 1] * w)
    }

    /// max over modes and support nodes of |Ψ_m|; tails never exceed the end values.
    pub fn scale(&self) -> f64 {
        self.interior
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// Same tails computed by the direct cell sum instead of the sweep end values.
    pub fn boundary_defect(&self, a: &ModeVector) -> Result<f64, FieldError> {
        let mut worst = 0.0f64;
        for m in self.mode_indices() {
            let k = self.rate(m)?;
            let (left, right) = convolution::boundary_values(k, &self.grid, a.mode(m))?;
            let row = self.interior(m)?;
            worst = worst
                .max((left - row[0]).norm())
                .max((right - row[row.len() - 1]).norm());
        }
        Ok(worst / self.scale())
    }

    /// Discrete H¹ energy `Σ_n ∫ (|Ψ_n'|² + (1 + (β+n)²)|Ψ_n|²) dx · 2π` over [−X, X].
    pub fn energy(&self, xmax: f64) -> Result<f64, FieldError> {
        let r = self.grid.half_width();
        if xmax < r {
            return Err(FieldError::ExtentTooSmall { xmax, radius: r });
        }
        let h = self.grid.spacing();
        let mut total = 0.0;
        for m in self.mode_indices() {
            let row = self.interior(m)?;
            let k = self.rate(m)?;
            let weight_y = 1.0 + (self.beta + m as f64).powi(2);
            let mass: f64 = (0..row.len())
                .map(|i| self.grid.weight(i) * row[i].norm_sqr())
                .sum();
            let slope: f64 = row.windows(2).map(|w| (w[1] - w[0]).norm_sqr() / h).sum();
            // ∫_R^X e^{−2k(x−R)} dx for each tail; the derivative adds k².
            let tail = -(-2.0 * k * (xmax - r)).exp_m1() / (2.0 * k);
            let ends = row[0].norm_sqr() + row[row.len() - 1].norm_sqr();
            total += weight_y * mass + slope + ends * tail * (weight_y + k * k);
        }
        Ok(2.0 * PI * total)
    }
}

/// Normalized residual of the mode equations
/// `−Ψ_m'' + k_m² Ψ_m = ε c Σ_n f_{m−n} Ψ_n` at interior support nodes.
pub fn mode_residual(fs: &FieldSolution, fp: &FourierProfile) -> Result<f64, FieldError> {
    if fp.grid() != fs.grid() {
        return Err(FieldError::GridMismatch);
    }
    let h = fs.grid.spacing();
    let c = fs.eps * kernels::coupling(fs.beta, fs.mu);
    let n = fs.n_max as i64;
    let worst = (-n..=n)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&m| -> Result<f64, FieldError> {
            let row = fs.interior(m)?;
            let k2 = fs.rate(m)?.powi(2);
            let mut worst = 0.0f64;
            for i in 1..row.len() - 1 {
                let d2 = (row[i + 1] - row[i] * 2.0 + row[i - 1]) / (h * h);
                let mut source = Complex64::new(0.0, 0.0);
                for q in -n..=n {
                    if let Some(f) = fp.coefficient(m - q) {
                        source += f[i] * fs.interior[(q + n) as usize][i];
                    }
                }
                worst = worst.max((-d2 + row[i] * k2 - source * c).norm());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst / fs.scale())
}

/// Least-squares slope of log|Ψ_m| on [2R, 2R + 3/k_m], returned as a positive rate.
pub fn decay_rate(fs: &FieldSolution, m: i64) -> Result<f64, FieldError> {
    let k = fs.rate(m)?;
    let from = 2.0 * fs.grid.half_width();
    let to = from + 3.0 / k;
    let samples: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let x = from + (to - from) * i as f64 / 200.0;
            fs.value(m, x).map(|v| (x, v.norm()))
        })
        .collect::<Result<_, _>>()?;
    fit_rate(&samples).ok_or(FieldError::TailUnderflow { mode: m, from, to })
}

/// Least-squares decay rate of `(x, |Ψ|)` samples; `None` if any sample underflows.
pub fn fit_rate(samples: &[(f64, f64)]) -> Option<f64> {
    if samples.len() < 2 || samples.iter().any(|&(_, v)| !(v >= 1e-300)) {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1.ln() - my)).sum();
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid2D {
    pub beta: f64,
    pub xs: Vec<f64>,
    /// `y_q = 2πq/ny` for `q = 0..=ny`; the last row sits on the period boundary.
    pub ys: Vec<f64>,
    /// `samples[q][i] = Ψ(x_i, y_q)`.
    pub samples: Vec<Vec<Complex64>>,
}

/// Ψ(x, y) = e^{iβy} Σ_n Ψ_n(x) e^{iny} on an nx × (ny + 1) lattice over [−X, X] × [0, 2π].
pub fn synthesize_field(
    fs: &FieldSolution,
    nx: usize,
    ny: usize,
    xmax: f64,
) -> Result<FieldGrid2D, FieldError> {
    if nx < 2 || ny < 1 {
        return Err(FieldError::InvalidLattice { nx, ny });
    }
    let xs: Vec<f64> = (0..nx)
        .map(|i| -xmax + 2.0 * xmax * i as f64 / (nx - 1) as f64)
        .collect();
    let modes: Vec<Vec<Complex64>> = fs
        .mode_indices()
        .map(|m| {
            xs.iter()
                .map(|&x| fs.value(m, x))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let ys: Vec<f64> = (0..=ny).map(|q| 2.0 * PI * q as f64 / ny as f64).collect();
    let n = fs.n_max as i64;
    let samples = (0..=ny)
        .into_par_iter()
        .map(|q| {
            // Integer harmonics use the reduced phase nq mod ny, so the row q = ny
            // repeats row 0 exactly before the Bloch factor is applied.
            let bloch = Complex64::from_polar(1.0, fs.beta * ys[q]);
            let harmonics: Vec<Complex64> = (-n..=n)
                .map(|m| {
                    let reduced = (m * q as i64).rem_euclid(ny as i64);
                    Complex64::from_polar(1.0, 2.0 * PI * reduced as f64 / ny as f64)
                })
                .collect();
            (0..nx)
                .map(|i| {
                    let sum: Complex64 = modes
                        .iter()
                        .zip(&harmonics)
                        .map(|(row, e)| row[i] * e)
                        .sum();
                    bloch * sum
                })
                .collect()
        })
        .collect();
    Ok(FieldGrid2D {
        beta: fs.beta,
        xs,
        ys,
        samples,
    })
}

impl FieldGrid2D {
    pub fn max_abs(&self) -> f64 {
        self.samples
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// `max_x |Ψ(x, 2π) − e^{2πiβ} Ψ(x, 0)| / max |Ψ|`.
    pub fn quasiperiodicity_defect(&self) -> f64 {
        let phase = Complex64::from_polar(1.0, 2.0 * PI * self.beta);
        let (first, last) = (&self.samples[0], &self.samples[self.samples.len() - 1]);
        let worst = first
            .iter()
            .zip(last)
            .map(|(a, b)| (b - phase * a).norm())
            .fold(0.0, f64::max);
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// CSV with columns x, y, re_psi, im_psi, abs_psi after `#` metadata lines.
    pub fn write_csv<W: Write>(&self, mut out: W, meta: &[(&str, String)]) -> io::Result<()> {
        for (key, value) in meta {
            writeln!(out, "# {key} = {value}")?;
        }
        writeln!(out, "x,y,re_psi,im_psi,abs_psi")?;
        for (q, row) in self.samples.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                writeln!(
                    out,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.xs[i],
                    self.ys[q],
                    v.re,
                    v.im,
                    v.norm()
                )?;
            }
        }
        Ok(())
    }
}
