//! Brute-force finite-difference eigensolvers for the strip and its 1-D reduction.
//!
//! The strip `[−L, L] × [0, 2π)` carries the 5-point Laplacian with the Bloch
//! phase `e^{2πiβ}` across the y period. At `x = ±L` the lattice is closed by
//! its exact discrete exterior: beyond the last column the profile vanishes,
//! each discrete y-harmonic decays geometrically, and the ghost column is
//! `u_ghost = D u_edge` with `D` the sum of the harmonic decay factors. `D`
//! depends on the eigenvalue, so the linear shift-invert solve is wrapped in a
//! secant iteration on μ. The mode decays like `e^{−μ|x|}` with `1/μ` far
//! beyond any practical box, which rules out homogeneous Dirichlet ends.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::banded::HermitianBand;
use crate::expr::{ExprError, ExpressionTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("no eigenvalue below the cut-off (μ² = {mu_sq:.3e})")]
    NoBoundStateFound { mu_sq: f64 },
    #[error("shifted matrix has a vanishing pivot at row {row} (σ = {shift})")]
    LinearSolveFailure { row: usize, shift: f64 },
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
    #[error("β = {0} is excluded: need 0 < |β| < 1/2")]
    ExcludedBeta(f64),
    #[error("profile is nonzero at x = {x}, outside the truncated strip")]
    ProfileNotContained { x: f64 },
    #[error("the 1-D reduction needs a profile independent of y")]
    NotYIndependent,
    #[error("oracle iteration stalled after {iterations} steps")]
    NoConvergence { iterations: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripDiscretization {
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
}

impl StripDiscretization {
    pub fn new(half_length: f64, nx: usize, ny: usize) -> Result<Self, OracleError> {
        if nx < 16 || ny < 16 {
            return Err(OracleError::InvalidDiscretization(format!(
                "need nx, ny >= 16, got {nx} x {ny}"
            )));
        }
        if !(half_length > 0.0) {
            return Err(OracleError::InvalidDiscretization(format!(
                "half-length {half_length}"
            )));
        }
        Ok(Self {
            half_length,
            nx,
            ny,
        })
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.half_length / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * PI / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.half_length + self.hx() * i as f64
    }

    /// Bloch phase across one period.
    pub fn bloch_phase(&self, beta: f64) -> Complex64 {
        Complex64::from_polar(1.0, 2.0 * PI * beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Relative tolerance on μ for the outer iteration.
    pub tol: f64,
    pub max_outer: usize,
    pub max_inverse: usize,
    /// Starting μ; by default ε β² ∬f / (4π) from the lattice sum of f.
    pub seed_mu: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 40,
            max_inverse: 200,
            seed_mu: None,
        }
    }
}

/// Converged strip eigenpair.
#[derive(Debug, Clone)]
pub struct StripEigen {
    pub omega_sq: f64,
    pub mu: f64,
    /// Discrete cut-off `(4/hy²) sin²(β hy / 2)`, the bottom of the lattice continuum.
    pub cutoff: f64,
    pub shift: f64,
    pub outer_iterations: usize,
    pub inverse_iterations: usize,
    pub disc: StripDiscretization,
    harmonics: Harmonics,
    /// `u[i·ny + j]` at `(x_i, y_j)`.
    pub eigvec: Vec<Complex64>,
}

impl StripEigen {
    /// Discrete y-harmonic `(β + n)` of the eigenvector along x.
    pub fn harmonic(&self, n: i64) -> Vec<Complex64> {
        let ny = self.disc.ny;
        let slot = self.harmonics.slot(n);
        self.eigvec
            .chunks(ny)
            .map(|row| self.harmonics.project(slot, row))
            .collect()
    }

    /// Decay rate of harmonic 0 fitted on `x ∈ [from, to]`.
    pub fn harmonic0_decay(&self, from: f64, to: f64) -> Option<f64> {
        let amp = self.harmonic(0);
        let samples: Vec<(f64, f64)> = (0..self.disc.nx)
            .map(|i| (self.disc.x(i), amp[i].norm()))
            .filter(|&(x, _)| x >= from && x <= to)
            .collect();
        crate::field::fit_rate(&samples)
    }
}

/// Discrete y-harmonics `v_n(j) = e^{i(β+n) j hy}/√ny`, eigenvectors of the
/// phase-wrapped second difference with eigenvalues `λ_n`.
#[derive(Debug, Clone)]
struct Harmonics {
    ny: usize,
    first: i64,
    lambda: Vec<f64>,
    /// conj(v_n(j)) laid out as `[slot][j]`.
    conj_table: Vec<Complex64>,
}

impl Harmonics {
    fn new(beta: f64, ny: usize) -> Self {
        let hy = 2.0 * PI / ny as f64;
        let first = -(ny as i64 / 2);
        let norm = 1.0 / (ny as f64).sqrt();
        let mut lambda = Vec::with_capacity(ny);
        let mut conj_table = Vec::with_capacity(ny * ny);
        for s in 0..ny {
            let k = beta + (first + s as i64) as f64;
            lambda.push(4.0 / (hy * hy) * (k * hy / 2.0).sin().powi(2));
            for j in 0..ny {
                conj_table.push(Complex64::from_polar(norm, -k * hy * j as f64));
            }
        }
        Self {
            ny,
            first,
            lambda,
            conj_table,
        }
    }

    fn slot(&self, n: i64) -> usize {
        (n - self.first) as usize
    }

    fn project(&self, slot: usize, row: &[Complex64]) -> Complex64 {
        let w = &self.conj_table[slot * self.ny..(slot + 1) * self.ny];
        w.iter().zip(row).map(|(a, b)| a * b).sum()
    }

    fn cutoff(&self) -> f64 {
        self.lambda[self.slot(0)]
    }
}

/// Decaying root ρ of `ρ + 1/ρ = 2 + t`, `t = hx²·gap > 0`, returned with
/// `1 − ρ`; both avoid forming `s² − 4` near `s = 2`.
fn decay_factor(hx: f64, gap: f64) -> (f64, f64) {
    let t = hx * hx * gap;
    let root = (t * (4.0 + t)).sqrt();
    let denom = 2.0 + t + root;
    (2.0 / denom, (t + root) / denom)
}

/// Finds the self-consistent μ, where the linear solve at trial μ_g returns
/// μ²(μ_g). The secant runs on `μ²(μ_g) − μ_g²`, which is close to linear in
/// μ_g even when μ·L is small.
fn outer_secant<T>(
    seed: f64,
    opts: &OracleOptions,
    mut solve: impl FnMut(f64) -> Result<(f64, T), OracleError>,
) -> Result<(f64, T, usize), OracleError> {
    let floor = 1e-6 * seed;
    let mut x0 = seed;
    let (m0, _) = solve(x0)?;
    let mut h0 = m0 - x0 * x0;
    let mut x1 = if m0 > 0.0 && m0.sqrt() != x0 {
        m0.sqrt()
    } else {
        0.5 * x0
    };
    let mut last_mu_sq = m0;
    for iteration in 2..=opts.max_outer {
        let (m1, extra) = solve(x1)?;
        last_mu_sq = m1;
        let h1 = m1 - x1 * x1;
        if m1 > 0.0 && h1.abs() <= 2.0 * opts.tol * x1 * x1 {
            return Ok((m1.sqrt(), extra, iteration));
        }
        let mut next = if h1 != h0 {
            x1 - h1 * (x1 - x0) / (h1 - h0)
        } else {
            0.5 * x1
        };
        if !(next > 0.0) {
            next = 0.5 * x1;
        }
        if next < floor {
            return Err(OracleError::NoBoundStateFound { mu_sq: m1 });
        }
        x0 = x1;
        h0 = h1;
        x1 = next;
    }
    if !(last_mu_sq > 0.0) {
        return Err(OracleError::NoBoundStateFound { mu_sq: last_mu_sq });
    }
    Err(OracleError::NoConvergence {
        iterations: opts.max_outer,
    })
}

fn check_beta(beta: f64) -> Result<(), OracleError> {
    if !(beta.abs() > 0.0 && beta.abs() < 0.5) {
        return Err(OracleError::ExcludedBeta(beta));
    }
    Ok(())
}

/// The exterior closure assumes f vanishes on the edge columns and beyond.
fn check_contained(
    profile: &ExpressionTree,
    disc: &StripDiscretization,
    ys: &[f64],
) -> Result<(), OracleError> {
    let hx = disc.hx();
    for k in 0..4 {
        for x in [
            disc.half_length + k as f64 * hx,
            -disc.half_length - k as f64 * hx,
        ] {
            for &y in ys {
                if profile.evaluate(x, y)? != 0.0 {
                    return Err(OracleError::ProfileNotContained { x });
                }
            }
        }
    }
    Ok(())
}

fn seed_mu(opts: &OracleOptions, beta: f64, eps: f64, mean: f64) -> f64 {
    let lead = eps * beta * beta * mean / (4.0 * PI);
    match opts.seed_mu {
        Some(s) if s > 0.0 => s,
        _ if lead > 0.0 => lead,
        _ => 1e-2 * beta.abs(),
    }
}

struct InverseResult {
    mu_sq: f64,
    vector: Vec<Complex64>,
    iterations: usize,
    shift: f64,
}

/// Shift-invert inverse iteration for the lowest eigenpair of `A u = ω² B u`,
/// trying the shift ladder `σ_k = cutoff − (2^k μ)²` until the pair lands below
/// the cut-off. `quotient` returns μ² of a normalized vector.
fn inverse_iteration(
    assemble: &dyn Fn(f64) -> HermitianBand,
    weights: &[f64],
    start: &[Complex64],
    cutoff: f64,
    mu_g: f64,
    max_inverse: usize,
    quotient: &dyn Fn(&[Complex64]) -> f64,
) -> Result<InverseResult, OracleError> {
    let mut failure = None;
    let mut last = None;
    for k in 0..4 {
        let shift = cutoff - (2f64.powi(k) * mu_g).powi(2);
        let band = assemble(shift);
        let scale = (0..band.len())
            .map(|r| band.get(r, r).norm())
            .fold(0.0, f64::max);
        let ldl = match band.factor(1e-14 * scale) {
            Ok(l) => l,
            Err(row) => {
                failure = Some(OracleError::LinearSolveFailure { row, shift });
                continue;
            }
        };
        let mut u = start.to_vec();
        normalize(&mut u);
        let mut mu_sq = quotient(&u);
        let mut iterations = 0;
        for it in 1..=max_inverse {
            let rhs: Vec<Complex64> = u.iter().zip(weights).map(|(v, w)| v * w).collect();
            u = ldl.solve(&rhs);
            normalize(&mut u);
            let next = quotient(&u);
            let change = (next - mu_sq).abs();
            mu_sq = next;
            iterations = it;
            if change <= 1e-12 * mu_sq.abs().max(1e-300) {
                break;
            }
        }
        let result = InverseResult {
            mu_sq,
            vector: u,
            iterations,
            shift,
        };
        if mu_sq > 0.0 {
            return Ok(result);
        }
        last = Some(result);
    }
    match (failure, last) {
        (_, Some(result)) => Ok(result),
        (Some(e), None) => Err(e),
        (None, None) => Err(OracleError::NoBoundStateFound { mu_sq: 0.0 }),
    }
}

fn normalize(u: &mut [Complex64]) {
    let n = u.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if n > 0.0 {
        u.iter_mut().for_each(|v| *v /= n);
    }
}

/// 2-D strip eigenvalue just below the discrete cut-off.
pub fn fd_strip_eigensolve(
    profile: &ExpressionTree,
    beta: f64,
    eps: f64,
    disc: &StripDiscretization,
    opts: &OracleOptions,
) -> Result<StripEigen, OracleError> {
    check_beta(beta)?;
    let (nx, ny, hx, hy) = (disc.nx, disc.ny, disc.hx(), disc.hy());
    let ys: Vec<f64> = (0..ny).map(|j| hy * j as f64).collect();
    check_contained(profile, disc, &ys)?;
    let mut f = vec![0.0; nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            f[i * ny + j] = profile.evaluate(disc.x(i), ys[j])?;
        }
    }
    let mean = f.iter().sum::<f64>() * hx * hy;
    let weights: Vec<f64> = f.iter().map(|v| 1.0 + eps * v).collect();
    let harmonics = Harmonics::new(beta, ny);
    let cutoff = harmonics.cutoff();
    let phase = disc.bloch_phase(beta);
    let (ihx2, ihy2) = (1.0 / (hx * hx), 1.0 / (hy * hy));

    let mut inverse_total = 0;
    let mut shift_used = 0.0;
    let seed = seed_mu(opts, beta, eps, mean);
    let (mu, vector, outer) = outer_secant(seed, opts, |mu_g| {
        let omega_g = cutoff - mu_g * mu_g;
        let (rho, leak): (Vec<f64>, Vec<f64>) = harmonics
            .lambda
            .iter()
            .map(|&l| decay_factor(hx, l - omega_g))
            .unzip();
        // D(j, j') depends on j − j' only.
        let d_diff: Vec<Complex64> = (0..2 * ny - 1)
            .map(|t| {
                let diff = t as f64 - (ny - 1) as f64;
                (0..ny)
                    .map(|s| {
                        let k = beta + (harmonics.first + s as i64) as f64;
                        Complex64::from_polar(rho[s] / ny as f64, k * hy * diff)
                    })
                    .sum()
            })
            .collect();
        let assemble = |shift: f64| {
            let mut a = HermitianBand::zeros(nx * ny, ny);
            for i in 0..nx {
                for j in 0..ny {
                    let r = i * ny + j;
                    a.add(
                        r,
                        r,
                        Complex64::new(2.0 * ihx2 + 2.0 * ihy2 - shift * weights[r], 0.0),
                    );
                    if j > 0 {
                        a.add(r, r - 1, Complex64::new(-ihy2, 0.0));
                    }
                    if j == ny - 1 {
                        a.add(r, i * ny, -phase * ihy2);
                    }
                    if i > 0 {
                        a.add(r, r - ny, Complex64::new(-ihx2, 0.0));
                    }
                    if i == 0 || i == nx - 1 {
                        for jp in 0..=j {
                            a.add(r, i * ny + jp, -d_diff[j + ny - 1 - jp] * ihx2);
                        }
                    }
                }
            }
            a
        };
        let quotient = |u: &[Complex64]| -> f64 {
            let mut potential = 0.0;
            let mut mass = 0.0;
            for (v, fv) in u.iter().zip(&f) {
                potential += fv * v.norm_sqr();
            }
            for (v, w) in u.iter().zip(&weights) {
                mass += w * v.norm_sqr();
            }
            let mut qx = 0.0;
            for i in 0..nx - 1 {
                for j in 0..ny {
                    qx += (u[(i + 1) * ny + j] - u[i * ny + j]).norm_sqr();
                }
            }
            let mut transverse = 0.0;
            let mut ends = 0.0;
            for i in 0..nx {
                let row = &u[i * ny..(i + 1) * ny];
                for s in 0..ny {
                    let c = harmonics.project(s, row).norm_sqr();
                    transverse += (harmonics.lambda[s] - cutoff) * c;
                    if i == 0 || i == nx - 1 {
                        ends += leak[s] * c;
                    }
                }
            }
            (cutoff * eps * potential - (qx + ends) * ihx2 - transverse) / mass
        };
        let slot0 = harmonics.slot(0);
        let start: Vec<Complex64> = (0..nx * ny)
            .map(|r| {
                let (i, j) = (r / ny, r % ny);
                harmonics.conj_table[slot0 * ny + j].conj() * (-mu_g * disc.x(i).abs()).exp()
            })
            .collect();
        let res = inverse_iteration(
            &assemble,
            &weights,
            &start,
            cutoff,
            mu_g,
            opts.max_inverse,
            &quotient,
        )?;
        inverse_total += res.iterations;
        shift_used = res.shift;
        Ok((res.mu_sq, res.vector))
    })?;
    Ok(StripEigen {
        omega_sq: cutoff - mu * mu,
        mu,
        cutoff,
        shift: shift_used,
        outer_iterations: outer,
        inverse_iterations: inverse_total,
        disc: *disc,
        harmonics,
        eigvec: vector,
    })
}

#[derive(Debug, Clone)]
pub struct LineEigen {
    pub omega_sq: f64,
    pub mu: f64,
    pub outer_iterations: usize,
    pub inverse_iterations: usize,
    pub xs: Vec<f64>,
    pub eigvec: Vec<f64>,
}

/// 1-D reduction `−u'' + β² u = ω² (1 + ε g) u` on `[−L, L]` with the same
/// exact exterior closure; `μ² = β² − ω²`.
pub fn ode_1d_eigensolve(
    g: &ExpressionTree,
    beta: f64,
    eps: f64,
    half_length: f64,
    nx: usize,
    opts: &OracleOptions,
) -> Result<LineEigen, OracleError> {
    check_beta(beta)?;
    if !g.is_y_independent() {
        return Err(OracleError::NotYIndependent);
    }
    let disc = StripDiscretization::new(half_length, nx, 16)?;
    check_contained(g, &disc, &[0.0])?;
    let hx = disc.hx();
    let xs: Vec<f64> = (0..nx).map(|i| disc.x(i)).collect();
    let gv: Vec<f64> = xs
        .iter()
        .map(|&x| g.evaluate(x, 0.0))
        .collect::<Result<_, _>>()?;
    let weights: Vec<f64> = gv.iter().map(|v| 1.0 + eps * v).collect();
    let mean = gv.iter().sum::<f64>() * hx * 2.0 * PI;
    let cutoff = beta * beta;
    let ihx2 = 1.0 / (hx * hx);

    let mut inverse_total = 0;
    let seed = seed_mu(opts, beta, eps, mean);
    let (mu, vector, outer) = outer_secant(seed, opts, |mu_g| {
        let (rho, leak) = decay_factor(hx, mu_g * mu_g);
        let assemble = |shift: f64| {
            let mut a = HermitianBand::zeros(nx, 1);
            for i in 0..nx {
                let edge = if i == 0 || i == nx - 1 { rho } else { 0.0 };
                a.add(
                    i,
                    i,
                    Complex64::new((2.0 - edge) * ihx2 + cutoff - shift * weights[i], 0.0),
                );
                if i > 0 {
                    a.add(i, i - 1, Complex64::new(-ihx2, 0.0));
                }
            }
            a
        };
        let quotient = |u: &[Complex64]| -> f64 {
            let potential: f64 = u.iter().zip(&gv).map(|(v, g)| g * v.norm_sqr()).sum();
            let mass: f64 = u.iter().zip(&weights).map(|(v, w)| w * v.norm_sqr()).sum();
            let qx: f64 = u.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum();
            let ends = leak * (u[0].norm_sqr() + u[nx - 1].norm_sqr());
            (cutoff * eps * potential - (qx + ends) * ihx2) / mass
        };
        let start: Vec<Complex64> = xs
            .iter()
            .map(|&x| Complex64::new((-mu_g * x.abs()).exp(), 0.0))
            .collect();
        let res = inverse_iteration(
            &assemble,
            &weights,
            &start,
            cutoff,
            mu_g,
            opts.max_inverse,
            &quotient,
        )?;
        inverse_total += res.iterations;
        Ok((res.mu_sq, res.vector))
    })?;
    // Real eigenvector up to a global phase.
    let pivot = vector
        .iter()
        .cloned()
        .fold(Complex64::new(0.0, 0.0), |a, b| {
            if b.norm() > a.norm() {
                b
            } else {
                a
            }
        });
    let phase = pivot.conj() / pivot.norm();
    Ok(LineEigen {
        omega_sq: cutoff - mu * mu,
        mu,
        outer_iterations: outer,
        inverse_iterations: inverse_total,
        xs,
        eigvec: vector.iter().map(|v| (v * phase).re).collect(),
    })
}
