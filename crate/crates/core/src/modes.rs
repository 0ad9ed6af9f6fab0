//! Truncated mode vectors and the coupled-mode convolution operator.
//!
//! With `c = (β² − μ²)/(2π)` the operator acts on `A = (A_n)_{|n| ≤ N}` as
//!
//! ```text
//! (T A)_m = c · [ f_m · (G_r ∗ A_0) + Σ_{n ≠ 0} f_{m−n} · (G_n ∗ A_n) ]
//! ```
//!
//! and the mode amplitudes solve `(1 − εT) A = (ε/2μ) · c · f`. Convolutions
//! are evaluated by the linear-time sweeps in [`crate::convolution`].

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::convolution::{ConvolutionError, SweepKernel};
use crate::kernels::{self, KernelError, KernelParams};
use crate::perturbation::{FourierProfile, SpatialGrid};

/// Neumann iteration is only attempted with this much contraction margin.
pub const CONTRACTION_LIMIT: f64 = 0.9;

/// Stacked unknown count beyond which the dense cross-check refuses to run.
pub const DENSE_LIMIT: usize = 2500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModeError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Convolution(#[from] ConvolutionError),
    #[error("mode vector and profile live on different grids")]
    GridMismatch,
    #[error("mode vector has truncation N = {got}, expected {expected}")]
    TruncationMismatch { expected: usize, got: usize },
    #[error("μ must be positive for the mode system, got {0}")]
    InvalidMu(f64),
    #[error("ε·bound = {product:.3e} is not below {limit}; the Neumann series may diverge")]
    ContractionViolated { product: f64, limit: f64 },
    #[error(
        "fixed-point iteration stalled after {iterations} steps (last update {update_norm:.3e})"
    )]
    NoConvergence { iterations: usize, update_norm: f64 },
    #[error("dense solve limited to {limit} unknowns, requested {unknowns}")]
    DenseTooLarge { unknowns: usize, limit: usize },
    #[error("dense system is singular")]
    Singular,
}

/// Grid functions `A_n(x_i)` for `n ∈ [−N, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    grid: SpatialGrid,
    n_max: usize,
    values: Vec<Vec<Complex64>>,
}

impl ModeVector {
    pub fn zeros(grid: &SpatialGrid, n_max: usize) -> Self {
        Self {
            grid: grid.clone(),
            n_max,
            values: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; 2 * n_max + 1],
        }
    }

    pub fn from_fn(
        grid: &SpatialGrid,
        n_max: usize,
        mut f: impl FnMut(i64, usize) -> Complex64,
    ) -> Self {
        let values = (-(n_max as i64)..=n_max as i64)
            .map(|n| (0..grid.len()).map(|i| f(n, i)).collect())
            .collect();
        Self {
            grid: grid.clone(),
            n_max,
            values,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = i64> {
        -(self.n_max as i64)..=self.n_max as i64
    }

    pub fn mode(&self, n: i64) -> &[Complex64] {
        &self.values[self.slot(n)]
    }

    pub fn mode_mut(&mut self, n: i64) -> &mut [Complex64] {
        let slot = self.slot(n);
        &mut self.values[slot]
    }

    fn slot(&self, n: i64) -> usize {
        assert!(
            n.unsigned_abs() as usize <= self.n_max,
            "mode {n} outside ±{}",
            self.n_max
        );
        (n + self.n_max as i64) as usize
    }

    /// max_i |A_n(x_i)|.
    pub fn mode_sup(&self, n: i64) -> f64 {
        self.mode(n).iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `sqrt(Σ_n (max_i |A_n(x_i)|)²)`.
    pub fn norm(&self) -> f64 {
        self.mode_indices()
            .map(|n| self.mode_sup(n).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Trapezoid integral of mode `n`.
    pub fn integral(&self, n: i64) -> Complex64 {
        self.grid.integrate(self.mode(n))
    }

    pub fn scale(&mut self, factor: Complex64) {
        for row in &mut self.values {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: Complex64, other: &ModeVector) -> ModeVector {
        let mut out = self.clone();
        for (row, orow) in out.values.iter_mut().zip(&other.values) {
            for (v, o) in row.iter_mut().zip(orow) {
                *v += alpha * o;
            }
        }
        out
    }

    pub fn distance(&self, other: &ModeVector) -> f64 {
        self.axpy(Complex64::new(-1.0, 0.0), other).norm()
    }

    pub fn flat(&self) -> Vec<Complex64> {
        self.values.iter().flatten().copied().collect()
    }

    fn from_flat(grid: &SpatialGrid, n_max: usize, flat: &[Complex64]) -> Self {
        let m = grid.len();
        Self {
            grid: grid.clone(),
            n_max,
            values: flat.chunks(m).map(|c| c.to_vec()).collect(),
        }
    }
}

/// Per-mode convolutions `G_r ∗ A_0` and `G_n ∗ A_n`.
fn mode_convolutions(beta: f64, mu: f64, a: &ModeVector) -> Result<Vec<Vec<Complex64>>, ModeError> {
    let h = a.grid.spacing();
    a.mode_indices()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let kernel = if n == 0 {
                SweepKernel::regularized(mu, h)?
            } else {
                SweepKernel::exponential(kernels::wavenumber(KernelParams::new(beta, mu, n))?, h)?
            };
            let mut out = vec![Complex64::new(0.0, 0.0); a.grid.len()];
            kernel.apply(a.mode(n), &mut out);
            Ok(out)
        })
        .collect()
}

fn check_window(beta: f64, mu: f64) -> Result<(), ModeError> {
    let limit = kernels::mu0(beta) / 2.0;
    if !(mu >= 0.0) || mu > limit {
        return Err(KernelError::OutsideUniformWindow { mu, limit }.into());
    }
    Ok(())
}

/// Applies the coupled-mode operator to `a`; output keeps the truncation of `a`.
pub fn apply_t(
    fp: &FourierProfile,
    beta: f64,
    mu: f64,
    a: &ModeVector,
) -> Result<ModeVector, ModeError> {
    if fp.grid() != a.grid() {
        return Err(ModeError::GridMismatch);
    }
    check_window(beta, mu)?;
    let conv = mode_convolutions(beta, mu, a)?;
    let n_max = a.n_max as i64;
    let c = kernels::coupling(beta, mu);
    let m_points = a.grid.len();
    let values: Vec<Vec<Complex64>> = (-n_max..=n_max)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|m| {
            let mut row = vec![Complex64::new(0.0, 0.0); m_points];
            for n in -n_max..=n_max {
                let Some(f) = fp.coefficient(m - n) else {
                    continue;
                };
                let g = &conv[(n + n_max) as usize];
                for ((out, fv), gv) in row.iter_mut().zip(f).zip(g) {
                    *out += fv * gv;
                }
            }
            for v in row.iter_mut() {
                *v *= c;
            }
            row
        })
        .collect();
    Ok(ModeVector {
        grid: a.grid.clone(),
        n_max: a.n_max,
        values,
    })
}

/// Upper bound on the operator norm of `T` over `μ ∈ [0, mu_max]`:
/// `C · Σ_j max_i |f_j(x_i)|`, with `C = 2R · sup |ℋ_n(x)|` sampled over
/// `|n| ≤ N`, `|x| ≤ 2R` and the μ range. The factor 2R is the length of the
/// convolution window.
pub fn schur_bound(
    fp: &FourierProfile,
    beta: f64,
    mu_max: f64,
    n_max: usize,
) -> Result<f64, ModeError> {
    check_window(beta, mu_max)?;
    let r = fp.grid().half_width();
    let (mu_samples, x_samples) = (32, 400);
    let mut sup = 0.0f64;
    for n in -(n_max as i64)..=n_max as i64 {
        for a in 0..=mu_samples {
            let mu = mu_max * a as f64 / mu_samples as f64;
            for b in 0..=x_samples {
                let x = 2.0 * r * b as f64 / x_samples as f64;
                sup = sup.max(kernels::kernel_h(KernelParams::new(beta, mu, n), x)?.abs());
            }
        }
    }
    let coefficient_sum: f64 = (-(fp.j_max() as i64)..=fp.j_max() as i64)
        .map(|j| fp.max_abs(j))
        .sum();
    Ok(2.0 * r * sup * coefficient_sum)
}

/// Lower estimate of the operator norm by power iteration from `start`.
pub fn power_norm_estimate(
    fp: &FourierProfile,
    beta: f64,
    mu: f64,
    start: &ModeVector,
    steps: usize,
) -> Result<f64, ModeError> {
    let mut v = start.clone();
    let mut estimate = 0.0f64;
    for _ in 0..steps {
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.scale(Complex64::new(1.0 / norm, 0.0));
        let next = apply_t(fp, beta, mu, &v)?;
        estimate = estimate.max(next.norm());
        v = next;
    }
    Ok(estimate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventMethod {
    FixedPoint,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventOptions {
    pub n_max: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub method: ResolventMethod,
}

impl ResolventOptions {
    pub fn new(n_max: usize, tol: f64, max_iter: usize) -> Self {
        Self {
            n_max,
            tol,
            max_iter,
            method: ResolventMethod::FixedPoint,
        }
    }

    pub fn dense(mut self) -> Self {
        self.method = ResolventMethod::Dense;
        self
    }
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub modes: ModeVector,
    pub iterations: usize,
    pub final_update_norm: f64,
    pub method: ResolventMethod,
    /// ε times the operator-norm bound used for the contraction check.
    pub contraction: f64,
}

/// Mode vector holding `f_m` in each mode `|m| ≤ N` (zero beyond `J`).
pub fn profile_vector(fp: &FourierProfile, n_max: usize) -> ModeVector {
    ModeVector::from_fn(fp.grid(), n_max, |n, i| {
        fp.coefficient(n)
            .map(|row| row[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    })
}

/// Solves `(1 − εT) A = rhs`.
pub fn solve_with_rhs(
    fp: &FourierProfile,
    beta: f64,
    eps: f64,
    mu: f64,
    rhs: &ModeVector,
    opts: &ResolventOptions,
) -> Result<ResolventSolution, ModeError> {
    if rhs.n_max != opts.n_max {
        return Err(ModeError::TruncationMismatch {
            expected: opts.n_max,
            got: rhs.n_max,
        });
    }
    if fp.grid() != rhs.grid() {
        return Err(ModeError::GridMismatch);
    }
    let contraction = eps.abs() * schur_bound(fp, beta, mu, opts.n_max)?;
    if contraction >= CONTRACTION_LIMIT {
        return Err(ModeError::ContractionViolated {
            product: contraction,
            limit: CONTRACTION_LIMIT,
        });
    }
    match opts.method {
        ResolventMethod::FixedPoint => {
            let mut a = rhs.clone();
            let eps_c = Complex64::new(eps, 0.0);
            for iteration in 1..=opts.max_iter {
                let next = rhs.axpy(eps_c, &apply_t(fp, beta, mu, &a)?);
                let update = next.distance(&a);
                a = next;
                if update <= opts.tol {
                    return Ok(ResolventSolution {
                        modes: a,
                        iterations: iteration,
                        final_update_norm: update,
                        method: ResolventMethod::FixedPoint,
                        contraction,
                    });
                }
                if iteration == opts.max_iter {
                    return Err(ModeError::NoConvergence {
                        iterations: iteration,
                        update_norm: update,
                    });
                }
            }
            Err(ModeError::NoConvergence {
                iterations: 0,
                update_norm: f64::INFINITY,
            })
        }
        ResolventMethod::Dense => {
            let unknowns = rhs.grid.len() * (2 * opts.n_max + 1);
            if unknowns > DENSE_LIMIT {
                return Err(ModeError::DenseTooLarge {
                    unknowns,
                    limit: DENSE_LIMIT,
                });
            }
            let mut columns = Vec::with_capacity(unknowns);
            let mut unit = vec![Complex64::new(0.0, 0.0); unknowns];
            for col in 0..unknowns {
                unit[col] = Complex64::new(1.0, 0.0);
                let e = ModeVector::from_flat(&rhs.grid, opts.n_max, &unit);
                columns.push(apply_t(fp, beta, mu, &e)?.flat());
                unit[col] = Complex64::new(0.0, 0.0);
            }
            let matrix = DMatrix::from_fn(unknowns, unknowns, |r, c| {
                let identity = if r == c { 1.0 } else { 0.0 };
                Complex64::new(identity, 0.0) - columns[c][r] * eps
            });
            let b = nalgebra::DVector::from_vec(rhs.flat());
            let x = matrix.lu().solve(&b).ok_or(ModeError::Singular)?;
            Ok(ResolventSolution {
                modes: ModeVector::from_flat(&rhs.grid, opts.n_max, x.as_slice()),
                iterations: 1,
                final_update_norm: 0.0,
                method: ResolventMethod::Dense,
                contraction,
            })
        }
    }
}

/// Mode amplitudes for a given μ: `(1 − εT) A = (ε/2μ)·c·f`.
pub fn solve_resolvent(
    fp: &FourierProfile,
    beta: f64,
    eps: f64,
    mu: f64,
    opts: &ResolventOptions,
) -> Result<ResolventSolution, ModeError> {
    if !(mu > 0.0) {
        return Err(ModeError::InvalidMu(mu));
    }
    let mut rhs = profile_vector(fp, opts.n_max);
    rhs.scale(Complex64::new(
        eps / (2.0 * mu) * kernels::coupling(beta, mu),
        0.0,
    ));
    solve_with_rhs(fp, beta, eps, mu, &rhs, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::perturbation::fourier_coefficients;
    use rand::{Rng, SeedableRng};

    fn reference_profile(m: usize) -> FourierProfile {
        let grid = SpatialGrid::new(1.0, m).unwrap();
        fourier_coefficients(
            &parse_expression("(1+cos(y))*cosq(x,1)").unwrap(),
            &grid,
            4,
            64,
        )
        .unwrap()
    }

    fn random_modes(grid: &SpatialGrid, n_max: usize, seed: u64) -> ModeVector {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        ModeVector::from_fn(grid, n_max, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn zero_in_zero_out() {
        let fp = reference_profile(101);
        let out = apply_t(&fp, 0.3, 0.01, &ModeVector::zeros(fp.grid(), 6)).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn y_independent_profile_decouples_modes() {
        let grid = SpatialGrid::new(1.0, 101).unwrap();
        let fp =
            fourier_coefficients(&parse_expression("cosq(x,1)").unwrap(), &grid, 4, 64).unwrap();
        let mut a = ModeVector::zeros(&grid, 4);
        a.mode_mut(2)
            .iter_mut()
            .enumerate()
            .for_each(|(i, v)| *v = Complex64::new(grid.node(i).cos(), 0.0));
        let out = apply_t(&fp, 0.3, 0.01, &a).unwrap();
        for m in a.mode_indices() {
            if m != 2 {
                assert!(
                    out.mode_sup(m) < 1e-15,
                    "mode {m} leaked {}",
                    out.mode_sup(m)
                );
            }
        }
        assert!(out.mode_sup(2) > 1e-4);
    }

    #[test]
    fn linearity() {
        let fp = reference_profile(101);
        let a = random_modes(fp.grid(), 6, 1);
        let b = random_modes(fp.grid(), 6, 2);
        let alpha = Complex64::new(0.7, -1.3);
        let lhs = apply_t(&fp, 0.3, 0.05, &b.axpy(alpha, &a)).unwrap();
        let rhs = apply_t(&fp, 0.3, 0.05, &b)
            .unwrap()
            .axpy(alpha, &apply_t(&fp, 0.3, 0.05, &a).unwrap());
        assert!(lhs.distance(&rhs) <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn output_vanishes_outside_the_support() {
        let grid = SpatialGrid::new(2.0, 201).unwrap();
        let fp = fourier_coefficients(
            &parse_expression("(1+cos(y)+0.3*sin(2*y))*cosq(x,1)").unwrap(),
            &grid,
            4,
            64,
        )
        .unwrap();
        let out = apply_t(&fp, 0.3, 0.02, &random_modes(&grid, 6, 5)).unwrap();
        for m in out.mode_indices() {
            for (i, v) in out.mode(m).iter().enumerate() {
                if grid.node(i).abs() >= 1.0 {
                    assert_eq!(v.norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn conjugation_maps_beta_to_minus_beta() {
        // k_n(−β) = k_{−n}(β), so conj(T_β A)_{−m} = (T_{−β} Ã)_m with Ã_n = conj(A_{−n}).
        let grid = SpatialGrid::new(1.0, 101).unwrap();
        let text = "(1+0.5*sin(y)+0.3*cos(2*y)-0.2*sin(3*y))*cosq(x,1)*(1+0.5*x)";
        let fp = fourier_coefficients(&parse_expression(text).unwrap(), &grid, 4, 64).unwrap();
        let a = random_modes(&grid, 6, 9);
        let mirrored = ModeVector::from_fn(&grid, 6, |n, i| a.mode(-n)[i].conj());
        let plus = apply_t(&fp, 0.3, 0.02, &a).unwrap();
        let minus = apply_t(&fp, -0.3, 0.02, &mirrored).unwrap();
        for m in plus.mode_indices() {
            for i in 0..grid.len() {
                assert!((plus.mode(-m)[i].conj() - minus.mode(m)[i]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn schur_bound_examples() {
        let fp = reference_profile(101);
        let sum: f64 = (-4..=4).map(|j| fp.max_abs(j)).sum();
        assert!((sum - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let limit = kernels::mu0(0.3) / 2.0;
        let bound = schur_bound(&fp, 0.3, limit, 6).unwrap();
        let doubled = schur_bound(&fp.scaled(2.0), 0.3, limit, 6).unwrap();
        assert!((doubled - 2.0 * bound).abs() <= 1e-12 * bound);
        for seed in 0..5 {
            let start = random_modes(fp.grid(), 6, 100 + seed);
            for mu in [0.0, limit / 4.0, limit / 2.0, limit] {
                let est = power_norm_estimate(&fp, 0.3, mu, &start, 20).unwrap();
                assert!(
                    est > 0.0 && est <= bound,
                    "seed {seed}, mu {mu}: {est} vs {bound}"
                );
            }
        }
    }

    #[test]
    fn norm_estimates_are_uniform_in_mu() {
        let fp = reference_profile(101);
        let limit = kernels::mu0(0.3) / 2.0;
        let start = random_modes(fp.grid(), 6, 42);
        let est: Vec<f64> = [0.0, limit / 4.0, limit / 2.0]
            .iter()
            .map(|&mu| power_norm_estimate(&fp, 0.3, mu, &start, 20).unwrap())
            .collect();
        let (lo, hi) = (
            est.iter().cloned().fold(f64::INFINITY, f64::min),
            est.iter().cloned().fold(0.0, f64::max),
        );
        assert!(hi / lo < 2.0, "{est:?}");
    }

    #[test]
    fn decay_in_the_mode_index_propagates() {
        let grid = SpatialGrid::new(1.0, 101).unwrap();
        let fp = reference_profile(101);
        let n_max = 24;
        let a = ModeVector::from_fn(&grid, n_max, |n, i| {
            Complex64::new((1.0 + grid.node(i)) / (1.0 + n.abs() as f64).powi(4), 0.0)
        });
        let out = apply_t(&fp, 0.3, 0.01, &a).unwrap();
        // Away from the truncation edge, (1+|m|)^4 · sup|B_m| stays bounded by its
        // value near the centre (the kernels even add a 1/k_m factor).
        let scaled = |m: i64| out.mode_sup(m) * (1.0 + m.abs() as f64).powi(4);
        let centre = (-4..=4).map(scaled).fold(0.0, f64::max);
        for m in 5..=(n_max as i64 - 4) {
            assert!(
                scaled(m) <= 2.0 * centre && scaled(-m) <= 2.0 * centre,
                "m={m}"
            );
        }
    }

    #[test]
    fn resolvent_with_zero_eps_is_zero() {
        let fp = reference_profile(101);
        let sol =
            solve_resolvent(&fp, 0.3, 0.0, 0.01, &ResolventOptions::new(6, 1e-14, 50)).unwrap();
        assert_eq!(sol.modes.norm(), 0.0);
    }

    #[test]
    fn leading_order_is_proportional_to_the_profile() {
        let fp = reference_profile(101);
        let (beta, eps, mu) = (0.3, 1e-3, 1e-4);
        let sol =
            solve_resolvent(&fp, beta, eps, mu, &ResolventOptions::new(6, 1e-14, 100)).unwrap();
        let mut first = profile_vector(&fp, 6);
        first.scale(Complex64::new(
            eps / (2.0 * mu) * kernels::coupling(beta, mu),
            0.0,
        ));
        let rel = sol.modes.distance(&first) / first.norm();
        assert!(rel < 10.0 * eps, "{rel}");
        assert!(rel > 0.0);
    }

    #[test]
    fn fixed_point_matches_dense_solve() {
        let fp = reference_profile(101);
        let opts = ResolventOptions::new(2, 1e-15, 200);
        for (eps, mu) in [(0.05, 0.01), (0.5, 0.002)] {
            let fixed = solve_resolvent(&fp, 0.3, eps, mu, &opts).unwrap();
            let dense = solve_resolvent(&fp, 0.3, eps, mu, &opts.dense()).unwrap();
            assert!(fixed.modes.distance(&dense.modes) <= 1e-10, "eps={eps}");
        }
    }

    #[test]
    fn contraction_guard() {
        let fp = reference_profile(101);
        assert!(matches!(
            solve_resolvent(&fp, 0.3, 50.0, 0.01, &ResolventOptions::new(6, 1e-12, 50)),
            Err(ModeError::ContractionViolated { .. })
        ));
        assert!(matches!(
            solve_resolvent(&fp, 0.3, 0.5, 0.01, &ResolventOptions::new(6, 1e-30, 3)),
            Err(ModeError::NoConvergence { iterations: 3, .. })
        ));
        let wide = SpatialGrid::new(1.0, 201).unwrap();
        let fp_wide =
            fourier_coefficients(&parse_expression("cosq(x,1)").unwrap(), &wide, 4, 64).unwrap();
        assert!(matches!(
            solve_resolvent(
                &fp_wide,
                0.3,
                0.01,
                0.01,
                &ResolventOptions::new(6, 1e-12, 3).dense()
            ),
            Err(ModeError::DenseTooLarge { .. })
        ));
        assert!(matches!(
            solve_resolvent(&fp, 0.3, 0.01, 0.0, &ResolventOptions::new(6, 1e-12, 3)),
            Err(ModeError::InvalidMu(_))
        ));
        assert!(matches!(
            apply_t(&fp, 0.3, 0.5, &ModeVector::zeros(fp.grid(), 2)),
            Err(ModeError::Kernel(KernelError::OutsideUniformWindow { .. }))
        ));
    }
}
