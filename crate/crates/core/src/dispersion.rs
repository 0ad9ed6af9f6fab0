//! Scalar dispersion equation for the decay rate μ and dispersion curves ω(β).
//!
//! The trapped-mode condition `⟨A_0⟩ = 1` reduces to the scalar equation
//!
//! ```text
//! μ = (ε/2) · (β² − μ²)/(2π) · ⟨((1 − εT_μ)^{-1} f)_0⟩
//! ```
//!
//! whose right-hand side is `O(ε)` together with its μ-derivative, so plain
//! iteration from the leading term contracts.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::kernels;
use crate::modes::{self, ModeError, ModeVector, ResolventOptions};
use crate::perturbation::{self, FourierProfile, PerturbationError};

/// Relative size of the imaginary part of `⟨X_0⟩` tolerated as round-off.
pub const COMPLEX_LEAK_TOL: f64 = 1e-10;

/// Fixed-point steps without contraction before switching to secant updates.
pub const SECANT_PATIENCE: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispersionError {
    #[error("β = {0} is excluded: need 0 < |β| < 1/2")]
    ExcludedBeta(f64),
    #[error("ε must be positive, got {0}")]
    InvalidEps(f64),
    #[error("profile mean ∬f = {mean:.6e} is not positive")]
    AssumptionViolated { mean: f64 },
    #[error("⟨X_0⟩ has imaginary part {imag:.3e} against real part {real:.3e}")]
    ComplexLeak { real: f64, imag: f64 },
    #[error("μ = {mu:.6e} left the validity window (0, min(|β|, μ₀/2) = {limit:.6e})")]
    WindowViolated { mu: f64, limit: f64 },
    #[error("μ iteration did not converge in {iterations} steps (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Modes(#[from] ModeError),
    #[error(transparent)]
    Profile(PerturbationError),
}

impl From<PerturbationError> for DispersionError {
    fn from(e: PerturbationError) -> Self {
        match e {
            PerturbationError::NonPositiveMean { mean } => {
                DispersionError::AssumptionViolated { mean }
            }
            other => DispersionError::Profile(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoint {
    pub beta: f64,
    pub eps: f64,
    pub mu: f64,
    pub omega_sq: f64,
    pub leading_mu: f64,
    pub iterations: usize,
    pub resolvent_iterations_total: usize,
    /// min(|β| − μ, μ₀/2 − μ).
    pub window_margin: f64,
    /// |μ − rhs(μ)| at the returned μ.
    pub residual: f64,
}

/// Solver settings for the μ iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub resolvent: ResolventOptions,
}

impl MuOptions {
    pub fn new(tol: f64, max_iter: usize, resolvent: ResolventOptions) -> Self {
        Self {
            tol,
            max_iter,
            resolvent,
        }
    }
}

fn check_params(beta: f64, eps: f64) -> Result<(), DispersionError> {
    if !(beta.abs() > 0.0 && beta.abs() < 0.5) {
        return Err(DispersionError::ExcludedBeta(beta));
    }
    if !(eps > 0.0) {
        return Err(DispersionError::InvalidEps(eps));
    }
    Ok(())
}

/// Upper end of the admissible μ range, min(|β|, μ₀/2).
pub fn window_limit(beta: f64) -> f64 {
    beta.abs().min(kernels::mu0(beta) / 2.0)
}

/// Leading term ε β² ∬f / (4π).
pub fn leading_mu(beta: f64, eps: f64, mean_f: f64) -> Result<f64, DispersionError> {
    check_params(beta, eps)?;
    if !(mean_f > 0.0) {
        return Err(DispersionError::AssumptionViolated { mean: mean_f });
    }
    Ok(eps * beta * beta * mean_f / (4.0 * PI))
}

/// Right-hand side of the dispersion equation and the resolvent iteration count.
pub fn dispersion_rhs_counted(
    fp: &FourierProfile,
    beta: f64,
    eps: f64,
    mu: f64,
    opts: &ResolventOptions,
) -> Result<(f64, usize), DispersionError> {
    let rhs = modes::profile_vector(fp, opts.n_max);
    let sol = modes::solve_with_rhs(fp, beta, eps, mu, &rhs, opts)?;
    let mean = sol.modes.integral(0);
    if mean.im.abs() > COMPLEX_LEAK_TOL * mean.re.abs() {
        return Err(DispersionError::ComplexLeak {
            real: mean.re,
            imag: mean.im,
        });
    }
    Ok((
        eps / 2.0 * kernels::coupling(beta, mu) * mean.re,
        sol.iterations,
    ))
}

pub fn dispersion_rhs(
    fp: &FourierProfile,
    beta: f64,
    eps: f64,
    mu: f64,
    opts: &ResolventOptions,
) -> Result<f64, DispersionError> {
    dispersion_rhs_counted(fp, beta, eps, mu, opts).map(|(v, _)| v)
}

/// Solves the dispersion equation for μ.
pub fn solve_mu(
    fp: &FourierProfile,
    beta: f64,
    eps: f64,
    opts: &MuOptions,
) -> Result<DispersionPoint, DispersionError> {
    check_params(beta, eps)?;
    let mean = perturbation::mean_integral(fp)?;
    let lead = leading_mu(beta, eps, mean)?;
    let limit = window_limit(beta);
    let mut resolvent_total = 0;
    let mut eval = |mu: f64| -> Result<f64, DispersionError> {
        if !(mu > 0.0 && mu < limit) {
            return Err(DispersionError::WindowViolated { mu, limit });
        }
        let (value, its) = dispersion_rhs_counted(fp, beta, eps, mu, &opts.resolvent)?;
        resolvent_total += its;
        Ok(value)
    };

    // g(μ) = rhs(μ) − μ; fixed-point steps μ ← rhs(μ), secant on g once they stall.
    let mut mu = lead;
    let mut g = eval(mu)? - mu;
    let mut prev: Option<(f64, f64)> = None;
    let mut stalled = 0;
    let mut last_step = f64::INFINITY;
    for iteration in 1..=opts.max_iter {
        if g.abs() <= opts.tol {
            return finish(
                beta,
                eps,
                mu,
                lead,
                iteration - 1,
                resolvent_total,
                g.abs(),
                limit,
            );
        }
        let next = match prev {
            Some((mu_prev, g_prev)) if stalled >= SECANT_PATIENCE && g != g_prev => {
                mu - g * (mu - mu_prev) / (g - g_prev)
            }
            _ => mu + g,
        };
        let step = (next - mu).abs();
        if step >= last_step {
            stalled += 1;
        }
        last_step = step;
        prev = Some((mu, g));
        mu = next;
        g = eval(mu)? - mu;
    }
    if g.abs() <= opts.tol {
        return finish(
            beta,
            eps,
            mu,
            lead,
            opts.max_iter,
            resolvent_total,
            g.abs(),
            limit,
        );
    }
    Err(DispersionError::NoConvergence {
        iterations: opts.max_iter,
        residual: g.abs(),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    beta: f64,
    eps: f64,
    mu: f64,
    lead: f64,
    iterations: usize,
    resolvent_iterations_total: usize,
    residual: f64,
    limit: f64,
) -> Result<DispersionPoint, DispersionError> {
    if !(mu > 0.0 && mu < limit) {
        return Err(DispersionError::WindowViolated { mu, limit });
    }
    Ok(DispersionPoint {
        beta,
        eps,
        mu,
        omega_sq: beta * beta - mu * mu,
        leading_mu: lead,
        iterations,
        resolvent_iterations_total,
        window_margin: (beta.abs() - mu).min(kernels::mu0(beta) / 2.0 - mu),
        residual,
    })
}

/// Mode amplitudes at a converged point, rescaled so that ∫A_0 dx = 1.
pub fn eigenmode(
    fp: &FourierProfile,
    point: &DispersionPoint,
    opts: &ResolventOptions,
) -> Result<ModeVector, DispersionError> {
    let sol = modes::solve_resolvent(fp, point.beta, point.eps, point.mu, opts)?;
    let mut a = sol.modes;
    let mean = a.integral(0);
    if mean.norm() == 0.0 {
        return Err(DispersionError::AssumptionViolated { mean: 0.0 });
    }
    a.scale(Complex64::new(1.0, 0.0) / mean);
    Ok(a)
}

/// One β sample of a dispersion curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub beta: f64,
    pub result: Result<DispersionPoint, DispersionError>,
}

impl CurvePoint {
    pub fn status(&self) -> &'static str {
        match &self.result {
            Ok(_) => "ok",
            Err(DispersionError::ExcludedBeta(_)) | Err(DispersionError::InvalidEps(_)) => {
                "invalid"
            }
            Err(DispersionError::AssumptionViolated { .. }) => "assumption_violated",
            Err(DispersionError::WindowViolated { .. }) => "window_violated",
            Err(DispersionError::NoConvergence { .. }) => "no_convergence",
            Err(DispersionError::Modes(ModeError::ContractionViolated { .. })) => {
                "contraction_violated"
            }
            Err(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DispersionCurve {
    pub points: Vec<CurvePoint>,
}

impl DispersionCurve {
    pub fn ok_points(&self) -> impl Iterator<Item = &DispersionPoint> {
        self.points.iter().filter_map(|p| p.result.as_ref().ok())
    }
}

/// Solves each β independently; the curve is ordered by β and failures are
/// recorded per point. `jobs = 0` uses the global thread pool.
pub fn sweep(
    fp: &FourierProfile,
    eps: f64,
    betas: &[f64],
    opts: &MuOptions,
    jobs: usize,
) -> DispersionCurve {
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let run = || {
        sorted
            .par_iter()
            .map(|&beta| CurvePoint {
                beta,
                result: solve_mu(fp, beta, eps, opts),
            })
            .collect::<Vec<_>>()
    };
    let points = if jobs == 0 {
        run()
    } else {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        }
    };
    DispersionCurve { points }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use crate::perturbation::{fourier_coefficients, SpatialGrid};

    fn profile(text: &str, m: usize) -> FourierProfile {
        let grid = SpatialGrid::new(1.0, m).unwrap();
        fourier_coefficients(&parse_expression(text).unwrap(), &grid, 4, 64).unwrap()
    }

    fn options() -> MuOptions {
        MuOptions::new(1e-14, 100, ResolventOptions::new(6, 1e-14, 200))
    }

    #[test]
    fn leading_examples() {
        let lead = leading_mu(0.3, 0.01, 2.0 * PI).unwrap();
        assert!((lead - 4.5e-4).abs() < 1e-18);
        assert!((leading_mu(0.3, 0.001, 2.0 * PI).unwrap() - 4.5e-5).abs() < 1e-19);
        assert!(matches!(
            leading_mu(0.3, 0.01, 0.0),
            Err(DispersionError::AssumptionViolated { .. })
        ));
        assert!(matches!(
            leading_mu(0.0, 0.01, 1.0),
            Err(DispersionError::ExcludedBeta(_))
        ));
        assert!(matches!(
            leading_mu(-0.5, 0.01, 1.0),
            Err(DispersionError::ExcludedBeta(_))
        ));
    }

    #[test]
    fn rhs_zeroth_term() {
        let fp = profile("(1+cos(y))*cosq(x,1)", 201);
        let eps = 1e-6;
        let rhs = dispersion_rhs(&fp, 0.3, eps, 1e-8, &options().resolvent).unwrap();
        assert!(((rhs / eps) - 0.045).abs() < 1e-6, "{}", rhs / eps);
    }

    #[test]
    fn rhs_is_order_eps() {
        let fp = profile("(1+cos(y))*cosq(x,1)", 201);
        let mu = 1e-4;
        let r1 = dispersion_rhs(&fp, 0.3, 1e-3, mu, &options().resolvent).unwrap();
        let r2 = dispersion_rhs(&fp, 0.3, 2e-3, mu, &options().resolvent).unwrap();
        let defect = (r2 - 2.0 * r1).abs();
        // Quadratic remainder: the defect scales like ε², far below r1 itself.
        assert!(defect < 1e-2 * r1, "{defect} vs {r1}");
        let r4 = dispersion_rhs(&fp, 0.3, 4e-3, mu, &options().resolvent).unwrap();
        let ratio = (r4 - 2.0 * r2).abs() / defect;
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn rhs_decreases_in_mu() {
        let fp = profile("(1+cos(y))*cosq(x,1)", 201);
        let lead = 4.5e-4;
        let h = 1e-5;
        let lo = dispersion_rhs(&fp, 0.3, 0.01, lead - h, &options().resolvent).unwrap();
        let hi = dispersion_rhs(&fp, 0.3, 0.01, lead + h, &options().resolvent).unwrap();
        assert!(hi < lo);
    }

    #[test]
    fn solve_examples() {
        let fp = profile("(1+cos(y))*cosq(x,1)", 401);
        let p = solve_mu(&fp, 0.3, 0.01, &options()).unwrap();
        assert!((p.mu / 4.5e-4 - 1.0).abs() < 0.02, "{}", p.mu);
        assert_eq!(p.omega_sq, 0.09 - p.mu * p.mu);
        assert!(p.omega_sq < 0.09);
        assert!(p.window_margin > 0.0);
        let rhs = dispersion_rhs(&fp, 0.3, 0.01, p.mu, &options().resolvent).unwrap();
        assert!((p.mu - rhs).abs() <= 1e-14);

        let flat = profile("cosq(x,1)", 401);
        let p = solve_mu(&flat, 0.3, 0.001, &options()).unwrap();
        assert!((p.mu / 4.5e-5 - 1.0).abs() < 0.005);

        assert!(matches!(
            solve_mu(&fp, 0.0, 0.01, &options()),
            Err(DispersionError::ExcludedBeta(_))
        ));
        let negative = profile("-cosq(x,1)", 101);
        assert!(matches!(
            solve_mu(&negative, 0.3, 0.01, &options()),
            Err(DispersionError::AssumptionViolated { .. })
        ));
    }

    #[test]
    fn negative_beta_mirrors_positive() {
        let fp = profile("(1+cos(y)+0.4*sin(y))*cosq(x,1)", 201);
        let plus = solve_mu(&fp, 0.3, 0.01, &options()).unwrap();
        let minus = solve_mu(&fp, -0.3, 0.01, &options()).unwrap();
        // For real f the conjugate of a β mode is a −β mode with the same ω².
        assert!((plus.mu - minus.mu).abs() <= 1e-12 * plus.mu);
    }

    #[test]
    fn eigenmode_is_normalized() {
        let fp = profile("(1+cos(y))*cosq(x,1)", 201);
        let p = solve_mu(&fp, 0.3, 0.01, &options()).unwrap();
        let a = eigenmode(&fp, &p, &options().resolvent).unwrap();
        assert!((a.integral(0) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        // Without rescaling the integral is already 1 up to the μ residual.
        let raw = modes::solve_resolvent(&fp, p.beta, p.eps, p.mu, &options().resolvent).unwrap();
        assert!((raw.modes.integral(0).re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn sweep_scaling_and_ordering() {
        let fp = profile("(1+cos(y))*cosq(x,1)", 201);
        let curve = sweep(&fp, 0.01, &[0.4, 0.1, 0.3, 0.2], &options(), 2);
        let betas: Vec<f64> = curve.points.iter().map(|p| p.beta).collect();
        assert_eq!(betas, vec![0.1, 0.2, 0.3, 0.4]);
        for p in curve.ok_points() {
            let slope = p.mu / (p.beta * p.beta);
            assert!((slope / 0.005 - 1.0).abs() < 0.05, "{slope}");
        }
        assert_eq!(curve.ok_points().count(), 4);
        assert!(sweep(&fp, 0.01, &[], &options(), 0).points.is_empty());

        let edge = sweep(&fp, 0.01, &[0.49], &options(), 0);
        match &edge.points[0].result {
            Ok(p) => assert!(p.window_margin > 0.0),
            Err(e) => assert!(
                matches!(
                    e,
                    DispersionError::WindowViolated { .. } | DispersionError::Modes(_)
                ),
                "{e}"
            ),
        }
    }

    #[test]
    fn window_violation_reported() {
        // A strong perturbation pushes μ past μ₀/2.
        let fp = profile("cosq(x,1)", 101);
        let r = solve_mu(&fp, 0.45, 2.0, &options());
        assert!(r.is_err());
    }
}
