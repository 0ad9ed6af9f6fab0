//! Command implementations behind the `rbtrap` binary.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::config::{self, ConfigError, RunConfig};
use crate::dispersion::{self, DispersionCurve, DispersionError, DispersionPoint, MuOptions};
use crate::expr::ExpressionTree;
use crate::field::{self, FieldError};
use crate::kernels;
use crate::modes::{self, ModeError, ResolventOptions};
use crate::oracle::{self, OracleError, OracleOptions, StripDiscretization};
use crate::perturbation::{self, FourierProfile, PerturbationError, SpatialGrid};
use crate::plot::{self, PlotError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_WINDOW: i32 = 4;
pub const EXIT_ASSUMPTION: i32 = 5;
pub const EXIT_VALIDATION: i32 = 6;

/// Thresholds applied by `validate`.
pub const RESIDUAL_LIMIT: f64 = 1e-6;
pub const DECAY_TOLERANCE: f64 = 1e-2;
pub const HERMITIAN_LIMIT: f64 = 1e-12;
pub const QUASIPERIODIC_LIMIT: f64 = 1e-13;
pub const ORACLE_TOLERANCE_1D: f64 = 1e-3;
pub const ORACLE_TOLERANCE_2D: f64 = 5e-2;

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Profile(#[from] PerturbationError),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error(transparent)]
    Modes(#[from] ModeError),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("validation failed: {}", .0.join(", "))]
    ValidationFailed(Vec<String>),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Usage(_) => EXIT_CONFIG,
            AppError::Profile(PerturbationError::NonPositiveMean { .. }) => EXIT_ASSUMPTION,
            AppError::Profile(_) => EXIT_CONFIG,
            AppError::Dispersion(e) => match e {
                DispersionError::AssumptionViolated { .. } => EXIT_ASSUMPTION,
                DispersionError::WindowViolated { .. } => EXIT_WINDOW,
                DispersionError::Modes(m) => mode_exit(m),
                DispersionError::ExcludedBeta(_)
                | DispersionError::InvalidEps(_)
                | DispersionError::Profile(_) => EXIT_CONFIG,
                DispersionError::NoConvergence { .. } | DispersionError::ComplexLeak { .. } => {
                    EXIT_NO_CONVERGENCE
                }
            },
            AppError::Modes(m) => mode_exit(m),
            AppError::Field(_) => EXIT_NO_CONVERGENCE,
            AppError::Oracle(_) | AppError::ValidationFailed(_) => EXIT_VALIDATION,
            AppError::Plot(PlotError::EmptyCurve) => EXIT_NO_CONVERGENCE,
            AppError::Plot(PlotError::Io(_)) | AppError::Io(_) => EXIT_IO,
        }
    }
}

fn mode_exit(e: &ModeError) -> i32 {
    match e {
        ModeError::ContractionViolated { .. } | ModeError::Kernel(_) => EXIT_WINDOW,
        ModeError::NoConvergence { .. } | ModeError::Singular => EXIT_NO_CONVERGENCE,
        _ => EXIT_CONFIG,
    }
}

/// Parsed profile, its Fourier table and solver settings for one config.
pub struct Pipeline {
    pub cfg: RunConfig,
    pub tree: ExpressionTree,
    pub profile: FourierProfile,
    pub mu_opts: MuOptions,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self, AppError> {
        let tree = cfg.profile();
        let d = &cfg.discretization;
        let grid = SpatialGrid::new(cfg.support_radius, d.grid_points)?;
        let profile =
            perturbation::fourier_coefficients(&tree, &grid, d.coefficient_cutoff, d.y_quadrature)?;
        let resolvent =
            ResolventOptions::new(d.modes, cfg.solver.tol_resolvent, cfg.solver.max_iter);
        let mu_opts = MuOptions::new(cfg.solver.tol_mu, cfg.solver.max_iter, resolvent);
        Ok(Self {
            cfg,
            tree,
            profile,
            mu_opts,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, AppError> {
        Self::new(config::load_config(path)?)
    }

    pub fn solve(&self) -> Result<DispersionPoint, AppError> {
        Ok(dispersion::solve_mu(
            &self.profile,
            self.cfg.beta,
            self.cfg.epsilon,
            &self.mu_opts,
        )?)
    }

    pub fn field(
        &self,
        point: &DispersionPoint,
        xmax: Option<f64>,
    ) -> Result<field::FieldSolution, AppError> {
        let a = dispersion::eigenmode(&self.profile, point, &self.mu_opts.resolvent)?;
        let xmax = xmax.unwrap_or_else(|| field::default_xmax(self.cfg.support_radius, point.mu));
        Ok(field::synthesize_modes(
            &a, point.beta, point.eps, point.mu, xmax,
        )?)
    }

    /// Runs the configured brute-force oracle: 1-D for y-independent profiles, else the strip.
    pub fn oracle(&self, seed_mu: f64) -> Result<Option<OracleComparison>, AppError> {
        let Some(o) = &self.cfg.oracle else {
            return Ok(None);
        };
        let opts = OracleOptions {
            seed_mu: Some(seed_mu),
            ..OracleOptions::default()
        };
        let (mu, kind, tolerance) = if self.tree.is_y_independent() {
            let e = oracle::ode_1d_eigensolve(
                &self.tree,
                self.cfg.beta,
                self.cfg.epsilon,
                o.half_length,
                o.nx,
                &opts,
            )?;
            (e.mu, "ode_1d", ORACLE_TOLERANCE_1D)
        } else {
            let disc = StripDiscretization::new(o.half_length, o.nx, o.ny)?;
            let e = oracle::fd_strip_eigensolve(
                &self.tree,
                self.cfg.beta,
                self.cfg.epsilon,
                &disc,
                &opts,
            )?;
            (e.mu, "fd_strip", ORACLE_TOLERANCE_2D)
        };
        Ok(Some(OracleComparison {
            kind,
            mu_oracle: mu,
            relative_difference: (mu - seed_mu).abs() / seed_mu,
            tolerance,
            half_length: o.half_length,
            nx: o.nx,
            ny: o.ny,
        }))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub kind: &'static str,
    pub mu_oracle: f64,
    pub relative_difference: f64,
    pub tolerance: f64,
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub solve_seconds: f64,
    pub diagnostics_seconds: f64,
    pub oracle_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub beta: f64,
    pub epsilon: f64,
    pub mu: f64,
    pub omega_sq: f64,
    pub leading_mu: f64,
    pub iterations: usize,
    pub resolvent_iterations_total: usize,
    pub window_margin: f64,
    pub fixed_point_residual: f64,
    pub modes: usize,
    pub grid_points: usize,
    pub schur_bound: f64,
    pub contraction: f64,
    pub mode_residual: f64,
    pub decay_rate_0: f64,
    pub decay_rate_1: f64,
    pub k1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn build_report(
    p: &Pipeline,
    with_oracle: bool,
    with_timings: bool,
) -> Result<RunReport, AppError> {
    let t0 = Instant::now();
    let point = p.solve()?;
    let solve_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let bound = modes::schur_bound(
        &p.profile,
        point.beta,
        kernels::mu0(point.beta) / 2.0,
        p.cfg.discretization.modes,
    )?;
    let fs = p.field(&point, None)?;
    let residual = field::mode_residual(&fs, &p.profile)?;
    let rate0 = field::decay_rate(&fs, 0)?;
    let rate1 = field::decay_rate(&fs, 1)?;
    let diagnostics_seconds = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let oracle = if with_oracle {
        p.oracle(point.mu)?
    } else {
        None
    };
    let oracle_seconds = oracle.as_ref().map(|_| t2.elapsed().as_secs_f64());
    Ok(RunReport {
        beta: point.beta,
        epsilon: point.eps,
        mu: point.mu,
        omega_sq: point.omega_sq,
        leading_mu: point.leading_mu,
        iterations: point.iterations,
        resolvent_iterations_total: point.resolvent_iterations_total,
        window_margin: point.window_margin,
        fixed_point_residual: point.residual,
        modes: p.cfg.discretization.modes,
        grid_points: p.cfg.discretization.grid_points,
        schur_bound: bound,
        contraction: point.eps * bound,
        mode_residual: residual,
        decay_rate_0: rate0,
        decay_rate_1: rate1,
        k1: fs.rate(1)?,
        oracle,
        timings: with_timings.then_some(Timings {
            solve_seconds,
            diagnostics_seconds,
            oracle_seconds,
        }),
    })
}

pub struct SolveArgs {
    pub oracle: bool,
    pub timings: bool,
    pub csv: Option<PathBuf>,
}

pub fn run_solve(p: &Pipeline, args: &SolveArgs, out: &mut dyn Write) -> Result<(), AppError> {
    let report = build_report(p, args.oracle, args.timings)?;
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&report).map_err(io::Error::other)?
    )?;
    if let Some(path) = &args.csv {
        let point = p.solve()?;
        let curve = DispersionCurve {
            points: vec![dispersion::CurvePoint {
                beta: point.beta,
                result: Ok(point),
            }],
        };
        write_curve_csv(p, &curve, std::fs::File::create(path)?)?;
    }
    Ok(())
}

pub struct SweepArgs {
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

pub fn beta_grid(min: f64, max: f64, steps: usize) -> Result<Vec<f64>, AppError> {
    if steps == 0 {
        return Err(AppError::Usage("--steps must be at least 1".into()));
    }
    let same_side = (min > 0.0 && max > 0.0) || (min < 0.0 && max < 0.0);
    if !same_side || min.abs() >= 0.5 || max.abs() >= 0.5 || (steps > 1 && !(max > min)) {
        return Err(AppError::Usage(format!(
            "β range [{min}, {max}] must be increasing and lie in (0, 1/2) or (−1/2, 0)"
        )));
    }
    if steps == 1 {
        return Ok(vec![min]);
    }
    Ok((0..steps)
        .map(|k| min + (max - min) * k as f64 / (steps - 1) as f64)
        .collect())
}

pub fn run_sweep(
    p: &Pipeline,
    args: &SweepArgs,
    out: &mut dyn Write,
) -> Result<DispersionCurve, AppError> {
    let betas = beta_grid(args.beta_min, args.beta_max, args.steps)?;
    let curve = dispersion::sweep(&p.profile, p.cfg.epsilon, &betas, &p.mu_opts, args.jobs);
    match &args.out {
        Some(path) => write_curve_csv(p, &curve, std::fs::File::create(path)?)?,
        None => write_curve_csv(p, &curve, &mut *out)?,
    }
    if let Some(path) = &args.svg {
        plot::emit_svg_plot(&curve, path)?;
    }
    Ok(curve)
}

/// Columns beta, mu, omega_sq, leading_mu, status; failed points leave μ and ω² empty.
pub fn write_curve_csv<W: Write>(
    p: &Pipeline,
    curve: &DispersionCurve,
    mut w: W,
) -> Result<(), AppError> {
    let mean = perturbation::mean_integral(&p.profile).ok();
    writeln!(w, "beta,mu,omega_sq,leading_mu,status")?;
    for cp in &curve.points {
        let lead = match &cp.result {
            Ok(pt) => Some(pt.leading_mu),
            Err(_) => mean.and_then(|m| dispersion::leading_mu(cp.beta, p.cfg.epsilon, m).ok()),
        };
        let lead = lead.map(|v| format!("{v:.16e}")).unwrap_or_default();
        match &cp.result {
            Ok(pt) => writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{},{}",
                cp.beta,
                pt.mu,
                pt.omega_sq,
                lead,
                cp.status()
            )?,
            Err(_) => writeln!(w, "{:.16e},,,{},{}", cp.beta, lead, cp.status())?,
        }
    }
    Ok(())
}

pub struct FieldArgs {
    pub nx: usize,
    pub ny: usize,
    pub xmax: Option<f64>,
    pub out: PathBuf,
}

pub fn run_field(p: &Pipeline, args: &FieldArgs) -> Result<field::FieldGrid2D, AppError> {
    let point = p.solve()?;
    let fs = p.field(&point, args.xmax)?;
    let grid = field::synthesize_field(&fs, args.nx, args.ny, fs.xmax)?;
    let meta = [
        ("beta", format!("{:.16e}", point.beta)),
        ("epsilon", format!("{:.16e}", point.eps)),
        ("mu", format!("{:.16e}", point.mu)),
        ("omega_sq", format!("{:.16e}", point.omega_sq)),
        ("N", p.cfg.discretization.modes.to_string()),
        ("M", p.cfg.discretization.grid_points.to_string()),
        ("X", format!("{:.16e}", fs.xmax)),
        (
            "normalization",
            "integral of A_0 over x equals 1".to_string(),
        ),
    ];
    let file = io::BufWriter::new(std::fs::File::create(&args.out)?);
    grid.write_csv(file, &meta)?;
    Ok(grid)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

fn at_most(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        passed: value <= threshold,
    }
}

/// Runs all self-checks; the returned list is complete even when some fail.
pub fn validation_checks(p: &Pipeline) -> Result<Vec<Check>, AppError> {
    perturbation::mean_integral(&p.profile)?;
    let report = build_report(p, false, false)?;
    let fs = p.field(&p.solve()?, None)?;
    let lattice = field::synthesize_field(&fs, 64, 32, fs.xmax)?;
    let mut checks = vec![
        at_most(
            "hermitian_defect",
            p.profile.hermitian_defect(),
            HERMITIAN_LIMIT,
        ),
        at_most(
            "fixed_point_residual",
            report.fixed_point_residual,
            p.cfg.solver.tol_mu,
        ),
        at_most(
            "schur_contraction",
            report.contraction,
            modes::CONTRACTION_LIMIT,
        ),
        at_most("mode_residual", report.mode_residual, RESIDUAL_LIMIT),
        at_most(
            "decay_rate_0",
            (report.decay_rate_0 / report.mu - 1.0).abs(),
            DECAY_TOLERANCE,
        ),
        at_most(
            "decay_rate_1",
            (report.decay_rate_1 / report.k1 - 1.0).abs(),
            DECAY_TOLERANCE,
        ),
        at_most(
            "quasiperiodicity",
            lattice.quasiperiodicity_defect(),
            QUASIPERIODIC_LIMIT,
        ),
    ];
    if p.cfg.oracle.is_some() {
        match p.oracle(report.mu) {
            Ok(Some(c)) => checks.push(at_most("oracle", c.relative_difference, c.tolerance)),
            Ok(None) => {}
            Err(_) => checks.push(Check {
                name: "oracle",
                value: f64::INFINITY,
                threshold: ORACLE_TOLERANCE_2D,
                passed: false,
            }),
        }
    }
    Ok(checks)
}

pub fn run_validate(p: &Pipeline, out: &mut dyn Write) -> Result<(), AppError> {
    let checks = validation_checks(p)?;
    for c in &checks {
        writeln!(
            out,
            "{:<22} {:>12.4e} <= {:<10.1e} {}",
            c.name,
            c.value,
            c.threshold,
            if c.passed { "ok" } else { "FAILED" }
        )?;
    }
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::ValidationFailed(failed))
    }
}
