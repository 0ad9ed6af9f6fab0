//! Run configuration: a sectioned TOML file.
//!
//! ```toml
//! [problem]
//! beta = 0.3
//! epsilon = 0.01
//!
//! [perturbation]
//! expression = "(1+cos(y))*cosq(x,1)"
//! support_radius = 1.0
//!
//! [discretization]      # all optional
//! modes = 6             # N
//! coefficient_cutoff = 4  # J
//! grid_points = 401     # M, odd
//! y_quadrature = 64     # Q
//!
//! [solver]              # all optional
//! tol_mu = 1e-12
//! tol_resolvent = 1e-13
//! max_iter = 200
//!
//! [oracle]              # optional section
//! half_length = 40.0
//! nx = 1601
//! ny = 64
//! ```

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::expr::{parse_expression, ExpressionTree};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub expression: Option<String>,
    pub support_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscretizationConfig {
    pub modes: usize,
    pub coefficient_cutoff: usize,
    pub grid_points: usize,
    pub y_quadrature: usize,
}

impl Default for DiscretizationConfig {
    fn default() -> Self {
        Self {
            modes: 6,
            coefficient_cutoff: 4,
            grid_points: 401,
            y_quadrature: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_mu: f64,
    pub tol_resolvent: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_mu: 1e-12,
            tol_resolvent: 1e-13,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub half_length: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<ProblemConfig>,
    perturbation: Option<PerturbationConfig>,
    #[serde(default)]
    discretization: DiscretizationConfig,
    #[serde(default)]
    solver: SolverConfig,
    oracle: Option<OracleConfig>,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beta: f64,
    pub epsilon: f64,
    pub expression: String,
    pub support_radius: f64,
    pub discretization: DiscretizationConfig,
    pub solver: SolverConfig,
    pub oracle: Option<OracleConfig>,
}

impl RunConfig {
    pub fn profile(&self) -> ExpressionTree {
        parse_expression(&self.expression).expect("expression validated on load")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e
            .span()
            .map(|s| text[..s.start].matches('\n').count() + 1)
            .unwrap_or(0),
        message: e.message().to_string(),
    })?;
    validate(raw)
}

fn invalid<T>(message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation(message.into()))
}

fn validate(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let Some(problem) = raw.problem else {
        return invalid("missing [problem] section");
    };
    let Some(beta) = problem.beta else {
        return invalid("missing problem.beta");
    };
    let Some(epsilon) = problem.epsilon else {
        return invalid("missing problem.epsilon");
    };
    if beta == 0.0 {
        return invalid("beta=0 excluded");
    }
    if !(beta.abs() < 0.5) {
        return invalid(format!("beta={beta} must satisfy 0 < |beta| < 0.5"));
    }
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon={epsilon} must be positive"));
    }
    let Some(pert) = raw.perturbation else {
        return invalid("missing [perturbation] section");
    };
    let Some(expression) = pert.expression else {
        return invalid("missing perturbation.expression");
    };
    if let Err(e) = parse_expression(&expression) {
        return invalid(format!("perturbation.expression: {e}"));
    }
    let Some(support_radius) = pert.support_radius else {
        return invalid("missing perturbation.support_radius");
    };
    if !(support_radius > 0.0) {
        return invalid(format!("support_radius={support_radius} must be positive"));
    }
    let d = raw.discretization;
    if d.grid_points < 51 || d.grid_points.is_multiple_of(2) {
        return invalid(format!(
            "grid_points={} must be odd and >= 51",
            d.grid_points
        ));
    }
    if d.coefficient_cutoff < 1 {
        return invalid("coefficient_cutoff must be >= 1");
    }
    if d.modes < d.coefficient_cutoff {
        return invalid(format!(
            "modes={} must be >= coefficient_cutoff={}",
            d.modes, d.coefficient_cutoff
        ));
    }
    if d.y_quadrature < 4 * d.coefficient_cutoff + 4 {
        return invalid(format!(
            "y_quadrature={} must be >= 4*coefficient_cutoff+4 = {}",
            d.y_quadrature,
            4 * d.coefficient_cutoff + 4
        ));
    }
    let s = raw.solver;
    if !(s.tol_mu > 0.0 && s.tol_resolvent > 0.0) || s.max_iter == 0 {
        return invalid("solver tolerances must be positive and max_iter >= 1");
    }
    if let Some(o) = &raw.oracle {
        if o.nx < 16 || o.ny < 16 || !(o.half_length > support_radius) {
            return invalid("oracle needs nx, ny >= 16 and half_length > support_radius");
        }
    }
    Ok(RunConfig {
        beta,
        epsilon,
        expression,
        support_radius,
        discretization: d,
        solver: s,
        oracle: raw.oracle,
    })
}
