//! Transverse wavenumbers and the one-dimensional Green functions of the
//! mode equations `−G'' + k_m² G = δ`.

use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("radicand μ² + 2βm + m² = {radicand:.3e} is not positive for m = {m} (β = {beta}, μ = {mu})")]
    InvalidWindow {
        beta: f64,
        mu: f64,
        m: i64,
        radicand: f64,
    },
    #[error("G_0 is singular at μ = 0; use the regularized kernel")]
    SingularAtZeroMu,
    #[error("μ = {mu} lies outside the uniformity window μ ≤ μ₀/2 = {limit}")]
    OutsideUniformWindow { mu: f64, limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub beta: f64,
    pub mu: f64,
    pub m: i64,
}

impl KernelParams {
    pub fn new(beta: f64, mu: f64, m: i64) -> Self {
        Self { beta, mu, m }
    }
}

/// Analyticity radius μ₀ = sqrt(1 − 2|β|) of the kernels with m ≠ 0.
pub fn mu0(beta: f64) -> f64 {
    (1.0 - 2.0 * beta.abs()).max(0.0).sqrt()
}

/// k_m² = μ² + 2βm + m².
pub fn wavenumber_sq(p: KernelParams) -> f64 {
    let m = p.m as f64;
    p.mu * p.mu + 2.0 * p.beta * m + m * m
}

pub fn wavenumber(p: KernelParams) -> Result<f64, KernelError> {
    if p.m == 0 {
        return Ok(p.mu);
    }
    let radicand = wavenumber_sq(p);
    if radicand <= 0.0 || p.beta.abs() >= 0.5 {
        return Err(KernelError::InvalidWindow {
            beta: p.beta,
            mu: p.mu,
            m: p.m,
            radicand,
        });
    }
    Ok(radicand.sqrt())
}

/// G_m(x) = e^{−k_m|x|} / (2 k_m).
pub fn green_value(p: KernelParams, x: f64) -> Result<f64, KernelError> {
    if p.m == 0 && p.mu == 0.0 {
        return Err(KernelError::SingularAtZeroMu);
    }
    let k = wavenumber(p)?;
    Ok((-k * x.abs()).exp() / (2.0 * k))
}

/// G_r(x) = (e^{−μ|x|} − 1)/(2μ), the part of G_0 left after removing 1/(2μ).
pub fn regularized_green(mu: f64, x: f64) -> f64 {
    let a = x.abs();
    let z = mu * a;
    if z < 1e-4 {
        -a / 2.0 + mu * a * a / 4.0 - mu * mu * a * a * a / 12.0
    } else {
        (-z).exp_m1() / (2.0 * mu)
    }
}

/// (β² − μ²)/(2π), the prefactor shared by every term of the mode operator.
pub fn coupling(beta: f64, mu: f64) -> f64 {
    (beta * beta - mu * mu) / (2.0 * PI)
}

/// Scaled kernel ℋ_m: the coupling times G_r (m = 0) or G_m (m ≠ 0).
pub fn kernel_h(p: KernelParams, x: f64) -> Result<f64, KernelError> {
    let limit = mu0(p.beta) / 2.0;
    if p.mu > limit {
        return Err(KernelError::OutsideUniformWindow { mu: p.mu, limit });
    }
    let g = if p.m == 0 {
        regularized_green(p.mu, x)
    } else {
        green_value(p, x)?
    };
    Ok(coupling(p.beta, p.mu) * g)
}
