//! Linear-time convolution of grid functions with the exponential kernels.
//!
//! The grid function is replaced by its piecewise-linear interpolant, each
//! cell is integrated exactly against the kernel, and the cells are
//! accumulated by one forward and one backward sweep. Both kernels used here
//! obey a two-term shift rule `φ(u + h) = a·φ(u) + b`, which is what makes the
//! sweeps possible:
//!
//! * `e^{−ku}/(2k)`: `a = e^{−kh}`, `b = 0`
//! * `(e^{−μu} − 1)/(2μ)`: `a = e^{−μh}`, `b = φ(h)`; at μ = 0 this is `−u/2`.

use num_complex::Complex64;
use thiserror::Error;

use crate::perturbation::SpatialGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvolutionError {
    #[error("exponential kernel needs a positive rate, got {0}")]
    NonPositiveRate(f64),
    #[error("regularized kernel needs μ >= 0, got {0}")]
    NegativeMu(f64),
    #[error("grid function has {got} samples, grid has {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Cell moments and shift rule of a kernel φ(|x − t|) on a grid of spacing h.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepKernel {
    h: f64,
    decay: f64,
    shift: f64,
    /// ∫₀ʰ φ(u)(1 − u/h) du: weight of the sample at the evaluation end of a cell.
    near: f64,
    /// ∫₀ʰ φ(u)(u/h) du: weight of the sample at the far end.
    far: f64,
}

// w0 = (1 − e^{−z})/z, w1 = (1 − e^{−z}(1 + z))/z², q0 = (w0 − 1)/z, q1 = (w1 − 1/2)/z,
// by power series below z = 1 where the closed forms cancel.
fn moments(z: f64) -> (f64, f64, f64, f64) {
    if z < 1.0 {
        let (mut w0, mut w1, mut q0, mut q1) = (0.0, 0.0, 0.0, 0.0);
        // t = (−z)^n / (n+3)!
        let mut t = 1.0 / 6.0;
        for n in 0..30 {
            let nf = n as f64;
            w0 += t * (nf + 3.0) * (nf + 2.0);
            w1 += t * (nf + 3.0) * (nf + 1.0);
            q0 -= t * (nf + 3.0);
            q1 -= t * (nf + 2.0);
            t *= -z / (nf + 4.0);
        }
        (w0, w1, q0, q1)
    } else {
        let e = (-z).exp();
        let w0 = -(-z).exp_m1() / z;
        let w1 = (-(-z).exp_m1() - z * e) / (z * z);
        (w0, w1, (w0 - 1.0) / z, (w1 - 0.5) / z)
    }
}

impl SweepKernel {
    /// `e^{−k|x−t|}/(2k)`.
    pub fn exponential(k: f64, h: f64) -> Result<Self, ConvolutionError> {
        if !(k > 0.0) {
            return Err(ConvolutionError::NonPositiveRate(k));
        }
        let z = k * h;
        let (w0, w1, _, _) = moments(z);
        Ok(Self {
            h,
            decay: (-z).exp(),
            shift: 0.0,
            near: h * (w0 - w1) / (2.0 * k),
            far: h * w1 / (2.0 * k),
        })
    }

    /// `(e^{−μ|x−t|} − 1)/(2μ)`, continuous down to μ = 0.
    pub fn regularized(mu: f64, h: f64) -> Result<Self, ConvolutionError> {
        if !(mu >= 0.0) {
            return Err(ConvolutionError::NegativeMu(mu));
        }
        let z = mu * h;
        let (w0, _, q0, q1) = moments(z);
        Ok(Self {
            h,
            decay: (-z).exp(),
            shift: -0.5 * h * w0,
            near: 0.5 * h * h * (q0 - q1),
            far: 0.5 * h * h * q1,
        })
    }

    /// Convolution of the linear interpolant of `values`, evaluated at the nodes.
    pub fn apply(&self, values: &[Complex64], out: &mut [Complex64]) {
        let m = values.len();
        assert_eq!(out.len(), m);
        let zero = Complex64::new(0.0, 0.0);
        if m == 0 {
            return;
        }
        let half_h = 0.5 * self.h;
        let mut left = zero;
        let mut prefix = zero;
        out[0] = zero;
        for i in 1..m {
            left = left * self.decay
                + prefix * self.shift
                + values[i] * self.near
                + values[i - 1] * self.far;
            prefix += (values[i - 1] + values[i]) * half_h;
            out[i] = left;
        }
        let mut right = zero;
        let mut suffix = zero;
        for i in (0..m - 1).rev() {
            right = right * self.decay
                + suffix * self.shift
                + values[i] * self.near
                + values[i + 1] * self.far;
            suffix += (values[i] + values[i + 1]) * half_h;
            out[i] += right;
        }
    }
}

fn check_len(grid: &SpatialGrid, values: &[Complex64]) -> Result<(), ConvolutionError> {
    if values.len() != grid.len() {
        return Err(ConvolutionError::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    Ok(())
}

/// `I(x_i) = ∫ e^{−k|x_i − t|} A(t) dt / (2k)` over the grid interval.
pub fn convolve_exponential(
    k: f64,
    grid: &SpatialGrid,
    values: &[Complex64],
) -> Result<Vec<Complex64>, ConvolutionError> {
    check_len(grid, values)?;
    let kernel = SweepKernel::exponential(k, grid.spacing())?;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    kernel.apply(values, &mut out);
    Ok(out)
}

/// `∫ G_r(x_i − t, μ) A(t) dt` with `G_r = (e^{−μ|·|} − 1)/(2μ)`.
pub fn convolve_regularized(
    mu: f64,
    grid: &SpatialGrid,
    values: &[Complex64],
) -> Result<Vec<Complex64>, ConvolutionError> {
    check_len(grid, values)?;
    let kernel = SweepKernel::regularized(mu, grid.spacing())?;
    let mut out = vec![Complex64::new(0.0, 0.0); values.len()];
    kernel.apply(values, &mut out);
    Ok(out)
}

/// Values of the exponential convolution at the two grid ends, `(I(−R), I(R))`,
/// summed cell by cell with explicit decay factors rather than by the sweep.
/// Beyond the grid, `I(x) = I(±R)·e^{−k(|x| − R)}` exactly.
pub fn boundary_values(
    k: f64,
    grid: &SpatialGrid,
    values: &[Complex64],
) -> Result<(Complex64, Complex64), ConvolutionError> {
    check_len(grid, values)?;
    let kernel = SweepKernel::exponential(k, grid.spacing())?;
    let m = values.len();
    let r = grid.half_width();
    let mut at_right = Complex64::new(0.0, 0.0);
    let mut at_left = Complex64::new(0.0, 0.0);
    for i in 1..m {
        // Cell [x_{i−1}, x_i]: its right end is (R − x_i) from +R, its left end (x_{i−1} + R) from −R.
        at_right += (values[i] * kernel.near + values[i - 1] * kernel.far)
            * (-k * (r - grid.node(i))).exp();
        at_left += (values[i - 1] * kernel.near + values[i] * kernel.far)
            * (-k * (grid.node(i - 1) + r)).exp();
    }
    Ok((at_left, at_right))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    fn sampled(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Vec<Complex64> {
        grid.nodes().into_iter().map(|x| c(f(x))).collect()
    }

    // Composite Gauss–Legendre reference, split at the kink t = x.
    fn reference(x: f64, r: f64, kernel: impl Fn(f64) -> f64, f: impl Fn(f64) -> f64) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683,
            0.538_469_310_105_683,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
            0.236_926_885_056_189,
        ];
        let mut total = 0.0;
        for (a, b) in [(-r, x), (x, r)] {
            let pieces = 400;
            let w = (b - a) / pieces as f64;
            for p in 0..pieces {
                let mid = a + (p as f64 + 0.5) * w;
                for (n, wt) in NODES.iter().zip(WEIGHTS) {
                    let t = mid + 0.5 * w * n;
                    total += 0.5 * w * wt * kernel((x - t).abs()) * f(t);
                }
            }
        }
        total
    }

    #[test]
    fn moment_series_match_closed_forms_near_the_switch() {
        let (a, b, c0, d) = moments(0.999_999);
        let z: f64 = 1.0;
        let e = (-z).exp();
        let w0 = 1.0 - e;
        let w1 = 1.0 - 2.0 * e;
        assert!((a - w0).abs() < 1e-6 && (b - w1).abs() < 1e-6);
        assert!((c0 - (w0 - 1.0)).abs() < 1e-6 && (d - (w1 - 0.5)).abs() < 1e-6);
    }

    #[test]
    fn zero_input_gives_zero() {
        let g = SpatialGrid::new(1.0, 51).unwrap();
        let zero = vec![c(0.0); 51];
        assert!(convolve_exponential(1.0, &g, &zero)
            .unwrap()
            .iter()
            .all(|v| v.norm() == 0.0));
        assert!(convolve_regularized(0.3, &g, &zero)
            .unwrap()
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn constant_on_the_interval() {
        let g = SpatialGrid::new(1.0, 401).unwrap();
        let ones = vec![c(1.0); 401];
        let out = convolve_exponential(1.0, &g, &ones).unwrap();
        assert!((out[200].re - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert!((out[200].re - 0.632121).abs() < 1e-6);
    }

    #[test]
    fn narrow_hat_reproduces_the_green_function() {
        let mut prev = f64::INFINITY;
        for m in [201usize, 401, 801] {
            let g = SpatialGrid::new(1.0, m).unwrap();
            let h = g.spacing();
            let mut hat = vec![c(0.0); m];
            hat[m / 2] = c(1.0 / h);
            let out = convolve_exponential(1.0, &g, &hat).unwrap();
            let err = (0..m)
                .map(|i| (out[i].re - (-g.node(i).abs()).exp() / 2.0).abs())
                .fold(0.0, f64::max);
            assert!(err < prev);
            prev = err;
            let reg = convolve_regularized(0.0, &g, &hat).unwrap();
            let err0 = (0..m)
                .map(|i| (reg[i].re + g.node(i).abs() / 2.0).abs())
                .fold(0.0, f64::max);
            assert!(err0 < 2.0 * h, "M={m}: {err0}");
        }
        assert!(prev < 2e-3);
    }

    #[test]
    fn split_of_g0_into_constant_and_regular_part() {
        let g = SpatialGrid::new(1.0, 401).unwrap();
        let a = sampled(&g, |x| (1.0 + x) * crate::expr::cosq(x, 1.0) + 0.3 * x * x);
        let mu = 0.3;
        let full = convolve_exponential(mu, &g, &a).unwrap();
        let reg = convolve_regularized(mu, &g, &a).unwrap();
        let mass = g.integrate(&a);
        for i in 0..g.len() {
            assert!((full[i] - reg[i] - mass / (2.0 * mu)).norm() < 1e-10);
        }
    }

    #[test]
    fn regularized_sweep_is_continuous_in_mu() {
        let g = SpatialGrid::new(1.0, 201).unwrap();
        let a = sampled(&g, |x| crate::expr::cosq(x, 1.0) * (2.0 + x));
        let at0 = convolve_regularized(0.0, &g, &a).unwrap();
        let tiny = convolve_regularized(1e-10, &g, &a).unwrap();
        for (p, q) in at0.iter().zip(&tiny) {
            assert!((p - q).norm() < 1e-10);
        }
    }

    type Input = (f64, fn(f64) -> f64);

    #[test]
    fn second_order_against_reference_quadrature() {
        // Three analytic inputs; the error is second order in h.
        let tests: [Input; 3] = [
            (1.0, |t| (1.0 + t).exp()),
            (3.0, |t| (2.0 * t).sin() + 0.5),
            (0.7, |t| crate::expr::cosq(t, 1.0) * (1.0 + t * t)),
        ];
        for (k, f) in tests {
            let mut errs = Vec::new();
            for m in [401usize, 801] {
                let g = SpatialGrid::new(1.0, m).unwrap();
                let out = convolve_exponential(k, &g, &sampled(&g, f)).unwrap();
                let mut worst = 0.0f64;
                for i in (0..m).step_by((m - 1) / 8) {
                    let x = g.node(i);
                    let exact = reference(x, 1.0, |u| (-k * u).exp() / (2.0 * k), f);
                    worst = worst.max(((out[i].re - exact) / exact).abs());
                }
                errs.push(worst);
            }
            assert!(errs[0] < 1e-4, "k={k}: {errs:?}");
            let ratio = errs[0] / errs[1];
            assert!((3.5..4.5).contains(&ratio), "k={k}: ratio {ratio}");
        }
    }

    #[test]
    fn regularized_against_reference_quadrature() {
        let f = |t: f64| crate::expr::cosq(t, 1.0) * (1.0 + 0.5 * t);
        for mu in [0.0, 1e-3, 0.4] {
            let g = SpatialGrid::new(1.0, 801).unwrap();
            let out = convolve_regularized(mu, &g, &sampled(&g, f)).unwrap();
            for i in (0..801).step_by(100) {
                let x = g.node(i);
                let exact = reference(x, 1.0, |u| crate::kernels::regularized_green(mu, u), f);
                assert!((out[i].re - exact).abs() < 1e-6, "mu={mu}, x={x}");
            }
        }
    }

    #[test]
    fn large_rates_stay_accurate() {
        // Sharply peaked kernel: k h = 0.5 per cell.
        let g = SpatialGrid::new(1.0, 401).unwrap();
        let k = 100.0;
        let f = |t: f64| (t * 1.3).cos();
        let out = convolve_exponential(k, &g, &sampled(&g, f)).unwrap();
        for i in (40..361).step_by(40) {
            let x = g.node(i);
            let exact = reference(x, 1.0, |u| (-k * u).exp() / (2.0 * k), f);
            assert!(((out[i].re - exact) / exact).abs() < 1e-5);
        }
    }

    #[test]
    fn boundary_values_match_the_sweep() {
        let g = SpatialGrid::new(1.0, 401).unwrap();
        let a: Vec<Complex64> = g
            .nodes()
            .iter()
            .map(|&x| Complex64::new(crate::expr::cosq(x, 1.0), x))
            .collect();
        for k in [1e-4, 0.3, 2.0, 9.0] {
            let sweep = convolve_exponential(k, &g, &a).unwrap();
            let (l, r) = boundary_values(k, &g, &a).unwrap();
            assert!((l - sweep[0]).norm() <= 1e-12 * sweep[0].norm().max(1.0));
            assert!((r - sweep[400]).norm() <= 1e-12 * sweep[400].norm().max(1.0));
        }
    }

    #[test]
    fn errors() {
        let g = SpatialGrid::new(1.0, 11).unwrap();
        assert_eq!(
            convolve_exponential(0.0, &g, &[c(0.0); 11]).unwrap_err(),
            ConvolutionError::NonPositiveRate(0.0)
        );
        assert!(matches!(
            convolve_exponential(1.0, &g, &[c(0.0); 10]),
            Err(ConvolutionError::LengthMismatch { .. })
        ));
        assert!(convolve_regularized(-1.0, &g, &[c(0.0); 11]).is_err());
    }
}
