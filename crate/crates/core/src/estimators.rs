//! Monte Carlo, spatial-averaging and shifted-pair covariance estimators.
//!
//! All reductions run sequentially in sample-then-block index order, so
//! repeated calls on the same ensemble are bit-identical.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrator::{EnsembleState, NoiseSource, StreamNoise};
use crate::lattice::BlockCovariance;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMethod {
    MonteCarlo,
    SpatialAverage,
}

impl EstimatorMethod {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorMethod::MonteCarlo => "monte-carlo",
            EstimatorMethod::SpatialAverage => "spatial-average",
        }
    }
}

impl fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A scalar estimate with its effective sample count and, when at least two
/// independent replicates exist, a standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorReport {
    pub estimate: f64,
    pub n_effective: usize,
    pub std_error: Option<f64>,
    pub method: EstimatorMethod,
}

type ValueFn<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;
type GradientFn<'a> = dyn Fn(&[f64], &mut [f64]) + Sync + 'a;

/// Scalar test function `g` on one block, with its gradient.
pub struct TestFunction<'a> {
    value: Box<ValueFn<'a>>,
    gradient: Box<GradientFn<'a>>,
}

impl fmt::Debug for TestFunction<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("TestFunction")
    }
}

impl<'a> TestFunction<'a> {
    pub fn new(
        value: impl Fn(&[f64]) -> f64 + Sync + 'a,
        gradient: impl Fn(&[f64], &mut [f64]) + Sync + 'a,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
        }
    }

    /// `g(x) = x[m]`.
    pub fn component(m: usize) -> Self {
        Self::new(
            move |x| x[m],
            move |_, out| {
                out.fill(0.0);
                out[m] = 1.0;
            },
        )
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
}

/// Mean and standard error of independent replicate values.
pub fn mean_and_std_error(values: &[f64]) -> (f64, Option<f64>) {
    let k = values.len();
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, Some((var / k as f64).sqrt()))
}

/// `(1/(K-1)) sum_j (x_j - xbar)(x_j - xbar)^T` over the full `qN` state.
pub fn sample_covariance(ensemble: &EnsembleState) -> Result<BlockCovariance> {
    let k = ensemble.n_samples();
    if k < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: k });
    }
    let d = ensemble.n_blocks() * ensemble.block_dim();
    let mut mean = vec![0.0; d];
    for x in ensemble.iter_samples() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);

    let mut centered = DMatrix::<f64>::zeros(d, k);
    for (j, x) in ensemble.iter_samples().enumerate() {
        for r in 0..d {
            centered[(r, j)] = x[r] - mean[r];
        }
    }
    let mut cov = &centered * centered.transpose();
    cov /= (k - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(BlockCovariance::from_raw(
        cov,
        ensemble.n_blocks(),
        ensemble.block_dim(),
    ))
}

/// `(1/K) sum_j (1/N) sum_i g(x_i^(j))`; the standard error comes from the
/// spread of the per-sample spatial means, which are independent.
pub fn spatial_average(ensemble: &EnsembleState, g: &TestFunction<'_>) -> EstimatorReport {
    let (n, q) = (ensemble.n_blocks(), ensemble.block_dim());
    let per_sample: Vec<f64> = ensemble
        .iter_samples()
        .map(|x| x.chunks_exact(q).map(|b| g.value(b)).sum::<f64>() / n as f64)
        .collect();
    let (estimate, std_error) = mean_and_std_error(&per_sample);
    EstimatorReport {
        estimate,
        n_effective: ensemble.n_samples() * n,
        std_error,
        method: EstimatorMethod::SpatialAverage,
    }
}

fn check_component(ensemble: &EnsembleState, component: usize) -> Result<()> {
    if component >= ensemble.block_dim() {
        return Err(Error::contract(format!(
            "component {component} outside 0..{}",
            ensemble.block_dim()
        )));
    }
    Ok(())
}

/// Pooled shifted-pair covariance at any cyclic lag `0 <= lag < N`; lags
/// `k` and `N - k` share one canonical summation and agree bit for bit.
pub fn cyclic_lag_covariance(
    ensemble: &EnsembleState,
    lag: usize,
    component: usize,
) -> Result<EstimatorReport> {
    let n = ensemble.n_blocks();
    if lag >= n {
        return Err(Error::LagOutOfRange { lag, max: n - 1 });
    }
    check_component(ensemble, component)?;
    let lag = lag.min(n - lag);
    let k = ensemble.n_samples();

    let mut total = 0.0;
    for j in 0..k {
        for i in 0..n {
            total += ensemble.value(j, i, component);
        }
    }
    let pooled_mean = total / (k * n) as f64;

    let mut grand = 0.0;
    let mut per_sample = Vec::with_capacity(k);
    for j in 0..k {
        let mut s = 0.0;
        for i in 0..n {
            let a = ensemble.value(j, i, component) - pooled_mean;
            let b = ensemble.value(j, (i + lag) % n, component) - pooled_mean;
            s += a * b;
        }
        grand += s;
        per_sample.push(s / n as f64);
    }
    let denom = (k * n) as f64 - 1.0;
    let estimate = if denom > 0.0 { grand / denom } else { f64::NAN };
    let (_, std_error) = mean_and_std_error(&per_sample);
    Ok(EstimatorReport {
        estimate,
        n_effective: k * n,
        std_error,
        method: EstimatorMethod::SpatialAverage,
    })
}

/// Covariance between component `component` at blocks distance `lag` apart,
/// pooled over all positions and samples with the pooled mean:
/// `(1/(KN-1)) sum_{j,i} (x_i - m)(x_{i+lag} - m)`.
pub fn shifted_pair_covariance(
    ensemble: &EnsembleState,
    lag: usize,
    component: usize,
) -> Result<EstimatorReport> {
    let max = ensemble.n_blocks() / 2;
    if lag > max {
        return Err(Error::LagOutOfRange { lag, max });
    }
    cyclic_lag_covariance(ensemble, lag, component)
}

/// Plain Monte Carlo covariance of `x_{i,m}` and `x_{j,m}` (0-based blocks)
/// across samples, with a standard error from the per-sample cross products.
pub fn monte_carlo_covariance(
    ensemble: &EnsembleState,
    i: usize,
    j: usize,
    component: usize,
) -> Result<EstimatorReport> {
    let k = ensemble.n_samples();
    if k < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: k });
    }
    let n = ensemble.n_blocks();
    if i >= n || j >= n {
        return Err(Error::contract(format!("blocks ({i}, {j}) outside 0..{n}")));
    }
    check_component(ensemble, component)?;
    let xi: Vec<f64> = (0..k).map(|s| ensemble.value(s, i, component)).collect();
    let xj: Vec<f64> = (0..k).map(|s| ensemble.value(s, j, component)).collect();
    let mi = xi.iter().sum::<f64>() / k as f64;
    let mj = xj.iter().sum::<f64>() / k as f64;
    let products: Vec<f64> = xi
        .iter()
        .zip(&xj)
        .map(|(a, b)| (a - mi) * (b - mj))
        .collect();
    let estimate = products.iter().sum::<f64>() / (k - 1) as f64;
    let (_, std_error) = mean_and_std_error(&products);
    Ok(EstimatorReport {
        estimate,
        n_effective: k,
        std_error,
        method: EstimatorMethod::MonteCarlo,
    })
}

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    for k in 0..n {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for m in 2..=n {
                let p2 = ((2 * m - 1) as f64 * x * p1 - (m - 1) as f64 * p0) / m as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((mid + half * x, half * w));
    }
    out
}

/// Both sides of the Gaussian interpolation identity
/// `cov(f(X), g(X)) = int_0^{pi/2} sin(theta) E<grad f(X), grad g(X^theta)> dtheta`
/// with `X^theta = cos(theta) X + sin(theta) Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinCheck {
    pub covariance: f64,
    pub covariance_se: f64,
    pub integral: f64,
    pub integral_se: f64,
    pub residual: f64,
}

impl SteinCheck {
    pub fn combined_se(&self) -> f64 {
        self.covariance_se.hypot(self.integral_se)
    }
}

/// Monte Carlo check of the interpolation identity with `n_mc` pairs
/// `(X, Y)` and `n_theta` Gauss-Legendre nodes on `[0, pi/2]`.
pub fn stein_identity_check(
    f: &TestFunction<'_>,
    g: &TestFunction<'_>,
    dim: usize,
    n_mc: usize,
    n_theta: usize,
    seed: u64,
) -> Result<SteinCheck> {
    if dim == 0 || n_mc < 2 || n_theta == 0 {
        return Err(Error::contract("need dim >= 1, n_mc >= 2, n_theta >= 1"));
    }
    let nodes = gauss_legendre(n_theta, 0.0, FRAC_PI_2);
    let mut xs = StreamNoise::for_sample(seed, 0);
    let mut ys = StreamNoise::for_sample(seed, 1);
    let (mut x, mut y, mut xt) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let (mut gf, mut gg) = (vec![0.0; dim], vec![0.0; dim]);

    let mut fv = Vec::with_capacity(n_mc);
    let mut gv = Vec::with_capacity(n_mc);
    let mut integrand = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        xs.fill_standard_normal(&mut x);
        ys.fill_standard_normal(&mut y);
        fv.push(f.value(&x));
        gv.push(g.value(&x));
        f.gradient(&x, &mut gf);
        let mut acc = 0.0;
        for &(theta, w) in &nodes {
            let (s, c) = theta.sin_cos();
            for ((t, a), b) in xt.iter_mut().zip(&x).zip(&y) {
                *t = c * a + s * b;
            }
            g.gradient(&xt, &mut gg);
            let dot: f64 = gf.iter().zip(&gg).map(|(a, b)| a * b).sum();
            acc += w * s * dot;
        }
        integrand.push(acc);
    }

    let mf = fv.iter().sum::<f64>() / n_mc as f64;
    let mg = gv.iter().sum::<f64>() / n_mc as f64;
    let products: Vec<f64> = fv
        .iter()
        .zip(&gv)
        .map(|(a, b)| (a - mf) * (b - mg))
        .collect();
    let covariance = products.iter().sum::<f64>() / (n_mc - 1) as f64;
    let (_, cov_se) = mean_and_std_error(&products);
    let (integral, int_se) = mean_and_std_error(&integrand);
    Ok(SteinCheck {
        covariance,
        covariance_se: cov_se.unwrap_or(0.0),
        integral,
        integral_se: int_se.unwrap_or(0.0),
        residual: (covariance - integral).abs(),
    })
}

/// `|cov_MC(f(X), g(X)) - int_0^{pi/2} sin(theta) E<grad f(X), grad g(X^theta)> dtheta|`.
pub fn stein_identity_residual(
    f: &TestFunction<'_>,
    g: &TestFunction<'_>,
    dim: usize,
    n_mc: usize,
    n_theta: usize,
    seed: u64,
) -> Result<f64> {
    Ok(stein_identity_check(f, g, dim, n_mc, n_theta, seed)?.residual)
}
