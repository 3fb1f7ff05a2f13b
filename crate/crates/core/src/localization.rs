//! Banded truncation of block covariances and bandwidth / sample-size selection.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::{distance0, BlockCovariance};

/// Keep block `(i, j)` iff the cyclic distance `d(i, j) <= l`; zero the rest.
pub fn localize(c: &BlockCovariance, l: usize) -> Result<BlockCovariance> {
    let n = c.n_blocks();
    let max = n / 2;
    if l > max {
        return Err(Error::BandwidthOutOfRange { bandwidth: l, max });
    }
    let q = c.block_dim();
    let src = c.data();
    let data = DMatrix::from_fn(n * q, n * q, |r, s| {
        if distance0(r / q, s / q, n) <= l {
            src[(r, s)]
        } else {
            0.0
        }
    });
    Ok(BlockCovariance::from_raw(data, n, q))
}

/// `2 C e^{-beta l} / (1 - e^{-beta})`.
pub fn localization_error_bound(l: usize, beta: f64, local_coefficient: f64) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::contract(format!(
            "beta must be positive, got {beta}"
        )));
    }
    Ok(2.0 * local_coefficient * (-beta * l as f64).exp() / -(-beta).exp_m1())
}

/// Result of a bandwidth search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandwidthChoice {
    pub bandwidth: usize,
    /// The error bound could not reach `epsilon` within `floor(N/2)`; the
    /// bandwidth was capped (at that cap `C^L = C`, so nothing is truncated).
    pub insufficient: bool,
}

/// Smallest `L` whose error bound is at most `epsilon`, capped at `floor(N/2)`.
pub fn choose_bandwidth(
    epsilon: f64,
    beta: f64,
    local_coefficient: f64,
    n_blocks: usize,
) -> Result<BandwidthChoice> {
    if !(epsilon > 0.0) {
        return Err(Error::contract(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(local_coefficient >= 0.0 && local_coefficient.is_finite()) {
        return Err(Error::contract(format!(
            "local coefficient must be finite and nonnegative, got {local_coefficient}"
        )));
    }
    let cap = n_blocks / 2;
    for l in 0..=cap {
        if localization_error_bound(l, beta, local_coefficient)? <= epsilon {
            return Ok(BandwidthChoice {
                bandwidth: l,
                insufficient: false,
            });
        }
    }
    Ok(BandwidthChoice {
        bandwidth: cap,
        insufficient: true,
    })
}

/// Inputs of the sample-size rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeInputs {
    pub epsilon: f64,
    pub bandwidth: usize,
    pub n_blocks: usize,
    /// Operator norm `||C||` of the target covariance.
    pub cov_norm: f64,
    pub failure_prob: f64,
    /// The unspecified universal constant; 1.0 unless calibrated.
    pub c_constant: f64,
}

/// Smallest `K` with `8 exp(2 ln N - c K min(eps/(2L||C||), eps^2/(4L^2||C||^2))) <= delta`.
/// `L = 0` is treated as `L = 1`. Never below 2.
pub fn sample_size_recommendation(inputs: &SampleSizeInputs) -> Result<usize> {
    let SampleSizeInputs {
        epsilon,
        bandwidth,
        n_blocks,
        cov_norm,
        failure_prob,
        c_constant,
    } = *inputs;
    let positive = [epsilon, cov_norm, failure_prob, c_constant]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
    if !positive || failure_prob >= 1.0 || n_blocks == 0 {
        return Err(Error::contract(format!(
            "sample-size inputs must be positive with delta < 1: {inputs:?}"
        )));
    }
    let l = bandwidth.max(1) as f64;
    let x = epsilon / (2.0 * l * cov_norm);
    let rate = c_constant * x.min(x * x);
    let k = ((2.0 * (n_blocks as f64).ln() + (8.0 / failure_prob).ln()) / rate).ceil();
    if !k.is_finite() || k > usize::MAX as f64 {
        return Err(Error::Numerical(format!("sample size overflows: {k}")));
    }
    Ok((k as usize).max(2))
}

/// A complete localization recommendation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationPlan {
    pub bandwidth: usize,
    pub epsilon: f64,
    pub recommended_k: usize,
    pub c_constant: f64,
    pub insufficient: bool,
    pub error_bound: f64,
}

impl LocalizationPlan {
    /// Bandwidth from the decay bound, then the sample count for that bandwidth.
    pub fn new(
        epsilon: f64,
        beta: f64,
        local_coefficient: f64,
        n_blocks: usize,
        cov_norm: f64,
        failure_prob: f64,
        c_constant: f64,
    ) -> Result<Self> {
        let choice = choose_bandwidth(epsilon, beta, local_coefficient, n_blocks)?;
        let recommended_k = sample_size_recommendation(&SampleSizeInputs {
            epsilon,
            bandwidth: choice.bandwidth,
            n_blocks,
            cov_norm,
            failure_prob,
            c_constant,
        })?;
        Ok(Self {
            bandwidth: choice.bandwidth,
            epsilon,
            recommended_k,
            c_constant,
            insufficient: choice.insufficient,
            error_bound: localization_error_bound(choice.bandwidth, beta, local_coefficient)?,
        })
    }
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::contract("spectral norm needs a square matrix"));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(sym, 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    Ok(eig.eigenvalues.amax())
}
