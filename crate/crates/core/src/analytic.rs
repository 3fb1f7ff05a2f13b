//! Exact mean and covariance of the linear lattice `du = A u dt + sigma_u dW`
//! through the eigendecomposition of the symmetric circulant drift matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::BlockCovariance;
use crate::models::LinearParams;

/// Drift matrix `A` of the linear model with its cached spectral decomposition.
#[derive(Debug, Clone)]
pub struct LinearSystemMatrix {
    a_matrix: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl LinearSystemMatrix {
    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a_matrix
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn n(&self) -> usize {
        self.a_matrix.nrows()
    }

    /// `Q diag(f(lambda_k)) Q^T`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.eigenvalues[k]);
        }
        &scaled * self.eigenvectors.transpose()
    }

    /// `e^{A t}`.
    pub fn propagator(&self, t: f64) -> DMatrix<f64> {
        self.spectral_map(|l| (l * t).exp())
    }
}

/// First column of the circulant `A = -aI + d_u Lap + (w/N) 11^T - wI`.
fn circulant_column(params: &LinearParams, n: usize) -> Vec<f64> {
    let wn = params.w / n as f64;
    let mut col = vec![wn; n];
    col[0] += -params.a - 2.0 * params.d_u - params.w;
    col[1] += params.d_u;
    col[n - 1] += params.d_u;
    col
}

pub fn build_a(params: &LinearParams, n: usize) -> Result<LinearSystemMatrix> {
    params.validate()?;
    if n < 3 {
        return Err(Error::contract(format!("need N >= 3, got {n}")));
    }
    let col = circulant_column(params, n);
    let a_matrix = DMatrix::from_fn(n, n, |i, j| col[(j + n - i) % n]);
    let eig = SymmetricEigen::try_new(a_matrix.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    Ok(LinearSystemMatrix {
        a_matrix,
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
    })
}

/// `(e^{2 lambda t} - 1) / (2 lambda)` without cancellation; `t` at `lambda = 0`.
#[inline]
pub fn variance_kernel(lambda: f64, t: f64) -> f64 {
    if lambda == 0.0 {
        t
    } else {
        (2.0 * lambda * t).exp_m1() / (2.0 * lambda)
    }
}

/// `cov u(t) = e^{At} cov0 e^{A^T t} + sigma_u^2 Q diag((e^{2 lambda_k t} - 1)/(2 lambda_k)) Q^T`.
///
/// The initial term is propagated symmetrically; it coincides with a plain
/// `cov0 e^{2At}` only when `cov0` commutes with `A`.
pub fn analytic_covariance(
    sys: &LinearSystemMatrix,
    cov0: &DMatrix<f64>,
    sigma_u: f64,
    t: f64,
) -> Result<BlockCovariance> {
    let n = sys.n();
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::contract(format!("t must be nonnegative, got {t}")));
    }
    if cov0.nrows() != n || cov0.ncols() != n {
        return Err(Error::contract(format!("cov0 must be {n}x{n}")));
    }
    let s2 = sigma_u * sigma_u;
    let mut cov = sys.spectral_map(|l| s2 * variance_kernel(l, t));
    if cov0.iter().any(|v| *v != 0.0) {
        let p = sys.propagator(t);
        cov += &p * cov0 * p.transpose();
    }
    BlockCovariance::new(cov, n, 1)
}

/// `e^{At} u(0)`.
pub fn analytic_mean(sys: &LinearSystemMatrix, u0: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if u0.len() != sys.n() {
        return Err(Error::contract(format!("u0 must have length {}", sys.n())));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::contract(format!("t must be nonnegative, got {t}")));
    }
    Ok(sys.propagator(t) * u0)
}

/// First row of the stationary-from-zero covariance computed through the
/// circulant's FFT diagonalisation; an independent route to the
/// dense eigendecomposition for `cov0 = 0`.
pub fn circulant_covariance_row(params: &LinearParams, n: usize, t: f64) -> Result<Vec<f64>> {
    params.validate()?;
    if n < 3 {
        return Err(Error::contract(format!("need N >= 3, got {n}")));
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = circulant_column(params, n)
        .into_iter()
        .map(|c| Complex64::new(c, 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    let s2 = params.sigma_u * params.sigma_u;
    for z in buf.iter_mut() {
        *z = Complex64::new(s2 * variance_kernel(z.re, t), 0.0);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf.into_iter().map(|z| z.re / n as f64).collect())
}
