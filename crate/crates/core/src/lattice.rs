//! Cyclic lattice geometry, the generic block SDE model and the Lipschitz
//! constants that drive every covariance bound.
//!
//! Block indices are 1-based at every public entry point; storage is 0-based.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{FhnParams, LinearParams};

/// Shortest index separation on Z/NZ between 1-based blocks `i` and `j`.
pub fn cyclic_distance(i: usize, j: usize, n: usize) -> Result<usize> {
    if n == 0 || i == 0 || j == 0 || i > n || j > n {
        return Err(Error::contract(format!(
            "block indices ({i}, {j}) must lie in 1..={n}"
        )));
    }
    Ok(distance0(i - 1, j - 1, n))
}

/// Same as [`cyclic_distance`] on 0-based indices, unchecked.
#[inline]
pub(crate) fn distance0(i: usize, j: usize, n: usize) -> usize {
    let diff = i.abs_diff(j);
    diff.min(n - diff)
}

/// Local block dynamics `f(t, x_{i-1}, x_i, x_{i+1})` plus the mean-field
/// kernel `h(t, x_j)` of a cyclic system
/// `dx_i = f dt + (1/N) sum_j h(t, x_j) dt + Sigma dw_i`.
pub trait BlockDynamics: Send + Sync + fmt::Debug {
    fn block_dim(&self) -> usize;

    fn local(&self, t: f64, left: &[f64], center: &[f64], right: &[f64], out: &mut [f64]);

    fn mean_field(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn has_mean_field(&self) -> bool {
        false
    }

    /// Full lattice drift for a flat `N*q` state. Built-in models override
    /// this with a fused loop; the default composes `local` and `mean_field`.
    fn lattice_drift(&self, t: f64, state: &[f64], out: &mut [f64]) {
        compose_lattice_drift(self, t, state, out);
    }
}

pub(crate) fn compose_lattice_drift<D: BlockDynamics + ?Sized>(
    dynamics: &D,
    t: f64,
    state: &[f64],
    out: &mut [f64],
) {
    let q = dynamics.block_dim();
    let n = state.len() / q;
    let block = |i: usize| &state[i * q..(i + 1) * q];

    let mut mean = vec![0.0; q];
    if dynamics.has_mean_field() {
        let mut h = vec![0.0; q];
        for j in 0..n {
            dynamics.mean_field(t, block(j), &mut h);
            for (m, v) in mean.iter_mut().zip(&h) {
                *m += v;
            }
        }
        let inv_n = 1.0 / n as f64;
        mean.iter_mut().for_each(|m| *m *= inv_n);
    }

    for i in 0..n {
        let left = block((i + n - 1) % n);
        let right = block((i + 1) % n);
        let dst = &mut out[i * q..(i + 1) * q];
        dynamics.local(t, left, block(i), right, dst);
        for (d, m) in dst.iter_mut().zip(&mean) {
            *d += m;
        }
    }
}

/// `(lambda_0, lambda_F, lambda_H)`: the largest eigenvalue of the symmetric
/// part of the self-Jacobian, the neighbour coupling norm and the mean-field
/// Jacobian norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub lambda_0: f64,
    pub lambda_f: f64,
    pub lambda_h: f64,
}

impl LipschitzConstants {
    pub fn new(lambda_0: f64, lambda_f: f64, lambda_h: f64) -> Result<Self> {
        if !lambda_0.is_finite() || !lambda_f.is_finite() || !lambda_h.is_finite() {
            return Err(Error::contract("Lipschitz constants must be finite"));
        }
        if lambda_f < 0.0 || lambda_h < 0.0 {
            return Err(Error::contract(format!(
                "lambda_f ({lambda_f}) and lambda_h ({lambda_h}) must be nonnegative"
            )));
        }
        Ok(Self {
            lambda_0,
            lambda_f,
            lambda_h,
        })
    }
}

/// Which closed-form family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Linear(LinearParams),
    Fhn(FhnParams),
    Custom(Option<LipschitzConstants>),
}

/// Full definition of one cyclic coupled SDE system.
#[derive(Clone)]
pub struct LatticeModelSpec {
    n_blocks: usize,
    block_dim: usize,
    dynamics: Arc<dyn BlockDynamics>,
    sigma: DMatrix<f64>,
    sigma0: DMatrix<f64>,
    m0: DVector<f64>,
    kind: ModelKind,
}

impl fmt::Debug for LatticeModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LatticeModelSpec")
            .field("n_blocks", &self.n_blocks)
            .field("block_dim", &self.block_dim)
            .field("kind", &self.kind)
            .field("dynamics", &self.dynamics)
            .finish_non_exhaustive()
    }
}

impl LatticeModelSpec {
    /// A user-defined model. Bounds are only available when `constants` is given.
    pub fn custom(
        n_blocks: usize,
        dynamics: Arc<dyn BlockDynamics>,
        sigma: DMatrix<f64>,
        sigma0: DMatrix<f64>,
        m0: DVector<f64>,
        constants: Option<LipschitzConstants>,
    ) -> Result<Self> {
        Self::build(
            n_blocks,
            dynamics,
            sigma,
            sigma0,
            m0,
            ModelKind::Custom(constants),
        )
    }

    pub(crate) fn build(
        n_blocks: usize,
        dynamics: Arc<dyn BlockDynamics>,
        sigma: DMatrix<f64>,
        sigma0: DMatrix<f64>,
        m0: DVector<f64>,
        kind: ModelKind,
    ) -> Result<Self> {
        if n_blocks < 3 {
            return Err(Error::contract(format!(
                "a cyclic lattice needs N >= 3, got {n_blocks}"
            )));
        }
        let q = dynamics.block_dim();
        if q == 0 {
            return Err(Error::contract("block dimension must be positive"));
        }
        for (name, m) in [("sigma", &sigma), ("sigma0", &sigma0)] {
            if m.nrows() != q || m.ncols() != q {
                return Err(Error::contract(format!(
                    "{name} must be {q}x{q}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        if m0.len() != q {
            return Err(Error::contract(format!("m0 must have length {q}")));
        }
        let scale = sigma.amax().max(f64::MIN_POSITIVE);
        if (&sigma - sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::contract("sigma must be symmetric"));
        }
        Ok(Self {
            n_blocks,
            block_dim: q,
            dynamics,
            sigma,
            sigma0,
            m0,
            kind,
        })
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// Total state dimension `q * N`.
    pub fn dim(&self) -> usize {
        self.n_blocks * self.block_dim
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma0(&self) -> &DMatrix<f64> {
        &self.sigma0
    }

    pub fn m0(&self) -> &DVector<f64> {
        &self.m0
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn dynamics(&self) -> &dyn BlockDynamics {
        self.dynamics.as_ref()
    }

    /// Lattice drift `f + (1/N) sum_j h` evaluated on a flat state.
    pub fn drift(&self, t: f64, state: &[f64], out: &mut [f64]) {
        debug_assert_eq!(state.len(), self.dim());
        self.dynamics.lattice_drift(t, state, out);
    }

    /// Same model on a lattice of a different size.
    pub fn with_n_blocks(&self, n_blocks: usize) -> Result<Self> {
        Self::build(
            n_blocks,
            Arc::clone(&self.dynamics),
            self.sigma.clone(),
            self.sigma0.clone(),
            self.m0.clone(),
            self.kind,
        )
    }

    /// Replaces the initial law `N(m0, sigma0 sigma0^T)`.
    pub fn with_initial_law(&self, m0: DVector<f64>, sigma0: DMatrix<f64>) -> Result<Self> {
        Self::build(
            self.n_blocks,
            Arc::clone(&self.dynamics),
            self.sigma.clone(),
            sigma0,
            m0,
            self.kind,
        )
    }
}

/// Closed-form constants for the built-in models.
///
/// The linear model gives `(-a - 2 d_u - w, d_u, w)`. FitzHugh-Nagumo
/// constants are those of the time-rescaled system (inhibitor scaled by
/// `1/sqrt(eps)`), where the self-Jacobian's off-diagonal terms cancel in the
/// symmetric part. Custom models must carry explicit constants.
pub fn lipschitz_constants(model: &LatticeModelSpec) -> Result<LipschitzConstants> {
    match model.kind() {
        ModelKind::Linear(p) => LipschitzConstants::new(-p.a - 2.0 * p.d_u - p.w, p.d_u, p.w),
        ModelKind::Fhn(p) => {
            let inv_eps = 1.0 / p.epsilon;
            LipschitzConstants::new(
                inv_eps * (1.0 - 2.0 * p.d_u - p.w).max(0.0),
                inv_eps * p.d_u,
                inv_eps * p.w,
            )
        }
        ModelKind::Custom(Some(c)) => Ok(*c),
        ModelKind::Custom(None) => Err(Error::UnsupportedModel(
            "custom drift has no closed-form constants; supply LipschitzConstants explicitly"
                .into(),
        )),
    }
}

/// A `qN x qN` symmetric covariance organised as an `N x N` grid of `q x q` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockCovariance {
    data: DMatrix<f64>,
    n_blocks: usize,
    block_dim: usize,
}

impl BlockCovariance {
    /// Wraps `data`, rejecting gross asymmetry and symmetrizing the rest.
    pub fn new(data: DMatrix<f64>, n_blocks: usize, block_dim: usize) -> Result<Self> {
        let dim = n_blocks * block_dim;
        if n_blocks == 0 || block_dim == 0 || data.nrows() != dim || data.ncols() != dim {
            return Err(Error::contract(format!(
                "covariance must be {dim}x{dim} for N={n_blocks}, q={block_dim}; got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("covariance entries must be finite"));
        }
        let scale = data.amax();
        let asym = (&data - data.transpose()).amax();
        if asym > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::contract(format!(
                "matrix is not symmetric (max |A - A^T| = {asym:e})"
            )));
        }
        let data = (&data + data.transpose()) * 0.5;
        Ok(Self {
            data,
            n_blocks,
            block_dim,
        })
    }

    pub fn zeros(n_blocks: usize, block_dim: usize) -> Self {
        let dim = n_blocks * block_dim;
        Self {
            data: DMatrix::zeros(dim, dim),
            n_blocks,
            block_dim,
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    /// The `(i, j)` sub-block, 1-based: entry `(m, n)` is `[A]_{(i-1)q+m, (j-1)q+n}`.
    pub fn block(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        self.check_block(i)?;
        self.check_block(j)?;
        let q = self.block_dim;
        Ok(self
            .data
            .view(((i - 1) * q, (j - 1) * q), (q, q))
            .into_owned())
    }

    /// Scalar entry of component `m` of block `i` against component `n` of block `j`, all 1-based.
    pub fn entry(&self, i: usize, m: usize, j: usize, n: usize) -> Result<f64> {
        self.check_block(i)?;
        self.check_block(j)?;
        if m == 0 || n == 0 || m > self.block_dim || n > self.block_dim {
            return Err(Error::contract(format!(
                "components ({m}, {n}) must lie in 1..={}",
                self.block_dim
            )));
        }
        let q = self.block_dim;
        Ok(self.data[((i - 1) * q + m - 1, (j - 1) * q + n - 1)])
    }

    /// All block pairs `(i, j, d(i, j))`, 1-based, row-major.
    pub fn block_pairs(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let n = self.n_blocks;
        (0..n).flat_map(move |i| (0..n).map(move |j| (i + 1, j + 1, distance0(i, j, n))))
    }

    fn check_block(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n_blocks {
            return Err(Error::contract(format!(
                "block index {i} outside 1..={}",
                self.n_blocks
            )));
        }
        Ok(())
    }

    pub(crate) fn from_raw(data: DMatrix<f64>, n_blocks: usize, block_dim: usize) -> Self {
        Self {
            data,
            n_blocks,
            block_dim,
        }
    }
}
