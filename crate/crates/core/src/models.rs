//! The two reference systems: the linear Ornstein-Uhlenbeck lattice and the
//! stochastically coupled FitzHugh-Nagumo lattice, plus their named regimes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lattice::{BlockDynamics, LatticeModelSpec, ModelKind};

/// `du_i = [-a u_i + d_u (u_{i+1} - 2u_i + u_{i-1}) + w (ubar - u_i)] dt + sigma_u dW_i`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearParams {
    pub a: f64,
    pub d_u: f64,
    pub w: f64,
    pub sigma_u: f64,
}

impl LinearParams {
    pub fn new(a: f64, d_u: f64, w: f64, sigma_u: f64) -> Result<Self> {
        let p = Self { a, d_u, w, sigma_u };
        p.validate()?;
        Ok(p)
    }

    /// `a = 1`, `sigma_u = 0.5` with the given diffusion and mean-field strength.
    pub fn standard(d_u: f64, w: f64) -> Self {
        Self {
            a: 1.0,
            d_u,
            w,
            sigma_u: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [self.a, self.d_u, self.w, self.sigma_u]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite || self.a <= 0.0 || self.d_u < 0.0 || self.w < 0.0 || self.sigma_u <= 0.0 {
            return Err(Error::contract(format!(
                "linear parameters need a > 0, d_u >= 0, w >= 0, sigma_u > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// `min(1e-3, 0.1 / (a + 4 d_u + w))`: a tenth of the stiffest decay time.
    pub fn default_step(&self) -> f64 {
        (0.1 / (self.a + 4.0 * self.d_u + self.w)).min(1e-3)
    }
}

/// FitzHugh-Nagumo lattice in activator/inhibitor form:
///
/// ```text
/// eps du_i = (u_i - u_i^3/3 - v_i + d_u Lap(u)_i + w (ubar - u_i)) dt + sqrt(eps) delta1 dW
///     dv_i = (u_i + a) dt + delta2 dW
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhnParams {
    pub epsilon: f64,
    pub a: f64,
    pub d_u: f64,
    pub w: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl Default for FhnParams {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            a: 1.05,
            d_u: 0.0,
            w: 0.0,
            delta1: 0.4,
            delta2: 0.4,
        }
    }
}

impl FhnParams {
    /// Default timescale, threshold and noise with the given coupling.
    pub fn with_coupling(d_u: f64, w: f64) -> Self {
        Self {
            d_u,
            w,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.epsilon,
            self.a,
            self.d_u,
            self.w,
            self.delta1,
            self.delta2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite
            || self.epsilon <= 0.0
            || self.d_u < 0.0
            || self.w < 0.0
            || self.delta1 <= 0.0
            || self.delta2 <= 0.0
        {
            return Err(Error::contract(format!(
                "FHN parameters need eps > 0, d_u >= 0, w >= 0, delta1, delta2 > 0; got {self:?}"
            )));
        }
        Ok(())
    }

    /// `eps / 100`, resolving the fast activator.
    pub fn default_step(&self) -> f64 {
        self.epsilon / 100.0
    }

    /// Deterministic rest state `(u, v) = (-a, -a + a^3/3)`.
    pub fn rest_state(&self) -> [f64; 2] {
        let u = -self.a;
        [u, u - u * u * u / 3.0]
    }

    /// `||Sigma^2||_F` in the time-rescaled coordinates used by the bounds.
    pub fn sigma_sq_frob(&self) -> f64 {
        (self.delta1.powi(4) + self.delta2.powi(4)).sqrt() / self.epsilon
    }

    /// Self-Jacobian at activator value `u` in the rescaled coordinates
    /// `(u, v / sqrt(eps))`.
    pub fn rescaled_self_jacobian(&self, u: f64) -> [[f64; 2]; 2] {
        let inv_eps = 1.0 / self.epsilon;
        let inv_sqrt = inv_eps.sqrt();
        [
            [inv_eps * (1.0 - u * u - 2.0 * self.d_u - self.w), -inv_sqrt],
            [inv_sqrt, 0.0],
        ]
    }
}

#[derive(Debug)]
struct LinearDynamics {
    p: LinearParams,
}

impl BlockDynamics for LinearDynamics {
    fn block_dim(&self) -> usize {
        1
    }

    fn local(&self, _t: f64, left: &[f64], center: &[f64], right: &[f64], out: &mut [f64]) {
        let u = center[0];
        out[0] = -self.p.a * u + self.p.d_u * (left[0] - 2.0 * u + right[0]) - self.p.w * u;
    }

    // h(u) = w u; with the local -w u this reproduces w (ubar - u_i).
    fn mean_field(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.p.w * x[0];
    }

    fn has_mean_field(&self) -> bool {
        self.p.w != 0.0
    }

    fn lattice_drift(&self, _t: f64, state: &[f64], out: &mut [f64]) {
        let n = state.len();
        let LinearParams { a, d_u, w, .. } = self.p;
        let wbar = if w != 0.0 {
            w * state.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let diag = -(a + w + 2.0 * d_u);
        out[0] = diag * state[0] + d_u * (state[n - 1] + state[1]) + wbar;
        for i in 1..n - 1 {
            out[i] = diag * state[i] + d_u * (state[i - 1] + state[i + 1]) + wbar;
        }
        out[n - 1] = diag * state[n - 1] + d_u * (state[n - 2] + state[0]) + wbar;
    }
}

#[derive(Debug)]
struct FhnDynamics {
    p: FhnParams,
}

impl FhnDynamics {
    #[inline]
    fn activator(&self, u: f64, v: f64, lap: f64) -> f64 {
        (u - u * u * u / 3.0 - v + self.p.d_u * lap - self.p.w * u) / self.p.epsilon
    }
}

impl BlockDynamics for FhnDynamics {
    fn block_dim(&self) -> usize {
        2
    }

    fn local(&self, _t: f64, left: &[f64], center: &[f64], right: &[f64], out: &mut [f64]) {
        let (u, v) = (center[0], center[1]);
        out[0] = self.activator(u, v, left[0] - 2.0 * u + right[0]);
        out[1] = u + self.p.a;
    }

    fn mean_field(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.p.w * x[0] / self.p.epsilon;
        out[1] = 0.0;
    }

    fn has_mean_field(&self) -> bool {
        self.p.w != 0.0
    }

    fn lattice_drift(&self, _t: f64, state: &[f64], out: &mut [f64]) {
        let n = state.len() / 2;
        let ubar_term = if self.p.w != 0.0 {
            let sum: f64 = state.iter().step_by(2).sum();
            self.p.w * sum / n as f64 / self.p.epsilon
        } else {
            0.0
        };
        for i in 0..n {
            let left = state[2 * ((i + n - 1) % n)];
            let right = state[2 * ((i + 1) % n)];
            let (u, v) = (state[2 * i], state[2 * i + 1]);
            out[2 * i] = self.activator(u, v, left - 2.0 * u + right) + ubar_term;
            out[2 * i + 1] = u + self.p.a;
        }
    }
}

/// Linear lattice with `q = 1`, zero initial state.
pub fn linear_model(params: LinearParams, n: usize) -> Result<LatticeModelSpec> {
    params.validate()?;
    LatticeModelSpec::build(
        n,
        Arc::new(LinearDynamics { p: params }),
        DMatrix::from_element(1, 1, params.sigma_u),
        DMatrix::zeros(1, 1),
        DVector::zeros(1),
        ModelKind::Linear(params),
    )
}

/// FitzHugh-Nagumo lattice with `q = 2`, state `(u_i, v_i)`, noise
/// `diag(delta1 / sqrt(eps), delta2)`, started deterministically at the rest state.
pub fn fhn_model(params: FhnParams, n: usize) -> Result<LatticeModelSpec> {
    params.validate()?;
    let sigma = DMatrix::from_diagonal(&DVector::from_vec(vec![
        params.delta1 / params.epsilon.sqrt(),
        params.delta2,
    ]));
    LatticeModelSpec::build(
        n,
        Arc::new(FhnDynamics { p: params }),
        sigma,
        DMatrix::zeros(2, 2),
        DVector::from_row_slice(&params.rest_state()),
        ModelKind::Fhn(params),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetParams {
    Linear(LinearParams),
    Fhn(FhnParams),
}

impl PresetParams {
    pub fn build(&self, n: usize) -> Result<LatticeModelSpec> {
        match *self {
            PresetParams::Linear(p) => linear_model(p, n),
            PresetParams::Fhn(p) => fhn_model(p, n),
        }
    }

    pub fn default_step(&self) -> f64 {
        match self {
            PresetParams::Linear(p) => p.default_step(),
            PresetParams::Fhn(p) => p.default_step(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimePreset {
    pub name: &'static str,
    pub description: &'static str,
    pub params: PresetParams,
}

const fn fhn(d_u: f64, w: f64) -> PresetParams {
    PresetParams::Fhn(FhnParams {
        epsilon: 0.01,
        a: 1.05,
        d_u,
        w,
        delta1: 0.4,
        delta2: 0.4,
    })
}

const fn linear(d_u: f64, w: f64) -> PresetParams {
    PresetParams::Linear(LinearParams {
        a: 1.0,
        d_u,
        w,
        sigma_u: 0.5,
    })
}

/// FitzHugh-Nagumo regimes: the three diffusion-only and three mean-field-only
/// regimes, followed by the six regimes (a)-(f) of the spatial-averaging study.
pub const REGIMES: [RegimePreset; 12] = [
    RegimePreset {
        name: "diffusion-strongly-mixed",
        description: "FHN, d_u = 0.02, w = 0",
        params: fhn(0.02, 0.0),
    },
    RegimePreset {
        name: "diffusion-weakly-coherent",
        description: "FHN, d_u = 0.5, w = 0",
        params: fhn(0.5, 0.0),
    },
    RegimePreset {
        name: "diffusion-strongly-coherent",
        description: "FHN, d_u = 10, w = 0",
        params: fhn(10.0, 0.0),
    },
    RegimePreset {
        name: "meanfield-weak",
        description: "FHN, w = 0.1, d_u = 0",
        params: fhn(0.0, 0.1),
    },
    RegimePreset {
        name: "meanfield-moderate",
        description: "FHN, w = 0.3, d_u = 0",
        params: fhn(0.0, 0.3),
    },
    RegimePreset {
        name: "meanfield-strong",
        description: "FHN, w = 0.5, d_u = 0",
        params: fhn(0.0, 0.5),
    },
    RegimePreset {
        name: "regime-a",
        description: "FHN, strong diffusion d_u = 10, no mean field",
        params: fhn(10.0, 0.0),
    },
    RegimePreset {
        name: "regime-b",
        description: "FHN, strong mean field w = 0.5, no diffusion",
        params: fhn(0.0, 0.5),
    },
    RegimePreset {
        name: "regime-c",
        description: "FHN, moderate diffusion d_u = 0.5 and mean field w = 0.3",
        params: fhn(0.5, 0.3),
    },
    RegimePreset {
        name: "regime-d",
        description: "FHN, moderate diffusion d_u = 0.5, weak mean field w = 0.1",
        params: fhn(0.5, 0.1),
    },
    RegimePreset {
        name: "regime-e",
        description: "FHN, moderate mean field w = 0.3, no diffusion",
        params: fhn(0.0, 0.3),
    },
    RegimePreset {
        name: "regime-f",
        description: "FHN, moderate diffusion d_u = 0.5, no mean field",
        params: fhn(0.5, 0.0),
    },
];

/// Linear-model configurations of the covariance-decay study (a = 1, sigma_u = 0.5).
pub const LINEAR_PRESETS: [RegimePreset; 3] = [
    RegimePreset {
        name: "linear-meanfield",
        description: "linear, mean field only: d_u = 0, w = 5",
        params: linear(0.0, 5.0),
    },
    RegimePreset {
        name: "linear-diffusion",
        description: "linear, diffusion only: d_u = 20, w = 0",
        params: linear(20.0, 0.0),
    },
    RegimePreset {
        name: "linear-combined",
        description: "linear, diffusion and mean field: d_u = 20, w = 5",
        params: linear(20.0, 5.0),
    },
];

/// Looks up a FitzHugh-Nagumo regime by name.
pub fn regime(name: &str) -> Result<RegimePreset> {
    find(REGIMES.iter(), name)
}

/// Looks up any named configuration, FHN regimes and linear presets alike.
pub fn preset(name: &str) -> Result<RegimePreset> {
    find(REGIMES.iter().chain(LINEAR_PRESETS.iter()), name)
}

fn find<'a>(
    mut table: impl Iterator<Item = &'a RegimePreset> + Clone,
    name: &str,
) -> Result<RegimePreset> {
    table
        .clone()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            valid: table.by_ref().map(|p| p.name.to_string()).collect(),
        })
}
