//! Closed-form covariance decay bounds driven by `(lambda_0, lambda_F, lambda_H)`.
//!
//! Every exponential is evaluated against a saturation cap of `1e300`;
//! results that would exceed it are returned at the cap with `vacuous` set.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lattice::{
    cyclic_distance, lipschitz_constants, LatticeModelSpec, LipschitzConstants, ModelKind,
};

pub const SATURATION: f64 = 1e300;

fn ln_cap() -> f64 {
    SATURATION.ln()
}

/// Symbols of the main covariance bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub constants: LipschitzConstants,
    /// `||Sigma^2||_F`
    pub sigma_sq_frob: f64,
    /// `||Sigma_0^2||_F`
    pub sigma0_sq_frob: f64,
    pub q: usize,
    /// `||grad g||_inf`
    pub grad_g_sup: f64,
    pub t: f64,
    pub n: usize,
}

impl BoundInputs {
    pub fn new(
        constants: LipschitzConstants,
        sigma_sq_frob: f64,
        sigma0_sq_frob: f64,
        q: usize,
        grad_g_sup: f64,
        t: f64,
        n: usize,
    ) -> Result<Self> {
        let inputs = Self {
            constants,
            sigma_sq_frob,
            sigma0_sq_frob,
            q,
            grad_g_sup,
            t,
            n,
        };
        inputs.validate()?;
        Ok(inputs)
    }

    pub fn validate(&self) -> Result<()> {
        let norms = [
            self.sigma_sq_frob,
            self.sigma0_sq_frob,
            self.grad_g_sup,
            self.t,
        ];
        if norms.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::contract(format!(
                "norms and t must be finite and nonnegative: {self:?}"
            )));
        }
        if self.q == 0 || self.n < 3 {
            return Err(Error::contract(format!("need q >= 1 and N >= 3: {self:?}")));
        }
        Ok(())
    }

    /// Inputs for a model with `g` a coordinate projection (`||grad g|| = 1`
    /// unless overridden). FitzHugh-Nagumo norms are taken in the coordinates
    /// where the inhibitor is divided by `sqrt(eps)`, matching its constants.
    pub fn for_model(model: &LatticeModelSpec, t: f64, grad_g_sup: f64) -> Result<Self> {
        let constants = lipschitz_constants(model)?;
        let q = model.block_dim();
        let mut scale = DMatrix::<f64>::identity(q, q);
        if let ModelKind::Fhn(p) = model.kind() {
            scale[(1, 1)] = 1.0 / p.epsilon.sqrt();
        }
        let frob_sq = |root: &DMatrix<f64>| {
            let r = &scale * root;
            (&r * r.transpose()).norm()
        };
        Self::new(
            constants,
            frob_sq(model.sigma()),
            frob_sq(model.sigma0()),
            q,
            grad_g_sup,
            t,
            model.n_blocks(),
        )
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    fn prefactor(&self) -> f64 {
        2.0 * (self.q as f64).sqrt() * self.grad_g_sup * self.grad_g_sup
    }
}

/// One evaluation of the main bound at a fixed `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEvaluation {
    pub beta: f64,
    pub lambda_beta: f64,
    pub eta_beta: f64,
    pub local_term: f64,
    pub global_term: f64,
    pub total: f64,
    /// Some exponential hit the saturation cap; the bound carries no information.
    pub vacuous: bool,
}

#[derive(Default)]
struct Saturating {
    hit: bool,
}

impl Saturating {
    fn exp(&mut self, x: f64) -> f64 {
        if x > ln_cap() {
            self.hit = true;
            SATURATION
        } else {
            x.exp()
        }
    }

    /// `(e^{l t} - 1) / l`, `t` at `l = 0`.
    fn growth(&mut self, l: f64, t: f64) -> f64 {
        if l == 0.0 {
            return t;
        }
        let x = l * t;
        if x > 700.0 {
            let log_value = x - l.ln();
            if log_value > ln_cap() {
                self.hit = true;
                return SATURATION;
            }
            return log_value.exp();
        }
        x.exp_m1() / l
    }

    /// Runs `f` and replaces its value by the cap if anything inside saturated.
    fn term(&mut self, f: impl FnOnce(&mut Self) -> f64) -> f64 {
        let mut inner = Saturating::default();
        let v = f(&mut inner);
        if inner.hit || !v.is_finite() || v > SATURATION {
            self.hit = true;
            SATURATION
        } else {
            v
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::contract(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(())
}

/// `lambda_beta = lambda_0 + lambda_F (e^beta + e^-beta)`, `eta_beta = lambda_beta + lambda_H`.
pub fn lambda_eta(beta: f64, c: &LipschitzConstants) -> (f64, f64) {
    let lambda_beta = c.lambda_0 + c.lambda_f * 2.0 * beta.cosh();
    (lambda_beta, lambda_beta + c.lambda_h)
}

/// Local coefficient `C_{beta,t}`: the bound's `e^{-beta d}` prefactor.
fn local_coefficient_raw(s: &mut Saturating, beta: f64, inputs: &BoundInputs) -> f64 {
    let (lambda, _) = lambda_eta(beta, &inputs.constants);
    let t = inputs.t;
    s.term(|s| {
        inputs.prefactor()
            * (s.exp(lambda * t) * inputs.sigma0_sq_frob
                + s.growth(lambda, t) * inputs.sigma_sq_frob)
    })
}

/// `(e^{eta t} - e^{lambda t}) S0 + ((e^{eta t}-1)/eta - (e^{lambda t}-1)/lambda) S`.
fn global_bracket(s: &mut Saturating, lambda: f64, eta: f64, inputs: &BoundInputs) -> f64 {
    let t = inputs.t;
    (s.exp(eta * t) - s.exp(lambda * t)) * inputs.sigma0_sq_frob
        + (s.growth(eta, t) - s.growth(lambda, t)) * inputs.sigma_sq_frob
}

/// The coefficient `C_{beta,t}` multiplying `e^{-beta d(i,j)}` in the local term.
pub fn local_coefficient(beta: f64, inputs: &BoundInputs) -> Result<(f64, bool)> {
    check_beta(beta)?;
    inputs.validate()?;
    let mut s = Saturating::default();
    let c = local_coefficient_raw(&mut s, beta, inputs);
    Ok((c, s.hit))
}

/// Bound on `|cov(g(x_i(t)), g(x_j(t)))|` at block indices `i, j` (1-based).
pub fn cov_bound(i: usize, j: usize, beta: f64, inputs: &BoundInputs) -> Result<BoundEvaluation> {
    check_beta(beta)?;
    inputs.validate()?;
    let d = cyclic_distance(i, j, inputs.n)? as f64;
    let (lambda_beta, eta_beta) = lambda_eta(beta, &inputs.constants);
    let mut s = Saturating::default();

    let local_term = {
        let c = local_coefficient_raw(&mut s, beta, inputs);
        if c >= SATURATION {
            c
        } else {
            c * (-beta * d).exp()
        }
    };
    let global_term = if inputs.constants.lambda_h == 0.0 {
        0.0
    } else {
        s.term(|s| {
            let e = (-beta).exp();
            let lead = inputs.prefactor() * (1.0 + e) / ((1.0 - e) * inputs.n as f64);
            lead * global_bracket(s, lambda_beta, eta_beta, inputs)
        })
    };
    let total = (local_term + global_term).min(SATURATION);
    Ok(BoundEvaluation {
        beta,
        lambda_beta,
        eta_beta,
        local_term,
        global_term,
        total,
        vacuous: s.hit,
    })
}

/// The `beta -> infinity` form available when `lambda_F = 0`. It bounds the
/// covariance between distinct blocks; the diagonal is not covered.
pub fn cov_bound_meanfield_only(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let c = &inputs.constants;
    if c.lambda_f != 0.0 {
        return Err(Error::Misuse(format!(
            "mean-field-only bound requires lambda_F = 0, got {}",
            c.lambda_f
        )));
    }
    let mut s = Saturating::default();
    let v = s.term(|s| {
        inputs.prefactor() / inputs.n as f64
            * global_bracket(s, c.lambda_0, c.lambda_0 + c.lambda_h, inputs)
    });
    Ok(v)
}

/// The local term alone, valid when `lambda_H = 0`.
pub fn cov_bound_diffusion_only(
    i: usize,
    j: usize,
    beta: f64,
    inputs: &BoundInputs,
) -> Result<f64> {
    if inputs.constants.lambda_h != 0.0 {
        return Err(Error::Misuse(format!(
            "diffusion-only bound requires lambda_H = 0, got {}",
            inputs.constants.lambda_h
        )));
    }
    Ok(cov_bound(i, j, beta, inputs)?.local_term)
}

pub const DEFAULT_BETA_RANGE: (f64, f64) = (1e-3, 30.0);

/// Golden-section search for the `beta` minimising the total bound, on
/// `log beta` over `range`. The result is never worse than either endpoint.
pub fn optimize_beta(
    i: usize,
    j: usize,
    inputs: &BoundInputs,
    range: (f64, f64),
) -> Result<(f64, BoundEvaluation)> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::contract(format!(
            "beta range must satisfy 0 < lo < hi, got {range:?}"
        )));
    }
    let eval = |log_b: f64| cov_bound(i, j, log_b.exp(), inputs);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    for _ in 0..60 {
        if f1.total <= f2.total {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2)?;
        }
    }
    let mut best = if f1.total <= f2.total { f1 } else { f2 };
    for end in [cov_bound(i, j, lo, inputs)?, cov_bound(i, j, hi, inputs)?] {
        if end.total <= best.total {
            best = end;
        }
    }
    Ok((best.beta, best))
}

/// Variance bound for the spatial-average estimator at a fixed `beta`.
pub fn estimator_variance_bound(inputs: &BoundInputs, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    inputs.validate()?;
    let (lambda, eta) = lambda_eta(beta, &inputs.constants);
    let t = inputs.t;
    let g2 = inputs.grad_g_sup * inputs.grad_g_sup;
    let lead = 2.0 * g2 / ((1.0 - (-beta).exp()) * inputs.n as f64);
    let mut s = Saturating::default();
    let first = s.term(|s| {
        lead * (2.0 * s.exp(2.0 * lambda * t) * inputs.sigma0_sq_frob
            + 2.0 * s.growth(2.0 * lambda, t) * inputs.sigma_sq_frob)
    });
    let second = s.term(|s| lead * global_bracket(s, lambda, eta, inputs));
    Ok((first + second).min(SATURATION))
}

/// Outcome of the long-time bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LongTimeBound {
    Bounded(f64),
    Unstable,
}

/// `limsup_{t -> inf}` of the main bound with the initial term gone:
/// `sqrt(q) |grad g|^2 ||Sigma^2||_F (-2 e^{-beta d}/lambda_beta
///   + 2(1+e^-beta)/((1-e^-beta) N) (1/lambda_beta - 1/eta_beta))`.
pub fn longtime_bound(
    i: usize,
    j: usize,
    inputs: &BoundInputs,
    beta: f64,
) -> Result<LongTimeBound> {
    check_beta(beta)?;
    inputs.validate()?;
    let c = &inputs.constants;
    if c.lambda_0 + c.lambda_h + 2.0 * c.lambda_f >= 0.0 {
        return Ok(LongTimeBound::Unstable);
    }
    let (lambda, eta) = lambda_eta(beta, c);
    if eta >= 0.0 {
        return Err(Error::StabilityWindow(format!(
            "beta = {beta} gives eta_beta = lambda_0 + lambda_F (e^beta + e^-beta) + lambda_H = {eta} >= 0; \
             choose a smaller beta"
        )));
    }
    let d = cyclic_distance(i, j, inputs.n)? as f64;
    let e = (-beta).exp();
    let half = inputs.prefactor() / 2.0;
    let local = -2.0 * (-beta * d).exp() / lambda;
    let global = if c.lambda_h == 0.0 {
        0.0
    } else {
        2.0 * (1.0 + e) / ((1.0 - e) * inputs.n as f64) * (1.0 / lambda - 1.0 / eta)
    };
    Ok(LongTimeBound::Bounded(
        half * inputs.sigma_sq_frob * (local + global),
    ))
}

/// Drift matrix `G = lambda_0 I + lambda_F (P + P^T) + (lambda_H / N) 11^T` of
/// the linear surrogate, `P` the cyclic shift.
pub fn surrogate_generator(c: &LipschitzConstants, n: usize) -> Result<DMatrix<f64>> {
    if n < 3 {
        return Err(Error::contract(format!("need N >= 3, got {n}")));
    }
    let mean_field = c.lambda_h / n as f64;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let d = crate::lattice::distance0(i, j, n);
        let mut v = mean_field;
        if d == 0 {
            v += c.lambda_0;
        }
        if d == 1 {
            v += c.lambda_f;
        }
        v
    }))
}

/// `Q(s) = e^{G s} (e^{G s})^T = e^{2 G s}` for `0 <= s <= t`.
pub fn surrogate_q(c: &LipschitzConstants, n: usize, t: f64, s: f64) -> Result<DMatrix<f64>> {
    if !(s >= 0.0 && s <= t && t.is_finite()) {
        return Err(Error::contract(format!(
            "need 0 <= s <= t, got s = {s}, t = {t}"
        )));
    }
    let g = surrogate_generator(c, n)?;
    let eig = SymmetricEigen::try_new(g, 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut scaled = eig.eigenvectors.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= (2.0 * eig.eigenvalues[k] * s).exp();
    }
    let q = &scaled * eig.eigenvectors.transpose();
    Ok((&q + q.transpose()) * 0.5)
}

/// Entry-wise upper bound
/// `2 e^{lambda_beta s} (e^{-beta d} + (1 + e^-beta)(e^{lambda_H s} - 1)/((1 - e^-beta) N))`.
pub fn q_entry_bound(
    i: usize,
    j: usize,
    c: &LipschitzConstants,
    n: usize,
    s: f64,
    beta: f64,
) -> Result<f64> {
    check_beta(beta)?;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::contract(format!("s must be nonnegative, got {s}")));
    }
    let d = cyclic_distance(i, j, n)? as f64;
    let (lambda, _) = lambda_eta(beta, c);
    let e = (-beta).exp();
    let spread = (1.0 + e) * (c.lambda_h * s).exp_m1() / ((1.0 - e) * n as f64);
    Ok(2.0 * (lambda * s).exp() * ((-beta * d).exp() + spread))
}
