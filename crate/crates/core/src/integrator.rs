//! Explicit Euler-Maruyama time stepping for single paths and parallel ensembles.
//!
//! Every sample draws its Gaussian increments from its own ChaCha8 stream,
//! keyed by the master seed and indexed by a per-sample derived stream id, so
//! an ensemble is a pure function of `(model, config, K)` whatever the worker
//! count or scheduling order.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::LatticeModelSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub step_size: f64,
    pub t_end: f64,
    pub master_seed: u64,
}

impl IntegratorConfig {
    pub fn new(step_size: f64, t_end: f64, master_seed: u64) -> Result<Self> {
        let cfg = Self {
            step_size,
            t_end,
            master_seed,
        };
        cfg.n_steps()?;
        Ok(cfg)
    }

    /// Number of steps `t_end / h`, which must be an integer to within 1e-9.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::contract(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::contract(format!(
                "t_end must be nonnegative, got {}",
                self.t_end
            )));
        }
        steps_for(self.t_end, self.step_size)
    }
}

fn steps_for(t: f64, h: f64) -> Result<usize> {
    let ratio = t / h;
    let rounded = ratio.round();
    if (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::contract(format!(
            "time {t} is not a multiple of the step size {h}"
        )));
    }
    Ok(rounded as usize)
}

/// Source of i.i.d. standard normal draws.
pub trait NoiseSource {
    fn fill_standard_normal(&mut self, out: &mut [f64]);
}

/// Bijective 64-bit mixer (splitmix64 finalizer).
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id of sample `index`; injective in `index` for a fixed master seed.
pub fn derive_sample_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed ^ mix64(index))
}

/// Per-sample counter-based Gaussian stream.
#[derive(Debug, Clone)]
pub struct StreamNoise {
    rng: ChaCha8Rng,
}

impl StreamNoise {
    pub fn for_sample(master_seed: u64, index: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = master_seed;
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            chunk.copy_from_slice(&mix64(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(derive_sample_seed(master_seed, index));
        Self { rng }
    }
}

impl NoiseSource for StreamNoise {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.rng.sample(StandardNormal);
        }
    }
}

/// Noise operator `sqrt(h) Sigma` applied to each `q`-block.
#[derive(Debug, Clone)]
struct BlockNoise {
    q: usize,
    scaled: Vec<f64>,
    diagonal: bool,
}

impl BlockNoise {
    fn new(model: &LatticeModelSpec, h: f64) -> Self {
        let q = model.block_dim();
        let s = h.sqrt();
        let sigma = model.sigma();
        let scaled: Vec<f64> = (0..q * q).map(|k| s * sigma[(k / q, k % q)]).collect();
        let diagonal = (0..q).all(|r| (0..q).all(|c| r == c || sigma[(r, c)] == 0.0));
        Self {
            q,
            scaled,
            diagonal,
        }
    }

    #[inline]
    fn apply_add(&self, state: &mut [f64], xi: &[f64]) {
        let q = self.q;
        if self.diagonal {
            for (block_x, block_xi) in state.chunks_exact_mut(q).zip(xi.chunks_exact(q)) {
                for m in 0..q {
                    block_x[m] += self.scaled[m * q + m] * block_xi[m];
                }
            }
        } else {
            for (block_x, block_xi) in state.chunks_exact_mut(q).zip(xi.chunks_exact(q)) {
                for (m, x) in block_x.iter_mut().enumerate() {
                    let row = &self.scaled[m * q..(m + 1) * q];
                    *x += row.iter().zip(block_xi).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
}

/// Reusable Euler-Maruyama stepper holding its scratch buffers.
#[derive(Debug, Clone)]
pub struct EulerMaruyama<'m> {
    model: &'m LatticeModelSpec,
    h: f64,
    noise_op: BlockNoise,
    drift: Vec<f64>,
}

impl<'m> EulerMaruyama<'m> {
    pub fn new(model: &'m LatticeModelSpec, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::contract(format!(
                "step size must be positive, got {h}"
            )));
        }
        Ok(Self {
            model,
            h,
            noise_op: BlockNoise::new(model, h),
            drift: vec![0.0; model.dim()],
        })
    }

    /// `x <- x + h * drift(t, x) + sqrt(h) * Sigma * xi`, in place.
    pub fn step(&mut self, state: &mut [f64], t: f64, xi: &[f64]) -> Result<()> {
        let q = self.model.block_dim();
        self.model.drift(t, state, &mut self.drift);
        if let Some(k) = self.drift.iter().position(|v| !v.is_finite()) {
            return Err(blowup(k / q, t));
        }
        for (x, d) in state.iter_mut().zip(&self.drift) {
            *x += self.h * d;
        }
        self.noise_op.apply_add(state, xi);
        if let Some(k) = state.iter().position(|v| !v.is_finite()) {
            return Err(blowup(k / q, t));
        }
        Ok(())
    }
}

fn blowup(block0: usize, t: f64) -> Error {
    Error::NumericalBlowup {
        block: block0 + 1,
        step: 0,
        time: t,
        sample: None,
    }
}

fn check_finite_state(state: &[f64], q: usize) -> Result<()> {
    match state.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(blowup(k / q, 0.0)),
        None => Ok(()),
    }
}

/// One Euler-Maruyama step on a copy of `state`, given an `N x q` standard normal draw.
pub fn euler_step(
    state: &[f64],
    t: f64,
    model: &LatticeModelSpec,
    h: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    if state.len() != model.dim() || noise.len() != model.dim() {
        return Err(Error::contract(format!(
            "state and noise must have length {}",
            model.dim()
        )));
    }
    check_finite_state(state, model.block_dim())?;
    let mut next = state.to_vec();
    EulerMaruyama::new(model, h)?.step(&mut next, t, noise)?;
    Ok(next)
}

/// Advances `state` by `n_steps` steps from `t0`, drawing increments from `noise`.
pub fn integrate(
    model: &LatticeModelSpec,
    state: &mut [f64],
    t0: f64,
    h: f64,
    n_steps: usize,
    noise: &mut dyn NoiseSource,
) -> Result<()> {
    let mut stepper = EulerMaruyama::new(model, h)?;
    let mut xi = vec![0.0; model.dim()];
    for n in 0..n_steps {
        noise.fill_standard_normal(&mut xi);
        let t = t0 + n as f64 * h;
        stepper.step(state, t, &xi).map_err(|e| match e {
            Error::NumericalBlowup { block, sample, .. } => Error::NumericalBlowup {
                block,
                step: n,
                time: t,
                sample,
            },
            other => other,
        })?;
    }
    Ok(())
}

/// Starting point of a path.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// i.i.d. blocks from `N(m0, Sigma0 Sigma0^T)`, drawn from the path's own stream.
    SampleInitialLaw,
    Fixed(Vec<f64>),
}

fn initial_state(
    model: &LatticeModelSpec,
    initial: &InitialCondition,
    noise: &mut dyn NoiseSource,
) -> Result<Vec<f64>> {
    let q = model.block_dim();
    match initial {
        InitialCondition::Fixed(x) => {
            if x.len() != model.dim() {
                return Err(Error::contract(format!(
                    "initial state must have length {}",
                    model.dim()
                )));
            }
            check_finite_state(x, q)?;
            Ok(x.clone())
        }
        InitialCondition::SampleInitialLaw => {
            let mut xi = vec![0.0; model.dim()];
            noise.fill_standard_normal(&mut xi);
            let (m0, s0) = (model.m0(), model.sigma0());
            let mut x = vec![0.0; model.dim()];
            for (block_x, block_xi) in x.chunks_exact_mut(q).zip(xi.chunks_exact(q)) {
                for m in 0..q {
                    block_x[m] = m0[m] + (0..q).map(|k| s0[(m, k)] * block_xi[k]).sum::<f64>();
                }
            }
            Ok(x)
        }
    }
}

/// Validated step indices for output times; `None` means `{0, t_end}`.
fn output_steps(config: &IntegratorConfig, times: Option<&[f64]>) -> Result<Vec<usize>> {
    let total = config.n_steps()?;
    let steps = match times {
        None => {
            let mut v = vec![0, total];
            v.dedup();
            v
        }
        Some(ts) => {
            let mut v = Vec::with_capacity(ts.len());
            for &t in ts {
                if !(0.0..=config.t_end * (1.0 + 1e-12)).contains(&t) {
                    return Err(Error::contract(format!(
                        "output time {t} outside [0, {}]",
                        config.t_end
                    )));
                }
                v.push(steps_for(t, config.step_size)?);
            }
            if v.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::contract("output times must be non-decreasing"));
            }
            v
        }
    };
    Ok(steps)
}

fn run_recorded(
    model: &LatticeModelSpec,
    config: &IntegratorConfig,
    initial: &InitialCondition,
    steps: &[usize],
    noise: &mut dyn NoiseSource,
) -> Result<Vec<Vec<f64>>> {
    let h = config.step_size;
    let mut state = initial_state(model, initial, noise)?;
    let mut out = Vec::with_capacity(steps.len());
    let mut done = 0;
    for &target in steps {
        integrate(model, &mut state, done as f64 * h, h, target - done, noise).map_err(
            |e| match e {
                Error::NumericalBlowup {
                    block,
                    step,
                    time,
                    sample,
                } => Error::NumericalBlowup {
                    block,
                    step: step + done,
                    time,
                    sample,
                },
                other => other,
            },
        )?;
        done = target;
        out.push(state.clone());
    }
    Ok(out)
}

/// One realization recorded at `output_times` (defaults to `{0, t_end}`),
/// driven by the stream of sample 0.
pub fn simulate_path(
    model: &LatticeModelSpec,
    config: &IntegratorConfig,
    initial: &InitialCondition,
    output_times: Option<&[f64]>,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let steps = output_steps(config, output_times)?;
    let mut noise = StreamNoise::for_sample(config.master_seed, 0);
    let states = run_recorded(model, config, initial, &steps, &mut noise)?;
    Ok(steps
        .iter()
        .map(|&s| s as f64 * config.step_size)
        .zip(states)
        .collect())
}

/// `K` independent realizations of the `N x q` lattice at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    samples: Vec<f64>,
    n_samples: usize,
    n_blocks: usize,
    block_dim: usize,
    time: f64,
    seeds: Vec<u64>,
}

impl EnsembleState {
    /// `samples` is sample-major, then block, then component.
    pub fn new(
        samples: Vec<f64>,
        n_samples: usize,
        n_blocks: usize,
        block_dim: usize,
        time: f64,
        seeds: Vec<u64>,
    ) -> Result<Self> {
        if n_samples == 0 || n_blocks == 0 || block_dim == 0 {
            return Err(Error::contract("ensemble dimensions must be positive"));
        }
        let expected = n_samples
            .checked_mul(n_blocks)
            .and_then(|v| v.checked_mul(block_dim))
            .ok_or_else(|| Error::contract("ensemble dimensions overflow"))?;
        if samples.len() != expected {
            return Err(Error::contract(format!(
                "expected {expected} values, got {}",
                samples.len()
            )));
        }
        if seeds.len() != n_samples {
            return Err(Error::contract("one seed per sample is required"));
        }
        let mut seen = HashSet::with_capacity(seeds.len());
        if !seeds.iter().all(|s| seen.insert(*s)) {
            return Err(Error::contract("sample seeds must be pairwise distinct"));
        }
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::contract("ensemble time must be nonnegative"));
        }
        Ok(Self {
            samples,
            n_samples,
            n_blocks,
            block_dim,
            time,
            seeds,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.samples
    }

    /// Flat `N*q` state of sample `j` (0-based).
    pub fn sample(&self, j: usize) -> &[f64] {
        let d = self.n_blocks * self.block_dim;
        &self.samples[j * d..(j + 1) * d]
    }

    pub fn iter_samples(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.n_blocks * self.block_dim)
    }

    /// Value of 0-based `component` at 0-based `block` in sample `j`.
    #[inline]
    pub fn value(&self, j: usize, block: usize, component: usize) -> f64 {
        self.samples[(j * self.n_blocks + block) * self.block_dim + component]
    }

    /// The first `k` samples as a new ensemble.
    pub fn take(&self, k: usize) -> Result<Self> {
        let k = k.min(self.n_samples);
        let d = self.n_blocks * self.block_dim;
        Self::new(
            self.samples[..k * d].to_vec(),
            k,
            self.n_blocks,
            self.block_dim,
            self.time,
            self.seeds[..k].to_vec(),
        )
    }
}

/// Ensemble of `K` samples at `t_end`.
pub fn simulate_ensemble(
    model: &LatticeModelSpec,
    config: &IntegratorConfig,
    n_samples: usize,
) -> Result<EnsembleState> {
    let t_end = [config.t_end];
    let mut snaps = simulate_ensemble_snapshots(model, config, n_samples, 0, &t_end)?;
    Ok(snaps.pop().expect("one snapshot requested"))
}

/// Ensembles of samples `first..first + K` recorded at each of `output_times`.
///
/// Samples may run concurrently on the ambient rayon pool; results are
/// assembled in sample order and the first failing sample (by index) is
/// reported, so output is independent of the worker count.
pub fn simulate_ensemble_snapshots(
    model: &LatticeModelSpec,
    config: &IntegratorConfig,
    n_samples: usize,
    first: usize,
    output_times: &[f64],
) -> Result<Vec<EnsembleState>> {
    if n_samples == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let steps = output_steps(config, Some(output_times))?;
    let runs: Vec<Result<Vec<Vec<f64>>>> = (first..first + n_samples)
        .into_par_iter()
        .map(|j| {
            let mut noise = StreamNoise::for_sample(config.master_seed, j as u64);
            run_recorded(
                model,
                config,
                &InitialCondition::SampleInitialLaw,
                &steps,
                &mut noise,
            )
            .map_err(|e| e.with_sample(j))
        })
        .collect();

    let mut per_sample = Vec::with_capacity(n_samples);
    for r in runs {
        per_sample.push(r?);
    }
    let seeds: Vec<u64> = (first..first + n_samples)
        .map(|j| derive_sample_seed(config.master_seed, j as u64))
        .collect();
    let d = model.dim();
    steps
        .iter()
        .enumerate()
        .map(|(slot, &s)| {
            let mut flat = Vec::with_capacity(n_samples * d);
            for run in &per_sample {
                flat.extend_from_slice(&run[slot]);
            }
            EnsembleState::new(
                flat,
                n_samples,
                model.n_blocks(),
                model.block_dim(),
                s as f64 * config.step_size,
                seeds.clone(),
            )
        })
        .collect()
}
