//! Computations shared by the figure registry, the config runner and the
//! acceptance suite.

use covloc::analytic::circulant_covariance_row;
use covloc::bounds::{cov_bound, optimize_beta, BoundInputs, DEFAULT_BETA_RANGE};
use covloc::estimators::{mean_and_std_error, monte_carlo_covariance, shifted_pair_covariance};
use covloc::models::LinearParams;
use covloc::{
    simulate_ensemble_snapshots, simulate_path, EnsembleState, InitialCondition, IntegratorConfig,
    LatticeModelSpec,
};

use crate::error::CliResult;
use crate::output::{Cell, Table};

/// `cov(x_{1,c}, x_{1+k,c})` for `k = 0..=max_lag` across the samples of `ens`.
pub fn mc_curve(
    ens: &EnsembleState,
    component: usize,
    max_lag: usize,
) -> CliResult<Vec<(f64, f64)>> {
    (0..=max_lag)
        .map(|k| {
            let r = monte_carlo_covariance(ens, 0, k, component)?;
            Ok((r.estimate, r.std_error.unwrap_or(f64::NAN)))
        })
        .collect()
}

/// `cov(u_1, u_{1+k})` of the linear model started from zero, for `k = 0..n`.
pub fn linear_row(params: &LinearParams, n: usize, t: f64) -> CliResult<Vec<f64>> {
    Ok(circulant_covariance_row(params, n, t)?)
}

/// A single simulation recorded every `dt` up to `t_end`.
pub fn pattern_table(
    model: &LatticeModelSpec,
    step: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> CliResult<Table> {
    let cfg = IntegratorConfig::new(step, t_end, seed)?;
    let frames = (t_end / dt).round() as usize;
    let times: Vec<f64> = (0..=frames).map(|f| (f as f64 * dt).min(t_end)).collect();
    let path = simulate_path(
        model,
        &cfg,
        &InitialCondition::SampleInitialLaw,
        Some(&times),
    )?;
    let q = model.block_dim();
    let header: &[&str] = if q == 2 {
        &["t", "block", "u", "v"]
    } else {
        &["t", "block", "u"]
    };
    let mut table = Table::new(header);
    for (t, state) in path {
        for (b, x) in state.chunks(q).enumerate() {
            let mut row: Vec<Cell> = vec![t.into(), (b + 1).into()];
            row.extend(x.iter().map(|&v| Cell::F(v)));
            table.push(row);
        }
    }
    Ok(table)
}

/// One lag of a spatial-average vs Monte Carlo comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub t: f64,
    pub lag: usize,
    pub monte_carlo: f64,
    pub monte_carlo_se: f64,
    pub spatial: f64,
    /// Spread of the single-realization estimates over replicates; `None`
    /// with one replicate.
    pub spatial_se: Option<f64>,
}

impl ComparisonRow {
    pub fn z_score(&self) -> Option<f64> {
        let se = self.spatial_se?.hypot(self.monte_carlo_se);
        Some((self.spatial - self.monte_carlo) / se)
    }
}

/// Protocol of the comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSpec {
    pub step: f64,
    pub seed: u64,
    pub times: Vec<f64>,
    /// Monte Carlo ensemble size; samples `0..mc_k`.
    pub mc_k: usize,
    /// Independent single-realization spatial estimates; samples
    /// `mc_k..mc_k + replicates`, disjoint from the Monte Carlo streams.
    pub replicates: usize,
    pub component: usize,
    pub max_lag: usize,
}

/// Monte Carlo `cov(x_1, x_{1+k})` against the shifted-pair spatial average
/// of single realizations.
pub fn spatial_vs_mc(
    model: &LatticeModelSpec,
    spec: &ComparisonSpec,
) -> CliResult<Vec<ComparisonRow>> {
    let t_end = *spec.times.last().expect("at least one output time");
    let cfg = IntegratorConfig::new(spec.step, t_end, spec.seed)?;
    let mc = simulate_ensemble_snapshots(model, &cfg, spec.mc_k, 0, &spec.times)?;
    let reps = simulate_ensemble_snapshots(model, &cfg, spec.replicates, spec.mc_k, &spec.times)?;
    let mut rows = Vec::new();
    for (mc_ens, rep_ens) in mc.iter().zip(&reps) {
        let mc_vals = mc_curve(mc_ens, spec.component, spec.max_lag)?;
        let singles: Vec<EnsembleState> = (0..rep_ens.n_samples())
            .map(|j| {
                EnsembleState::new(
                    rep_ens.sample(j).to_vec(),
                    1,
                    rep_ens.n_blocks(),
                    rep_ens.block_dim(),
                    rep_ens.time(),
                    vec![rep_ens.seeds()[j]],
                )
            })
            .collect::<Result<_, _>>()?;
        for (lag, &(m, m_se)) in mc_vals.iter().enumerate() {
            let est: Vec<f64> = singles
                .iter()
                .map(|e| shifted_pair_covariance(e, lag, spec.component).map(|r| r.estimate))
                .collect::<Result<_, _>>()?;
            let (spatial, spatial_se) = mean_and_std_error(&est);
            rows.push(ComparisonRow {
                t: mc_ens.time(),
                lag,
                monte_carlo: m,
                monte_carlo_se: m_se,
                spatial,
                spatial_se,
            });
        }
    }
    Ok(rows)
}

pub fn comparison_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(&[
        "t",
        "lag",
        "monte_carlo",
        "monte_carlo_se",
        "spatial",
        "spatial_se",
        "z",
    ]);
    for r in rows {
        t.push(vec![
            r.t.into(),
            r.lag.into(),
            r.monte_carlo.into(),
            r.monte_carlo_se.into(),
            r.spatial.into(),
            r.spatial_se.into(),
            r.z_score().into(),
        ]);
    }
    t
}

/// Bound rows `(i, j, beta, local, global, total, vacuous)` for `i = 1` and
/// every `j`, at each fixed beta and optionally at the minimizing beta.
pub fn bounds_table(inputs: &BoundInputs, betas: &[f64], optimize: bool) -> CliResult<Table> {
    let mut t = Table::new(&[
        "i", "j", "beta", "local", "global", "total", "vacuous", "choice",
    ]);
    let mut push = |j: usize, e: covloc::bounds::BoundEvaluation, choice: &str| {
        t.push(vec![
            1usize.into(),
            j.into(),
            e.beta.into(),
            e.local_term.into(),
            e.global_term.into(),
            e.total.into(),
            e.vacuous.into(),
            choice.into(),
        ]);
    };
    for &beta in betas {
        for j in 1..=inputs.n {
            push(j, cov_bound(1, j, beta, inputs)?, "fixed");
        }
    }
    if optimize {
        for j in 1..=inputs.n {
            let (_, e) = optimize_beta(1, j, inputs, DEFAULT_BETA_RANGE)?;
            push(j, e, "optimized");
        }
    }
    Ok(t)
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
