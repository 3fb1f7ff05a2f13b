//! Subcommand implementations behind the `covloc` binary.

use std::path::{Path, PathBuf};

use covloc::analytic::{analytic_covariance, build_a};
use covloc::bounds::{cov_bound, local_coefficient, BoundInputs};
use covloc::estimators::{monte_carlo_covariance, sample_covariance, shifted_pair_covariance};
use covloc::io::{
    decode_snapshot, encode_covariance, encode_ensemble, read_covariance_csv, write_covariance_csv,
    write_ensemble_csv,
};
use covloc::localization::{
    choose_bandwidth, localization_error_bound, localize, sample_size_recommendation,
    spectral_norm, SampleSizeInputs,
};
use covloc::models::{PresetParams, LINEAR_PRESETS, REGIMES};
use covloc::{simulate_ensemble, BlockCovariance, EnsembleState};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{ExperimentConfig, OutputKind, ResolvedConfig};
use crate::error::{CliError, CliResult};
use crate::experiments::{
    bounds_table, comparison_table, linear_row, spatial_vs_mc, ComparisonSpec,
};
use crate::output::{OutputSet, Table};
use crate::svg::LinePlot;

pub const DEFAULT_OUT: &str = "covloc-out";

const RMT_CAVEAT: &str = "the sample-size constant c is not known in closed form; \
recommended_k scales with the configured c_constant, and the rule assumes Gaussian states";

/// Reads and validates a config, applying a `--seed` override.
pub fn load_config(path: &Path, seed: Option<u64>) -> CliResult<ResolvedConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.resolve()
}

/// Output directory: `--out`, else the config's `output_dir`, else `covloc-out`.
pub fn output_dir(flag: Option<&Path>, config_dir: Option<&Path>) -> PathBuf {
    flag.or(config_dir)
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

struct Runner<'a> {
    cfg: &'a ResolvedConfig,
    ensemble: Option<EnsembleState>,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a ResolvedConfig) -> Self {
        Self {
            cfg,
            ensemble: None,
        }
    }

    fn ensemble(&mut self) -> CliResult<&EnsembleState> {
        if self.ensemble.is_none() {
            let model = self.cfg.model()?;
            let ens = simulate_ensemble(&model, &self.cfg.integrator()?, self.cfg.n_samples)?;
            self.ensemble = Some(ens);
        }
        Ok(self.ensemble.as_ref().expect("just filled"))
    }

    fn comp(&self) -> usize {
        self.cfg.component - 1
    }

    fn bound_inputs(&self, n: usize) -> CliResult<BoundInputs> {
        let model = self.cfg.model_with_n(n)?;
        Ok(BoundInputs::for_model(
            &model,
            self.cfg.t_end,
            self.cfg.bounds.grad_g_sup,
        )?)
    }

    fn exact_linear(&self) -> CliResult<Option<BlockCovariance>> {
        let Some(p) = self.cfg.linear_params() else {
            return Ok(None);
        };
        let n = self.cfg.n_blocks;
        let sys = build_a(&p, n)?;
        Ok(Some(analytic_covariance(
            &sys,
            &DMatrix::zeros(n, n),
            p.sigma_u,
            self.cfg.t_end,
        )?))
    }

    fn run(&mut self, kind: OutputKind, out: &mut OutputSet) -> CliResult<()> {
        match kind {
            OutputKind::CovCurve => self.cov_curve(out),
            OutputKind::CovVsN => self.cov_vs_n(out),
            OutputKind::BoundsOverlay => self.bounds(out),
            OutputKind::SpatialVsMc => self.spatial_vs_mc(out),
            OutputKind::LocalizationReport => self.localization(out),
        }
    }

    fn cov_curve(&mut self, out: &mut OutputSet) -> CliResult<()> {
        let comp = self.comp();
        let n = self.cfg.n_blocks;
        let exact = match self.cfg.linear_params() {
            Some(p) => Some(linear_row(&p, n, self.cfg.t_end)?),
            None => None,
        };
        let ens = self.ensemble()?;
        let mut table = Table::new(&[
            "lag",
            "monte_carlo",
            "monte_carlo_se",
            "spatial",
            "spatial_se",
            "analytic",
        ]);
        let (mut mc_pts, mut ex_pts) = (Vec::new(), Vec::new());
        for lag in 0..=n / 2 {
            let mc = monte_carlo_covariance(ens, 0, lag, comp)?;
            let sp = shifted_pair_covariance(ens, lag, comp)?;
            let a = exact.as_ref().map(|row| row[lag]);
            table.push(vec![
                lag.into(),
                mc.estimate.into(),
                mc.std_error.into(),
                sp.estimate.into(),
                sp.std_error.into(),
                a.into(),
            ]);
            mc_pts.push((lag as f64, mc.estimate));
            if let Some(a) = a {
                ex_pts.push((lag as f64, a));
            }
        }
        out.write_table("cov_curve.csv", &table)?;
        let mut plot =
            LinePlot::new("cov(x_1, x_(1+k))", "k", "covariance").line("monte carlo", mc_pts);
        if !ex_pts.is_empty() {
            plot = plot.dashed("analytic", ex_pts);
        }
        out.write_plot("cov_curve.svg", &plot)
    }

    fn cov_vs_n(&mut self, out: &mut OutputSet) -> CliResult<()> {
        let comp = self.comp();
        let beta = self.cfg.bounds.betas[0];
        let mut table = Table::new(&[
            "n",
            "monte_carlo",
            "monte_carlo_se",
            "n_times_monte_carlo",
            "analytic",
            "bound",
        ]);
        for &n in &self.cfg.n_values {
            let model = self.cfg.model_with_n(n)?;
            let ens = simulate_ensemble(&model, &self.cfg.integrator()?, self.cfg.n_samples)?;
            let mc = monte_carlo_covariance(&ens, 0, 1, comp)?;
            let exact = match self.cfg.linear_params() {
                Some(p) => Some(linear_row(&p, n, self.cfg.t_end)?[1]),
                None => None,
            };
            let bound = cov_bound(1, 2, beta, &self.bound_inputs(n)?)?;
            table.push(vec![
                n.into(),
                mc.estimate.into(),
                mc.std_error.into(),
                (n as f64 * mc.estimate).into(),
                exact.into(),
                bound.total.into(),
            ]);
        }
        out.write_table("cov_vs_n.csv", &table)
    }

    fn bounds(&mut self, out: &mut OutputSet) -> CliResult<()> {
        let inputs = self.bound_inputs(self.cfg.n_blocks)?;
        let table = bounds_table(&inputs, &self.cfg.bounds.betas, self.cfg.bounds.optimize)?;
        out.write_table("bounds.csv", &table)
    }

    fn spatial_vs_mc(&mut self, out: &mut OutputSet) -> CliResult<()> {
        let model = self.cfg.model()?;
        let c = &self.cfg.comparison;
        let spec = ComparisonSpec {
            step: self.cfg.step_size,
            seed: self.cfg.master_seed,
            times: c.times.clone(),
            mc_k: self.cfg.n_samples,
            replicates: c.replicates,
            component: self.comp(),
            max_lag: c.max_lag,
        };
        let rows = spatial_vs_mc(&model, &spec)?;
        out.write_table("spatial_vs_mc.csv", &comparison_table(&rows))
    }

    fn localization(&mut self, out: &mut OutputSet) -> CliResult<()> {
        let loc = self.cfg.localization.clone();
        let n = self.cfg.n_blocks;
        let inputs = self.bound_inputs(n)?;
        let (coef, vacuous) = local_coefficient(loc.beta, &inputs)?;
        let exact = self.exact_linear()?;
        let sample = sample_covariance(self.ensemble()?)?;
        let choice = choose_bandwidth(loc.epsilon, loc.beta, coef, n)?;
        let localized = localize(&sample, choice.bandwidth)?;
        let cov_norm = match &exact {
            Some(c) => spectral_norm(c.data())?,
            None => spectral_norm(sample.data())?,
        };
        let recommended_k = sample_size_recommendation(&SampleSizeInputs {
            epsilon: loc.epsilon,
            bandwidth: choice.bandwidth,
            n_blocks: n,
            cov_norm,
            failure_prob: loc.failure_prob,
            c_constant: loc.c_constant,
        })?;
        let measured = match &exact {
            Some(c) => Some(MeasuredErrors {
                truncation_error: spectral_norm(
                    &(c.data() - localize(c, choice.bandwidth)?.data()),
                )?,
                sample_error: spectral_norm(&(sample.data() - c.data()))?,
                localized_error: spectral_norm(&(localized.data() - c.data()))?,
            }),
            None => None,
        };
        let report = LocalizationReport {
            bandwidth: choice.bandwidth,
            insufficient: choice.insufficient,
            epsilon: loc.epsilon,
            beta: loc.beta,
            local_coefficient: coef,
            coefficient_vacuous: vacuous,
            error_bound: localization_error_bound(choice.bandwidth, loc.beta, coef)?,
            cov_norm,
            recommended_k,
            n_samples: self.cfg.n_samples,
            c_constant: loc.c_constant,
            failure_prob: loc.failure_prob,
            caveat: RMT_CAVEAT,
            measured,
        };
        let mut bytes = Vec::new();
        write_covariance_csv(&localized, &mut bytes)?;
        out.write_bytes("localized_cov.csv", &bytes)?;
        out.write_jsonl("localization.jsonl", &[report])?;
        if exact.is_none() {
            out.note("no exact reference for this model; measured errors omitted");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeasuredErrors {
    /// `||C - C^L||_2` of the exact covariance.
    pub truncation_error: f64,
    /// `||C_hat - C||_2`.
    pub sample_error: f64,
    /// `||C_hat^L - C||_2`.
    pub localized_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationReport {
    pub bandwidth: usize,
    pub insufficient: bool,
    pub epsilon: f64,
    pub beta: f64,
    pub local_coefficient: f64,
    pub coefficient_vacuous: bool,
    pub error_bound: f64,
    pub cov_norm: f64,
    pub recommended_k: usize,
    pub n_samples: usize,
    pub c_constant: f64,
    pub failure_prob: f64,
    pub caveat: &'static str,
    pub measured: Option<MeasuredErrors>,
}

/// Runs every product listed in `outputs`.
pub fn run_config(cfg: &ResolvedConfig, dir: &Path, svg: bool) -> CliResult<Vec<String>> {
    let mut out = OutputSet::create(dir, svg)?;
    let mut runner = Runner::new(cfg);
    for &kind in &cfg.outputs {
        runner.run(kind, &mut out)?;
    }
    out.finish("run", cfg)
}

/// One product only, regardless of `outputs`.
pub fn run_single(
    cfg: &ResolvedConfig,
    kind: OutputKind,
    command: &str,
    dir: &Path,
    svg: bool,
) -> CliResult<Vec<String>> {
    let mut out = OutputSet::create(dir, svg)?;
    Runner::new(cfg).run(kind, &mut out)?;
    out.finish(command, cfg)
}

/// Ensemble at `t_end` as CSV and CVL1 binary.
pub fn run_simulate(cfg: &ResolvedConfig, dir: &Path) -> CliResult<Vec<String>> {
    let mut out = OutputSet::create(dir, false)?;
    let ens = simulate_ensemble(&cfg.model()?, &cfg.integrator()?, cfg.n_samples)?;
    let mut csv_bytes = Vec::new();
    write_ensemble_csv(&ens, &mut csv_bytes)?;
    out.write_bytes("ensemble.csv", &csv_bytes)?;
    out.write_bytes("ensemble.cvl", &encode_ensemble(&ens))?;
    out.finish("simulate", cfg)
}

/// How the bandwidth of `covloc localize` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BandwidthRule {
    Fixed {
        bandwidth: usize,
    },
    FromBound {
        epsilon: f64,
        beta: f64,
        coefficient: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizeRequest {
    pub input: PathBuf,
    pub block_dim: usize,
    pub rule: BandwidthRule,
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct LocalizeRecord {
    bandwidth: usize,
    insufficient: bool,
    error_bound: Option<f64>,
    measured_error: Option<f64>,
    raw_error: Option<f64>,
}

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "cvl")
}

/// Reads a covariance as CVL1 binary (`.cvl`) or `row,col,value` CSV.
pub fn read_covariance(path: &Path, block_dim: usize) -> CliResult<(BlockCovariance, f64)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    if is_binary(path) {
        let snap = decode_snapshot(&bytes)?;
        let t = snap.time;
        Ok((snap.into_covariance()?, t))
    } else {
        Ok((read_covariance_csv(bytes.as_slice(), block_dim)?, 0.0))
    }
}

pub fn run_localize(req: &LocalizeRequest, dir: &Path) -> CliResult<Vec<String>> {
    let (c, time) = read_covariance(&req.input, req.block_dim)?;
    let reference = match &req.reference {
        Some(p) => Some(read_covariance(p, c.block_dim())?.0),
        None => None,
    };
    if let Some(r) = &reference {
        if r.data().shape() != c.data().shape() || r.block_dim() != c.block_dim() {
            return Err(CliError::Config(
                "reference covariance has a different shape".into(),
            ));
        }
    }
    let (bandwidth, insufficient, error_bound) = match req.rule {
        BandwidthRule::Fixed { bandwidth } => (bandwidth, false, None),
        BandwidthRule::FromBound {
            epsilon,
            beta,
            coefficient,
        } => {
            let ch = choose_bandwidth(epsilon, beta, coefficient, c.n_blocks())?;
            let b = localization_error_bound(ch.bandwidth, beta, coefficient)?;
            (ch.bandwidth, ch.insufficient, Some(b))
        }
    };
    let localized = localize(&c, bandwidth)?;
    let (measured_error, raw_error) = match &reference {
        Some(r) => (
            Some(spectral_norm(&(localized.data() - r.data()))?),
            Some(spectral_norm(&(c.data() - r.data()))?),
        ),
        None => (None, None),
    };
    let mut out = OutputSet::create(dir, false)?;
    if is_binary(&req.input) {
        out.write_bytes("localized.cvl", &encode_covariance(&localized, time))?;
    } else {
        let mut bytes = Vec::new();
        write_covariance_csv(&localized, &mut bytes)?;
        out.write_bytes("localized.csv", &bytes)?;
    }
    out.write_jsonl(
        "report.jsonl",
        &[LocalizeRecord {
            bandwidth,
            insufficient,
            error_bound,
            measured_error,
            raw_error,
        }],
    )?;
    out.finish("localize", req)
}

/// Preset catalogue as CSV.
pub fn models_table() -> Table {
    let mut t = Table::new(&["name", "kind", "d_u", "w", "description"]);
    for p in LINEAR_PRESETS.iter().chain(REGIMES.iter()) {
        let (kind, d_u, w) = match p.params {
            PresetParams::Linear(l) => ("linear", l.d_u, l.w),
            PresetParams::Fhn(f) => ("fhn", f.d_u, f.w),
        };
        t.push(vec![
            p.name.into(),
            kind.into(),
            d_u.into(),
            w.into(),
            p.description.into(),
        ]);
    }
    t
}
