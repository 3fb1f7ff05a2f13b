//! TOML experiment configuration.
//!
//! ```toml
//! model = "linear-diffusion"      # preset name, or a [model] table
//! n_blocks = 64
//! n_samples = 256
//! t_end = 5.0
//! master_seed = 7
//! outputs = ["cov-curve", "bounds-overlay"]
//!
//! [bounds]
//! betas = [0.2]
//! ```
//!
//! An explicit model is a table tagged by `kind`:
//!
//! ```toml
//! [model]
//! kind = "fhn"
//! d_u = 0.5
//! w = 0.1
//! ```
//!
//! Omitted parameters take the library defaults (`a = 1, sigma_u = 0.5` for
//! the linear model; `eps = 0.01, a = 1.05, delta1 = delta2 = 0.4` for FHN).

use std::path::PathBuf;

use covloc::models::{FhnParams, LinearParams, PresetParams};
use covloc::{preset, LatticeModelSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    CovCurve,
    CovVsN,
    BoundsOverlay,
    SpatialVsMc,
    LocalizationReport,
}

impl OutputKind {
    pub fn label(self) -> &'static str {
        match self {
            OutputKind::CovCurve => "cov-curve",
            OutputKind::CovVsN => "cov-vs-n",
            OutputKind::BoundsOverlay => "bounds-overlay",
            OutputKind::SpatialVsMc => "spatial-vs-mc",
            OutputKind::LocalizationReport => "localization-report",
        }
    }
}

fn default_outputs() -> Vec<OutputKind> {
    vec![OutputKind::CovCurve]
}

fn default_component() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    #[serde(default = "BoundsSection::default_betas")]
    pub betas: Vec<f64>,
    #[serde(default = "BoundsSection::default_grad")]
    pub grad_g_sup: f64,
    /// Also report the bound at the minimizing beta for each pair.
    #[serde(default)]
    pub optimize: bool,
}

impl BoundsSection {
    fn default_betas() -> Vec<f64> {
        vec![0.2]
    }

    fn default_grad() -> f64 {
        1.0
    }
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self {
            betas: Self::default_betas(),
            grad_g_sup: Self::default_grad(),
            optimize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizationSection {
    pub epsilon: f64,
    #[serde(default = "LocalizationSection::default_beta")]
    pub beta: f64,
    #[serde(default = "LocalizationSection::default_delta")]
    pub failure_prob: f64,
    #[serde(default = "LocalizationSection::default_c")]
    pub c_constant: f64,
}

impl LocalizationSection {
    fn default_beta() -> f64 {
        0.2
    }

    fn default_delta() -> f64 {
        0.05
    }

    fn default_c() -> f64 {
        1.0
    }
}

impl Default for LocalizationSection {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            beta: Self::default_beta(),
            failure_prob: Self::default_delta(),
            c_constant: Self::default_c(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSection {
    /// Output times; defaults to `[t_end]`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    #[serde(default = "ComparisonSection::default_replicates")]
    pub replicates: usize,
    /// Largest lag reported; defaults to `floor(N/2)`.
    #[serde(default)]
    pub max_lag: Option<usize>,
}

impl ComparisonSection {
    fn default_replicates() -> usize {
        20
    }
}

impl Default for ComparisonSection {
    fn default() -> Self {
        Self {
            times: None,
            replicates: Self::default_replicates(),
            max_lag: None,
        }
    }
}

/// Explicit model parameters; missing values take the library defaults.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelTable {
    Linear {
        a: Option<f64>,
        d_u: f64,
        w: f64,
        sigma_u: Option<f64>,
    },
    Fhn {
        epsilon: Option<f64>,
        a: Option<f64>,
        d_u: f64,
        w: f64,
        delta1: Option<f64>,
        delta2: Option<f64>,
    },
}

/// Raw configuration as written in the file.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// A preset name or a `[model]` table.
    pub model: toml::Value,
    pub n_blocks: usize,
    pub n_samples: usize,
    pub t_end: f64,
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub master_seed: u64,
    /// 1-based block component used by the scalar covariance outputs.
    #[serde(default = "default_component")]
    pub component: usize,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// System sizes for the `cov-vs-n` output.
    #[serde(default)]
    pub n_values: Option<Vec<usize>>,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub localization: Option<LocalizationSection>,
    #[serde(default)]
    pub comparison: ComparisonSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Validates every field and fills defaults.
    pub fn resolve(&self) -> CliResult<ResolvedConfig> {
        let (preset_name, params) = resolve_model(&self.model)?;
        let bad = |field: &str, why: String| CliError::Config(format!("field `{field}`: {why}"));
        if self.n_blocks < 3 {
            return Err(bad(
                "n_blocks",
                format!("need at least 3, got {}", self.n_blocks),
            ));
        }
        if self.n_samples < 2 {
            return Err(bad(
                "n_samples",
                format!("need at least 2, got {}", self.n_samples),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(bad(
                "t_end",
                format!("must be positive, got {}", self.t_end),
            ));
        }
        let step_size = self.step_size.unwrap_or_else(|| params.default_step());
        if !(step_size > 0.0 && step_size <= self.t_end) {
            return Err(bad(
                "step_size",
                format!("must lie in (0, t_end], got {step_size}"),
            ));
        }
        let q = match params {
            PresetParams::Linear(_) => 1,
            PresetParams::Fhn(_) => 2,
        };
        if !(1..=q).contains(&self.component) {
            return Err(bad(
                "component",
                format!("must lie in 1..={q}, got {}", self.component),
            ));
        }
        if self.outputs.is_empty() {
            return Err(bad("outputs", "must name at least one product".into()));
        }
        if let Some(ns) = &self.n_values {
            if ns.is_empty() || ns.iter().any(|&n| n < 3) {
                return Err(bad(
                    "n_values",
                    format!("need a nonempty list of N >= 3, got {ns:?}"),
                ));
            }
        }
        let b = &self.bounds;
        if b.betas.is_empty() || b.betas.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(bad(
                "bounds.betas",
                format!("need positive finite values, got {:?}", b.betas),
            ));
        }
        if !(b.grad_g_sup >= 0.0 && b.grad_g_sup.is_finite()) {
            return Err(bad(
                "bounds.grad_g_sup",
                format!("must be nonnegative, got {}", b.grad_g_sup),
            ));
        }
        let localization = self.localization.clone().unwrap_or_default();
        if !(localization.epsilon > 0.0) {
            return Err(bad("localization.epsilon", "must be positive".into()));
        }
        if !(localization.beta > 0.0 && localization.beta.is_finite()) {
            return Err(bad("localization.beta", "must be positive".into()));
        }
        if !(localization.failure_prob > 0.0 && localization.failure_prob < 1.0) {
            return Err(bad(
                "localization.failure_prob",
                "must lie in (0, 1)".into(),
            ));
        }
        if !(localization.c_constant > 0.0) {
            return Err(bad("localization.c_constant", "must be positive".into()));
        }
        let c = &self.comparison;
        let times = c.times.clone().unwrap_or_else(|| vec![self.t_end]);
        if times.is_empty()
            || times.iter().any(|t| !(*t >= 0.0 && *t <= self.t_end))
            || times.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(bad(
                "comparison.times",
                format!("need increasing times in [0, t_end], got {times:?}"),
            ));
        }
        if c.replicates == 0 {
            return Err(bad("comparison.replicates", "must be at least 1".into()));
        }
        let max_lag = c.max_lag.unwrap_or(self.n_blocks / 2);
        if max_lag > self.n_blocks / 2 {
            return Err(bad(
                "comparison.max_lag",
                format!("must be at most N/2 = {}, got {max_lag}", self.n_blocks / 2),
            ));
        }
        // Build once so parameter contract violations surface as config errors.
        params
            .build(self.n_blocks)
            .map_err(|e| CliError::Config(format!("model: {e}")))?;

        Ok(ResolvedConfig {
            preset: preset_name,
            params: ModelParamsRecord::from(params),
            n_blocks: self.n_blocks,
            n_samples: self.n_samples,
            t_end: self.t_end,
            step_size,
            master_seed: self.master_seed,
            component: self.component,
            outputs: self.outputs.clone(),
            n_values: self
                .n_values
                .clone()
                .unwrap_or_else(|| vec![16, 32, 64, 128]),
            bounds: self.bounds.clone(),
            localization,
            comparison: ResolvedComparison {
                times,
                replicates: c.replicates,
                max_lag,
            },
        })
    }
}

fn resolve_model(value: &toml::Value) -> CliResult<(Option<String>, PresetParams)> {
    match value {
        toml::Value::String(name) => Ok((Some(name.clone()), preset(name)?.params)),
        toml::Value::Table(_) => {
            let table: ModelTable = value.clone().try_into().map_err(|e: toml::de::Error| {
                CliError::Config(format!("model: {}", e.message()))
            })?;
            Ok((None, table.into_params()))
        }
        other => Err(CliError::Config(format!(
            "field `model`: expected a preset name or a table, got {}",
            other.type_str()
        ))),
    }
}

impl ModelTable {
    pub fn into_params(self) -> PresetParams {
        match self {
            ModelTable::Linear { a, d_u, w, sigma_u } => {
                let base = LinearParams::standard(d_u, w);
                PresetParams::Linear(LinearParams {
                    a: a.unwrap_or(base.a),
                    sigma_u: sigma_u.unwrap_or(base.sigma_u),
                    ..base
                })
            }
            ModelTable::Fhn {
                epsilon,
                a,
                d_u,
                w,
                delta1,
                delta2,
            } => {
                let base = FhnParams::with_coupling(d_u, w);
                PresetParams::Fhn(FhnParams {
                    epsilon: epsilon.unwrap_or(base.epsilon),
                    a: a.unwrap_or(base.a),
                    delta1: delta1.unwrap_or(base.delta1),
                    delta2: delta2.unwrap_or(base.delta2),
                    ..base
                })
            }
        }
    }
}

/// Fully resolved model parameters as recorded in metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParamsRecord {
    Linear {
        a: f64,
        d_u: f64,
        w: f64,
        sigma_u: f64,
    },
    Fhn {
        epsilon: f64,
        a: f64,
        d_u: f64,
        w: f64,
        delta1: f64,
        delta2: f64,
    },
}

impl From<PresetParams> for ModelParamsRecord {
    fn from(p: PresetParams) -> Self {
        match p {
            PresetParams::Linear(p) => ModelParamsRecord::Linear {
                a: p.a,
                d_u: p.d_u,
                w: p.w,
                sigma_u: p.sigma_u,
            },
            PresetParams::Fhn(p) => ModelParamsRecord::Fhn {
                epsilon: p.epsilon,
                a: p.a,
                d_u: p.d_u,
                w: p.w,
                delta1: p.delta1,
                delta2: p.delta2,
            },
        }
    }
}

impl ModelParamsRecord {
    pub fn params(&self) -> PresetParams {
        match *self {
            ModelParamsRecord::Linear { a, d_u, w, sigma_u } => {
                PresetParams::Linear(LinearParams { a, d_u, w, sigma_u })
            }
            ModelParamsRecord::Fhn {
                epsilon,
                a,
                d_u,
                w,
                delta1,
                delta2,
            } => PresetParams::Fhn(FhnParams {
                epsilon,
                a,
                d_u,
                w,
                delta1,
                delta2,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedComparison {
    pub times: Vec<f64>,
    pub replicates: usize,
    pub max_lag: usize,
}

/// A validated configuration with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub preset: Option<String>,
    pub params: ModelParamsRecord,
    pub n_blocks: usize,
    pub n_samples: usize,
    pub t_end: f64,
    pub step_size: f64,
    pub master_seed: u64,
    pub component: usize,
    pub outputs: Vec<OutputKind>,
    pub n_values: Vec<usize>,
    pub bounds: BoundsSection,
    pub localization: LocalizationSection,
    pub comparison: ResolvedComparison,
}

impl ResolvedConfig {
    pub fn model(&self) -> CliResult<LatticeModelSpec> {
        self.model_with_n(self.n_blocks)
    }

    pub fn model_with_n(&self, n: usize) -> CliResult<LatticeModelSpec> {
        Ok(self.params.params().build(n)?)
    }

    pub fn integrator(&self) -> CliResult<covloc::IntegratorConfig> {
        Ok(covloc::IntegratorConfig::new(
            self.step_size,
            self.t_end,
            self.master_seed,
        )?)
    }

    pub fn linear_params(&self) -> Option<LinearParams> {
        match self.params.params() {
            PresetParams::Linear(p) => Some(p),
            PresetParams::Fhn(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "linear-diffusion"
n_blocks = 16
n_samples = 8
t_end = 1.0
"#;

    #[test]
    fn minimal_config_fills_defaults() {
        let r = ExperimentConfig::parse(MINIMAL).unwrap().resolve().unwrap();
        assert_eq!(r.preset.as_deref(), Some("linear-diffusion"));
        assert_eq!(r.outputs, vec![OutputKind::CovCurve]);
        assert_eq!(r.component, 1);
        assert_eq!(r.comparison.times, vec![1.0]);
        assert_eq!(r.comparison.max_lag, 8);
        // min(1e-3, 0.1 / (a + 4 d_u + w)) with 0.1 / 81 > 1e-3
        assert_eq!(r.step_size, 1e-3);
    }

    #[test]
    fn unknown_top_level_key_is_rejected_with_location() {
        let text = format!("{MINIMAL}n_sampels = 3\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("n_sampels"), "{msg}");
        assert!(msg.contains("line 6"), "{msg}");
    }

    #[test]
    fn explicit_model_table() {
        let text = r#"
n_blocks = 8
n_samples = 4
t_end = 0.1
[model]
kind = "fhn"
d_u = 0.5
w = 0.1
"#;
        let r = ExperimentConfig::parse(text).unwrap().resolve().unwrap();
        assert_eq!(r.preset, None);
        assert_eq!(
            r.params.params(),
            PresetParams::Fhn(FhnParams::with_coupling(0.5, 0.1))
        );
        assert_eq!(r.step_size, 1e-4);
    }

    #[test]
    fn typo_inside_model_table_names_the_field() {
        let text = r#"
n_blocks = 8
n_samples = 4
t_end = 0.1
[model]
kind = "linear"
du = 0.5
w = 0.1
"#;
        let err = ExperimentConfig::parse(text)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("du"), "{err}");
    }

    #[test]
    fn unknown_preset_maps_to_exit_code_4() {
        let text = MINIMAL.replace("linear-diffusion", "linear-difusion");
        let err = ExperimentConfig::parse(&text)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn semantic_errors_name_the_field() {
        for (patch, field) in [
            ("n_blocks = 2", "n_blocks"),
            ("t_end = -1.0", "t_end"),
            ("n_samples = 1", "n_samples"),
        ] {
            let key = patch.split(' ').next().unwrap();
            let text: String = MINIMAL
                .lines()
                .map(|l| if l.starts_with(key) { patch } else { l })
                .collect::<Vec<_>>()
                .join("\n");
            let err = ExperimentConfig::parse(&text)
                .unwrap()
                .resolve()
                .unwrap_err();
            assert_eq!(err.exit_code(), 2);
            assert!(err.to_string().contains(field), "{err}");
        }
    }

    #[test]
    fn negative_model_parameter_is_a_config_error() {
        let text = r#"
n_blocks = 8
n_samples = 4
t_end = 0.1
[model]
kind = "linear"
d_u = -1.0
w = 0.0
"#;
        let err = ExperimentConfig::parse(text)
            .unwrap()
            .resolve()
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
