//! Run-file schema of the command-line front end.
//!
//! One TOML file drives every subcommand. The file carries a
//! `schema_version` and rejects unknown keys, so a typo fails loudly instead
//! of silently running defaults. Sections are optional: each subcommand
//! validates that the sections it needs are present.
//!
//! ```toml
//! schema_version = 1
//! seed = 7
//!
//! [model]
//! family = "uni-gaussian"     # uni-gaussian | uni-student-t | mv-gaussian |
//!                             # mv-student-t | t-copula | gaussian-copula
//! components = 2
//! dimension = 1               # ignored by univariate families
//! frozen = ["means"]          # blocks held static over time
//!
//! [simulate]
//! kind = "sdmm"               # model | sdmm | corr-pattern | weight-pattern | dgp
//! t_len = 100
//! pattern = "sine"            # corr-pattern / weight-pattern kinds
//! # dgp = "dgp4"              # dgp kind
//!
//! [fit]
//! data = "data.csv"
//! # trace = true              # also write the filtered per-step trace
//!
//! [estimation]                # optional optimizer overrides
//! max_iterations = 500
//! restarts = 3
//!
//! [bench]
//! study = "corr"              # sdmm | corr | weights | misspec | logscore
//! replications = 20
//! t_len = 1000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::Study;
use crate::error::{DammError, Result};
use crate::estimate::{CoefficientTemplate, EstimationConfig};
use crate::model::{Block, Family, GasCoefficients, ModelSpec};
use crate::simulate::{Dgp, PatternKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything a run file can say. `seed` can be overridden by `--seed`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: Option<ModelSection>,
    #[serde(default)]
    pub coefficients: Option<CoefficientsSection>,
    #[serde(default)]
    pub template: Option<TemplateSection>,
    #[serde(default)]
    pub estimation: Option<EstimationSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub fit: Option<FitSection>,
    #[serde(default)]
    pub filter: Option<FilterSection>,
    #[serde(default)]
    pub forecast: Option<ForecastSection>,
    #[serde(default)]
    pub bench: Option<BenchSection>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)
            .map_err(|e| DammError::Config(format!("run file: {e}")))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(DammError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    /// The model section, or a config error naming the missing key.
    pub fn require_model(&self) -> Result<ModelSpec> {
        self.model
            .as_ref()
            .ok_or_else(|| DammError::Config("missing [model] section".into()))?
            .to_spec()
    }

    /// Estimation template: the model plus any [template] surgery.
    pub fn build_template(&self) -> Result<CoefficientTemplate> {
        let spec = self.require_model()?;
        let mut template = CoefficientTemplate::new(spec)?;
        if let Some(t) = &self.template {
            for block in &t.static_blocks {
                template.set_block_static(*block)?;
            }
            for pin in &t.pin {
                template.pin_block(pin.block, &pin.values)?;
            }
        }
        Ok(template)
    }

    /// Optimizer settings from [estimation] with `seed` merged in.
    pub fn estimation_config(&self, seed: u64) -> Result<EstimationConfig> {
        let mut config = EstimationConfig { seed, ..EstimationConfig::default() };
        if let Some(e) = &self.estimation {
            if let Some(v) = e.max_iterations {
                config.max_iterations = v;
            }
            if let Some(v) = e.gradient_tolerance {
                config.gradient_tolerance = v;
            }
            if let Some(v) = e.fd_step {
                config.fd_step = v;
            }
            if let Some(v) = e.restarts {
                config.restarts = v;
            }
            if let Some(v) = e.stationarity_bound {
                config.stationarity_bound = v;
            }
            if let Some(v) = e.standard_errors {
                config.standard_errors = v;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

/// Mixture shape in config-file vocabulary.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    pub components: usize,
    #[serde(default = "one")]
    pub dimension: usize,
    #[serde(default)]
    pub frozen: Vec<Block>,
}

fn one() -> usize {
    1
}

impl ModelSection {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let dimension = if self.family.is_univariate() { 1 } else { self.dimension };
        Ok(ModelSpec::new(self.family, self.components, dimension)?
            .with_frozen(self.frozen.iter().copied()))
    }
}

/// Explicit coefficients, inline or loaded from a previous fit result.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsSection {
    #[serde(default)]
    pub kappa: Option<Vec<f64>>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    /// Path to a fit-result JSON whose coefficients should be used.
    #[serde(default)]
    pub from: Option<PathBuf>,
}

impl CoefficientsSection {
    /// Resolve into full coefficients. Relative `from` paths resolve against
    /// `base_dir` (the run file's directory).
    pub fn resolve(&self, spec: &ModelSpec, base_dir: &Path) -> Result<GasCoefficients> {
        let coeffs = match (&self.from, &self.kappa) {
            (Some(path), None) => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                let text = std::fs::read_to_string(&full)?;
                let fit: crate::estimate::FitResult = serde_json::from_str(&text)
                    .map_err(|e| DammError::Config(format!("{}: {e}", full.display())))?;
                fit.coefficients
            }
            (None, Some(kappa)) => {
                let n = spec.state_len();
                let mut coeffs = GasCoefficients::zeros(spec);
                let fill = |name: &str, src: &Option<Vec<f64>>, dst: &mut Vec<f64>| {
                    if let Some(v) = src {
                        if v.len() != n {
                            return Err(DammError::Config(format!(
                                "coefficients.{name} needs {n} entries, got {}",
                                v.len()
                            )));
                        }
                        dst.copy_from_slice(v);
                    }
                    Ok(())
                };
                fill("kappa", &Some(kappa.clone()), &mut coeffs.kappa)?;
                fill("a", &self.a, &mut coeffs.a)?;
                fill("b", &self.b, &mut coeffs.b)?;
                coeffs
            }
            (Some(_), Some(_)) => {
                return Err(DammError::Config(
                    "coefficients: give either `from` or inline kappa/a/b, not both".into(),
                ))
            }
            (None, None) => {
                return Err(DammError::Config(
                    "coefficients: need `from = \"fit.json\"` or inline kappa (with a, b)".into(),
                ))
            }
        };
        coeffs.validate(spec)?;
        Ok(coeffs)
    }
}

/// Estimation-template surgery: demote blocks to static levels or pin them
/// at fixed unconstrained values.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSection {
    #[serde(default, rename = "static")]
    pub static_blocks: Vec<Block>,
    #[serde(default)]
    pub pin: Vec<PinSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinSection {
    pub block: Block,
    pub values: Vec<f64>,
}

/// Optimizer overrides; anything omitted keeps the library default.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSection {
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub gradient_tolerance: Option<f64>,
    #[serde(default)]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub stationarity_bound: Option<f64>,
    #[serde(default)]
    pub standard_errors: Option<bool>,
}

/// What to simulate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateKind {
    /// The mixture model itself, from [model] + [coefficients].
    Model,
    /// The stochastic two-component location-scale benchmark.
    Sdmm,
    /// Bivariate Gaussian data with a prescribed correlation pattern.
    CorrPattern,
    /// Fixed-component mixture with a prescribed weight pattern.
    WeightPattern,
    /// One of the four-dimensional misspecification designs.
    Dgp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub kind: SimulateKind,
    pub t_len: usize,
    #[serde(default)]
    pub pattern: Option<PatternKind>,
    #[serde(default)]
    pub dgp: Option<Dgp>,
    /// Output file names (relative to --out); defaults data.csv / truth.csv.
    #[serde(default)]
    pub data_out: Option<String>,
    #[serde(default)]
    pub truth_out: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Input data CSV.
    pub data: PathBuf,
    #[serde(default)]
    pub result_out: Option<String>,
    /// Also write the filtered trace of the fitted model.
    #[serde(default)]
    pub trace: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub data: PathBuf,
    #[serde(default)]
    pub trace_out: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastSection {
    pub data: PathBuf,
    pub horizon: usize,
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub out: Option<String>,
}

fn default_draws() -> usize {
    1000
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub study: Study,
    #[serde(default)]
    pub t_len: Option<usize>,
    #[serde(default)]
    pub replications: Option<usize>,
    #[serde(default)]
    pub out: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_bench_file_parses() {
        let config = RunConfig::from_toml(
            r#"
            schema_version = 1
            [bench]
            study = "corr"
            replications = 2
            "#,
        )
        .unwrap();
        let bench = config.bench.unwrap();
        assert_eq!(bench.study, Study::Corr);
        assert_eq!(bench.replications, Some(2));
        assert_eq!(bench.t_len, None);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = RunConfig::from_toml(
            r#"
            schema_version = 1
            [simulate]
            kind = "sdmm"
            t_len = 100
            paterrn = "sine"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("paterrn"), "got: {err}");
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let err = RunConfig::from_toml("schema_version = 99").unwrap_err();
        assert!(err.to_string().contains("schema_version"), "got: {err}");
    }

    #[test]
    fn missing_required_key_names_the_key() {
        let err = RunConfig::from_toml(
            r#"
            schema_version = 1
            [simulate]
            kind = "sdmm"
            "#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("t_len"), "got: {err}");
    }

    #[test]
    fn model_section_builds_the_spec() {
        let config = RunConfig::from_toml(
            r#"
            schema_version = 1
            [model]
            family = "mv-gaussian"
            components = 2
            dimension = 3
            frozen = ["means", "scales"]
            "#,
        )
        .unwrap();
        let spec = config.require_model().unwrap();
        assert_eq!(spec.family, Family::MvGaussian);
        assert_eq!((spec.j, spec.d), (2, 3));
        assert!(spec.frozen.contains(&Block::Means));
        assert!(spec.frozen.contains(&Block::Scales));
    }

    #[test]
    fn template_surgery_is_applied() {
        let config = RunConfig::from_toml(
            r#"
            schema_version = 1
            [model]
            family = "uni-gaussian"
            components = 2
            [template]
            static = ["weights"]
            [[template.pin]]
            block = "means"
            values = [-4.0, 1.0]
            "#,
        )
        .unwrap();
        let template = config.build_template().unwrap();
        // Weights static (1), means pinned (0), scales dynamic (2 * 3).
        assert_eq!(template.n_free(), 1 + 6);
    }

    #[test]
    fn estimation_overrides_merge_with_defaults() {
        let config = RunConfig::from_toml(
            r#"
            schema_version = 1
            [estimation]
            max_iterations = 33
            restarts = 1
            "#,
        )
        .unwrap();
        let est = config.estimation_config(42).unwrap();
        assert_eq!(est.max_iterations, 33);
        assert_eq!(est.restarts, 1);
        assert_eq!(est.seed, 42);
        assert_eq!(est.gradient_tolerance, EstimationConfig::default().gradient_tolerance);
    }

    #[test]
    fn inline_coefficients_resolve_and_validate() {
        let config = RunConfig::from_toml(
            r#"
            schema_version = 1
            [model]
            family = "uni-gaussian"
            components = 1
            [coefficients]
            kappa = [0.5, -0.1]
            b = [0.9, 0.8]
            "#,
        )
        .unwrap();
        let spec = config.require_model().unwrap();
        let coeffs = config
            .coefficients
            .as_ref()
            .unwrap()
            .resolve(&spec, Path::new("."))
            .unwrap();
        assert_eq!(coeffs.kappa, vec![0.5, -0.1]);
        assert_eq!(coeffs.a, vec![0.0, 0.0]);
        assert_eq!(coeffs.b, vec![0.9, 0.8]);
    }

    #[test]
    fn coefficient_length_mismatch_is_a_config_error() {
        let config = RunConfig::from_toml(
            r#"
            schema_version = 1
            [model]
            family = "uni-gaussian"
            components = 1
            [coefficients]
            kappa = [0.5]
            "#,
        )
        .unwrap();
        let spec = config.require_model().unwrap();
        let err = config
            .coefficients
            .as_ref()
            .unwrap()
            .resolve(&spec, Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("2 entries"), "got: {err}");
    }
}
