//! TOML run configuration.
//!
//! ```toml
//! [pipeline]
//! kernel = "rbf"            # rbf | linear | polynomial | linear-identity
//! bandwidth = "median"      # or a positive number
//! variance_fraction = 0.95  # or: components = 3
//! lag = 1
//! ridge_var = 0.001
//! ridge_preimage = 0.001
//! normalize = true
//! ```
//!
//! Benchmark files list `generators`, `t_grid`, `seeds` at the top level and
//! one `[methods.<id>]` section per method using the same keys as `[pipeline]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use preimage_gc::bench::{BenchmarkPlan, MethodSpec};
use preimage_gc::synthgen::{GeneratorId, GeneratorParams};
use preimage_gc::{ComponentSelection, Config, FeatureMap, KernelSpec};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    Rbf,
    Linear,
    Polynomial,
    LinearIdentity,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Bandwidth {
    Fixed(f64),
    Rule(String),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    pub kernel: Option<KernelKind>,
    pub bandwidth: Option<Bandwidth>,
    /// Multiplier on the median-heuristic bandwidth.
    pub bandwidth_scale: Option<f64>,
    pub degree: Option<u32>,
    pub offset: Option<f64>,
    pub components: Option<usize>,
    pub variance_fraction: Option<f64>,
    pub lag: Option<usize>,
    pub ridge_var: Option<f64>,
    pub ridge_preimage: Option<f64>,
    pub normalize: Option<bool>,
}

impl PipelineSection {
    pub fn to_config(&self, context: &str) -> Result<Config, CliError> {
        let bad = |msg: String| CliError::Usage(format!("{context}: {msg}"));
        let defaults = Config::default();
        let kind = self.kernel.unwrap_or(KernelKind::Rbf);

        if kind != KernelKind::Rbf && (self.bandwidth.is_some() || self.bandwidth_scale.is_some()) {
            return Err(bad("bandwidth only applies to the rbf kernel".into()));
        }
        if kind != KernelKind::Polynomial && (self.degree.is_some() || self.offset.is_some()) {
            return Err(bad("degree/offset only apply to the polynomial kernel".into()));
        }
        let feature_map = match kind {
            KernelKind::LinearIdentity => FeatureMap::LinearIdentity,
            KernelKind::Linear => FeatureMap::Kernel(KernelSpec::Linear),
            KernelKind::Polynomial => FeatureMap::Kernel(KernelSpec::Polynomial {
                degree: self.degree.unwrap_or(2),
                offset: self.offset.unwrap_or(1.0),
            }),
            KernelKind::Rbf => match &self.bandwidth {
                None => FeatureMap::RbfMedian {
                    scale: self.bandwidth_scale.unwrap_or(1.0),
                },
                Some(Bandwidth::Rule(rule)) if rule == "median" => FeatureMap::RbfMedian {
                    scale: self.bandwidth_scale.unwrap_or(1.0),
                },
                Some(Bandwidth::Rule(rule)) => {
                    return Err(bad(format!("unknown bandwidth rule {rule:?}, expected \"median\" or a number")))
                }
                Some(Bandwidth::Fixed(_)) if self.bandwidth_scale.is_some() => {
                    return Err(bad("bandwidth_scale needs bandwidth = \"median\"".into()))
                }
                Some(Bandwidth::Fixed(b)) => FeatureMap::Kernel(KernelSpec::Rbf { bandwidth: *b }),
            },
        };
        let components = match (self.components, self.variance_fraction) {
            (Some(_), Some(_)) => {
                return Err(bad("set either components or variance_fraction, not both".into()))
            }
            (Some(p), None) => ComponentSelection::Count(p),
            (None, Some(rho)) => ComponentSelection::Fraction(rho),
            (None, None) if kind == KernelKind::LinearIdentity => ComponentSelection::Fraction(1.0),
            (None, None) => defaults.components,
        };
        let config = Config {
            feature_map,
            components,
            lag: self.lag.unwrap_or(defaults.lag),
            ridge_var: self.ridge_var.unwrap_or(defaults.ridge_var),
            ridge_preimage: self.ridge_preimage.unwrap_or(defaults.ridge_preimage),
            normalize_input: self.normalize.unwrap_or(defaults.normalize_input),
        };
        config.validate().map_err(|e| bad(e.to_string()))?;
        Ok(config)
    }
}

/// Partial generator parameters; unset fields keep the generator defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub burn_in: Option<usize>,
    pub noise_sd: Option<f64>,
    pub observation_noise_sd: Option<f64>,
    #[serde(default)]
    pub coefficients: BTreeMap<String, f64>,
}

impl ParamsSection {
    pub fn resolve(&self, id: GeneratorId) -> Result<GeneratorParams, CliError> {
        let mut p = GeneratorParams::defaults(id);
        if let Some(k) = self.coefficients.keys().find(|k| !p.coefficients.contains_key(*k)) {
            return Err(CliError::Usage(format!("params.{id}: unknown coefficient {k:?}")));
        }
        if let Some(b) = self.burn_in {
            p.burn_in = b;
        }
        if let Some(s) = self.noise_sd {
            p.noise_sd = s;
        }
        if let Some(s) = self.observation_noise_sd {
            p.observation_noise_sd = s;
        }
        p.coefficients.extend(self.coefficients.clone());
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    #[serde(default)]
    pub pipeline: PipelineSection,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default)]
    pub params: BTreeMap<String, ParamsSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub generators: Vec<String>,
    pub t_grid: Vec<usize>,
    pub seeds: u64,
    #[serde(default)]
    pub first_seed: u64,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub methods: BTreeMap<String, PipelineSection>,
    #[serde(default)]
    pub params: BTreeMap<String, ParamsSection>,
}

impl BenchConfig {
    pub fn to_plan(&self) -> Result<BenchmarkPlan, CliError> {
        let generators = self
            .generators
            .iter()
            .map(|g| g.parse::<GeneratorId>().map_err(|e| CliError::Usage(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        if generators.is_empty() {
            return Err(CliError::Usage("bench config lists no generators".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Usage("bench config lists no methods".into()));
        }
        if self.t_grid.is_empty() {
            return Err(CliError::Usage("bench config has an empty t_grid".into()));
        }
        if self.seeds < 2 {
            return Err(CliError::Usage("bench config needs at least 2 seeds".into()));
        }
        let methods = self
            .methods
            .iter()
            .map(|(id, section)| {
                Ok(MethodSpec {
                    id: id.clone(),
                    config: section.to_config(&format!("method {id}"))?,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        Ok(BenchmarkPlan {
            generators,
            methods,
            t_grid: self.t_grid.clone(),
            seeds: (self.first_seed..self.first_seed + self.seeds).collect(),
            params: resolve_params(&self.params)?,
        })
    }
}

pub fn resolve_params(sections: &BTreeMap<String, ParamsSection>) -> Result<Vec<(GeneratorId, GeneratorParams)>, CliError> {
    sections
        .iter()
        .map(|(name, section)| {
            let id: GeneratorId = name.parse().map_err(|e: preimage_gc::Error| CliError::Usage(e.to_string()))?;
            Ok((id, section.resolve(id)?))
        })
        .collect()
}

/// Reads and parses a TOML file; unknown keys are usage errors naming the key.
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {}", path.display(), e.message())))
}

/// Resolves a path from a config file relative to that file's directory.
pub fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config.parent().unwrap_or_else(|| Path::new(".")).join(p)
    }
}
