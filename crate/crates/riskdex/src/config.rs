//! Declarative pipeline configuration.
//!
//! One TOML file names the inputs, the output directory, the factor
//! blocks, and the options; CLI flags may override individual fields.
//! Relative paths are resolved against the config file's directory.
//!
//! ```toml
//! indicators = "indicators.csv"
//! regions    = "regions.geojson"
//! gates      = "gates.csv"            # optional
//! output_dir = "out"
//!
//! missing_policy       = "reject"     # reject | mean_impute | zero_fill
//! strict_adequacy      = false
//! bins                 = 5
//! normalize_regression = true
//! tourist_column       = "foreign_tourists"
//!
//! hazard = ["confirmed", "pdp", "odp"]
//!
//! [[factor]]
//! name       = "exposure"
//! indicators = ["population_density", "commuter_share", "foreign_tourists"]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, Error, Result};
use crate::factor::{FactorBlock, FactorSpec, NonConvergencePolicy};
use crate::ingest::MissingPolicy;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub indicators: PathBuf,
    pub regions: PathBuf,
    pub gates: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub missing_policy: MissingPolicy,
    pub strict_adequacy: bool,
    pub bins: usize,
    pub normalize_regression: bool,
    /// Column filled (or replaced) by gate buffering when gates are given.
    pub tourist_column: Option<String>,
    /// Also run the factorability diagnostics separately per factor block.
    pub adequacy_per_block: bool,
    /// Fall back to principal axis factoring for non-convergent blocks
    /// instead of failing.
    pub principal_axis_fallback: bool,
    pub factor_spec: FactorSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    indicators: String,
    regions: String,
    gates: Option<String>,
    #[serde(default = "default_output_dir")]
    output_dir: String,
    #[serde(default)]
    missing_policy: MissingPolicy,
    #[serde(default)]
    strict_adequacy: bool,
    #[serde(default = "default_bins")]
    bins: usize,
    #[serde(default = "default_true")]
    normalize_regression: bool,
    tourist_column: Option<String>,
    #[serde(default)]
    adequacy_per_block: bool,
    #[serde(default)]
    principal_axis_fallback: bool,
    hazard: Vec<String>,
    #[serde(rename = "factor")]
    factors: Vec<RawFactor>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFactor {
    name: String,
    indicators: Vec<String>,
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_bins() -> usize {
    5
}

fn default_true() -> bool {
    true
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let raw: RawConfig =
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{e}")))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| -> PathBuf {
        let candidate = PathBuf::from(p);
        if candidate.is_absolute() {
            candidate
        } else {
            base.join(candidate)
        }
    };
    let config = PipelineConfig {
        indicators: resolve(&raw.indicators),
        regions: resolve(&raw.regions),
        gates: raw.gates.as_deref().map(resolve),
        output_dir: resolve(&raw.output_dir),
        missing_policy: raw.missing_policy,
        strict_adequacy: raw.strict_adequacy,
        bins: raw.bins,
        normalize_regression: raw.normalize_regression,
        tourist_column: raw.tourist_column,
        adequacy_per_block: raw.adequacy_per_block,
        principal_axis_fallback: raw.principal_axis_fallback,
        factor_spec: FactorSpec {
            factors: raw
                .factors
                .into_iter()
                .map(|f| FactorBlock {
                    name: f.name,
                    indicators: f.indicators,
                })
                .collect(),
            hazard_columns: raw.hazard,
        },
    };
    config.validate()?;
    Ok(config)
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return Err(Error::InvalidConfig("bins must be at least 1".into()));
        }
        if self.gates.is_some() && self.tourist_column.is_none() {
            return Err(Error::InvalidConfig(
                "gates are configured but tourist_column is not set".into(),
            ));
        }
        self.factor_spec.validate()
    }

    pub fn fit_options(&self) -> crate::factor::FitOptions {
        crate::factor::FitOptions {
            on_non_convergence: if self.principal_axis_fallback {
                NonConvergencePolicy::PrincipalAxis
            } else {
                NonConvergencePolicy::Error
            },
            ..Default::default()
        }
    }

    /// SHA-256 fingerprint of everything that shapes the analysis: the
    /// analytic option fields, the factor spec, and the bytes of every
    /// input file. Output location deliberately excluded so artifacts do
    /// not depend on where they are written.
    pub fn fingerprint(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        let canonical = CanonicalOptions {
            missing_policy: self.missing_policy,
            strict_adequacy: self.strict_adequacy,
            bins: self.bins,
            normalize_regression: self.normalize_regression,
            tourist_column: self.tourist_column.clone(),
            adequacy_per_block: self.adequacy_per_block,
            principal_axis_fallback: self.principal_axis_fallback,
            factor_spec: self.factor_spec.clone(),
            has_gates: self.gates.is_some(),
        };
        let encoded = serde_json::to_string(&canonical)
            .map_err(|e| Error::InvalidConfig(format!("config not encodable: {e}")))?;
        hasher.update(encoded.as_bytes());
        for path in [Some(&self.indicators), Some(&self.regions), self.gates.as_ref()]
            .into_iter()
            .flatten()
        {
            let bytes = std::fs::read(path).map_err(io_err(path.clone()))?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
        Ok(hex_string(&hasher.finalize()))
    }
}

#[derive(Serialize)]
struct CanonicalOptions {
    missing_policy: MissingPolicy,
    strict_adequacy: bool,
    bins: usize,
    normalize_regression: bool,
    tourist_column: Option<String>,
    adequacy_per_block: bool,
    principal_axis_fallback: bool,
    factor_spec: FactorSpec,
    has_gates: bool,
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
