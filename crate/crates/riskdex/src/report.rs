//! Artifact writers: the scored CSV, the rank-annotated GeoJSON, and the
//! JSON analysis report.
//!
//! Every writer is a pure function of its inputs; reruns produce
//! byte-identical files. Report floats are rounded to ten significant
//! digits, scored CSV values to six; GeoJSON geometry passes through
//! byte-for-byte from the input file.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::value::RawValue;
use serde_json::Value;

use crate::canonical::CanonicalPair;
use crate::composite::RiskScores;
use crate::error::{io_err, Error, Result};
use crate::ingest::Region;
use crate::preprocess::AdequacyReport;
use crate::regression::ManovaRow;
use crate::stats::round_sig;

/// Five-step sequential palette (light to dark red) baked into the
/// choropleth GeoJSON so any viewer reproduces the rank encoding.
pub const RANK_PALETTE: [&str; 5] = ["#fee5d9", "#fcae91", "#fb6a4a", "#de2d26", "#a50f15"];

/// Hex color for `rank` out of `bins`; ranks are spread evenly across the
/// palette, rank == bins always mapping to the darkest entry.
pub fn rank_color(rank: usize, bins: usize) -> &'static str {
    let idx = if bins <= 1 {
        RANK_PALETTE.len() - 1
    } else {
        ((rank - 1) * (RANK_PALETTE.len() - 1) + (bins - 1) / 2) / (bins - 1)
    };
    RANK_PALETTE[idx.min(RANK_PALETTE.len() - 1)]
}

/// Per-factor entry of the measurement-model section.
#[derive(Debug, Clone, Serialize)]
pub struct FactorModelReport {
    pub name: String,
    pub indicators: Vec<String>,
    pub loadings: Vec<f64>,
    pub explained_variances: Vec<f64>,
    pub raw_weights: Vec<f64>,
    pub weights: BTreeMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: crate::factor::FitMethod,
    pub heywood: bool,
    pub log_likelihood: f64,
}

impl FactorModelReport {
    pub fn from_fitted(f: &crate::factor::FittedFactor) -> Self {
        Self {
            name: f.name.clone(),
            indicators: f.indicators.clone(),
            loadings: f.fit.loadings.clone(),
            explained_variances: f.fit.explained_variances.clone(),
            raw_weights: f.raw_weights.clone(),
            weights: f
                .indicators
                .iter()
                .cloned()
                .zip(f.weights.iter().copied())
                .collect(),
            iterations: f.fit.iterations,
            converged: f.fit.converged,
            method: f.fit.method,
            heywood: f.fit.heywood,
            log_likelihood: f.fit.log_likelihood,
        }
    }
}

/// Canonical-stage section: first-pair summary plus all pairs for audit.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalReport {
    pub rho: f64,
    pub factor_weights: BTreeMap<String, f64>,
    pub hazard_weights: BTreeMap<String, f64>,
    pub x_weights: Vec<f64>,
    pub y_weights: Vec<f64>,
    pub pairs: Vec<CanonicalPair>,
    pub ridged: bool,
}

impl CanonicalReport {
    pub fn new(
        spec: &crate::factor::FactorSpec,
        solution: &crate::canonical::CanonicalSolution,
        factor_weights: &[f64],
        hazard_weights: &[f64],
    ) -> Self {
        Self {
            rho: solution.rho,
            factor_weights: spec
                .factor_names()
                .into_iter()
                .zip(factor_weights.iter().copied())
                .collect(),
            hazard_weights: spec
                .hazard_columns
                .iter()
                .cloned()
                .zip(hazard_weights.iter().copied())
                .collect(),
            x_weights: solution.x_weights.clone(),
            y_weights: solution.y_weights.clone(),
            pairs: solution.pairs.clone(),
            ridged: solution.ridged,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub config_hash: String,
    pub version: String,
    /// Populated from the RISKDEX_TIMESTAMP environment variable when
    /// set; null otherwise so that reruns stay byte-identical.
    pub timestamp: Option<String>,
}

/// The full analysis report serialized to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub adequacy: AdequacyReport,
    /// Per-block diagnostics, present when requested by the config.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adequacy_blocks: Option<BTreeMap<String, AdequacyReport>>,
    pub factor_models: Vec<FactorModelReport>,
    pub canonical: CanonicalReport,
    /// Pearson correlation between risk and hazard indices, keyed
    /// `overall` plus one entry per group tag.
    pub correlations: BTreeMap<String, f64>,
    pub manova: Vec<ManovaRow>,
    pub warnings: Vec<String>,
    pub run: RunMetadata,
}

impl AnalysisReport {
    /// Weight-sum sanity check applied before serialization.
    pub fn validate(&self) -> Result<()> {
        let mut groups: Vec<(String, f64)> = Vec::new();
        for fm in &self.factor_models {
            groups.push((
                format!("indicator weights of {}", fm.name),
                fm.weights.values().sum(),
            ));
        }
        groups.push((
            "canonical factor weights".into(),
            self.canonical.factor_weights.values().sum(),
        ));
        groups.push((
            "canonical hazard weights".into(),
            self.canonical.hazard_weights.values().sum(),
        ));
        for (what, sum) in groups {
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidConfig(format!(
                    "{what} sum to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Round every number in a JSON tree to ten significant digits.
pub fn round_json(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(f, 10)) {
                        *value = Value::Number(rounded);
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serialize any section to schema-stable JSON: sorted keys, floats to
/// ten significant digits, trailing newline.
pub fn section_to_json<T: Serialize>(section: &T) -> Result<String> {
    let mut value = serde_json::to_value(section)
        .map_err(|e| Error::InvalidConfig(format!("unserializable report section: {e}")))?;
    round_json(&mut value);
    let mut text = serde_json::to_string_pretty(&value)
        .map_err(|e| Error::InvalidConfig(format!("unserializable report section: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn write_section_json<T: Serialize>(section: &T, path: &Path) -> Result<()> {
    write_atomically(path, section_to_json(section)?.as_bytes())
}

/// Write the full analysis report to `path`.
pub fn write_report_json(report: &AnalysisReport, path: &Path) -> Result<()> {
    report.validate()?;
    write_section_json(report, path)
}

/// Decimal formatting with six significant digits, plain notation.
pub fn format_score(x: f64) -> String {
    format!("{}", round_sig(x, 6))
}

/// Write the scored CSV: `region_id,<factors...>,risk_index,hazard_index,rank`,
/// rows sorted by region id, values at six significant digits.
pub fn write_scores_csv(scores: &RiskScores, path: &Path) -> Result<()> {
    let mut order: Vec<usize> = (0..scores.region_ids.len()).collect();
    order.sort_by(|&a, &b| scores.region_ids[a].cmp(&scores.region_ids[b]));

    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["region_id".to_string()];
    header.extend(scores.factor_names.iter().cloned());
    header.extend(["risk_index".into(), "hazard_index".into(), "rank".into()]);
    writer
        .write_record(&header)
        .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
    for &i in &order {
        let mut record = vec![scores.region_ids[i].clone()];
        for score in &scores.factor_scores[i] {
            record.push(format_score(*score));
        }
        record.push(format_score(scores.risk_index[i]));
        record.push(format_score(scores.hazard_index[i]));
        record.push(scores.rank[i].to_string());
        writer
            .write_record(&record)
            .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
    write_atomically(path, &bytes)
}

#[derive(Serialize)]
struct FeatureOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    geometry: &'a RawValue,
    properties: serde_json::Map<String, Value>,
}

#[derive(Serialize)]
struct FeatureCollectionOut<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    features: Vec<FeatureOut<'a>>,
}

/// Write the input FeatureCollection back out with `risk_index`,
/// `hazard_index`, `rank`, and `rank_color` added to each feature's
/// properties. Geometry bytes are passed through untouched.
pub fn write_choropleth_geojson(
    regions: &[Region],
    scores: &RiskScores,
    path: &Path,
) -> Result<()> {
    let index_of: HashMap<&str, usize> = scores
        .region_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    for id in &scores.region_ids {
        if !regions.iter().any(|r| &r.region_id == id) {
            return Err(Error::RegionWithoutGeometry { region: id.clone() });
        }
    }
    let bins = scores.cluster_centers.len();
    let mut features = Vec::with_capacity(regions.len());
    for region in regions {
        let &i = index_of
            .get(region.region_id.as_str())
            .ok_or_else(|| Error::RegionWithoutGeometry {
                region: region.region_id.clone(),
            })?;
        let mut properties = region.properties.clone();
        let num = |x: f64| {
            serde_json::Number::from_f64(round_sig(x, 10))
                .map(Value::Number)
                .unwrap_or(Value::Null)
        };
        properties.insert("risk_index".into(), num(scores.risk_index[i]));
        properties.insert("hazard_index".into(), num(scores.hazard_index[i]));
        properties.insert("rank".into(), Value::from(scores.rank[i] as u64));
        properties.insert(
            "rank_color".into(),
            Value::from(rank_color(scores.rank[i], bins)),
        );
        features.push(FeatureOut {
            kind: "Feature",
            geometry: &region.geometry_json,
            properties,
        });
    }
    let collection = FeatureCollectionOut {
        kind: "FeatureCollection",
        features,
    };
    let mut text = serde_json::to_string_pretty(&collection)
        .map_err(|e| Error::InvalidConfig(format!("geojson write: {e}")))?;
    text.push('\n');
    write_atomically(path, text.as_bytes())
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))?;
    Ok(())
}
