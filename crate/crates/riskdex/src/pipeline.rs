//! End-to-end orchestration: ingest, gate buffering, normalization,
//! adequacy gate, factor fitting, canonical weighting, index assembly,
//! rank binning, correlation diagnostics, regression, and exports.
//!
//! The full run and the stage subcommands share the same step functions,
//! so a stage artifact is always byte-identical to the corresponding file
//! from a full run. A stage only executes its prefix of the pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::canonical::{self, CanonicalSolution};
use crate::composite::{self, RiskScores};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::factor::{self, FactorModel, FactorScores};
use crate::ingest::{self, IndicatorTable, Region};
use crate::preprocess::{self, AdequacyReport, NormalizedTable};
use crate::regression::{self, ManovaRow};
use crate::report::{self, AnalysisReport, CanonicalReport, FactorModelReport, RunMetadata};

/// Pipeline stages exposed as CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Normalize,
    Adequacy,
    Cfa,
    Cca,
    Index,
    Regress,
}

/// Ingested and normalized inputs shared by every later step.
pub struct Prepared {
    pub config_hash: String,
    pub table: IndicatorTable,
    pub regions: Vec<Region>,
    pub normalized: NormalizedTable,
    pub warnings: Vec<String>,
}

impl Prepared {
    fn warn(&mut self, message: String) {
        log::warn!("{message}");
        self.warnings.push(message);
    }
}

/// Load inputs, apply the gate buffer rule, and cross-check regions
/// against table rows. Fails fast on any referenced column that does not
/// exist.
pub fn load_inputs(config: &PipelineConfig) -> Result<(IndicatorTable, Vec<Region>)> {
    let mut table = ingest::load_indicator_table(&config.indicators, config.missing_policy)?;
    let regions = ingest::load_regions(&config.regions)?;

    // every table row needs a geometry and vice versa
    for id in &table.regions {
        if !regions.iter().any(|r| &r.region_id == id) {
            return Err(Error::RegionWithoutGeometry { region: id.clone() });
        }
    }
    for region in &regions {
        if !table.regions.contains(&region.region_id) {
            return Err(Error::RegionWithoutGeometry {
                region: region.region_id.clone(),
            });
        }
    }

    if let Some(gates_path) = &config.gates {
        let gates = ingest::load_gates(gates_path)?;
        // align region order with table row order for the new column
        let ordered: Vec<Region> = table
            .regions
            .iter()
            .map(|id| regions.iter().find(|r| &r.region_id == id).unwrap().clone())
            .collect();
        let arrivals = ingest::assign_gate_arrivals(&ordered, &gates)?;
        let column = config
            .tourist_column
            .as_deref()
            .expect("validated: tourist_column set when gates are given");
        table.set_column(
            column,
            arrivals,
            &format!("gate buffering: {}", gates_path.display()),
        );
    }

    // fail fast before any numeric work
    for id in config
        .factor_spec
        .indicator_ids()
        .iter()
        .chain(&config.factor_spec.hazard_columns)
    {
        table.column(id)?;
    }
    Ok((table, regions))
}

/// Ingest plus normalization.
pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let config_hash = config.fingerprint()?;
    let (table, regions) = load_inputs(config)?;
    let normalized = preprocess::normalize(&table)?;
    Ok(Prepared {
        config_hash,
        table,
        regions,
        normalized,
        warnings: Vec::new(),
    })
}

/// Factorability diagnostics over all indicator columns jointly, plus the
/// per-block reports when configured. Applies the strict gate.
pub fn adequacy_step(
    config: &PipelineConfig,
    prepared: &mut Prepared,
) -> Result<(AdequacyReport, Option<BTreeMap<String, AdequacyReport>>)> {
    let indicator_ids = config.factor_spec.indicator_ids();
    let data = prepared.normalized.matrix_of(&indicator_ids)?;
    let adequacy = preprocess::adequacy_report(&data)?;
    if !adequacy.passed {
        if config.strict_adequacy {
            return Err(Error::AdequacyFailed {
                bartlett_p: adequacy.bartlett_p,
                kmo: adequacy.kmo,
            });
        }
        prepared.warn(format!(
            "adequacy gate failed (bartlett_p={:.6}, kmo={:.4}); continuing without --strict-adequacy",
            adequacy.bartlett_p, adequacy.kmo
        ));
    }
    let blocks = if config.adequacy_per_block {
        let mut map = BTreeMap::new();
        for block in &config.factor_spec.factors {
            let data = prepared.normalized.matrix_of(&block.indicators)?;
            map.insert(block.name.clone(), preprocess::adequacy_report(&data)?);
        }
        Some(map)
    } else {
        None
    };
    Ok((adequacy, blocks))
}

/// Fit all factor blocks and score the regions.
pub fn cfa_step(
    config: &PipelineConfig,
    prepared: &mut Prepared,
) -> Result<(FactorModel, FactorScores)> {
    let options = config.fit_options();
    let model = factor::fit_factor_model(&prepared.normalized, &config.factor_spec, &options)?;
    for fitted in &model.factors {
        if fitted.fit.heywood {
            prepared.warn(format!(
                "factor {:?}: communality clamped at the admissibility bound (Heywood case)",
                fitted.name
            ));
        }
        if fitted.fit.method == factor::FitMethod::PrincipalAxis {
            prepared.warn(format!(
                "factor {:?}: maximum likelihood did not converge, principal axis fallback used",
                fitted.name
            ));
        }
    }
    let scores = factor::factor_scores(&prepared.normalized, &config.factor_spec, &model)?;
    Ok((model, scores))
}

/// Canonical correlation between factor scores and the normalized hazard
/// columns; returns the solution and the normalized weight vectors.
pub fn cca_step(
    config: &PipelineConfig,
    prepared: &mut Prepared,
    factor_scores: &FactorScores,
) -> Result<(CanonicalSolution, Vec<f64>, Vec<f64>)> {
    let x = factor_scores.matrix();
    let y = prepared
        .normalized
        .matrix_of(&config.factor_spec.hazard_columns)?;
    let solution = canonical::cca(&x, &y)?;
    if solution.ridged {
        prepared.warn("near-singular covariance block in the canonical stage; ridge applied".into());
    }
    let factor_weights = canonical::factor_weights(&solution.x_weights)?;
    let hazard_weights = canonical::hazard_weights(&solution.y_weights)?;
    for (what, weights) in [("factor", &factor_weights), ("hazard", &hazard_weights)] {
        for w in weights.iter().filter(|w| **w < 0.0) {
            prepared.warn(format!("negative {what} weight {w:.6} kept (not clamped)"));
        }
    }
    Ok((solution, factor_weights, hazard_weights))
}

/// Composite and hazard indices, rank binning, and the correlation
/// diagnostics.
pub fn index_step(
    config: &PipelineConfig,
    prepared: &mut Prepared,
    factor_scores: &FactorScores,
    factor_weights: &[f64],
    hazard_weights: &[f64],
) -> Result<(RiskScores, BTreeMap<String, f64>)> {
    let risk_index = composite::composite_index(&factor_scores.scores, factor_weights)?;
    let hazard_rows: Vec<Vec<f64>> = (0..prepared.table.n_regions())
        .map(|i| {
            config
                .factor_spec
                .hazard_columns
                .iter()
                .map(|id| prepared.normalized.column(id).map(|c| c.values[i]))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let hazard_index = composite::hazard_index(&hazard_rows, hazard_weights)?;
    let kmeans = composite::kmeans_1d(&risk_index, config.bins)?;

    let scores = RiskScores {
        region_ids: prepared.table.regions.clone(),
        factor_names: factor_scores.factor_names.clone(),
        factor_scores: factor_scores.scores.clone(),
        risk_index: risk_index.clone(),
        hazard_index: hazard_index.clone(),
        rank: kmeans.ranks,
        cluster_centers: kmeans.centers,
    };

    let tags: Vec<Option<String>> = prepared
        .table
        .regions
        .iter()
        .map(|id| {
            prepared
                .regions
                .iter()
                .find(|r| &r.region_id == id)
                .and_then(|r| r.group_tag.clone())
        })
        .collect();
    let mut correlations = BTreeMap::new();
    correlations.insert(
        "overall".to_string(),
        composite::correlation_diagnostic(&risk_index, &hazard_index, &tags, None)?,
    );
    let mut distinct_tags: Vec<String> = tags.iter().flatten().cloned().collect();
    distinct_tags.sort();
    distinct_tags.dedup();
    for tag in distinct_tags {
        match composite::correlation_diagnostic(&risk_index, &hazard_index, &tags, Some(&tag)) {
            Ok(r) => {
                correlations.insert(tag, r);
            }
            Err(e) => prepared.warn(format!("correlation for group {tag:?} skipped: {e}")),
        }
    }
    Ok((scores, correlations))
}

/// Multivariate regression of the raw hazard counts on all indicator
/// columns (normalized predictors unless configured otherwise), with
/// per-predictor MANOVA rows.
pub fn regress_step(config: &PipelineConfig, prepared: &Prepared) -> Result<Vec<ManovaRow>> {
    let predictors = config.factor_spec.indicator_ids();
    let z = if config.normalize_regression {
        prepared.normalized.matrix_of(&predictors)?
    } else {
        raw_matrix(&prepared.table, &predictors)?
    };
    let y = raw_matrix(&prepared.table, &config.factor_spec.hazard_columns)?;
    regression::manova_per_predictor(&z, &y, &predictors)
}

fn raw_matrix(table: &IndicatorTable, ids: &[String]) -> Result<DMatrix<f64>> {
    let cols: Vec<&ingest::IndicatorColumn> =
        ids.iter().map(|id| table.column(id)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(table.n_regions(), cols.len(), |i, j| {
        cols[j].values[i]
    }))
}

/// Everything a full run computes, before any file is written.
pub struct PipelineResults {
    pub prepared: Prepared,
    pub adequacy: AdequacyReport,
    pub adequacy_blocks: Option<BTreeMap<String, AdequacyReport>>,
    pub factor_model: FactorModel,
    pub factor_scores: FactorScores,
    pub canonical: CanonicalSolution,
    pub factor_weights: Vec<f64>,
    pub hazard_weights: Vec<f64>,
    pub scores: RiskScores,
    pub correlations: BTreeMap<String, f64>,
    pub manova: Vec<ManovaRow>,
    pub report: AnalysisReport,
}

/// Run the full computation in memory.
pub fn compute(config: &PipelineConfig) -> Result<PipelineResults> {
    let mut prepared = prepare(config)?;
    let (adequacy, adequacy_blocks) = adequacy_step(config, &mut prepared)?;
    let (factor_model, factor_scores) = cfa_step(config, &mut prepared)?;
    let (canonical_solution, factor_weights, hazard_weights) =
        cca_step(config, &mut prepared, &factor_scores)?;
    let (scores, correlations) = index_step(
        config,
        &mut prepared,
        &factor_scores,
        &factor_weights,
        &hazard_weights,
    )?;
    let manova = regress_step(config, &prepared)?;

    let report = assemble_report(
        config,
        &prepared,
        &adequacy,
        &adequacy_blocks,
        &factor_model,
        &canonical_solution,
        &factor_weights,
        &hazard_weights,
        &correlations,
        &manova,
    );
    report.validate()?;

    Ok(PipelineResults {
        prepared,
        adequacy,
        adequacy_blocks,
        factor_model,
        factor_scores,
        canonical: canonical_solution,
        factor_weights,
        hazard_weights,
        scores,
        correlations,
        manova,
        report,
    })
}

#[allow(clippy::too_many_arguments)]
fn assemble_report(
    config: &PipelineConfig,
    prepared: &Prepared,
    adequacy: &AdequacyReport,
    adequacy_blocks: &Option<BTreeMap<String, AdequacyReport>>,
    factor_model: &FactorModel,
    canonical_solution: &CanonicalSolution,
    factor_weights: &[f64],
    hazard_weights: &[f64],
    correlations: &BTreeMap<String, f64>,
    manova: &[ManovaRow],
) -> AnalysisReport {
    let factor_models = factor_model
        .factors
        .iter()
        .map(FactorModelReport::from_fitted)
        .collect();
    let canonical_report = CanonicalReport::new(
        &config.factor_spec,
        canonical_solution,
        factor_weights,
        hazard_weights,
    );
    AnalysisReport {
        adequacy: adequacy.clone(),
        adequacy_blocks: adequacy_blocks.clone(),
        factor_models,
        canonical: canonical_report,
        correlations: correlations.clone(),
        manova: manova.to_vec(),
        warnings: prepared.warnings.clone(),
        run: RunMetadata {
            config_hash: prepared.config_hash.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::env::var("RISKDEX_TIMESTAMP").ok(),
        },
    }
}

#[derive(serde::Serialize)]
struct AdequacySection<'a> {
    adequacy: &'a AdequacyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    adequacy_blocks: &'a Option<BTreeMap<String, AdequacyReport>>,
}

fn write_normalized_csv(normalized: &NormalizedTable, path: &Path) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["region_id".to_string()];
    header.extend(normalized.columns.iter().map(|c| c.id.clone()));
    writer
        .write_record(&header)
        .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
    for (i, region) in normalized.regions.iter().enumerate() {
        let mut record = vec![region.clone()];
        for col in &normalized.columns {
            record.push(format!("{}", col.values[i]));
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::InvalidConfig(format!("csv write: {e}")))?;
    std::fs::write(path, bytes).map_err(crate::error::io_err(path))
}

/// Summary returned by [`run_pipeline`] and [`run_stage`].
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub config_hash: String,
}

/// Execute the full pipeline and write every artifact into the output
/// directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary> {
    let results = compute(config)?;
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(crate::error::io_err(out.clone()))?;

    let mut artifacts = Vec::new();

    let path = out.join("normalized.csv");
    write_normalized_csv(&results.prepared.normalized, &path)?;
    artifacts.push(path);

    let path = out.join("adequacy.json");
    report::write_section_json(
        &AdequacySection {
            adequacy: &results.adequacy,
            adequacy_blocks: &results.adequacy_blocks,
        },
        &path,
    )?;
    artifacts.push(path);

    let path = out.join("cfa.json");
    report::write_section_json(&results.report.factor_models, &path)?;
    artifacts.push(path);

    let path = out.join("cca.json");
    report::write_section_json(&results.report.canonical, &path)?;
    artifacts.push(path);

    let path = out.join("scores.csv");
    report::write_scores_csv(&results.scores, &path)?;
    artifacts.push(path);

    let path = out.join("manova.json");
    report::write_section_json(&results.report.manova, &path)?;
    artifacts.push(path);

    let path = out.join("manova.txt");
    let table = regression::render_significance_table(&results.manova, &config.factor_spec);
    std::fs::write(&path, table).map_err(crate::error::io_err(&path))?;
    artifacts.push(path);

    let path = out.join("risk_map.geojson");
    report::write_choropleth_geojson(&results.prepared.regions, &results.scores, &path)?;
    artifacts.push(path);

    let path = out.join("report.json");
    report::write_report_json(&results.report, &path)?;
    artifacts.push(path);

    Ok(RunSummary {
        artifacts,
        warnings: results.prepared.warnings,
        config_hash: results.report.run.config_hash.clone(),
    })
}

/// Run one stage's prefix of the pipeline and write only that stage's
/// artifact(s).
pub fn run_stage(config: &PipelineConfig, stage: Stage) -> Result<RunSummary> {
    let mut prepared = prepare(config)?;
    let out = config.output_dir.clone();
    std::fs::create_dir_all(&out).map_err(crate::error::io_err(out.clone()))?;
    let mut artifacts = Vec::new();

    match stage {
        Stage::Normalize => {
            let path = out.join("normalized.csv");
            write_normalized_csv(&prepared.normalized, &path)?;
            artifacts.push(path);
        }
        Stage::Adequacy => {
            let (adequacy, adequacy_blocks) = adequacy_step(config, &mut prepared)?;
            let path = out.join("adequacy.json");
            report::write_section_json(
                &AdequacySection {
                    adequacy: &adequacy,
                    adequacy_blocks: &adequacy_blocks,
                },
                &path,
            )?;
            artifacts.push(path);
        }
        Stage::Cfa => {
            adequacy_step(config, &mut prepared)?;
            let (model, _) = cfa_step(config, &mut prepared)?;
            let rows: Vec<FactorModelReport> = model
                .factors
                .iter()
                .map(FactorModelReport::from_fitted)
                .collect();
            let path = out.join("cfa.json");
            report::write_section_json(&rows, &path)?;
            artifacts.push(path);
        }
        Stage::Cca => {
            adequacy_step(config, &mut prepared)?;
            let (_, factor_scores) = cfa_step(config, &mut prepared)?;
            let (solution, factor_weights, hazard_weights) =
                cca_step(config, &mut prepared, &factor_scores)?;
            let section =
                CanonicalReport::new(&config.factor_spec, &solution, &factor_weights, &hazard_weights);
            let path = out.join("cca.json");
            report::write_section_json(&section, &path)?;
            artifacts.push(path);
        }
        Stage::Index => {
            adequacy_step(config, &mut prepared)?;
            let (_, factor_scores) = cfa_step(config, &mut prepared)?;
            let (_, factor_weights, hazard_weights) =
                cca_step(config, &mut prepared, &factor_scores)?;
            let (scores, _) = index_step(
                config,
                &mut prepared,
                &factor_scores,
                &factor_weights,
                &hazard_weights,
            )?;
            let path = out.join("scores.csv");
            report::write_scores_csv(&scores, &path)?;
            artifacts.push(path);
        }
        Stage::Regress => {
            adequacy_step(config, &mut prepared)?;
            let manova = regress_step(config, &prepared)?;
            let path = out.join("manova.json");
            report::write_section_json(&manova, &path)?;
            artifacts.push(path);
            let path = out.join("manova.txt");
            let table = regression::render_significance_table(&manova, &config.factor_spec);
            std::fs::write(&path, table).map_err(crate::error::io_err(&path))?;
            artifacts.push(path);
        }
    }
    Ok(RunSummary {
        artifacts,
        warnings: prepared.warnings,
        config_hash: prepared.config_hash,
    })
}
