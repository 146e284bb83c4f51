//! Multivariate regression of the hazard counts on all indicators and the
//! per-predictor significance table.
//!
//! ```text
//! cargo run --example manova_significance
//! ```

use std::path::Path;

use nalgebra::DMatrix;

use riskdex::config::load_config;
use riskdex::ingest::load_indicator_table;
use riskdex::preprocess::normalize;
use riskdex::regression::{manova_per_predictor, render_significance_table};

fn main() -> riskdex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = load_config(&fixtures.join("config.toml"))?;
    let table = load_indicator_table(&config.indicators, config.missing_policy)?;
    let normalized = normalize(&table)?;

    let predictors = config.factor_spec.indicator_ids();
    let z = normalized.matrix_of(&predictors)?;
    let y = {
        let cols: Vec<&riskdex::ingest::IndicatorColumn> = config
            .factor_spec
            .hazard_columns
            .iter()
            .map(|id| table.column(id))
            .collect::<riskdex::Result<_>>()?;
        DMatrix::from_fn(table.n_regions(), cols.len(), |i, j| cols[j].values[i])
    };

    let rows = manova_per_predictor(&z, &y, &predictors)?;
    println!("{}", render_significance_table(&rows, &config.factor_spec));

    println!("per-response p-values (t tests in the full model):");
    for row in &rows {
        let cells: Vec<String> = row
            .response_p_values
            .iter()
            .map(|p| format!("{p:.4}"))
            .collect();
        println!("  {:<22} [{}]", row.predictor, cells.join(", "));
    }
    Ok(())
}
