//! Per-block single-factor fits: loadings, explained variances, and the
//! renormalized indicator weights for every declared factor.
//!
//! ```text
//! cargo run --example factor_weights
//! ```

use std::path::Path;

use riskdex::config::load_config;
use riskdex::factor::{factor_scores, fit_factor_model, FitOptions};
use riskdex::ingest::load_indicator_table;
use riskdex::preprocess::normalize;

fn main() -> riskdex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = load_config(&fixtures.join("config.toml"))?;
    let table = load_indicator_table(&config.indicators, config.missing_policy)?;
    let normalized = normalize(&table)?;

    let model = fit_factor_model(&normalized, &config.factor_spec, &FitOptions::default())?;
    for factor in &model.factors {
        println!(
            "factor {:?} ({} iterations, converged: {})",
            factor.name, factor.fit.iterations, factor.fit.converged
        );
        println!(
            "  {:<22} {:>9} {:>11} {:>8}",
            "indicator", "loading", "explained", "weight"
        );
        for (j, indicator) in factor.indicators.iter().enumerate() {
            println!(
                "  {:<22} {:>9.4} {:>11.4} {:>8.4}",
                indicator,
                factor.fit.loadings[j],
                factor.fit.explained_variances[j],
                factor.weights[j]
            );
        }
        let total: f64 = factor.weights.iter().sum();
        println!("  weights sum to {total:.12}\n");
    }

    let scores = factor_scores(&normalized, &config.factor_spec, &model)?;
    println!("first regions' factor scores:");
    for (id, row) in normalized.regions.iter().zip(&scores.scores).take(5) {
        let cells: Vec<String> = row.iter().map(|s| format!("{s:.4}")).collect();
        println!("  {:<8} [{}]", id, cells.join(", "));
    }
    Ok(())
}
