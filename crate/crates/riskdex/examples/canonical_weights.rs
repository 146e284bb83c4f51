//! Canonical correlation between the factor scores and the normalized
//! hazard columns, and the weight vectors it induces for the composite
//! risk index and the hazard index.
//!
//! ```text
//! cargo run --example canonical_weights
//! ```

use std::path::Path;

use riskdex::canonical::{cca, factor_weights, hazard_weights};
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
    let scores = factor_scores(&normalized, &config.factor_spec, &model)?;

    let x = scores.matrix();
    let y = normalized.matrix_of(&config.factor_spec.hazard_columns)?;
    let solution = cca(&x, &y)?;

    println!("canonical correlations by pair:");
    for (i, pair) in solution.pairs.iter().enumerate() {
        println!("  pair {}: rho = {:.6}", i + 1, pair.rho);
    }

    let fw = factor_weights(&solution.x_weights)?;
    let hw = hazard_weights(&solution.y_weights)?;
    println!("\nfactor weights (first pair, normalized to sum 1):");
    for (name, w) in scores.factor_names.iter().zip(&fw) {
        println!("  {name:<16} {w:.4}");
    }
    println!("hazard weights:");
    for (name, w) in config.factor_spec.hazard_columns.iter().zip(&hw) {
        println!("  {name:<16} {w:.4}");
    }
    println!(
        "\nsums: factors {:.12}, hazards {:.12}",
        fw.iter().sum::<f64>(),
        hw.iter().sum::<f64>()
    );
    Ok(())
}
