//! Min-max normalization and factorability diagnostics on the bundled
//! fixture, printing the per-column audit values and the adequacy gate.
//!
//! ```text
//! cargo run --example normalize_and_adequacy
//! ```

use std::path::Path;

use riskdex::ingest::{load_indicator_table, MissingPolicy};
use riskdex::preprocess::{adequacy_report, normalize};

fn main() -> riskdex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let table = load_indicator_table(&fixtures.join("indicators.csv"), MissingPolicy::Reject)?;
    println!(
        "loaded {} regions x {} columns",
        table.regions.len(),
        table.columns.len()
    );

    let normalized = normalize(&table)?;
    println!("\n{:<22} {:>14} {:>14}", "column", "x_min", "x_max");
    for col in &normalized.columns {
        println!("{:<22} {:>14.3} {:>14.3}", col.id, col.x_min, col.x_max);
        let lo = col.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = col.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0), "normalization hits both endpoints");
    }

    // diagnostics over the indicator columns (hazards excluded)
    let indicator_ids: Vec<String> = normalized
        .columns
        .iter()
        .map(|c| c.id.clone())
        .filter(|id| !matches!(id.as_str(), "confirmed" | "pdp" | "odp"))
        .collect();
    let data = normalized.matrix_of(&indicator_ids)?;
    let adequacy = adequacy_report(&data)?;
    println!(
        "\nBartlett chi2 = {:.4} (df {}), p = {:.3e}",
        adequacy.bartlett_chi2, adequacy.bartlett_df, adequacy.bartlett_p
    );
    println!("KMO = {:.4}", adequacy.kmo);
    println!("adequacy gate passed: {}", adequacy.passed);
    Ok(())
}
