//! The whole pipeline from one config file, writing every artifact to a
//! temporary directory. Equivalent to `riskdex run -c fixtures/config.toml`.
//!
//! ```text
//! cargo run --example full_pipeline
//! ```

use std::path::Path;

use riskdex::config::load_config;
use riskdex::pipeline::run_pipeline;

fn main() -> riskdex::Result<()> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut config = load_config(&fixtures.join("config.toml"))?;
    let out = tempfile::tempdir().expect("temporary output directory");
    config.output_dir = out.path().to_path_buf();

    let summary = run_pipeline(&config)?;
    println!("config hash {}", summary.config_hash);
    for artifact in &summary.artifacts {
        let len = std::fs::metadata(artifact).map(|m| m.len()).unwrap_or(0);
        println!(
            "  {:<18} {:>7} bytes",
            artifact.file_name().unwrap().to_string_lossy(),
            len
        );
    }
    for warning in &summary.warnings {
        println!("warning: {warning}");
    }

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.path().join("report.json")).unwrap())
            .unwrap();
    println!(
        "\nfirst canonical correlation: {}",
        report["canonical"]["rho"]
    );
    println!("factor weights: {}", report["canonical"]["factor_weights"]);
    println!("risk-vs-hazard correlations: {}", report["correlations"]);
    Ok(())
}
