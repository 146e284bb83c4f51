//! Composite index assembly and exact 1D k-means rank binning.
//!
//! ```text
//! cargo run --example risk_ranks
//! ```

use riskdex::composite::{composite_index, correlation_diagnostic, kmeans_1d};

fn main() -> riskdex::Result<()> {
    // hand-set factor scores for nine regions and fixed weights
    let scores = vec![
        vec![0.10, 0.05, 0.20],
        vec![0.15, 0.12, 0.10],
        vec![0.22, 0.25, 0.30],
        vec![0.35, 0.30, 0.20],
        vec![0.48, 0.52, 0.45],
        vec![0.55, 0.49, 0.60],
        vec![0.72, 0.80, 0.65],
        vec![0.90, 0.85, 0.95],
        vec![0.97, 0.99, 0.88],
    ];
    let weights = [0.5, 0.3, 0.2];

    let index = composite_index(&scores, &weights)?;
    let clustering = kmeans_1d(&index, 3)?;

    println!("{:<8} {:>10} {:>6}", "region", "index", "rank");
    for (i, (value, rank)) in index.iter().zip(&clustering.ranks).enumerate() {
        println!("r{:<7} {value:>10.4} {rank:>6}", i + 1);
    }
    println!(
        "\ncluster centers (ascending): {:?}",
        clustering
            .centers
            .iter()
            .map(|c| (c * 1e4).round() / 1e4)
            .collect::<Vec<f64>>()
    );
    println!("within-cluster sum of squares: {:.6}", clustering.wcss);

    // a hazard series strongly related to the index correlates highly
    let hazard: Vec<f64> = index.iter().map(|v| 0.8 * v + 0.05).collect();
    let tags = vec![None; hazard.len()];
    let r = correlation_diagnostic(&index, &hazard, &tags, None)?;
    println!("risk-vs-hazard Pearson r = {r:.4}");
    Ok(())
}
