//! Composite risk index assembly, optimal 1D k-means rank binning, and
//! the risk-vs-hazard correlation diagnostic.
//!
//! The rank binning is an exact dynamic program over the sorted index
//! values: clusters of a one-dimensional optimum are contiguous in sorted
//! order, so the global within-cluster sum-of-squares minimum is found by
//! choosing split points between runs of equal values. Equal values always
//! share a cluster, and ranks are numbered by ascending cluster center.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Per-region assembled scores: factor scores, composite risk index,
/// hazard index, and the ordered rank bin (1 = lowest risk).
#[derive(Debug, Clone, Serialize)]
pub struct RiskScores {
    pub region_ids: Vec<String>,
    pub factor_names: Vec<String>,
    /// `factor_scores[i][k]`: region i's score on factor k.
    pub factor_scores: Vec<Vec<f64>>,
    pub risk_index: Vec<f64>,
    pub hazard_index: Vec<f64>,
    pub rank: Vec<usize>,
    pub cluster_centers: Vec<f64>,
}

/// Weighted sum of factor scores per region.
pub fn composite_index(scores: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    weighted_sum(scores, weights)
}

/// Weighted sum of normalized hazard columns per region; identical
/// contract to [`composite_index`].
pub fn hazard_index(hazard_rows: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    weighted_sum(hazard_rows, weights)
}

fn weighted_sum(rows: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        if row.len() != weights.len() {
            return Err(Error::WeightMismatch {
                weights: weights.len(),
                expected: row.len(),
            });
        }
        out.push(row.iter().zip(weights).map(|(v, w)| v * w).sum());
    }
    Ok(out)
}

/// Result of the exact 1D k-means: the rank of each input value (1-based,
/// by ascending cluster center) and the cluster centers in ascending
/// order.
#[derive(Debug, Clone, Serialize)]
pub struct Kmeans1d {
    pub ranks: Vec<usize>,
    pub centers: Vec<f64>,
    pub wcss: f64,
}

/// Globally optimal univariate k-means into `groups` clusters.
///
/// Dynamic program over blocks of equal values in sorted order; ties on
/// the optimal split fall to the leftmost split point, so the result is
/// fully deterministic. Assignments are returned in input order.
pub fn kmeans_1d(values: &[f64], groups: usize) -> Result<Kmeans1d> {
    if groups == 0 {
        return Err(Error::InvalidConfig("bins must be at least 1".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(
            "clustering input contains non-finite values".into(),
        ));
    }
    if values.is_empty() || values.len() < groups {
        return Err(Error::TooFewDistinctValues {
            distinct: values.len(),
            groups,
        });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());

    // compress runs of equal values into weighted blocks
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &idx in &order {
        let v = values[idx];
        match blocks.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => blocks.push((v, 1)),
        }
    }
    let b = blocks.len();
    if b < groups {
        return Err(Error::TooFewDistinctValues {
            distinct: b,
            groups,
        });
    }

    // prefix sums over blocks for O(1) within-cluster cost
    let mut prefix_n = vec![0.0; b + 1];
    let mut prefix_s = vec![0.0; b + 1];
    let mut prefix_s2 = vec![0.0; b + 1];
    for (i, &(v, count)) in blocks.iter().enumerate() {
        let w = count as f64;
        prefix_n[i + 1] = prefix_n[i] + w;
        prefix_s[i + 1] = prefix_s[i] + w * v;
        prefix_s2[i + 1] = prefix_s2[i] + w * v * v;
    }
    // cost of grouping blocks lo..hi (exclusive hi) into one cluster
    let cost = |lo: usize, hi: usize| -> f64 {
        let n = prefix_n[hi] - prefix_n[lo];
        let s = prefix_s[hi] - prefix_s[lo];
        let s2 = prefix_s2[hi] - prefix_s2[lo];
        (s2 - s * s / n).max(0.0)
    };

    // dp[g][j]: minimal cost of splitting the first j blocks into g clusters
    let mut dp = vec![vec![f64::INFINITY; b + 1]; groups + 1];
    let mut split = vec![vec![0usize; b + 1]; groups + 1];
    dp[0][0] = 0.0;
    for g in 1..=groups {
        for j in g..=(b - (groups - g)) {
            for s in (g - 1)..j {
                let candidate = dp[g - 1][s] + cost(s, j);
                if candidate < dp[g][j] {
                    dp[g][j] = candidate;
                    split[g][j] = s;
                }
            }
        }
    }

    // backtrack the split points
    let mut boundaries = vec![b];
    let mut j = b;
    for g in (1..=groups).rev() {
        j = split[g][j];
        boundaries.push(j);
    }
    boundaries.reverse(); // 0 = boundaries[0] < ... < boundaries[groups] = b

    let mut centers = Vec::with_capacity(groups);
    let mut block_rank = vec![0usize; b];
    for g in 0..groups {
        let (lo, hi) = (boundaries[g], boundaries[g + 1]);
        let n = prefix_n[hi] - prefix_n[lo];
        centers.push((prefix_s[hi] - prefix_s[lo]) / n);
        for rank in block_rank.iter_mut().take(hi).skip(lo) {
            *rank = g + 1;
        }
    }

    // map each original value to its block's rank
    let mut ranks = vec![0usize; values.len()];
    let mut block_idx = 0usize;
    for &idx in &order {
        while blocks[block_idx].0 != values[idx] {
            block_idx += 1;
        }
        ranks[idx] = block_rank[block_idx];
    }

    Ok(Kmeans1d {
        ranks,
        centers,
        wcss: dp[groups][b],
    })
}

/// Pearson correlation between risk and hazard indices over all regions or
/// over the regions carrying `subset_tag`.
pub fn correlation_diagnostic(
    risk_index: &[f64],
    hazard_index: &[f64],
    group_tags: &[Option<String>],
    subset_tag: Option<&str>,
) -> Result<f64> {
    assert_eq!(risk_index.len(), hazard_index.len());
    assert_eq!(risk_index.len(), group_tags.len());
    let selected: Vec<usize> = match subset_tag {
        None => (0..risk_index.len()).collect(),
        Some(tag) => group_tags
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_deref() == Some(tag))
            .map(|(i, _)| i)
            .collect(),
    };
    if let Some(tag) = subset_tag {
        if selected.is_empty() {
            return Err(Error::EmptySubset { tag: tag.into() });
        }
    }
    if selected.len() < 3 {
        return Err(Error::InsufficientRows {
            rows: selected.len(),
            needed: 3,
        });
    }
    let xs: Vec<f64> = selected.iter().map(|&i| risk_index[i]).collect();
    let ys: Vec<f64> = selected.iter().map(|&i| hazard_index[i]).collect();
    stats::pearson(&xs, &ys)
}
