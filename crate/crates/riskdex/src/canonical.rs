//! Canonical correlation between factor scores and hazard counts.
//!
//! The first canonical pair maximizes the correlation between a weighted
//! sum of the factors and a weighted sum of the hazard variables; its
//! weight vectors, normalized to sum to one, become the factor weights of
//! the composite index and the hazard-index weights. All higher-order
//! pairs are retained for audit.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats;

/// Condition-number threshold beyond which a ridge is added to a
/// covariance block.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Ridge scale relative to the block trace.
pub const RIDGE_SCALE: f64 = 1e-10;

/// One canonical pair: its correlation and the two weight vectors, each
/// scaled to unit in-sample variance of the corresponding variate.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalPair {
    pub rho: f64,
    pub x_weights: Vec<f64>,
    pub y_weights: Vec<f64>,
}

/// Full canonical solution between two column sets.
#[derive(Debug, Clone, Serialize)]
pub struct CanonicalSolution {
    /// First-pair weight vector over X, unit in-sample variance.
    pub x_weights: Vec<f64>,
    /// First-pair weight vector over Y, unit in-sample variance.
    pub y_weights: Vec<f64>,
    /// First canonical correlation.
    pub rho: f64,
    /// All canonical pairs, strongest first.
    pub pairs: Vec<CanonicalPair>,
    /// A ridge was added to a near-singular covariance block.
    pub ridged: bool,
}

/// Solve the canonical correlation problem via singular value
/// decomposition of the whitened cross-covariance
/// `Cxx^{-1/2} Cxy Cyy^{-1/2}`.
///
/// The sign of each pair is fixed so the X-weights sum positive.
pub fn cca(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<CanonicalSolution> {
    let (n, k) = (x.nrows(), x.ncols());
    let m = y.ncols();
    assert_eq!(n, y.nrows(), "cca: row count mismatch");
    if k == 0 || m == 0 {
        return Err(Error::SingularBlock {
            block: "empty".into(),
        });
    }
    if n <= k + m {
        return Err(Error::InsufficientRows {
            rows: n,
            needed: k + m + 1,
        });
    }

    let cxx = stats::covariance_matrix(x)?;
    let cyy = stats::covariance_matrix(y)?;
    let cxy = stats::cross_covariance(x, y);

    let (cxx, ridged_x) = ridge_if_ill_conditioned(cxx, "x")?;
    let (cyy, ridged_y) = ridge_if_ill_conditioned(cyy, "y")?;

    let wx = stats::sym_inv_sqrt(&cxx);
    let wy = stats::sym_inv_sqrt(&cyy);
    let whitened = &wx * &cxy * &wy;

    let svd = nalgebra::SVD::new(whitened, true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });

    let mut pairs = Vec::with_capacity(order.len());
    for &idx in &order {
        let a_raw: DVector<f64> = &wx * u.column(idx).into_owned();
        let b_raw: DVector<f64> = &wy * v_t.row(idx).transpose();
        // rescale to unit in-sample variance of the variates
        let a = scale_to_unit_variance(a_raw, x);
        let b = scale_to_unit_variance(b_raw, y);
        let (a, b) = fix_signs(a, b);
        let rho = variate_correlation(&a, x, &b, y).clamp(-1.0, 1.0);
        pairs.push(CanonicalPair {
            rho,
            x_weights: a.iter().copied().collect(),
            y_weights: b.iter().copied().collect(),
        });
    }

    let first = pairs.first().ok_or(Error::SingularBlock {
        block: "empty".into(),
    })?;
    Ok(CanonicalSolution {
        x_weights: first.x_weights.clone(),
        y_weights: first.y_weights.clone(),
        rho: first.rho,
        pairs,
        ridged: ridged_x || ridged_y,
    })
}

fn ridge_if_ill_conditioned(mut c: DMatrix<f64>, side: &str) -> Result<(DMatrix<f64>, bool)> {
    let trace = c.trace();
    if trace <= 0.0 {
        return Err(Error::SingularBlock { block: side.into() });
    }
    if stats::sym_condition_number(&c) > RIDGE_CONDITION {
        let ridge = RIDGE_SCALE * trace;
        for j in 0..c.nrows() {
            c[(j, j)] += ridge;
        }
        Ok((c, true))
    } else {
        Ok((c, false))
    }
}

fn scale_to_unit_variance(weights: DVector<f64>, data: &DMatrix<f64>) -> DVector<f64> {
    let variate = data * &weights;
    let n = variate.len() as f64;
    let mean = variate.sum() / n;
    let var = variate.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var > 0.0 {
        weights / var.sqrt()
    } else {
        weights
    }
}

fn fix_signs(a: DVector<f64>, b: DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    if a.sum() < 0.0 {
        (-a, -b)
    } else {
        (a, b)
    }
}

fn variate_correlation(a: &DVector<f64>, x: &DMatrix<f64>, b: &DVector<f64>, y: &DMatrix<f64>) -> f64 {
    let u = x * a;
    let v = y * b;
    stats::pearson(u.as_slice(), v.as_slice()).unwrap_or(0.0)
}

/// Normalize the first-pair X-weights into factor weights that sum to one.
/// Negative entries are kept, flagged by the caller as warnings.
pub fn factor_weights(x_weights: &[f64]) -> Result<Vec<f64>> {
    normalized_weights(x_weights)
}

/// Normalize the first-pair Y-weights into hazard-index weights; identical
/// contract to [`factor_weights`].
pub fn hazard_weights(y_weights: &[f64]) -> Result<Vec<f64>> {
    normalized_weights(y_weights)
}

fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if total.abs() < 1e-12 {
        return Err(Error::DegenerateWeights);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}
