//! Multivariate multiple regression of the hazard counts on all
//! indicators, with per-predictor MANOVA tests.
//!
//! Each response follows its own linear model over the shared predictors;
//! the joint fit is the column-wise least squares solution. Per-predictor
//! significance uses Wilks' lambda (the ratio of residual cross-product
//! determinants between the full model and the model without that
//! predictor) with Rao's F approximation; Pillai's trace is carried along
//! for audit, and per-response t tests are reported as well.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor::FactorSpec;
use crate::stats;

/// Rank tolerance for the pivoted QR check of the design matrix.
pub const RANK_TOL: f64 = 1e-10;

/// Fitted multivariate regression with intercept.
#[derive(Debug, Clone)]
pub struct MvRegressionFit {
    /// (r+1) x m coefficient matrix, intercept row first.
    pub coefficients: DMatrix<f64>,
    /// m x m residual covariance, divisor n - r - 1.
    pub residual_cov: DMatrix<f64>,
    /// m x m residual cross-product matrix E'E.
    pub residual_crossproduct: DMatrix<f64>,
    pub n: usize,
    pub n_predictors: usize,
    pub n_responses: usize,
    /// Coefficient of determination per response.
    pub r_squared: Vec<f64>,
}

/// Least squares fit of every response on the shared design `[1 | Z]`.
pub fn fit_mv_regression(z: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<MvRegressionFit> {
    let (n, r) = (z.nrows(), z.ncols());
    let m = y.ncols();
    assert_eq!(n, y.nrows(), "predictor/response row mismatch");
    if n <= r + 1 {
        return Err(Error::InsufficientRows {
            rows: n,
            needed: r + 2,
        });
    }
    let design = with_intercept(z);
    check_full_rank(&design)?;

    let qr = design.clone().qr();
    let q = qr.q();
    let rmat = qr.r();
    let qty = q.transpose() * y;
    let coefficients = rmat
        .solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficientDesign {
            rank: r,
            columns: r + 1,
        })?;

    let residuals = y - &design * &coefficients;
    let residual_crossproduct = residuals.transpose() * &residuals;
    let dof = (n - r - 1) as f64;
    let residual_cov = &residual_crossproduct / dof;

    let mut r_squared = Vec::with_capacity(m);
    for c in 0..m {
        let col = y.column(c);
        let mean = col.sum() / n as f64;
        let total: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sse = residual_crossproduct[(c, c)];
        r_squared.push(if total > 0.0 { 1.0 - sse / total } else { 0.0 });
    }

    Ok(MvRegressionFit {
        coefficients,
        residual_cov,
        residual_crossproduct,
        n,
        n_predictors: r,
        n_responses: m,
        r_squared,
    })
}

fn with_intercept(z: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = (z.nrows(), z.ncols());
    DMatrix::from_fn(n, r + 1, |i, j| if j == 0 { 1.0 } else { z[(i, j - 1)] })
}

fn check_full_rank(design: &DMatrix<f64>) -> Result<()> {
    let columns = design.ncols();
    let qr = design.clone().col_piv_qr();
    let rmat = qr.r();
    let pivot = rmat[(0, 0)].abs();
    let rank = (0..columns.min(rmat.nrows()))
        .take_while(|&j| rmat[(j, j)].abs() > RANK_TOL * pivot.max(1.0))
        .count();
    if rank < columns {
        return Err(Error::RankDeficientDesign { rank, columns });
    }
    Ok(())
}

/// One row of the per-predictor MANOVA table.
#[derive(Debug, Clone, Serialize)]
pub struct ManovaRow {
    pub predictor: String,
    pub wilks_lambda: f64,
    pub pillai_trace: f64,
    pub f_approx: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
    pub significant_at_05: bool,
    pub significant_at_10: bool,
    /// Two-sided t-test p-value per response for this predictor's
    /// coefficient in the full model.
    pub response_p_values: Vec<f64>,
}

/// Wilks' lambda test of each predictor's joint effect on all responses,
/// dropping one predictor at a time from the full model.
pub fn manova_per_predictor(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    predictor_names: &[String],
) -> Result<Vec<ManovaRow>> {
    let (n, r) = (z.nrows(), z.ncols());
    let m = y.ncols();
    assert_eq!(r, predictor_names.len(), "predictor name count mismatch");
    let full = fit_mv_regression(z, y)?;
    let det_full = psd_det(&full.residual_crossproduct)?;

    // (X'X)^{-1} diagonal for the per-response t tests
    let design = with_intercept(z);
    let xtx = design.transpose() * &design;
    let xtx_inv = xtx.try_inverse().ok_or(Error::RankDeficientDesign {
        rank: r,
        columns: r + 1,
    })?;
    let dof = (n - r - 1) as f64;

    let mut rows = Vec::with_capacity(r);
    for j in 0..r {
        let reduced = drop_column(z, j);
        let reduced_fit = fit_mv_regression(&reduced, y)?;
        let det_reduced = psd_det(&reduced_fit.residual_crossproduct)?;
        let lambda = (det_full / det_reduced).clamp(f64::MIN_POSITIVE, 1.0);

        // Pillai's trace over the hypothesis cross-product H = E_red - E_full
        let h = &reduced_fit.residual_crossproduct - &full.residual_crossproduct;
        let he = &h + &full.residual_crossproduct;
        let pillai = he
            .clone()
            .try_inverse()
            .map(|inv| (h * inv).trace())
            .unwrap_or(f64::NAN);

        let (f_approx, df1, df2, p_value) = rao_f(lambda, m as f64, 1.0, dof);

        let mut response_p_values = Vec::with_capacity(m);
        for c in 0..m {
            let beta = full.coefficients[(j + 1, c)];
            let se = (full.residual_cov[(c, c)] * xtx_inv[(j + 1, j + 1)]).sqrt();
            let t = if se > 0.0 { beta / se } else { f64::INFINITY };
            response_p_values.push(stats::t_two_sided_p(t, dof));
        }

        rows.push(ManovaRow {
            predictor: predictor_names[j].clone(),
            wilks_lambda: lambda,
            pillai_trace: pillai,
            f_approx,
            df1,
            df2,
            p_value,
            significant_at_05: p_value < 0.05,
            significant_at_10: p_value < 0.10,
            response_p_values,
        });
    }
    Ok(rows)
}

fn drop_column(z: &DMatrix<f64>, drop: usize) -> DMatrix<f64> {
    let (n, r) = (z.nrows(), z.ncols());
    DMatrix::from_fn(n, r - 1, |i, j| {
        let col = if j < drop { j } else { j + 1 };
        z[(i, col)]
    })
}

fn psd_det(m: &DMatrix<f64>) -> Result<f64> {
    let det = m.determinant();
    if !(det.is_finite() && det > 0.0) {
        return Err(Error::SingularResidualCrossProduct);
    }
    Ok(det)
}

/// Rao's F approximation for Wilks' lambda with `p` responses, `q`
/// hypothesis degrees of freedom, and `v` error degrees of freedom.
/// Exact for q = 1 (and for any case with min(p, q) <= 2).
fn rao_f(lambda: f64, p: f64, q: f64, v: f64) -> (f64, f64, f64, f64) {
    let denom = p * p + q * q - 5.0;
    let t = if denom > 0.0 {
        ((p * p * q * q - 4.0) / denom).sqrt()
    } else {
        1.0
    };
    let w = v + q - (p + q + 1.0) / 2.0;
    let df1 = p * q;
    let df2 = w * t - (p * q - 2.0) / 2.0;
    let ratio = lambda.powf(1.0 / t);
    let f = ((1.0 - ratio) / ratio * df2 / df1).max(0.0);
    let p_value = stats::f_upper_tail(f, df1, df2).clamp(0.0, 1.0);
    (f, df1, df2, p_value)
}

/// Format a p-value to four decimals with the significance markers used in
/// the text report: `*` below 0.05, `**` between 0.05 and 0.10.
pub fn format_p_value(p: f64) -> String {
    let stars = if p < 0.05 {
        "*"
    } else if p < 0.10 {
        "**"
    } else {
        ""
    };
    if p < 0.0001 {
        format!("<0.0001{stars}")
    } else {
        format!("{p:.4}{stars}")
    }
}

/// Render the per-predictor significance table, rows grouped by factor in
/// spec order, with hazard-only columns (if any predictors are not in a
/// factor) appended last.
pub fn render_significance_table(rows: &[ManovaRow], spec: &FactorSpec) -> String {
    let find = |name: &str| rows.iter().find(|r| r.predictor == name);
    let mut width = "Variable".len();
    for row in rows {
        width = width.max(row.predictor.len());
    }
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14}  {:<width$}  p-value\n",
        "Factor",
        "Variable",
        width = width
    ));
    let mut seen = std::collections::HashSet::new();
    for block in &spec.factors {
        let mut first = true;
        for indicator in &block.indicators {
            if let Some(row) = find(indicator) {
                seen.insert(row.predictor.clone());
                let factor_cell = if first { block.name.as_str() } else { "" };
                out.push_str(&format!(
                    "{:<14}  {:<width$}  {}\n",
                    factor_cell,
                    row.predictor,
                    format_p_value(row.p_value),
                    width = width
                ));
                first = false;
            }
        }
    }
    for row in rows {
        if !seen.contains(&row.predictor) {
            out.push_str(&format!(
                "{:<14}  {:<width$}  {}\n",
                "",
                row.predictor,
                format_p_value(row.p_value),
                width = width
            ));
        }
    }
    out.push_str("*Significant at alpha=5%, ** Significant at alpha=10%\n");
    out
}
