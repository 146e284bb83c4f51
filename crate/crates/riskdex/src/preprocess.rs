//! Min-max normalization and the factorability diagnostics (Bartlett's
//! test of sphericity, Kaiser-Meyer-Olkin measure) that gate the factor
//! analysis stage.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::IndicatorTable;
use crate::stats;

/// Bartlett p-value must fall below this for the data to be considered
/// factorable.
pub const BARTLETT_ALPHA: f64 = 0.05;
/// KMO must reach this for the data to be considered factorable.
pub const KMO_THRESHOLD: f64 = 0.50;

/// A normalized column: values in [0, 1] plus the min/max used, kept for
/// audit.
#[derive(Debug, Clone, Serialize)]
pub struct NormalizedColumn {
    pub id: String,
    pub values: Vec<f64>,
    pub x_min: f64,
    pub x_max: f64,
}

/// Indicator table after min-max rescaling of every column.
#[derive(Debug, Clone)]
pub struct NormalizedTable {
    pub regions: Vec<String>,
    pub columns: Vec<NormalizedColumn>,
}

impl NormalizedTable {
    pub fn column(&self, id: &str) -> Result<&NormalizedColumn> {
        self.columns
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::ColumnMismatch { column: id.into() })
    }

    /// Dense matrix view of the named columns, in the given order.
    pub fn matrix_of(&self, ids: &[String]) -> Result<DMatrix<f64>> {
        let cols: Vec<&NormalizedColumn> =
            ids.iter().map(|id| self.column(id)).collect::<Result<_>>()?;
        let n = self.regions.len();
        Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j].values[i]))
    }
}

/// Factorability diagnostics over a set of columns.
#[derive(Debug, Clone, Serialize)]
pub struct AdequacyReport {
    pub bartlett_chi2: f64,
    pub bartlett_df: u64,
    pub bartlett_p: f64,
    pub kmo: f64,
    pub passed: bool,
}

/// Rescale every column to [0, 1]: z = (x - min) / (max - min). The
/// column minimum maps to exactly 0 and the maximum to exactly 1.
pub fn normalize(table: &IndicatorTable) -> Result<NormalizedTable> {
    let mut columns = Vec::with_capacity(table.columns.len());
    for col in &table.columns {
        let x_min = col.values.iter().copied().fold(f64::INFINITY, f64::min);
        let x_max = col.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if x_max <= x_min {
            return Err(Error::DegenerateColumn {
                column: col.id.clone(),
            });
        }
        let range = x_max - x_min;
        let values = col.values.iter().map(|&x| (x - x_min) / range).collect();
        columns.push(NormalizedColumn {
            id: col.id.clone(),
            values,
            x_min,
            x_max,
        });
    }
    Ok(NormalizedTable {
        regions: table.regions.clone(),
        columns,
    })
}

/// Bartlett's test of sphericity: do the columns depart from an identity
/// correlation matrix?
///
/// chi2 = -(n - 1 - (2p + 5)/6) ln det R, with df = p(p-1)/2 and the
/// p-value from the chi-square upper tail.
pub fn bartlett_sphericity(data: &DMatrix<f64>) -> Result<(f64, u64, f64)> {
    let (n, p) = (data.nrows(), data.ncols());
    if p < 2 {
        return Err(Error::InsufficientRows {
            rows: p,
            needed: 2,
        });
    }
    if n <= p {
        return Err(Error::InsufficientRows {
            rows: n,
            needed: p + 1,
        });
    }
    let r = stats::correlation_matrix(data)?;
    let det = r.determinant();
    if det <= 1e-15 {
        return Err(Error::SingularCorrelation {
            context: format!("det(R) = {det} in Bartlett's test"),
        });
    }
    let multiplier = n as f64 - 1.0 - (2.0 * p as f64 + 5.0) / 6.0;
    let chi2 = (-multiplier * det.ln()).max(0.0);
    let df = (p * (p - 1) / 2) as u64;
    let p_value = stats::chi_square_upper_tail(chi2, df as f64);
    Ok((chi2, df, p_value))
}

/// Kaiser-Meyer-Olkin measure of sampling adequacy: the share of squared
/// correlations not attributable to partial (anti-image) correlations.
pub fn kmo(data: &DMatrix<f64>) -> Result<f64> {
    let r = stats::correlation_matrix(data)?;
    let p = r.ncols();
    if p < 2 {
        return Err(Error::InsufficientRows { rows: p, needed: 2 });
    }
    if stats::sym_condition_number(&r) > 1e12 {
        return Err(Error::SingularCorrelation {
            context: "correlation matrix is numerically singular in KMO".into(),
        });
    }
    let inv = r.clone().try_inverse().ok_or(Error::SingularCorrelation {
        context: "correlation matrix is not invertible in KMO".into(),
    })?;
    for j in 0..p {
        if inv[(j, j)] <= 0.0 || !inv[(j, j)].is_finite() {
            return Err(Error::SingularCorrelation {
                context: "anti-image diagonal is not positive in KMO".into(),
            });
        }
    }
    let mut sum_r2 = 0.0;
    let mut sum_q2 = 0.0;
    for j in 0..p {
        for k in 0..p {
            if j == k {
                continue;
            }
            let q = -inv[(j, k)] / (inv[(j, j)] * inv[(k, k)]).sqrt();
            sum_r2 += r[(j, k)] * r[(j, k)];
            sum_q2 += q * q;
        }
    }
    if sum_r2 + sum_q2 == 0.0 {
        // identity correlation: no correlation structure at all
        return Ok(0.0);
    }
    Ok(sum_r2 / (sum_r2 + sum_q2))
}

/// Run both diagnostics and apply the adequacy gate thresholds.
pub fn adequacy_report(data: &DMatrix<f64>) -> Result<AdequacyReport> {
    let (bartlett_chi2, bartlett_df, bartlett_p) = bartlett_sphericity(data)?;
    let kmo_value = kmo(data)?;
    Ok(AdequacyReport {
        bartlett_chi2,
        bartlett_df,
        bartlett_p,
        kmo: kmo_value,
        passed: bartlett_p < BARTLETT_ALPHA && kmo_value >= KMO_THRESHOLD,
    })
}
