//! Shared numeric helpers: correlation matrices, distribution tail
//! probabilities, and symmetric matrix roots.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Pearson correlation of two equal-length slices.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientRows { rows: n, needed: 2 });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let cx = x[i] - mx;
        let cy = y[i] - my;
        sxy += cx * cy;
        sxx += cx * cx;
        syy += cy * cy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateVariance { side: "x".into() });
    }
    if syy == 0.0 {
        return Err(Error::DegenerateVariance { side: "y".into() });
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Sample Pearson correlation matrix of the columns of `data` (rows are
/// observations). Errors with [`Error::DegenerateColumn`] on any
/// zero-variance column.
pub fn correlation_matrix(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, p) = (data.nrows(), data.ncols());
    if n < 2 {
        return Err(Error::InsufficientRows { rows: n, needed: 2 });
    }
    let mut centered = data.clone();
    let mut norms = vec![0.0; p];
    for j in 0..p {
        let mean = data.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
        let ss: f64 = centered.column(j).iter().map(|v| v * v).sum();
        if ss == 0.0 {
            return Err(Error::DegenerateColumn {
                column: format!("column {j}"),
            });
        }
        norms[j] = ss.sqrt();
    }
    let mut r = DMatrix::zeros(p, p);
    for j in 0..p {
        r[(j, j)] = 1.0;
        for k in (j + 1)..p {
            let dot: f64 = centered.column(j).dot(&centered.column(k));
            let v = dot / (norms[j] * norms[k]);
            r[(j, k)] = v;
            r[(k, j)] = v;
        }
    }
    Ok(r)
}

/// Sample covariance matrix (divisor n-1) of the columns of `data`.
pub fn covariance_matrix(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::InsufficientRows { rows: n, needed: 2 });
    }
    let centered = center_columns(data);
    Ok(centered.transpose() * &centered / (n as f64 - 1.0))
}

/// Cross-covariance (divisor n-1) between the columns of `x` and `y`.
pub fn cross_covariance(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let cx = center_columns(x);
    let cy = center_columns(y);
    cx.transpose() * &cy / (n - 1.0)
}

pub fn center_columns(data: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = (data.nrows(), data.ncols());
    let mut out = data.clone();
    for j in 0..p {
        let mean = data.column(j).sum() / n as f64;
        for i in 0..n {
            out[(i, j)] -= mean;
        }
    }
    out
}

/// Eigenvalue floor used when inverting near-singular symmetric matrices.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Symmetric eigendecomposition sorted by descending eigenvalue.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Inverse symmetric square root `m^{-1/2}` with eigenvalues floored at
/// [`EIGEN_FLOOR`].
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(m);
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        vectors[(i, j)] / values[j].max(EIGEN_FLOOR).sqrt()
    });
    &scaled * vectors.transpose()
}

/// Condition number of a symmetric matrix; infinite when the smallest
/// eigenvalue is not strictly positive.
pub fn sym_condition_number(m: &DMatrix<f64>) -> f64 {
    let (values, _) = sym_eigen(m);
    let max = values[0];
    let min = values[values.len() - 1];
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Upper-tail probability of the chi-square distribution, via the
/// regularized upper incomplete gamma function.
pub fn chi_square_upper_tail(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(df / 2.0, x / 2.0)
}

/// Upper-tail probability of the F distribution with `df1`, `df2` degrees
/// of freedom, via the regularized incomplete beta function.
pub fn f_upper_tail(f: f64, df1: f64, df2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    // P(F > f) = I_{df2/(df2 + df1 f)}(df2/2, df1/2)
    let x = df2 / (df2 + df1 * f);
    statrs::function::beta::beta_reg(df2 / 2.0, df1 / 2.0, x)
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, x)
}

/// Round to `digits` significant digits; used when fixing the precision of
/// serialized artifacts.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits as usize - 1, x).parse().unwrap()
}
