//! Per-block single-factor measurement models.
//!
//! Each declared factor block is fitted with a one-factor maximum
//! likelihood factor analysis on the block's correlation matrix (EM
//! updates), yielding loadings and explained variances (communalities).
//! Indicator weights combine loadings and explained variances, then are
//! renormalized to sum to one per factor. Factor scores are the weighted
//! sums of the normalized indicators.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::NormalizedTable;
use crate::stats;

/// Declarative grouping of indicator columns into named factors, plus the
/// hazard columns kept aside for the canonical stage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorSpec {
    pub factors: Vec<FactorBlock>,
    pub hazard_columns: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FactorBlock {
    pub name: String,
    pub indicators: Vec<String>,
}

impl FactorSpec {
    /// Every indicator in exactly one factor, blocks disjoint from the
    /// hazard set, at least two indicators per factor.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Error::InvalidConfig(msg);
        if self.factors.is_empty() {
            return Err(fail("factor spec declares no factors".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for block in &self.factors {
            if block.indicators.len() < 2 {
                return Err(fail(format!(
                    "factor {:?} has {} indicators, at least 2 required",
                    block.name,
                    block.indicators.len()
                )));
            }
            for id in &block.indicators {
                if !seen.insert(id.clone()) {
                    return Err(fail(format!(
                        "indicator {id:?} appears in more than one factor"
                    )));
                }
            }
        }
        for id in &self.hazard_columns {
            if seen.contains(id) {
                return Err(fail(format!(
                    "hazard column {id:?} also appears in a factor block"
                )));
            }
        }
        if self.hazard_columns.is_empty() {
            return Err(fail("factor spec declares no hazard columns".into()));
        }
        Ok(())
    }

    pub fn indicator_ids(&self) -> Vec<String> {
        self.factors
            .iter()
            .flat_map(|b| b.indicators.iter().cloned())
            .collect()
    }

    pub fn factor_names(&self) -> Vec<String> {
        self.factors.iter().map(|b| b.name.clone()).collect()
    }
}

/// Estimation method used for a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    MaximumLikelihood,
    PrincipalAxis,
}

/// What to do when the maximum likelihood iteration fails to converge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonConvergencePolicy {
    Error,
    PrincipalAxis,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub on_non_convergence: NonConvergencePolicy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            on_non_convergence: NonConvergencePolicy::Error,
        }
    }
}

/// Uniqueness floor; a communality reaching `1 - HEYWOOD_TOL` flags the
/// solution as a Heywood case.
pub const HEYWOOD_TOL: f64 = 1e-6;

/// Off-diagonal correlation threshold below which a block carries no
/// common variance at all.
const DEGENERATE_CORR: f64 = 1e-10;

/// One fitted single-factor block.
#[derive(Debug, Clone, Serialize)]
pub struct SingleFactorFit {
    /// Loading per indicator, sign convention: loadings sum > 0.
    pub loadings: Vec<f64>,
    /// Variance of each indicator explained by the factor (communality,
    /// the squared loading).
    pub explained_variances: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub method: FitMethod,
    /// Some communality hit the admissibility bound and was clamped.
    pub heywood: bool,
    /// The block carries no common variance (all loadings zero).
    pub degenerate: bool,
}

/// Fit a one-factor model to the columns of `block` (rows are regions).
///
/// Uses EM updates for the maximum likelihood solution on the sample
/// correlation matrix; the two-indicator block is exactly identified and
/// solved in closed form.
pub fn fit_single_factor(block: &DMatrix<f64>, options: &FitOptions) -> Result<SingleFactorFit> {
    fit_single_factor_named(block, options, "block")
}

pub(crate) fn fit_single_factor_named(
    block: &DMatrix<f64>,
    options: &FitOptions,
    name: &str,
) -> Result<SingleFactorFit> {
    let (n, p) = (block.nrows(), block.ncols());
    if p < 2 {
        return Err(Error::DegenerateBlock {
            block: name.into(),
            reason: format!("{p} columns, at least 2 required"),
        });
    }
    if n <= p {
        return Err(Error::InsufficientRows {
            rows: n,
            needed: p + 1,
        });
    }
    let r = stats::correlation_matrix(block).map_err(|e| match e {
        Error::DegenerateColumn { column } => Error::DegenerateBlock {
            block: name.into(),
            reason: format!("{column} has zero variance"),
        },
        other => other,
    })?;

    // no common variance: the model is the identity, loadings are zero
    let max_off_diag = (0..p)
        .flat_map(|j| (0..p).filter(move |&k| k != j).map(move |k| (j, k)))
        .map(|(j, k)| r[(j, k)].abs())
        .fold(0.0, f64::max);
    if max_off_diag <= DEGENERATE_CORR {
        return Ok(SingleFactorFit {
            loadings: vec![0.0; p],
            explained_variances: vec![0.0; p],
            iterations: 0,
            converged: true,
            log_likelihood: log_likelihood(&r, &vec![0.0; p], &vec![1.0; p], n),
            method: FitMethod::MaximumLikelihood,
            heywood: false,
            degenerate: true,
        });
    }

    if p == 2 {
        return Ok(fit_two_indicator(&r, n));
    }

    let mut fit = fit_ml_em(&r, n, options);
    if !fit.converged {
        match options.on_non_convergence {
            NonConvergencePolicy::Error => {
                return Err(Error::NonConvergence {
                    block: name.into(),
                    iterations: options.max_iterations,
                })
            }
            NonConvergencePolicy::PrincipalAxis => {
                fit = fit_principal_axis(&r, n, options);
            }
        }
    }
    Ok(fit)
}

/// Two indicators are exactly identified: both loadings have magnitude
/// sqrt(|r|) and their product reproduces the sample correlation.
fn fit_two_indicator(r: &DMatrix<f64>, n: usize) -> SingleFactorFit {
    let corr = r[(0, 1)];
    let magnitude = corr.abs().sqrt();
    let loadings = if corr < 0.0 {
        vec![magnitude, -magnitude]
    } else {
        vec![magnitude, magnitude]
    };
    let mut fit = SingleFactorFit {
        explained_variances: loadings.iter().map(|l| l * l).collect(),
        iterations: 0,
        converged: true,
        log_likelihood: 0.0,
        method: FitMethod::MaximumLikelihood,
        heywood: false,
        degenerate: false,
        loadings,
    };
    clamp_heywood(&mut fit);
    apply_sign_convention(&mut fit.loadings);
    let psis: Vec<f64> = fit.explained_variances.iter().map(|e| 1.0 - e).collect();
    fit.log_likelihood = log_likelihood(r, &fit.loadings, &psis, n);
    fit
}

/// One EM update of (loadings, uniquenesses) given the correlation
/// matrix: expected factor score moments under the current model, then
/// re-estimation from them.
fn em_step(r: &DMatrix<f64>, state: &EmState) -> EmState {
    let p = state.lambda.len();
    // g = Sigma^{-1} lambda via the rank-one (Woodbury) form
    let u = DVector::from_fn(p, |j, _| state.lambda[j] / state.psi[j]);
    let alpha = 1.0 + state.lambda.dot(&u);
    let g = &u / alpha;
    let rg = r * &g;
    let czz = g.dot(&rg) + (1.0 - state.lambda.dot(&g));
    let lambda = &rg / czz;
    let psi = DVector::from_fn(p, |j, _| (r[(j, j)] - lambda[j] * rg[j]).max(HEYWOOD_TOL));
    EmState { lambda, psi }
}

#[derive(Clone)]
struct EmState {
    lambda: DVector<f64>,
    psi: DVector<f64>,
}

impl EmState {
    fn max_change(&self, other: &EmState) -> f64 {
        let mut delta: f64 = 0.0;
        for j in 0..self.lambda.len() {
            delta = delta.max((self.lambda[j] - other.lambda[j]).abs());
            delta = delta.max((self.psi[j] - other.psi[j]).abs());
        }
        delta
    }

    fn clamped(mut self) -> EmState {
        let bound = (1.0 - HEYWOOD_TOL).sqrt();
        for l in self.lambda.iter_mut() {
            *l = l.clamp(-bound, bound);
        }
        for v in self.psi.iter_mut() {
            *v = v.max(HEYWOOD_TOL);
        }
        self
    }

    /// Profile log-likelihood kernel -(ln det Sigma + tr(Sigma^{-1} R)),
    /// evaluated with the Woodbury identities; larger is better.
    fn loglik_kernel(&self, r: &DMatrix<f64>) -> f64 {
        let p = self.lambda.len();
        let u = DVector::from_fn(p, |j, _| self.lambda[j] / self.psi[j]);
        let alpha = 1.0 + self.lambda.dot(&u);
        let ln_det: f64 = self.psi.iter().map(|v| v.ln()).sum::<f64>() + alpha.ln();
        let tr_psi_inv_r: f64 = (0..p).map(|j| r[(j, j)] / self.psi[j]).sum();
        let ru = r * &u;
        let trace = tr_psi_inv_r - u.dot(&ru) / alpha;
        -(ln_det + trace)
    }
}

/// Maximum likelihood one-factor solution: EM updates with SQUAREM
/// extrapolation (safeguarded by the likelihood) to reach the 1e-8
/// parameter tolerance within the iteration budget even when a
/// communality sits near the admissibility boundary.
fn fit_ml_em(r: &DMatrix<f64>, n: usize, options: &FitOptions) -> SingleFactorFit {
    let p = r.ncols();
    // principal-component start
    let (values, vectors) = stats::sym_eigen(r);
    let scale = values[0].max(0.0).sqrt();
    let lambda = DVector::from_iterator(p, vectors.column(0).iter().map(|v| v * scale));
    let mut state = EmState {
        psi: DVector::from_fn(p, |j, _| (1.0 - lambda[j] * lambda[j]).max(HEYWOOD_TOL)),
        lambda,
    }
    .clamped();

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < options.max_iterations {
        let first = em_step(r, &state);
        let second = em_step(r, &first);
        iterations += 2;
        if second.max_change(&first) < options.tolerance {
            state = second;
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            state = second;
            break;
        }
        // SQUAREM step-length from the two EM displacements
        let len = 2 * p;
        let mut rr = 0.0;
        let mut vv = 0.0;
        let mut displacement = vec![0.0; len];
        let mut curvature = vec![0.0; len];
        for j in 0..p {
            displacement[j] = first.lambda[j] - state.lambda[j];
            displacement[p + j] = first.psi[j] - state.psi[j];
            curvature[j] = second.lambda[j] - first.lambda[j] - displacement[j];
            curvature[p + j] = second.psi[j] - first.psi[j] - displacement[p + j];
        }
        for i in 0..len {
            rr += displacement[i] * displacement[i];
            vv += curvature[i] * curvature[i];
        }
        if vv == 0.0 {
            state = second;
            converged = true;
            break;
        }
        let step = -(rr / vv).sqrt().max(1.0);
        let mut accelerated = state.clone();
        for j in 0..p {
            accelerated.lambda[j] = state.lambda[j] - 2.0 * step * displacement[j]
                + step * step * curvature[j];
            accelerated.psi[j] =
                state.psi[j] - 2.0 * step * displacement[p + j] + step * step * curvature[p + j];
        }
        let stabilized = em_step(r, &accelerated.clamped());
        iterations += 1;
        // keep the accelerated point only when it does not hurt the fit
        if stabilized.loglik_kernel(r) + 1e-12 >= second.loglik_kernel(r) {
            state = stabilized;
        } else {
            state = second;
        }
    }

    // Boundary detection. EM creeps when a uniqueness heads for zero, so
    // parameter-change convergence can trigger while the discrepancy
    // gradient still points below the admissible region. A small
    // uniqueness with a clearly negative gradient is a Heywood tendency;
    // the contract clamps it to the bound and flags the model.
    let mut heywood = state.psi.iter().any(|v| *v <= HEYWOOD_TOL);
    {
        let lambda_vec = DVector::from_iterator(p, state.lambda.iter().copied());
        let mut sigma = &lambda_vec * lambda_vec.transpose();
        for j in 0..p {
            sigma[(j, j)] += state.psi[j];
        }
        if let Some(sigma_inv) = sigma.try_inverse() {
            let inner = &sigma_inv * r * &sigma_inv;
            for j in 0..p {
                // d/dpsi_j of (ln det Sigma + tr(Sigma^{-1} R)): positive
                // means the discrepancy still falls as psi_j shrinks
                let gradient = sigma_inv[(j, j)] - inner[(j, j)];
                if gradient > 1e-3 && state.psi[j] < 0.01 {
                    heywood = true;
                    let bound = (1.0 - HEYWOOD_TOL).sqrt();
                    state.lambda[j] = bound.copysign(state.lambda[j]);
                    state.psi[j] = HEYWOOD_TOL;
                }
            }
        }
    }

    let mut fit = SingleFactorFit {
        loadings: state.lambda.iter().copied().collect(),
        explained_variances: state.lambda.iter().map(|l| l * l).collect(),
        iterations,
        converged,
        log_likelihood: 0.0,
        method: FitMethod::MaximumLikelihood,
        heywood,
        degenerate: false,
    };
    clamp_heywood(&mut fit);
    apply_sign_convention(&mut fit.loadings);
    fit.degenerate = fit.loadings.iter().all(|l| l.abs() < 1e-8);
    let psis: Vec<f64> = fit.explained_variances.iter().map(|e| 1.0 - e).collect();
    fit.log_likelihood = log_likelihood(r, &fit.loadings, &psis, n);
    fit
}

/// Principal axis factoring: iterate communalities on the reduced
/// correlation matrix until the top eigenpair stabilizes.
fn fit_principal_axis(r: &DMatrix<f64>, n: usize, options: &FitOptions) -> SingleFactorFit {
    let p = r.ncols();
    let mut reduced = r.clone();
    let mut communality: Vec<f64> = (0..p)
        .map(|j| {
            (0..p)
                .filter(|&k| k != j)
                .map(|k| r[(j, k)].abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let mut lambda = vec![0.0; p];
    let mut iterations = options.max_iterations;
    let mut converged = false;
    for iter in 1..=options.max_iterations {
        for j in 0..p {
            reduced[(j, j)] = communality[j];
        }
        let (values, vectors) = stats::sym_eigen(&reduced);
        let scale = values[0].max(0.0).sqrt();
        let new_lambda: Vec<f64> = vectors.column(0).iter().map(|v| v * scale).collect();
        let new_communality: Vec<f64> = new_lambda
            .iter()
            .map(|l| (l * l).min(1.0 - HEYWOOD_TOL))
            .collect();
        let delta = (0..p)
            .map(|j| (new_communality[j] - communality[j]).abs())
            .fold(0.0, f64::max);
        lambda = new_lambda;
        communality = new_communality;
        if delta < options.tolerance {
            iterations = iter;
            converged = true;
            break;
        }
    }
    let mut fit = SingleFactorFit {
        explained_variances: lambda.iter().map(|l| l * l).collect(),
        loadings: lambda,
        iterations,
        converged,
        log_likelihood: 0.0,
        method: FitMethod::PrincipalAxis,
        heywood: false,
        degenerate: false,
    };
    clamp_heywood(&mut fit);
    apply_sign_convention(&mut fit.loadings);
    fit.degenerate = fit.loadings.iter().all(|l| l.abs() < 1e-8);
    let psis: Vec<f64> = fit.explained_variances.iter().map(|e| 1.0 - e).collect();
    fit.log_likelihood = log_likelihood(r, &fit.loadings, &psis, n);
    fit
}

/// Clamp communality above 1 - HEYWOOD_TOL back to the bound and flag
/// the fit.
fn clamp_heywood(fit: &mut SingleFactorFit) {
    let bound = 1.0 - HEYWOOD_TOL;
    for j in 0..fit.loadings.len() {
        let communality = fit.loadings[j] * fit.loadings[j];
        if communality > bound {
            fit.heywood = true;
            fit.loadings[j] = bound.sqrt().copysign(fit.loadings[j]);
        }
        fit.explained_variances[j] = fit.loadings[j] * fit.loadings[j];
    }
}

/// Flip all loadings so their sum is positive.
fn apply_sign_convention(loadings: &mut [f64]) {
    if loadings.iter().sum::<f64>() < 0.0 {
        for l in loadings.iter_mut() {
            *l = -*l;
        }
    }
}

/// Gaussian log-likelihood of the correlation data under the fitted model
/// (up to the constant that does not involve the parameters).
fn log_likelihood(r: &DMatrix<f64>, loadings: &[f64], psis: &[f64], n: usize) -> f64 {
    let p = loadings.len();
    let lambda = DVector::from_column_slice(loadings);
    let mut sigma = &lambda * lambda.transpose();
    for j in 0..p {
        sigma[(j, j)] += psis[j].max(HEYWOOD_TOL);
    }
    let det = sigma.determinant();
    let inv = match sigma.try_inverse() {
        Some(inv) => inv,
        None => return f64::NEG_INFINITY,
    };
    let trace = (&inv * r).trace();
    -0.5 * n as f64 * (p as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + trace)
}

/// Raw and renormalized indicator weights for a fitted block.
#[derive(Debug, Clone, Serialize)]
pub struct IndicatorWeights {
    /// Product of the loading share and the explained-variance share,
    /// before renormalization; kept for audit.
    pub raw: Vec<f64>,
    /// Renormalized weights, summing to one.
    pub weights: Vec<f64>,
}

/// Combine loadings and explained variances into indicator weights: each
/// indicator's share of the loadings times its share of the explained
/// variances, renormalized to sum to one.
pub fn indicator_weights(loadings: &[f64], explained_variances: &[f64]) -> Result<IndicatorWeights> {
    assert_eq!(
        loadings.len(),
        explained_variances.len(),
        "loadings/variances length mismatch"
    );
    if loadings.iter().all(|l| *l == 0.0) {
        return Err(Error::ZeroLoadings {
            block: "block".into(),
        });
    }
    let sum_lambda: f64 = loadings.iter().sum();
    let sum_var: f64 = explained_variances.iter().sum();
    if sum_lambda <= 0.0 || sum_var <= 0.0 {
        return Err(Error::ZeroLoadings {
            block: "block".into(),
        });
    }
    let raw: Vec<f64> = loadings
        .iter()
        .zip(explained_variances)
        .map(|(l, v)| (l / sum_lambda) * (v / sum_var))
        .collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    Ok(IndicatorWeights { raw, weights })
}

/// One factor of the fitted measurement model.
#[derive(Debug, Clone, Serialize)]
pub struct FittedFactor {
    pub name: String,
    pub indicators: Vec<String>,
    #[serde(flatten)]
    pub fit: SingleFactorFit,
    pub raw_weights: Vec<f64>,
    pub weights: Vec<f64>,
}

/// The full measurement model: one fitted block per declared factor.
#[derive(Debug, Clone, Serialize)]
pub struct FactorModel {
    pub factors: Vec<FittedFactor>,
}

impl FactorModel {
    pub fn factor(&self, name: &str) -> Option<&FittedFactor> {
        self.factors.iter().find(|f| f.name == name)
    }
}

/// Fit every block declared in the spec against the normalized table.
pub fn fit_factor_model(
    normalized: &NormalizedTable,
    spec: &FactorSpec,
    options: &FitOptions,
) -> Result<FactorModel> {
    spec.validate()?;
    let mut factors = Vec::with_capacity(spec.factors.len());
    for block in &spec.factors {
        let data = normalized.matrix_of(&block.indicators)?;
        let fit = fit_single_factor_named(&data, options, &block.name)?;
        let weights = if fit.degenerate {
            return Err(Error::ZeroLoadings {
                block: block.name.clone(),
            });
        } else {
            indicator_weights(&fit.loadings, &fit.explained_variances).map_err(|e| match e {
                Error::ZeroLoadings { .. } => Error::ZeroLoadings {
                    block: block.name.clone(),
                },
                other => other,
            })?
        };
        factors.push(FittedFactor {
            name: block.name.clone(),
            indicators: block.indicators.clone(),
            fit,
            raw_weights: weights.raw,
            weights: weights.weights,
        });
    }
    Ok(FactorModel { factors })
}

/// Per-region factor scores: the weighted sum of each factor's normalized
/// indicators. Row order follows the normalized table.
#[derive(Debug, Clone)]
pub struct FactorScores {
    pub factor_names: Vec<String>,
    /// `scores[i][k]` is region i's score on factor k.
    pub scores: Vec<Vec<f64>>,
}

impl FactorScores {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.scores.len();
        let k = self.factor_names.len();
        DMatrix::from_fn(n, k, |i, j| self.scores[i][j])
    }
}

/// Score every region on every factor using the fitted weights.
pub fn factor_scores(
    normalized: &NormalizedTable,
    spec: &FactorSpec,
    model: &FactorModel,
) -> Result<FactorScores> {
    let n = normalized.regions.len();
    let mut scores = vec![Vec::with_capacity(spec.factors.len()); n];
    for block in &spec.factors {
        let fitted = model
            .factor(&block.name)
            .ok_or_else(|| Error::ColumnMismatch {
                column: block.name.clone(),
            })?;
        if fitted.indicators != block.indicators {
            return Err(Error::ColumnMismatch {
                column: block.name.clone(),
            });
        }
        let columns: Vec<&[f64]> = block
            .indicators
            .iter()
            .map(|id| normalized.column(id).map(|c| c.values.as_slice()))
            .collect::<Result<_>>()?;
        for i in 0..n {
            let score: f64 = fitted
                .weights
                .iter()
                .zip(&columns)
                .map(|(w, col)| w * col[i])
                .sum();
            scores[i].push(score);
        }
    }
    Ok(FactorScores {
        factor_names: spec.factor_names(),
        scores,
    })
}
