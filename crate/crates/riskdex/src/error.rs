//! Crate-wide error type and exit-code mapping.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the pipeline. Variants are grouped by the stage
/// that raises them; [`Error::exit_code`] maps each group to the process
/// exit code documented in the CLI help.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    // -- configuration / validation --
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("column {column:?} not found in the indicator table")]
    ColumnMismatch { column: String },
    #[error("weight vector has {weights} entries but {expected} were expected")]
    WeightMismatch { weights: usize, expected: usize },

    // -- data ingest --
    #[error("missing value at region {region:?}, column {column:?}")]
    MissingCell { region: String, column: String },
    #[error("duplicate region id {region:?}")]
    DuplicateRegionId { region: String },
    #[error("non-numeric value {value:?} at region {region:?}, column {column:?}")]
    NonNumericCell {
        region: String,
        column: String,
        value: String,
    },
    #[error("indicator table {path:?} has no data")]
    EmptyTable { path: PathBuf },
    #[error("invalid geometry for region {region:?}: {reason}")]
    InvalidGeometry { region: String, reason: String },
    #[error("region list is empty")]
    EmptyRegionList,
    #[error("malformed GeoJSON in {path:?}: {reason}")]
    MalformedGeoJson { path: PathBuf, reason: String },
    #[error("feature {index} in {path:?} lacks a region_id property")]
    MissingRegionIdProperty { path: PathBuf, index: usize },
    #[error("invalid gate {gate_id:?}: {reason}")]
    InvalidGate { gate_id: String, reason: String },

    // -- adequacy gate (strict mode only) --
    #[error(
        "factorability diagnostics failed the adequacy gate: bartlett_p={bartlett_p}, kmo={kmo}"
    )]
    AdequacyFailed { bartlett_p: f64, kmo: f64 },

    // -- numerics --
    #[error("column {column:?} is degenerate (all values equal)")]
    DegenerateColumn { column: String },
    #[error("correlation matrix is singular or not positive definite: {context}")]
    SingularCorrelation { context: String },
    #[error("not enough rows: {rows} rows where {needed} are required")]
    InsufficientRows { rows: usize, needed: usize },
    #[error("factor fit for block {block:?} did not converge in {iterations} iterations")]
    NonConvergence { block: String, iterations: usize },
    #[error("factor block {block:?} is degenerate: {reason}")]
    DegenerateBlock { block: String, reason: String },
    #[error("all loadings are zero for block {block:?}; indicator weights are undefined")]
    ZeroLoadings { block: String },
    #[error("covariance block {block:?} is singular")]
    SingularBlock { block: String },
    #[error("canonical weights sum to zero; normalized weights are undefined")]
    DegenerateWeights,
    #[error("{distinct} distinct values cannot fill {groups} groups")]
    TooFewDistinctValues { distinct: usize, groups: usize },
    #[error("zero variance on the {side} side of the correlation diagnostic")]
    DegenerateVariance { side: String },
    #[error("no regions carry group tag {tag:?}")]
    EmptySubset { tag: String },
    #[error("design matrix is rank deficient (rank {rank} of {columns} columns)")]
    RankDeficientDesign { rank: usize, columns: usize },
    #[error("residual cross-product matrix is singular")]
    SingularResidualCrossProduct,

    // -- export --
    #[error("region {region:?} is present in scores or geometry but not both")]
    RegionWithoutGeometry { region: String },
    #[error("i/o failure on {path:?}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the CLI. The table is reproduced in `--help`
    /// and in the README.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            InvalidConfig(_) | ColumnMismatch { .. } | WeightMismatch { .. } => 2,
            MissingCell { .. }
            | DuplicateRegionId { .. }
            | NonNumericCell { .. }
            | EmptyTable { .. }
            | InvalidGeometry { .. }
            | EmptyRegionList
            | MalformedGeoJson { .. }
            | MissingRegionIdProperty { .. }
            | InvalidGate { .. } => 3,
            AdequacyFailed { .. } => 4,
            DegenerateColumn { .. }
            | SingularCorrelation { .. }
            | InsufficientRows { .. }
            | NonConvergence { .. }
            | DegenerateBlock { .. }
            | ZeroLoadings { .. }
            | SingularBlock { .. }
            | DegenerateWeights
            | TooFewDistinctValues { .. }
            | DegenerateVariance { .. }
            | EmptySubset { .. }
            | RankDeficientDesign { .. }
            | SingularResidualCrossProduct => 5,
            IoFailure { .. } => 6,
            RegionWithoutGeometry { .. } => 7,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::IoFailure { path, source }
}
