use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} is not a power of two >= 8")]
    GridSize(usize),
    #[error("box length must be positive and finite, got {0}")]
    BoxLength(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("unknown cutoff profile `{0}`")]
    UnknownProfile(String),
    #[error("grid too small: only {0} dyadic blocks are realizable (need at least 3)")]
    LadderTooShort(i32),
    #[error("block index {j} outside ladder range [{min}, {max}]")]
    BlockIndex { j: i32, min: i32, max: i32 },
    #[error("field has nonzero mean {0:.3e}; operation needs mean-zero data")]
    NonZeroMean(f64),
    #[error("homogeneous norm requested on a field with nonzero mean {0:.3e}")]
    HomogeneousMean(f64),
    #[error("invalid exponent: {0}")]
    Exponent(String),
    #[error("velocity is not solenoidal: |div u| = {0:.3e}")]
    NotSolenoidal(f64),
    #[error("coefficient 1 + a must stay positive: min = {0:.3e}")]
    Coefficient(f64),
    #[error(
        "solver did not converge in {iterations} iterations (relative residual {residual:.3e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("CFL violation: dt*|u|max*n/L = {0:.3} > 0.5")]
    Cfl(f64),
    #[error("viscosity law is not positive on the attained range of a (min {0:.3e})")]
    Viscosity(f64),
    #[error("time samples are not strictly increasing")]
    Unordered,
    #[error("not enough samples: {0}")]
    TooFewSamples(String),
    #[error("time {0} lies outside the stored range")]
    TimeRange(f64),
    #[error("series diverges: {0}")]
    Divergence(String),
    #[error("truncation leaves min(1 + a) = {found:.3e} below kappa/2 = {bound:.3e}")]
    Truncation { found: f64, bound: f64 },
    #[error("operation requires constant viscosity")]
    VariableViscosity,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("snapshot {path}: {msg} (at byte offset {offset})")]
    Snapshot {
        path: PathBuf,
        offset: usize,
        msg: String,
    },
    #[error("unsupported snapshot version {0}")]
    Version(u16),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
