use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by which exit code the CLI maps them to:
/// validation problems (exit 1), and internal invariant violations that
/// signal a kernel or transcription bug (exit 3). Partial-run status is
/// tracked by the harness, not here.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },

    #[error("capacity: {rows} x {cols} positions exceed the platform index range")]
    Capacity { rows: usize, cols: usize },

    #[error("degenerate truncation variance sigma_n = {sigma:.3e} (< 1e-6); truncation level pathologically small")]
    DegenerateVariance { sigma: f64 },

    #[error("truncation pipeline requires a declared moment surplus delta > 0")]
    PipelineRequiresDelta,

    #[error("dense solver guard: {rows} x {cols} = {} exceeds the {limit} position limit", *.rows * *.cols)]
    SizeGuard { rows: usize, cols: usize, limit: usize },

    #[error("bidiagonal QR did not converge after {sweeps} sweeps (kernel bug)")]
    NonConvergence { sweeps: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("spread-set guarantee violated: bracket energy {energy:.6} < rho^2 = {required:.6}; \
             the vector is compressible at the stated (delta, rho) or the parameters are inconsistent")]
    SpreadGuarantee { energy: f64, required: f64 },

    #[error("full-sphere nets in dimension {dim} > {limit} are not supported (cardinality explosion)")]
    NetDimensionGuard { dim: usize, limit: usize },

    #[error("incompressible sampling infeasible: {attempts} rejections, acceptance rate {acceptance_rate:.4}")]
    IncompressibleInfeasible { attempts: usize, acceptance_rate: f64 },

    #[error("outside the ladder regime: N p delta0 / (1 + |ln p|) = {r:.6} <= 1; \
             use the dense branch (N p^2 / (|ln p| + 1) = {dense_branch_stat:.6} vs D = {dense_threshold})")]
    LadderRegime { r: f64, dense_branch_stat: f64, dense_threshold: f64 },

    #[error("internal consistency violation: {0}")]
    InternalInvariant(String),

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("moment order q = {q} outside the admissible range [2, {max:.2}]")]
    MomentOrderRange { q: usize, max: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// CLI exit code class for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence { .. } | Error::InternalInvariant(_) => 3,
            _ => 1,
        }
    }
}
