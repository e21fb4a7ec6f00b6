//! The dilute sparse matrix ensemble.
//!
//! Entries are `xi_jk * X_jk` where the `xi` are independent Bernoulli(p)
//! masks and the `X` are i.i.d. standardized variables (mean 0, variance 1)
//! with declared fourth and (4+delta)-th absolute moments. The module also
//! implements the truncate -> center -> rescale pipeline: entries are zeroed
//! above the level `A (Np)^{1/2-kappa} ln N`, centered by the truncated mean
//! at mask-on positions, and rescaled to unit variance.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::rng::{mix, rng_from_seed, stream, Rng};

const SIGMA_DEGENERATE: f64 = 1e-6;

/// Which standardized entry law to draw from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntryKind {
    /// Standard normal.
    Gaussian,
    /// +-1 with probability 1/2 each.
    Rademacher,
    /// Symmetric power law, density ~ |x|^{-(tail_exponent+1)} beyond the
    /// scale point, scaled to unit variance. Requires tail_exponent > 4.
    SymmetricPareto { tail_exponent: f64 },
    /// Two atoms `a` (with probability `prob`) and `b = -a prob/(1-prob)`,
    /// with `a` solved from the mean-0/variance-1 constraints.
    TwoPoint { a: f64, prob: f64 },
}

/// A standardized entry law together with its declared moment data.
#[derive(Debug, Clone, PartialEq)]
pub struct EntryDistribution {
    kind: EntryKind,
    /// Moment surplus: the (4+delta)-th absolute moment is declared finite.
    delta: f64,
    /// Fourth absolute moment.
    mu4: f64,
    /// (4+delta)-th absolute moment; present iff delta > 0.
    mu4d: Option<f64>,
}

impl EntryDistribution {
    pub fn gaussian(delta: f64) -> Result<Self> {
        Self::validate_delta(delta)?;
        Ok(Self {
            kind: EntryKind::Gaussian,
            delta,
            mu4: 3.0,
            mu4d: (delta > 0.0).then(|| gaussian_abs_moment(4.0 + delta)),
        })
    }

    pub fn rademacher(delta: f64) -> Result<Self> {
        Self::validate_delta(delta)?;
        Ok(Self {
            kind: EntryKind::Rademacher,
            delta,
            mu4: 1.0,
            mu4d: (delta > 0.0).then_some(1.0),
        })
    }

    pub fn symmetric_pareto(tail_exponent: f64, delta: f64) -> Result<Self> {
        Self::validate_delta(delta)?;
        if !(tail_exponent > 4.0 + delta) {
            return Err(Error::InvalidParameter {
                field: "tail_exponent",
                message: format!(
                    "need tail_exponent > 4 + delta = {} for a finite (4+delta)-th moment, got {tail_exponent}",
                    4.0 + delta
                ),
            });
        }
        let mu4 = pareto_abs_moment(tail_exponent, 4.0);
        let mu4d = (delta > 0.0).then(|| pareto_abs_moment(tail_exponent, 4.0 + delta));
        Ok(Self { kind: EntryKind::SymmetricPareto { tail_exponent }, delta, mu4, mu4d })
    }

    /// Two-point law from the atom probability; the atom positions follow
    /// from the standardization constraints.
    pub fn two_point(prob: f64, delta: f64) -> Result<Self> {
        Self::validate_delta(delta)?;
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::InvalidParameter {
                field: "prob",
                message: format!("need prob in (0,1), got {prob}"),
            });
        }
        let a = ((1.0 - prob) / prob).sqrt();
        let b = -(prob / (1.0 - prob)).sqrt();
        let abs_moment = |q: f64| a.powf(q) * prob + (-b).powf(q) * (1.0 - prob);
        let mu4 = abs_moment(4.0);
        let mu4d = (delta > 0.0).then(|| abs_moment(4.0 + delta));
        Ok(Self { kind: EntryKind::TwoPoint { a, prob }, delta, mu4, mu4d })
    }

    fn validate_delta(delta: f64) -> Result<()> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "delta",
                message: format!("need delta >= 0, got {delta}"),
            });
        }
        Ok(())
    }

    pub fn kind(&self) -> EntryKind {
        self.kind
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu4(&self) -> f64 {
        self.mu4
    }

    pub fn mu4d(&self) -> Option<f64> {
        self.mu4d
    }

    /// The law is symmetric about 0.
    pub fn is_symmetric(&self) -> bool {
        match self.kind {
            EntryKind::Gaussian | EntryKind::Rademacher | EntryKind::SymmetricPareto { .. } => true,
            // prob = 1/2 collapses to Rademacher.
            EntryKind::TwoPoint { prob, .. } => prob == 0.5,
        }
    }

    /// One draw from the law.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self.kind {
            EntryKind::Gaussian => StandardNormal.sample(rng),
            EntryKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EntryKind::SymmetricPareto { tail_exponent } => {
                let scale = pareto_scale(tail_exponent);
                // inverse-CDF for |X|, independent sign
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let magnitude = scale * u.powf(-1.0 / tail_exponent);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            EntryKind::TwoPoint { a, prob } => {
                if rng.random::<f64>() < prob {
                    a
                } else {
                    -a * prob / (1.0 - prob)
                }
            }
        }
    }

    /// `E X 1{|X| <= level}`, the mean of the truncated variable. Closed
    /// form for every supported law; zero for the symmetric ones.
    pub fn truncated_mean(&self, level: f64) -> f64 {
        match self.kind {
            EntryKind::Gaussian | EntryKind::Rademacher | EntryKind::SymmetricPareto { .. } => 0.0,
            EntryKind::TwoPoint { a, prob } => {
                let b = -a * prob / (1.0 - prob);
                let mut m = 0.0;
                if a <= level {
                    m += a * prob;
                }
                if -b <= level {
                    m += b * (1.0 - prob);
                }
                m
            }
        }
    }

    /// `E X^2 1{|X| <= level}`, the second moment of the truncated variable.
    pub fn truncated_second_moment(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        match self.kind {
            EntryKind::Gaussian => {
                // E X^2 1{|X| > t} = 2 (t phi(t) + Phibar(t))
                let phi = (-0.5 * level * level).exp() / (2.0 * std::f64::consts::PI).sqrt();
                let upper = 0.5 * statrs::function::erf::erfc(level / std::f64::consts::SQRT_2);
                (1.0 - 2.0 * (level * phi + upper)).max(0.0)
            }
            EntryKind::Rademacher => {
                if level >= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            EntryKind::SymmetricPareto { tail_exponent } => {
                let scale = pareto_scale(tail_exponent);
                if level < scale {
                    0.0
                } else {
                    1.0 - (scale / level).powf(tail_exponent - 2.0)
                }
            }
            EntryKind::TwoPoint { a, prob } => {
                let b = -a * prob / (1.0 - prob);
                let mut s = 0.0;
                if a <= level {
                    s += a * a * prob;
                }
                if -b <= level {
                    s += b * b * (1.0 - prob);
                }
                s
            }
        }
    }
}

fn pareto_scale(tail_exponent: f64) -> f64 {
    ((tail_exponent - 2.0) / tail_exponent).sqrt()
}

/// q-th absolute moment of the standardized symmetric Pareto law.
fn pareto_abs_moment(tail_exponent: f64, q: f64) -> f64 {
    debug_assert!(q < tail_exponent);
    pareto_scale(tail_exponent).powf(q) * tail_exponent / (tail_exponent - q)
}

/// `E |g|^q` for standard normal `g`.
fn gaussian_abs_moment(q: f64) -> f64 {
    2.0f64.powf(q / 2.0) * gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Dimensions, dilution and truncation constants of one ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n_rows: usize,
    n_cols: usize,
    p: f64,
    dist: EntryDistribution,
    trunc_a: f64,
}

impl ModelParams {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        p: f64,
        dist: EntryDistribution,
        trunc_a: f64,
    ) -> Result<Self> {
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::InvalidParameter {
                field: "N,n",
                message: "dimensions must be positive".into(),
            });
        }
        if n_cols >= n_rows {
            return Err(Error::InvalidParameter {
                field: "n",
                message: format!("rectangular regime requires n < N, got n = {n_cols}, N = {n_rows}"),
            });
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter {
                field: "p",
                message: format!("need p in (0, 1], got {p}"),
            });
        }
        if !(trunc_a > 0.0) {
            return Err(Error::InvalidParameter {
                field: "trunc_A",
                message: format!("need trunc_A > 0, got {trunc_a}"),
            });
        }
        n_rows
            .checked_mul(n_cols)
            .ok_or(Error::Capacity { rows: n_rows, cols: n_cols })?;
        Ok(Self { n_rows, n_cols, p, dist, trunc_a })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Aspect ratio y = n/N.
    pub fn y(&self) -> f64 {
        self.n_cols as f64 / self.n_rows as f64
    }

    pub fn dist(&self) -> &EntryDistribution {
        &self.dist
    }

    pub fn trunc_a(&self) -> f64 {
        self.trunc_a
    }

    /// kappa = delta / (2 (4 + delta)), always recomputed from the law.
    pub fn kappa(&self) -> f64 {
        self.dist.delta / (2.0 * (4.0 + self.dist.delta))
    }

    /// Np, the mean number of mask-on entries per row scale.
    pub fn np(&self) -> f64 {
        self.n_rows as f64 * self.p
    }

    /// Truncation level `A (Np)^{1/2 - kappa} ln N`; computable without
    /// sampling.
    pub fn truncation_level(&self) -> f64 {
        self.trunc_a * self.np().powf(0.5 - self.kappa()) * (self.n_rows as f64).ln()
    }
}

/// One realization of the diluted matrix, in row-major adjacency storage:
/// per row, the (column, value) pairs at mask-on positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSample {
    params: ModelParams,
    seed: u64,
    rows: Vec<Vec<(u32, f64)>>,
    nnz: usize,
    pipelined: bool,
}

impl SparseSample {
    /// Draw one realization. Mask and value draws come from decorrelated
    /// substreams of `seed`; values are drawn for kept positions only.
    pub fn sample(params: &ModelParams, seed: u64) -> Self {
        let mut mask_rng = rng_from_seed(mix(seed, stream::MASK));
        let mut value_rng = rng_from_seed(mix(seed, stream::VALUE));
        let p = params.p;
        let mut nnz = 0usize;
        let rows: Vec<Vec<(u32, f64)>> = (0..params.n_rows)
            .map(|_| {
                let mut row = Vec::new();
                for col in 0..params.n_cols {
                    if mask_rng.random::<f64>() < p {
                        row.push((col as u32, params.dist.sample(&mut value_rng)));
                    }
                }
                nnz += row.len();
                row
            })
            .collect();
        Self { params: params.clone(), seed, rows, nnz, pipelined: false }
    }

    /// Build a sample from explicit per-row adjacency (test matrices,
    /// constructed cases). Column indices must be < n and strictly
    /// increasing per row.
    pub fn from_rows(params: &ModelParams, seed: u64, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        if rows.len() != params.n_rows {
            return Err(Error::DimensionMismatch { expected: params.n_rows, got: rows.len() });
        }
        let mut nnz = 0usize;
        for row in &rows {
            let mut prev: i64 = -1;
            for &(c, _) in row {
                if c as usize >= params.n_cols || (c as i64) <= prev {
                    return Err(Error::InvalidParameter {
                        field: "rows",
                        message: "column indices must be strictly increasing and < n".into(),
                    });
                }
                prev = c as i64;
            }
            nnz += row.len();
        }
        Ok(Self { params: params.clone(), seed, rows, nnz, pipelined: false })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.nnz
    }

    /// Whether the truncation pipeline has been applied to this sample.
    pub fn pipelined(&self) -> bool {
        self.pipelined
    }

    pub fn n_rows(&self) -> usize {
        self.params.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.params.n_cols
    }

    /// y = X x.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n_cols());
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c as usize]).sum())
            .collect()
    }

    /// z = X^T y.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.n_rows());
        let mut z = vec![0.0; self.n_cols()];
        for (row, &yi) in self.rows.iter().zip(y) {
            for &(c, v) in row {
                z[c as usize] += v * yi;
            }
        }
        z
    }

    /// Column-major densification (solver input).
    pub fn to_dense_col_major(&self) -> Vec<f64> {
        let (m, n) = (self.n_rows(), self.n_cols());
        let mut a = vec![0.0; m * n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                a[c as usize * m + i] = v;
            }
        }
        a
    }

    /// Copy with every stored value multiplied by `c`; the mask is untouched.
    pub fn scaled(&self, c: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(col, v)| (col, c * v)).collect())
            .collect();
        Self { rows, ..self.clone() }
    }

    /// Fraction of stored entries whose magnitude exceeds `level`.
    pub fn frac_above(&self, level: f64) -> f64 {
        if self.nnz == 0 {
            return 0.0;
        }
        let clipped: usize = self
            .rows
            .iter()
            .map(|row| row.iter().filter(|&&(_, v)| v.abs() > level).count())
            .sum();
        clipped as f64 / self.nnz as f64
    }
}

/// Analytic and empirical summary of one pipeline application.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    /// `A (Np)^{1/2-kappa} ln N`.
    pub level: f64,
    /// `E X 1{|X| <= level}` (analytic).
    pub mean_truncated: f64,
    /// Standard deviation of the truncated, centered entry (analytic).
    pub sigma_n: f64,
    /// Empirical fraction of stored entries above the level in this sample.
    pub frac_entries_clipped: f64,
}

/// Analytic constants of the truncation pipeline for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConstants {
    pub level: f64,
    pub mean_truncated: f64,
    pub sigma_n: f64,
}

impl PipelineConstants {
    /// Apply the pipeline map to one raw entry value.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        let truncated = if x.abs() <= self.level { x } else { 0.0 };
        (truncated - self.mean_truncated) / self.sigma_n
    }
}

/// Truncation level, truncated mean and rescaling deviation for `params`.
/// Defined for the 4+delta regime only.
pub fn pipeline_constants(params: &ModelParams) -> Result<PipelineConstants> {
    if params.dist.delta <= 0.0 {
        return Err(Error::PipelineRequiresDelta);
    }
    let level = params.truncation_level();
    let m = params.dist.truncated_mean(level);
    let var = params.dist.truncated_second_moment(level) - m * m;
    let sigma = var.max(0.0).sqrt();
    if sigma < SIGMA_DEGENERATE {
        return Err(Error::DegenerateVariance { sigma });
    }
    Ok(PipelineConstants { level, mean_truncated: m, sigma_n: sigma })
}

/// Truncate (zero entries above the level), center by the truncated mean at
/// mask-on positions, and rescale to unit variance.
pub fn truncate_center_rescale(sample: &SparseSample) -> Result<(SparseSample, TruncationReport)> {
    let params = &sample.params;
    let consts = pipeline_constants(params)?;
    let (level, m, sigma) = (consts.level, consts.mean_truncated, consts.sigma_n);
    let frac = sample.frac_above(level);
    let rows = sample
        .rows
        .iter()
        .map(|row| row.iter().map(|&(c, v)| (c, consts.apply(v))).collect())
        .collect();
    let out = SparseSample {
        params: params.clone(),
        seed: sample.seed,
        rows,
        nnz: sample.nnz,
        pipelined: true,
    };
    let report =
        TruncationReport { level, mean_truncated: m, sigma_n: sigma, frac_entries_clipped: frac };
    Ok((out, report))
}

/// `||E Xtilde|| = n p |E Xtilde_11|`, the operator norm of the mean matrix
/// after truncation. The caller compares it against the
/// `(Np)^{-1/2-kappa}` envelope.
pub fn truncation_mean_norm_bound(params: &ModelParams) -> f64 {
    let level = params.truncation_level();
    params.n_cols as f64 * params.p * params.dist.truncated_mean(level).abs()
}
