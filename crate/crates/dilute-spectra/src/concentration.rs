//! Levy concentration estimates, small-ball probabilities, and the Monte
//! Carlo tail events for s1 and s_n.
//!
//! Every absolute constant in the source inequalities is unnamed, so the
//! verifications report fitted empirical constants plus sign/monotonicity
//! assertions instead of hardcoded targets. Tail estimates carry exact
//! Clopper-Pearson intervals; Levy estimates carry a 99% DKW-style uniform
//! deviation bound.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sample_incompressible, CompressibilityParams, SphereVector};
use crate::ladder::LadderSchedule;
use crate::model::{pipeline_constants, EntryDistribution, ModelParams, PipelineConstants, SparseSample};
use crate::rng::{mix, rng_from_seed, stream, Rng};
use crate::spectral;
use crate::stats::{dkw_window_halfwidth, ls_slope, ClopperPearson};

const LEVY_CONFIDENCE_ALPHA: f64 = 0.01;
const TAIL_CONFIDENCE: f64 = 0.95;
/// Cells with fewer hits than this are censored in decay fits.
pub const CENSOR_HITS: usize = 5;

/// Empirical Levy concentration value at one epsilon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationEstimate {
    pub epsilon: f64,
    /// sup over centers v of the fraction of samples within [v-eps, v+eps].
    pub value: f64,
    pub sample_size: usize,
    /// 99% uniform deviation halfwidth (DKW, doubled for window differences).
    pub ci_halfwidth: f64,
}

/// Which tail of the statistic the event covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailDirection {
    Upper,
    Lower,
}

/// Monte Carlo tail probability with its exact binomial interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub threshold: f64,
    pub direction: TailDirection,
    pub hits: usize,
    pub trials: usize,
    pub p_hat: f64,
    pub ci: ClopperPearson,
}

impl TailEstimate {
    fn new(threshold: f64, direction: TailDirection, hits: usize, trials: usize) -> Self {
        Self {
            threshold,
            direction,
            hits,
            trials,
            p_hat: hits as f64 / trials as f64,
            ci: ClopperPearson::new(hits, trials, TAIL_CONFIDENCE),
        }
    }
}

/// Exact empirical Levy concentration: sort the samples and slide a closed
/// window of width 2 epsilon; the optimal center is attainable with the
/// window's left endpoint at a sample point, so the two-pointer sweep is
/// exact for the empirical measure.
pub fn levy_concentration(samples: &[f64], epsilon: f64) -> Result<ConcentrationEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: samples.len() });
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter {
            field: "epsilon",
            message: format!("need epsilon > 0, got {epsilon}"),
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let width = 2.0 * epsilon;
    let mut best = 0usize;
    let mut j = 0usize;
    for i in 0..m {
        if j < i {
            j = i;
        }
        while j + 1 < m && sorted[j + 1] - sorted[i] <= width {
            j += 1;
        }
        best = best.max(j - i + 1);
    }
    Ok(ConcentrationEstimate {
        epsilon,
        value: best as f64 / m as f64,
        sample_size: m,
        ci_halfwidth: dkw_window_halfwidth(m, LEVY_CONFIDENCE_ALPHA),
    })
}

/// `zeta_j / sqrt(p)` for one stored row: the row functional of the lemma
/// machinery.
pub fn row_functional(row: &[(u32, f64)], x: &SphereVector, p: f64) -> Result<f64> {
    let n = x.dim();
    let mut acc = 0.0;
    for &(c, v) in row {
        if c as usize >= n {
            return Err(Error::DimensionMismatch { expected: n, got: c as usize + 1 });
        }
        acc += x.coords()[c as usize] * v;
    }
    Ok(acc / p.sqrt())
}

/// Stream one fresh row of the ensemble (mask + raw values) and return its
/// functional `sum_k x_k xi_k X_k`. Draw order matches `SparseSample::sample`
/// row order so results are reproducible by materializing the matrix.
fn streamed_row_functional(
    params: &ModelParams,
    trial_seed: u64,
    x: &[f64],
    pipeline: Option<&PipelineConstants>,
) -> f64 {
    let mut mask_rng = rng_from_seed(mix(trial_seed, stream::MASK));
    let mut value_rng = rng_from_seed(mix(trial_seed, stream::VALUE));
    let p = params.p();
    let mut acc = 0.0;
    for xk in x.iter().take(params.n_cols()) {
        if mask_rng.random::<f64>() < p {
            let v = params.dist().sample(&mut value_rng);
            let v = pipeline.map_or(v, |c| c.apply(v));
            acc += xk * v;
        }
    }
    acc
}

/// `||X x||_2` streamed row by row without materializing the sample.
fn streamed_image_norm(
    params: &ModelParams,
    trial_seed: u64,
    x: &[f64],
    pipeline: Option<&PipelineConstants>,
) -> f64 {
    let mut mask_rng = rng_from_seed(mix(trial_seed, stream::MASK));
    let mut value_rng = rng_from_seed(mix(trial_seed, stream::VALUE));
    let p = params.p();
    let mut sumsq = 0.0;
    for _ in 0..params.n_rows() {
        let mut zeta = 0.0;
        for xk in x.iter().take(params.n_cols()) {
            if mask_rng.random::<f64>() < p {
                let v = params.dist().sample(&mut value_rng);
                let v = pipeline.map_or(v, |c| c.apply(v));
                zeta += xk * v;
            }
        }
        sumsq += zeta * zeta;
    }
    sumsq.sqrt()
}

/// Outcome of the incompressible-row concentration check at ladder level nu.
#[derive(Debug, Clone)]
pub struct ConcentrReport {
    pub nu: usize,
    pub p_nu: f64,
    pub rho: f64,
    pub levy: ConcentrationEstimate,
    /// 1 - L(zeta/sqrt(p), rho/2).
    pub gap: f64,
    /// gap / (rho^4 p_nu): the fitted counterpart of the unnamed constant.
    pub fitted_a: f64,
    /// gap minus the 99% halfwidth stays positive.
    pub ci_excludes_zero: bool,
}

/// Simulate the row functional `zeta / sqrt(p)` for an incompressible test
/// vector at ladder level nu-1 and measure its Levy concentration at rho/2.
pub fn verify_lemma_concentr(
    params: &ModelParams,
    schedule: &LadderSchedule,
    nu: usize,
    rho: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcentrReport> {
    if nu == 0 || nu > schedule.levels {
        return Err(Error::InvalidParameter {
            field: "nu",
            message: format!("need 1 <= nu <= L = {}, got {nu}", schedule.levels),
        });
    }
    let delta_prev = schedule.delta_seq[nu - 1];
    if !(delta_prev > 0.0 && delta_prev < 1.0) {
        return Err(Error::InvalidParameter {
            field: "delta",
            message: format!("delta_(nu-1) = {delta_prev} outside (0,1); not a samplable level"),
        });
    }
    let comp = CompressibilityParams::new(delta_prev, rho)?;
    let x = sample_incompressible(params.n_cols(), &comp, mix(seed, stream::PROBE), 500)?;
    let p = params.p();
    let sqrt_p = p.sqrt();
    let values: Vec<f64> = (0..trials as u64)
        .map(|t| {
            streamed_row_functional(params, mix(seed, mix(stream::TRIAL, t)), x.coords(), None)
                / sqrt_p
        })
        .collect();
    let levy = levy_concentration(&values, rho / 2.0)?;
    let gap = 1.0 - levy.value;
    let p_nu = schedule.p_seq[nu];
    Ok(ConcentrReport {
        nu,
        p_nu,
        rho,
        levy,
        gap,
        fitted_a: gap / (rho.powi(4) * p_nu),
        ci_excludes_zero: gap - levy.ci_halfwidth > 0.0,
    })
}

/// Outcome of the single-coordinate concentration bound
/// `L(xi X / sqrt p, 1/2) <= 1 - p / (8 mu4)`.
#[derive(Debug, Clone)]
pub struct ConcsingleReport {
    pub p: f64,
    pub mu4: f64,
    pub levy: ConcentrationEstimate,
    pub bound: f64,
    pub pass: bool,
}

pub fn verify_lemma_concsingle(
    dist: &EntryDistribution,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<ConcsingleReport> {
    if trials < 10_000 {
        return Err(Error::InvalidParameter {
            field: "trials",
            message: format!("need >= 10^4 trials, got {trials}"),
        });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter {
            field: "p",
            message: format!("need p in (0,1], got {p}"),
        });
    }
    let mut rng = rng_from_seed(mix(seed, stream::TRIAL));
    let sqrt_p = p.sqrt();
    let values: Vec<f64> = (0..trials)
        .map(|_| {
            let xi = if rng.random::<f64>() < p { 1.0 } else { 0.0 };
            xi * dist.sample(&mut rng) / sqrt_p
        })
        .collect();
    let levy = levy_concentration(&values, 0.5)?;
    let bound = 1.0 - p / (8.0 * dist.mu4());
    Ok(ConcsingleReport {
        p,
        mu4: dist.mu4(),
        levy,
        bound,
        pass: levy.value <= bound + levy.ci_halfwidth,
    })
}

/// One grid cell of a decay verification.
#[derive(Debug, Clone)]
pub struct DecayCell {
    pub n: usize,
    pub tail: TailEstimate,
    /// Fewer than [`CENSOR_HITS`] hits: excluded from the slope fit.
    pub censored: bool,
}

/// Outcome of the tensorization check `P{sum zeta_j^2 <= C N q lambda^2}`
/// over an N-grid, with C = 1/2.
#[derive(Debug, Clone)]
pub struct TensorizationReport {
    pub lambda: f64,
    pub q: f64,
    pub cells: Vec<DecayCell>,
    /// log p_hat strictly decreasing over uncensored grid (None when any
    /// cell is censored).
    pub decreasing: Option<bool>,
    /// From slope <= -c_fit * q of ln p_hat against N.
    pub c_fit: Option<f64>,
}

/// Estimate the lower-tail probability of `sum_{j<=N} zeta_j^2` at the
/// tensorization threshold across the grid. The caller certifies
/// `P{|zeta| <= lambda} <= 1 - q` for the sampler.
pub fn verify_tensorization<F>(
    mut zeta_law: F,
    lambda: f64,
    q: f64,
    grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<TensorizationReport>
where
    F: FnMut(&mut Rng) -> f64,
{
    if !(lambda > 0.0) || !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter {
            field: "lambda,q",
            message: format!("need lambda > 0 and q in (0,1], got {lambda}, {q}"),
        });
    }
    if grid.len() < 2 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            field: "grid",
            message: "need an increasing grid of at least two sizes".into(),
        });
    }
    let mut cells = Vec::with_capacity(grid.len());
    for (cell_idx, &n) in grid.iter().enumerate() {
        let threshold = 0.5 * n as f64 * q * lambda * lambda;
        let mut rng = rng_from_seed(mix(seed, mix(stream::CELL, cell_idx as u64)));
        let mut hits = 0usize;
        for _ in 0..trials {
            let sum: f64 = (0..n)
                .map(|_| {
                    let z = zeta_law(&mut rng);
                    z * z
                })
                .sum();
            if sum <= threshold {
                hits += 1;
            }
        }
        let tail = TailEstimate::new(threshold, TailDirection::Lower, hits, trials);
        cells.push(DecayCell { n, censored: hits < CENSOR_HITS, tail });
    }
    let (decreasing, c_fit) = if cells.iter().any(|c| c.censored) {
        (None, None)
    } else {
        let xs: Vec<f64> = cells.iter().map(|c| c.n as f64).collect();
        let ys: Vec<f64> = cells.iter().map(|c| c.tail.p_hat.ln()).collect();
        let monotone = ys.windows(2).all(|w| w[1] < w[0]);
        (Some(monotone), Some(-ls_slope(&xs, &ys) / q))
    };
    Ok(TensorizationReport { lambda, q, cells, decreasing, c_fit })
}

/// Monte Carlo estimate of `P{||X x|| <= tau sqrt(Np)}` for a fixed unit
/// vector over a pipeline-processed ensemble (raw ensemble when no moment
/// surplus is declared).
pub fn small_ball_fixed_vector(
    params: &ModelParams,
    x: &SphereVector,
    tau: f64,
    trials: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if trials < 1000 {
        return Err(Error::InvalidParameter {
            field: "trials",
            message: format!("need >= 10^3 trials, got {trials}"),
        });
    }
    if x.dim() != params.n_cols() {
        return Err(Error::DimensionMismatch { expected: params.n_cols(), got: x.dim() });
    }
    let pipeline =
        if params.dist().delta() > 0.0 { Some(pipeline_constants(params)?) } else { None };
    let threshold = tau * params.np().sqrt();
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let norm = streamed_image_norm(
                params,
                mix(seed, mix(stream::TRIAL, t)),
                x.coords(),
                pipeline.as_ref(),
            );
            usize::from(norm <= threshold)
        })
        .sum();
    Ok(TailEstimate::new(threshold, TailDirection::Lower, hits, trials))
}

/// A tail campaign over one cell: the estimate plus the per-trial normalized
/// extreme singular values (s / sqrt(Np)), for medians and anchors.
#[derive(Debug, Clone)]
pub struct TailRun {
    pub tail: TailEstimate,
    pub normalized: Vec<f64>,
    /// Trials where the iterative solver failed to converge (s1 runs only).
    pub nonconverged: usize,
}

/// `P{s_1 >= K sqrt(Np)}` by Lanczos over `trials` independent samples.
pub fn tail_s1(params: &ModelParams, k_factor: f64, trials: usize, seed: u64) -> Result<TailRun> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            field: "trials",
            message: "need at least one trial".into(),
        });
    }
    let scale = params.np().sqrt();
    let threshold = k_factor * scale;
    let results: Vec<(f64, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let sample = SparseSample::sample(params, mix(seed, mix(stream::TRIAL, t)));
            let summary = spectral::largest_sv_lanczos(&sample, 1e-8, 600)?;
            Ok((summary.s1, summary.converged))
        })
        .collect::<Result<_>>()?;
    let hits = results.iter().filter(|(s1, _)| *s1 >= threshold).count();
    let nonconverged = results.iter().filter(|(_, ok)| !ok).count();
    Ok(TailRun {
        tail: TailEstimate::new(threshold, TailDirection::Upper, hits, trials),
        normalized: results.iter().map(|(s1, _)| s1 / scale).collect(),
        nonconverged,
    })
}

/// `P{s_n <= tau sqrt(Np)}` by the dense oracle (size-guarded).
pub fn tail_sn(params: &ModelParams, tau: f64, trials: usize, seed: u64) -> Result<TailRun> {
    if trials == 0 {
        return Err(Error::InvalidParameter {
            field: "trials",
            message: "need at least one trial".into(),
        });
    }
    if params.n_rows() * params.n_cols() > spectral::DENSE_GUARD {
        return Err(Error::SizeGuard {
            rows: params.n_rows(),
            cols: params.n_cols(),
            limit: spectral::DENSE_GUARD,
        });
    }
    let scale = params.np().sqrt();
    let threshold = tau * scale;
    let values: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let sample = SparseSample::sample(params, mix(seed, mix(stream::TRIAL, t)));
            let summary = spectral::dense_svd_oracle(&sample)?;
            Ok(summary.sn.expect("oracle populates sn"))
        })
        .collect::<Result<_>>()?;
    let hits = values.iter().filter(|&&sn| sn <= threshold).count();
    Ok(TailRun {
        tail: TailEstimate::new(threshold, TailDirection::Lower, hits, trials),
        normalized: values.iter().map(|sn| sn / scale).collect(),
        nonconverged: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ladder::build_schedule;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn gaussian_params(n_rows: usize, n_cols: usize, p: f64) -> ModelParams {
        ModelParams::new(n_rows, n_cols, p, EntryDistribution::gaussian(4.0).unwrap(), 1.0)
            .unwrap()
    }

    #[test]
    fn levy_point_mass_is_one() {
        let est = levy_concentration(&[5.0; 8], 0.1).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn levy_two_clusters() {
        // windows of width 0.8 capture exactly one cluster
        let est = levy_concentration(&[0.0, 0.0, 1.0, 1.0], 0.4).unwrap();
        assert_eq!(est.value, 0.5);
    }

    #[test]
    fn levy_gaussian_matches_closed_form() {
        // sup_v P{|g - v| <= eps} = 2 Phi(eps) - 1 at v = 0
        let mut rng = rng_from_seed(21);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let samples: Vec<f64> = (0..10_000)
            .map(|_| {
                use rand_distr::Distribution;
                rand_distr::StandardNormal.sample(&mut rng)
            })
            .collect();
        let est = levy_concentration(&samples, 0.5).unwrap();
        let want = 2.0 * normal.cdf(0.5) - 1.0;
        assert!((est.value - want).abs() < 0.015, "{} vs {want}", est.value);
    }

    #[test]
    fn levy_rejects_degenerate_input() {
        assert!(levy_concentration(&[], 0.5).is_err());
        assert!(levy_concentration(&[1.0], 0.5).is_err());
        assert!(levy_concentration(&[1.0, 2.0], 0.0).is_err());
    }

    #[test]
    fn levy_brute_force_exact_match() {
        // optimal center is attainable at samples or pair midpoints
        let mut rng = rng_from_seed(33);
        for _ in 0..200 {
            let m = 2 + (rng.random::<u64>() % 40) as usize;
            let samples: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 4.0).collect();
            let eps = 0.05 + rng.random::<f64>() * 0.5;
            let got = levy_concentration(&samples, eps).unwrap().value;
            let mut centers = samples.clone();
            for i in 0..m {
                for j in i..m {
                    centers.push(0.5 * (samples[i] + samples[j]));
                }
            }
            let brute = centers
                .iter()
                .map(|&v| samples.iter().filter(|&&s| (s - v).abs() <= eps).count())
                .max()
                .unwrap();
            assert_eq!(got, brute as f64 / m as f64);
        }
    }

    #[test]
    fn levy_monotone_in_epsilon() {
        let mut rng = rng_from_seed(4);
        let samples: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let mut prev = 0.0;
        for &eps in &[0.01, 0.05, 0.1, 0.2, 0.5] {
            let v = levy_concentration(&samples, eps).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn row_functional_examples() {
        let x = SphereVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        // x = e1, row holding (column 0, v): functional v / sqrt(p)
        let v = row_functional(&[(0, 2.5)], &x, 0.25).unwrap();
        assert_relative_eq!(v, 5.0, epsilon = 1e-12);
        assert_eq!(row_functional(&[], &x, 0.25).unwrap(), 0.0);
        assert!(row_functional(&[(7, 1.0)], &x, 0.25).is_err());
    }

    #[test]
    fn row_functional_matches_dense_dot() {
        let params = gaussian_params(30, 10, 0.5);
        let s = SparseSample::sample(&params, 3);
        let mut rng = rng_from_seed(9);
        let x = SphereVector::uniform(10, &mut rng);
        for row in s.rows() {
            let mut dense = vec![0.0; 10];
            for &(c, v) in row {
                dense[c as usize] = v;
            }
            let want: f64 =
                dense.iter().zip(x.coords()).map(|(a, b)| a * b).sum::<f64>() / 0.5f64.sqrt();
            let got = row_functional(row, &x, 0.5).unwrap();
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn streamed_rows_match_materialized_sample() {
        let params = gaussian_params(25, 12, 0.4);
        let seed = 77;
        let sample = SparseSample::sample(&params, seed);
        let mut rng = rng_from_seed(1);
        let x = SphereVector::uniform(12, &mut rng);
        let streamed = streamed_image_norm(&params, seed, x.coords(), None);
        let direct = sample.matvec(x.coords()).iter().map(|t| t * t).sum::<f64>().sqrt();
        assert_relative_eq!(streamed, direct, epsilon = 1e-12);
    }

    #[test]
    fn concsingle_rademacher_exact_three_point_law() {
        // xi X / sqrt(p) at p = 1/2 takes -sqrt2, 0, sqrt2 with probs
        // 1/4, 1/2, 1/4: L(., 1/2) = 1/2 <= 1 - p/(8 mu4) = 0.9375
        let dist = EntryDistribution::rademacher(0.0).unwrap();
        let report = verify_lemma_concsingle(&dist, 0.5, 20_000, 5).unwrap();
        assert_relative_eq!(report.bound, 0.9375, epsilon = 1e-12);
        assert!((report.levy.value - 0.5).abs() < 0.02, "levy {}", report.levy.value);
        assert!(report.pass);
    }

    #[test]
    fn concsingle_dense_gaussian() {
        // p = 1: L(X, 1/2) ~ 0.3829 <= 1 - 1/24
        let dist = EntryDistribution::gaussian(0.0).unwrap();
        let report = verify_lemma_concsingle(&dist, 1.0, 20_000, 6).unwrap();
        assert!((report.levy.value - 0.3829).abs() < 0.02);
        assert_relative_eq!(report.bound, 1.0 - 1.0 / 24.0, epsilon = 1e-12);
        assert!(report.pass);
    }

    #[test]
    fn concsingle_bound_monotone_in_p() {
        let dist = EntryDistribution::gaussian(0.0).unwrap();
        let mut prev_bound = f64::NEG_INFINITY;
        for &p in &[1.0, 0.6, 0.3, 0.1] {
            let report = verify_lemma_concsingle(&dist, p, 10_000, 7).unwrap();
            assert!(report.bound > prev_bound, "bound not weakening as p decreases");
            prev_bound = report.bound;
            assert!(report.pass);
        }
    }

    #[test]
    fn concentr_gap_positive_at_moderate_cell() {
        let params = gaussian_params(2000, 1000, 0.02);
        let schedule = build_schedule(2000, 0.02, 0.3).unwrap();
        let report = verify_lemma_concentr(&params, &schedule, 1, 0.3, 10_000, 11).unwrap();
        assert!(report.gap > 0.0);
        assert!(report.ci_excludes_zero, "gap {} hw {}", report.gap, report.levy.ci_halfwidth);
        assert!(report.fitted_a > 0.0);
    }

    #[test]
    fn concentr_vacuous_at_large_rho() {
        // rho -> 1 makes the window nearly capture all mass; the check still
        // runs and reports a (small) gap
        let params = gaussian_params(500, 250, 0.1);
        let schedule = build_schedule(500, 0.1, 0.1).unwrap();
        let report = verify_lemma_concentr(&params, &schedule, 1, 0.99, 4_000, 13).unwrap();
        assert!(report.gap >= 0.0);
    }

    #[test]
    fn concentr_rejects_bad_nu() {
        let params = gaussian_params(500, 250, 0.1);
        let schedule = build_schedule(500, 0.1, 0.1).unwrap();
        assert!(verify_lemma_concentr(&params, &schedule, 0, 0.3, 100, 1).is_err());
        assert!(
            verify_lemma_concentr(&params, &schedule, schedule.levels + 1, 0.3, 100, 1).is_err()
        );
    }

    #[test]
    fn tensorization_deterministic_large_zeta() {
        // zeta = 2 lambda surely (q = 1): threshold C N q lambda^2 with
        // C = 1/2 < 4 is unreachable
        let report =
            verify_tensorization(|_| 2.0, 1.0, 1.0, &[20, 40], 500, 3).unwrap();
        for cell in &report.cells {
            assert_eq!(cell.tail.hits, 0);
        }
    }

    #[test]
    fn tensorization_two_point_matches_binomial_tail() {
        use statrs::distribution::{Binomial, DiscreteCDF};
        // zeta in {0, 2 lambda} with P{2 lambda} = q' = 0.02; event requires
        // #large <= floor(N q / 8). Exact binomial oracle per cell.
        let q = 0.02;
        let grid = [50usize, 100, 200, 400];
        let trials = 3000;
        let report = verify_tensorization(
            |rng: &mut Rng| if rng.random::<f64>() < q { 2.0 } else { 0.0 },
            1.0,
            q,
            &grid,
            trials,
            17,
        )
        .unwrap();
        for cell in &report.cells {
            let k_max = (0.5 * cell.n as f64 * q / 4.0).floor() as u64;
            let oracle = Binomial::new(q, cell.n as u64).unwrap().cdf(k_max);
            let se = (oracle * (1.0 - oracle) / trials as f64).sqrt();
            assert!(
                (cell.tail.p_hat - oracle).abs() <= 4.0 * se,
                "cell N={}: p_hat {} vs oracle {oracle} (se {se})",
                cell.n,
                cell.tail.p_hat
            );
        }
        assert_eq!(report.decreasing, Some(true));
        assert!(report.c_fit.unwrap() > 0.0);
    }

    #[test]
    fn small_ball_extreme_thresholds() {
        let params = gaussian_params(50, 20, 0.5);
        let mut rng = rng_from_seed(2);
        let x = SphereVector::uniform(20, &mut rng);
        let zero = small_ball_fixed_vector(&params, &x, 0.0, 1000, 4).unwrap();
        assert_eq!(zero.hits, 0);
        let huge = small_ball_fixed_vector(&params, &x, 1e3, 1000, 4).unwrap();
        assert_eq!(huge.hits, huge.trials);
        assert_eq!(huge.p_hat, 1.0);
    }

    #[test]
    fn small_ball_chi_square_anchor() {
        use statrs::distribution::ChiSquared;
        // Gaussian, p = 1, x = e1: ||X x||^2 ~ chi^2_N
        let n_rows = 100;
        let params = gaussian_params(n_rows, 40, 1.0);
        let mut e1 = vec![0.0; 40];
        e1[0] = 1.0;
        let x = SphereVector::new(e1).unwrap();
        let chi = ChiSquared::new(n_rows as f64).unwrap();
        let est = small_ball_fixed_vector(&params, &x, 1.0, 2000, 8).unwrap();
        let oracle = chi.cdf(1.0 * n_rows as f64);
        assert!(
            est.ci.contains(oracle),
            "oracle {oracle} outside [{}, {}]",
            est.ci.lower,
            est.ci.upper
        );
    }

    #[test]
    fn tail_s1_directions() {
        let params = gaussian_params(200, 100, 0.25);
        // K far above the bulk edge: no hits
        let high = tail_s1(&params, 10.0, 50, 21).unwrap();
        assert_eq!(high.tail.hits, 0);
        assert_eq!(high.nonconverged, 0);
        // K below the bulk: every sample exceeds it
        let low = tail_s1(&params, 1.0, 50, 21).unwrap();
        assert_eq!(low.tail.hits, low.tail.trials);
        // same seeds: identical normalized values
        assert_eq!(high.normalized, low.normalized);
    }

    #[test]
    fn tail_sn_guard_and_direction() {
        let params = gaussian_params(200, 100, 0.25);
        let run = tail_sn(&params, 0.05, 30, 22).unwrap();
        assert_eq!(run.tail.hits, 0);
        let big = gaussian_params(4096, 2048, 0.5);
        assert!(matches!(tail_sn(&big, 0.05, 1, 0), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn tail_reproducible_across_runs() {
        let params = gaussian_params(120, 60, 0.3);
        let a = tail_s1(&params, 2.0, 40, 5).unwrap();
        let b = tail_s1(&params, 2.0, 40, 5).unwrap();
        assert_eq!(a.tail, b.tail);
        assert_eq!(a.normalized, b.normalized);
    }
}
