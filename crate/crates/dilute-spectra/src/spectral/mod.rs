//! Singular values of sparse rectangular samples: an exact dense oracle,
//! a Lanczos solver for scale, and the row/column-norm machinery.

mod dense;
mod lanczos;

pub use lanczos::LanczosResult;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{ModelParams, SparseSample};
use crate::rng::{mix, rng_from_seed, stream};

/// Positions limit for densification (desk-scale guard).
pub const DENSE_GUARD: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    DenseOracle,
    Lanczos,
    PowerIteration,
}

/// Spectral facts about one sample.
#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Largest singular value.
    pub s1: f64,
    /// Smallest of the n singular values; populated by the dense oracle only.
    pub sn: Option<f64>,
    /// All n singular values, descending; dense oracle only.
    pub full_spectrum: Option<Vec<f64>>,
    pub max_row_norm: f64,
    pub max_col_norm: f64,
    pub method: Method,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// (max row 2-norm, max column 2-norm) in a single pass over stored entries.
pub fn row_col_norm_extremes(sample: &SparseSample) -> (f64, f64) {
    let mut col_sq = vec![0.0f64; sample.n_cols()];
    let mut max_row_sq = 0.0f64;
    for row in sample.rows() {
        let mut row_sq = 0.0;
        for &(c, v) in row {
            row_sq += v * v;
            col_sq[c as usize] += v * v;
        }
        max_row_sq = max_row_sq.max(row_sq);
    }
    let max_col_sq = col_sq.iter().fold(0.0f64, |a, &b| a.max(b));
    (max_row_sq.sqrt(), max_col_sq.sqrt())
}

fn guard(sample: &SparseSample) -> Result<()> {
    let positions = sample.n_rows() * sample.n_cols();
    if positions > DENSE_GUARD {
        return Err(Error::SizeGuard {
            rows: sample.n_rows(),
            cols: sample.n_cols(),
            limit: DENSE_GUARD,
        });
    }
    Ok(())
}

/// Ground-truth solver: densify, bidiagonalize, implicit-shift QR.
/// Populates the full spectrum.
pub fn dense_svd_oracle(sample: &SparseSample) -> Result<SpectralSummary> {
    guard(sample)?;
    let (m, n) = (sample.n_rows(), sample.n_cols());
    let svd = dense::singular_values(sample.to_dense_col_major(), m, n)?;
    let (max_row_norm, max_col_norm) = row_col_norm_extremes(sample);
    Ok(SpectralSummary {
        s1: svd.values[0],
        sn: Some(svd.values[n - 1]),
        full_spectrum: Some(svd.values),
        max_row_norm,
        max_col_norm,
        method: Method::DenseOracle,
        iterations: svd.sweeps,
        residual: 0.0,
        converged: true,
    })
}

/// Dense solve that also returns right singular vectors (column-major n x n,
/// aligned with the descending spectrum). Validation-scale only.
pub fn dense_svd_with_vectors(sample: &SparseSample) -> Result<(SpectralSummary, Vec<f64>)> {
    guard(sample)?;
    let (m, n) = (sample.n_rows(), sample.n_cols());
    let svd = dense::with_vectors(sample.to_dense_col_major(), m, n)?;
    let (max_row_norm, max_col_norm) = row_col_norm_extremes(sample);
    let summary = SpectralSummary {
        s1: svd.values[0],
        sn: Some(svd.values[n - 1]),
        full_spectrum: Some(svd.values),
        max_row_norm,
        max_col_norm,
        method: Method::DenseOracle,
        iterations: svd.sweeps,
        residual: 0.0,
        converged: true,
    };
    Ok((summary, svd.right_vectors.unwrap()))
}

/// Largest singular value by Golub-Kahan-Lanczos with full
/// reorthogonalization; `sn` is not populated.
pub fn largest_sv_lanczos(
    sample: &SparseSample,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralSummary> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter {
            field: "tol",
            message: format!("need tol > 0, got {tol}"),
        });
    }
    let r = lanczos::largest_singular_value(sample, tol, max_iter)?;
    let (max_row_norm, max_col_norm) = row_col_norm_extremes(sample);
    Ok(SpectralSummary {
        s1: r.s1,
        sn: None,
        full_spectrum: None,
        max_row_norm,
        max_col_norm,
        method: Method::Lanczos,
        iterations: r.iterations,
        residual: r.residual,
        converged: r.converged,
    })
}

/// Smallest singular value from the dense oracle, validated against the
/// variational characterization `s_n = inf ||X x||` over 100 random unit x.
pub fn smallest_sv(sample: &SparseSample) -> Result<f64> {
    let summary = dense_svd_oracle(sample)?;
    let sn = summary.sn.unwrap();
    let mut rng = rng_from_seed(mix(sample.seed(), stream::PROBE));
    let n = sample.n_cols();
    for _ in 0..100 {
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nx = x.iter().map(|t| t * t).sum::<f64>().sqrt();
        if nx == 0.0 {
            continue;
        }
        for t in &mut x {
            *t /= nx;
        }
        let norm = sample.matvec(&x).iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm < sn - 1e-8 {
            return Err(Error::InternalInvariant(format!(
                "variational check failed: ||X x|| = {norm} below s_n = {sn}"
            )));
        }
    }
    Ok(sn)
}

/// Outcome of the two-sided row/column-norm sandwich check.
#[derive(Debug, Clone)]
pub struct SeginerReport {
    pub samples: usize,
    /// Samples where max(row norm, col norm) exceeded s1 beyond arithmetic
    /// slack; the operator-norm inequality makes this deterministically 0.
    pub lower_violations: usize,
    /// mean(s1) / mean(max norm), the statistical counterpart of the upper
    /// half with its unnamed constant.
    pub ratio: f64,
    pub ratio_max: f64,
    pub pass: bool,
}

/// Check the deterministic lower half and the bounded-ratio upper half of
/// the norm sandwich over i.i.d. summaries.
pub fn seginer_sandwich_check(summaries: &[SpectralSummary], ratio_max: f64) -> Result<SeginerReport> {
    if summaries.len() < 30 {
        return Err(Error::InsufficientSamples { needed: 30, got: summaries.len() });
    }
    let mut lower_violations = 0usize;
    let mut sum_s1 = 0.0;
    let mut sum_max = 0.0;
    for s in summaries {
        let mx = s.max_row_norm.max(s.max_col_norm);
        if mx > s.s1 + 1e-10 * s.s1.max(1.0) {
            lower_violations += 1;
        }
        sum_s1 += s.s1;
        sum_max += mx;
    }
    let ratio = sum_s1 / sum_max;
    let pass = lower_violations == 0 && ratio >= 1.0 - 1e-12 && ratio <= ratio_max;
    Ok(SeginerReport { samples: summaries.len(), lower_violations, ratio, ratio_max, pass })
}

/// Monte Carlo estimate of the q-th moment of a row norm.
#[derive(Debug, Clone)]
pub struct RowMomentReport {
    pub q: usize,
    pub trials: usize,
    /// Mean of ||row||^q.
    pub estimate: f64,
    /// estimate^{1/q} / sqrt(Np).
    pub normalized_root: f64,
    pub bound_const: f64,
    pub pass: bool,
}

/// Estimate `E ||X_{1.}||^q` with condition-(CI) entries (pipeline applied
/// when a moment surplus is declared) and check the q-th root against
/// `bound_const * sqrt(Np)`.
pub fn row_norm_moment_check(
    params: &ModelParams,
    q: usize,
    trials: usize,
    seed: u64,
    bound_const: f64,
) -> Result<RowMomentReport> {
    let max_q = 2.0 * (params.n_rows().max(params.n_cols()) as f64).ln();
    if q < 2 || (q as f64) > max_q {
        return Err(Error::MomentOrderRange { q, max: max_q });
    }
    if trials < 100 {
        return Err(Error::InvalidParameter {
            field: "trials",
            message: format!("need >= 100 trials, got {trials}"),
        });
    }
    let dist = params.dist();
    let pipeline =
        if dist.delta() > 0.0 { Some(crate::model::pipeline_constants(params)?) } else { None };

    let p = params.p();
    let n = params.n_cols();
    let mut total = 0.0;
    for t in 0..trials as u64 {
        let trial_seed = mix(seed, mix(stream::TRIAL, t));
        let mut mask_rng = rng_from_seed(mix(trial_seed, stream::MASK));
        let mut value_rng = rng_from_seed(mix(trial_seed, stream::VALUE));
        let mut sumsq = 0.0;
        for _ in 0..n {
            if mask_rng.random::<f64>() < p {
                let x = dist.sample(&mut value_rng);
                let x = match &pipeline {
                    Some(c) => c.apply(x),
                    None => x,
                };
                sumsq += x * x;
            }
        }
        total += sumsq.sqrt().powi(q as i32);
    }
    let estimate = total / trials as f64;
    let normalized_root = estimate.powf(1.0 / q as f64) / params.np().sqrt();
    Ok(RowMomentReport {
        q,
        trials,
        estimate,
        normalized_root,
        bound_const,
        pass: normalized_root <= bound_const,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EntryDistribution;
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn params(n_rows: usize, n_cols: usize, p: f64) -> ModelParams {
        ModelParams::new(n_rows, n_cols, p, EntryDistribution::gaussian(4.0).unwrap(), 1.0).unwrap()
    }

    fn from_dense(rows: &[&[f64]], p: f64) -> SparseSample {
        let n_rows = rows.len();
        let n_cols = rows[0].len();
        let pr = params(n_rows, n_cols, p);
        let adj: Vec<Vec<(u32, f64)>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j as u32, v))
                    .collect()
            })
            .collect();
        SparseSample::from_rows(&pr, 0, adj).unwrap()
    }

    #[test]
    fn oracle_diagonal_spectrum() {
        let s = from_dense(&[&[1.0, 0.0], &[0.0, 2.0], &[0.0, 0.0]], 1.0);
        let summary = dense_svd_oracle(&s).unwrap();
        let spec = summary.full_spectrum.as_ref().unwrap();
        assert_relative_eq!(spec[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(spec[1], 1.0, epsilon = 1e-12);
        assert_eq!(summary.s1, spec[0]);
        assert_eq!(summary.sn.unwrap(), spec[1]);
        assert_eq!(row_col_norm_extremes(&s), (2.0, 2.0));
    }

    #[test]
    fn oracle_single_column() {
        let s = from_dense(&[&[3.0], &[4.0]], 1.0);
        let summary = dense_svd_oracle(&s).unwrap();
        assert_relative_eq!(summary.s1, 5.0, epsilon = 1e-12);
        assert_relative_eq!(summary.sn.unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn extremes_all_ones() {
        let s = from_dense(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]], 1.0);
        let (r, c) = row_col_norm_extremes(&s);
        assert_relative_eq!(r, 2.0f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(c, 3.0f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn guard_rejects_large() {
        let pr = params(4000, 2000, 0.01);
        let s = SparseSample::from_rows(&pr, 0, vec![Vec::new(); 4000]).unwrap();
        assert!(matches!(dense_svd_oracle(&s), Err(Error::SizeGuard { .. })));
    }

    #[test]
    fn lanczos_rank_one_two_iterations() {
        // u v^T with u = (1,2,3), v = (2,1) has s1 = ||u|| ||v||
        let u = [1.0, 2.0, 3.0];
        let v = [2.0, 1.0];
        let rows: Vec<Vec<f64>> = u.iter().map(|ui| v.iter().map(|vj| ui * vj).collect()).collect();
        let slices: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let s = from_dense(&slices, 1.0);
        let summary = largest_sv_lanczos(&s, 1e-10, 50).unwrap();
        let want = (14.0f64).sqrt() * (5.0f64).sqrt();
        assert!(summary.converged);
        assert!(summary.iterations <= 2, "iterations {}", summary.iterations);
        assert_relative_eq!(summary.s1, want, epsilon = 1e-9);
        assert!(summary.sn.is_none());
    }

    #[test]
    fn lanczos_zero_matrix() {
        let pr = params(6, 3, 0.5);
        let s = SparseSample::from_rows(&pr, 0, vec![Vec::new(); 6]).unwrap();
        let summary = largest_sv_lanczos(&s, 1e-8, 50).unwrap();
        assert_eq!(summary.s1, 0.0);
        assert!(summary.converged);
    }

    #[test]
    fn lanczos_matches_oracle_on_random_samples() {
        for seed in 0..10u64 {
            let pr = params(80, 40, 0.2);
            let s = SparseSample::sample(&pr, seed);
            let oracle = dense_svd_oracle(&s).unwrap();
            let lz = largest_sv_lanczos(&s, 1e-8, 200).unwrap();
            assert!(lz.converged, "seed {seed}");
            assert!(
                (lz.s1 - oracle.s1).abs() <= 1e-6 * oracle.s1,
                "seed {seed}: {} vs {}",
                lz.s1,
                oracle.s1
            );
        }
    }

    #[test]
    fn smallest_sv_orthonormal_columns() {
        let s = from_dense(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]], 1.0);
        assert_relative_eq!(smallest_sv(&s).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn smallest_sv_zero_column_is_zero() {
        let s = from_dense(&[&[1.0, 0.0], &[2.0, 0.0], &[1.0, 0.0]], 1.0);
        let sn = smallest_sv(&s).unwrap();
        let s1 = dense_svd_oracle(&s).unwrap().s1;
        assert!(sn <= 1e-12 * s1, "sn {sn}");
    }

    #[test]
    fn oracle_vectors_residual_bound() {
        // postcondition: ||X^T X v - s^2 v|| <= 1e-8 s1^2 for every pair
        let pr = params(50, 30, 0.3);
        for seed in 0..5u64 {
            let s = SparseSample::sample(&pr, seed);
            let (summary, v) = dense_svd_with_vectors(&s).unwrap();
            let spec = summary.full_spectrum.as_ref().unwrap();
            let n = s.n_cols();
            for (idx, &sv) in spec.iter().enumerate() {
                let vcol = &v[idx * n..(idx + 1) * n];
                let xv = s.matvec(vcol);
                let xtxv = s.matvec_t(&xv);
                let s2 = sv * sv;
                let resid: f64 = xtxv
                    .iter()
                    .zip(vcol)
                    .map(|(a, b)| (a - s2 * b) * (a - s2 * b))
                    .sum::<f64>()
                    .sqrt();
                assert!(resid <= 1e-8 * summary.s1 * summary.s1, "residual {resid}");
            }
        }
    }

    #[test]
    fn deterministic_sandwich_and_ratio() {
        let pr = params(60, 30, 0.2);
        let summaries: Vec<SpectralSummary> =
            (0..40u64).map(|s| dense_svd_oracle(&SparseSample::sample(&pr, s)).unwrap()).collect();
        let report = seginer_sandwich_check(&summaries, 10.0).unwrap();
        assert_eq!(report.lower_violations, 0);
        assert!(report.ratio >= 1.0 && report.ratio <= 10.0, "ratio {}", report.ratio);
        assert!(report.pass);
    }

    #[test]
    fn sandwich_requires_thirty_samples() {
        let pr = params(10, 5, 0.5);
        let summaries: Vec<SpectralSummary> =
            (0..5u64).map(|s| dense_svd_oracle(&SparseSample::sample(&pr, s)).unwrap()).collect();
        assert!(matches!(
            seginer_sandwich_check(&summaries, 10.0),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn row_moment_q2_exact_mean() {
        // E ||row||^2 = sum_k E X^2 xi = n p, exactly
        let pr = params(400, 200, 0.15);
        let trials = 4000;
        let report = row_norm_moment_check(&pr, 2, trials, 99, 8.0).unwrap();
        let want = 200.0 * 0.15;
        // Var(||row||^2) = n(E x^4 xi - p^2) with x pipelined Gaussian; use
        // raw-Gaussian 3p as an upper-ballpark for the 3-SE band.
        let var = 200.0 * (3.0 * 0.15 - 0.15 * 0.15);
        let se = (var / trials as f64).sqrt();
        assert!(
            (report.estimate - want).abs() <= 3.0 * se,
            "estimate {} vs {want} (se {se})",
            report.estimate
        );
        assert!(report.pass);
    }

    #[test]
    fn row_moment_q4_rademacher_matches_enumeration() {
        // n = 3 Rademacher rows: enumerate all masks and signs exactly.
        let dist = EntryDistribution::rademacher(0.0).unwrap();
        let p = 0.4;
        let pr = ModelParams::new(10, 3, p, dist, 1.0).unwrap();
        let mut exact = 0.0;
        for mask in 0..8u32 {
            for signs in 0..8u32 {
                let mut sumsq = 0.0;
                let mut prob = 1.0 / 8.0; // sign probability
                for bit in 0..3 {
                    let kept = mask >> bit & 1 == 1;
                    prob *= if kept { p } else { 1.0 - p };
                    if kept {
                        let x: f64 = if signs >> bit & 1 == 1 { 1.0 } else { -1.0 };
                        sumsq += x * x;
                    }
                }
                exact += prob * sumsq * sumsq; // ||row||^4
            }
        }
        // analytic cross-check: E (Bin(3,p))^2 = 3p(1-p) + 9p^2
        assert_relative_eq!(exact, 3.0 * p * (1.0 - p) + 9.0 * p * p, epsilon = 1e-12);
        let trials = 20_000;
        let report = row_norm_moment_check(&pr, 4, trials, 7, 8.0).unwrap();
        // SE of the mean of ||row||^4: Var <= E ||row||^8 <= 81
        let se = (81.0f64 / trials as f64).sqrt();
        assert!(
            (report.estimate - exact).abs() <= 3.0 * se,
            "estimate {} vs exact {exact}",
            report.estimate
        );
    }

    #[test]
    fn row_moment_dense_gaussian_q2_near_n() {
        let pr = params(64, 32, 1.0);
        let report = row_norm_moment_check(&pr, 2, 2000, 3, 8.0).unwrap();
        assert!((report.estimate - 32.0).abs() < 32.0 * 0.1, "estimate {}", report.estimate);
    }

    #[test]
    fn row_moment_rejects_bad_q() {
        let pr = params(100, 50, 0.1);
        assert!(matches!(
            row_norm_moment_check(&pr, 1, 200, 0, 8.0),
            Err(Error::MomentOrderRange { .. })
        ));
        assert!(matches!(
            row_norm_moment_check(&pr, 50, 200, 0, 8.0),
            Err(Error::MomentOrderRange { .. })
        ));
    }

    #[test]
    fn scale_equivariance_exact_at_power_of_two() {
        // every intermediate of the kernel is homogeneous in the input scale,
        // and scaling by 2 is exact in IEEE arithmetic
        let pr = params(30, 15, 0.4);
        let s = SparseSample::sample(&pr, 11);
        let a = dense_svd_oracle(&s).unwrap();
        let b = dense_svd_oracle(&s.scaled(2.0)).unwrap();
        let sa = a.full_spectrum.unwrap();
        let sb = b.full_spectrum.unwrap();
        for (x, y) in sa.iter().zip(&sb) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn random_unit_vectors_between_sn_and_s1() {
        let pr = params(40, 20, 0.3);
        let s = SparseSample::sample(&pr, 13);
        let summary = dense_svd_oracle(&s).unwrap();
        let (s1, sn) = (summary.s1, summary.sn.unwrap());
        let mut rng = rng_from_seed(1234);
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..20).map(|_| rng.random::<f64>() - 0.5).collect();
            let nx = x.iter().map(|t| t * t).sum::<f64>().sqrt();
            for t in &mut x {
                *t /= nx;
            }
            let norm = s.matvec(&x).iter().map(|t| t * t).sum::<f64>().sqrt();
            let slack = 1e-10 * s1.max(1.0);
            assert!(norm >= sn - slack && norm <= s1 + slack);
        }
    }
}
