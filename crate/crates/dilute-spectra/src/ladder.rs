//! The sparsity-ladder recursion: bootstraps the compressibility parameter
//! from `delta_0 p / (1 + |ln p|)` up to an N-independent constant in L
//! steps, where `p_{v} = Np * delta_{v-1}` and
//! `delta_v = delta_0 p_v / (1 + |ln p_v|)`.
//!
//! Natural logarithms throughout.

use crate::error::{Error, Result};

/// Default dense-branch threshold D for `N p^2 / (|ln p| + 1) > D`.
pub const DENSE_BRANCH_D: f64 = 1.0;

/// Relative tolerance for the exact-power boundary of the L certificate.
const BOUNDARY_TOL: f64 = 1e-12;

/// The full recursion output for one (N, p, delta0).
#[derive(Debug, Clone, PartialEq)]
pub struct LadderSchedule {
    pub n_rows: usize,
    pub p: f64,
    pub delta0: f64,
    pub levels: usize,
    /// p_0 .. p_L (p_0 = p).
    pub p_seq: Vec<f64>,
    /// delta_0N .. delta_LN.
    pub delta_seq: Vec<f64>,
    /// Hatted closed-form lower bounds, same indexing.
    pub p_hat_seq: Vec<f64>,
    pub delta_hat_seq: Vec<f64>,
    /// delta_LN.
    pub gamma0: f64,
    /// p_LN.
    pub gamma1: f64,
}

fn validate(n_rows: usize, p: f64, delta0: f64) -> Result<f64> {
    if n_rows < 2 {
        return Err(Error::InvalidParameter {
            field: "N",
            message: format!("need N >= 2, got {n_rows}"),
        });
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter {
            field: "p",
            message: format!("need p in (0,1], got {p}"),
        });
    }
    if !(delta0 > 0.0 && delta0 < 1.0) {
        return Err(Error::InvalidParameter {
            field: "delta0",
            message: format!("need delta0 in (0,1), got {delta0}"),
        });
    }
    let r = delta0 * n_rows as f64 * p / (p.ln().abs() + 1.0);
    if r <= 1.0 {
        return Err(Error::LadderRegime {
            r,
            dense_branch_stat: n_rows as f64 * p * p / (p.ln().abs() + 1.0),
            dense_threshold: DENSE_BRANCH_D,
        });
    }
    Ok(r)
}

/// The unique integer L with `r^{L-1} <= 1/p <= r^L`, where
/// `r = delta0 N p / (|ln p| + 1)`. At an exact power boundary (within
/// 1e-12 relative) both L and L+1 satisfy the display; the smaller is
/// returned.
pub fn compute_l(n_rows: usize, p: f64, delta0: f64) -> Result<usize> {
    let r = validate(n_rows, p, delta0)?;
    let target = 1.0 / p;
    let x = target.ln() / r.ln();
    let floor = x.floor().max(0.0) as usize;
    let level = if r.powi(floor as i32) >= target * (1.0 - BOUNDARY_TOL) {
        floor
    } else {
        floor + 1
    };
    Ok(level)
}

/// Populate every sequence through level L, verifying the schedule
/// invariants at construction.
pub fn build_schedule(n_rows: usize, p: f64, delta0: f64) -> Result<LadderSchedule> {
    let r = validate(n_rows, p, delta0)?;
    let levels = compute_l(n_rows, p, delta0)?;
    let log_term = p.ln().abs() + 1.0;
    let np = n_rows as f64 * p;

    let mut p_seq = Vec::with_capacity(levels + 1);
    let mut delta_seq = Vec::with_capacity(levels + 1);
    p_seq.push(p);
    delta_seq.push(delta0 * p / log_term);
    for v in 1..=levels {
        let pv = np * delta_seq[v - 1];
        p_seq.push(pv);
        delta_seq.push(delta0 * pv / (pv.ln().abs() + 1.0));
    }

    let mut p_hat_seq = Vec::with_capacity(levels + 1);
    let mut delta_hat_seq = Vec::with_capacity(levels + 1);
    p_hat_seq.push(p);
    delta_hat_seq.push(delta_seq[0]);
    for v in 1..=levels {
        p_hat_seq.push(r.powi(v as i32) * p);
        delta_hat_seq.push(r.powi(v as i32 - 1) * delta0 * p / log_term);
    }

    // construction fails loudly on any transcription bug
    for v in 0..=levels {
        if p_seq[v] < p_hat_seq[v] * (1.0 - BOUNDARY_TOL) {
            return Err(Error::InternalInvariant(format!(
                "domination p_{v} = {} < p_hat_{v} = {}",
                p_seq[v], p_hat_seq[v]
            )));
        }
        if delta_seq[v] < delta_hat_seq[v] * (1.0 - BOUNDARY_TOL) {
            return Err(Error::InternalInvariant(format!(
                "domination delta_{v} = {} < delta_hat_{v} = {}",
                delta_seq[v], delta_hat_seq[v]
            )));
        }
        if p_seq[v] < p * (1.0 - BOUNDARY_TOL) {
            return Err(Error::InternalInvariant(format!(
                "floor violated: p_{v} = {} < p = {p}",
                p_seq[v]
            )));
        }
    }

    Ok(LadderSchedule {
        n_rows,
        p,
        delta0,
        levels,
        gamma0: delta_seq[levels],
        gamma1: p_seq[levels],
        p_seq,
        delta_seq,
        p_hat_seq,
        delta_hat_seq,
    })
}

/// (gamma0, gamma1) = (delta_LN, p_LN); the harness asserts their stability
/// across an N-grid.
pub fn terminal_constants(schedule: &LadderSchedule) -> (f64, f64) {
    (schedule.gamma0, schedule.gamma1)
}

impl LadderSchedule {
    /// The certificate ratio r.
    pub fn growth_ratio(&self) -> f64 {
        self.delta0 * self.n_rows as f64 * self.p / (self.p.ln().abs() + 1.0)
    }

    /// Check the two-sided display `r^{L-1} <= 1/p <= r^L` directly.
    pub fn certificate_holds(&self) -> bool {
        let r = self.growth_ratio();
        let target = 1.0 / self.p;
        let upper_ok = r.powi(self.levels as i32) >= target * (1.0 - BOUNDARY_TOL);
        let lower_ok = if self.levels == 0 {
            true
        } else {
            r.powi(self.levels as i32 - 1) <= target * (1.0 + BOUNDARY_TOL)
        };
        upper_ok && lower_ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_cell_has_eight_levels() {
        // r = 0.1 * 100 / (ln 100 + 1) = 1.78407...; ln(100)/ln(r) = 7.955
        let l = compute_l(10_000, 0.01, 0.1).unwrap();
        assert_eq!(l, 8);
        // direct two-sided oracle
        let r = 0.1 * 10_000.0 * 0.01 / ((0.01f64).ln().abs() + 1.0);
        assert!(r.powi(7) <= 100.0 && 100.0 <= r.powi(8));
    }

    #[test]
    fn one_step_when_ratio_exceeds_inverse_p() {
        // r >= 1/p: L = 1 suffices
        let l = compute_l(10_000, 0.5, 0.5).unwrap();
        assert_eq!(l, 1);
    }

    #[test]
    fn degenerate_dense_p_gives_zero_levels() {
        // p = 1: 1/p = 1 = r^0 is an exact boundary; the smaller integer wins
        let l = compute_l(100, 1.0, 0.1).unwrap();
        assert_eq!(l, 0);
        let s = build_schedule(100, 1.0, 0.1).unwrap();
        assert_eq!(s.levels, 0);
        assert_eq!(s.gamma1, 1.0);
    }

    #[test]
    fn regime_error_below_standing_assumption() {
        // N p delta0 / (1 + |ln p|) <= 1
        let err = compute_l(100, 0.01, 0.1).unwrap_err();
        assert!(matches!(err, Error::LadderRegime { .. }));
    }

    #[test]
    fn growth_bound_stable_in_n() {
        // L <= c ln N / ln ln N: the fitted constant c_N = L ln ln N / ln N
        // stays small and stable over eight orders of magnitude.
        let delta0 = 0.1;
        let mut c_min = f64::INFINITY;
        let mut c_max: f64 = 0.0;
        for exp in 12..=30 {
            let n = 1usize << exp;
            let p = (25.0 * (n as f64).ln().powi(2) / n as f64).min(1.0);
            let l = compute_l(n, p, delta0).unwrap() as f64;
            let nf = n as f64;
            let c = l * nf.ln().ln() / nf.ln();
            c_min = c_min.min(c);
            c_max = c_max.max(c);
        }
        assert!(c_max <= 1.0, "fitted constant blew up: {c_max}");
        assert!(c_max / c_min <= 4.0, "unstable fit: [{c_min}, {c_max}]");
    }

    #[test]
    fn first_step_matches_hatted_closed_form() {
        let s = build_schedule(10_000, 0.01, 0.1).unwrap();
        assert_relative_eq!(s.p_seq[1], s.p_hat_seq[1], max_relative = 1e-12);
    }

    #[test]
    fn delta_sequence_strictly_increasing() {
        let s = build_schedule(10_000, 0.01, 0.1).unwrap();
        assert_eq!(s.levels, 8);
        for w in s.delta_seq.windows(2) {
            assert!(w[1] > w[0], "delta not increasing: {w:?}");
        }
    }

    #[test]
    fn domination_and_floor_on_grid() {
        for exp in 12..=20 {
            let n = 1usize << exp;
            let p = (25.0 * (n as f64).ln().powi(2) / n as f64).min(1.0);
            let s = build_schedule(n, p, 0.1).unwrap();
            assert!(s.certificate_holds(), "certificate failed at N = {n}");
            for v in 0..=s.levels {
                assert!(s.p_seq[v] >= s.p_hat_seq[v] * (1.0 - 1e-12));
                assert!(s.delta_seq[v] >= s.delta_hat_seq[v] * (1.0 - 1e-12));
                assert!(s.p_seq[v] >= p * (1.0 - 1e-12));
            }
            let (g0, g1) = terminal_constants(&s);
            assert!(g0 > 0.0);
            assert!(g1 >= p * (1.0 - 1e-12));
        }
    }

    #[test]
    fn single_step_terminal_is_delta_one() {
        let s = build_schedule(10_000, 0.5, 0.5).unwrap();
        assert_eq!(s.levels, 1);
        assert_eq!(terminal_constants(&s).0, s.delta_seq[1]);
    }

    #[test]
    fn hatted_closed_form_cross_check() {
        // p_hat_v = r^v p against iterative multiplication, 1e-12 relative
        let s = build_schedule(1 << 16, 0.02, 0.1).unwrap();
        let r = s.growth_ratio();
        let mut iterative = s.p;
        for v in 1..=s.levels {
            iterative *= r;
            assert_relative_eq!(s.p_hat_seq[v], iterative, max_relative = 1e-12);
        }
    }
}
