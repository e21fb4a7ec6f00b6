//! Exact small-sample statistics shared by the verification campaigns.

use statrs::function::beta::beta_reg;

/// Exact Clopper-Pearson binomial confidence interval.
///
/// Normal approximations are useless for the near-zero tail probabilities
/// this crate estimates; the exact interval stays valid at `hits = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClopperPearson {
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

impl ClopperPearson {
    pub fn new(hits: usize, trials: usize, confidence: f64) -> Self {
        assert!(trials > 0 && hits <= trials);
        assert!(confidence > 0.0 && confidence < 1.0);
        let alpha = 1.0 - confidence;
        let n = trials as f64;
        let k = hits as f64;
        let lower = if hits == 0 {
            0.0
        } else {
            inverse_beta_cdf(alpha / 2.0, k, n - k + 1.0)
        };
        let upper = if hits == trials {
            1.0
        } else {
            inverse_beta_cdf(1.0 - alpha / 2.0, k + 1.0, n - k)
        };
        Self { lower, upper, confidence }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.lower <= p && p <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta
/// function; monotone, so 200 halvings pin the root far below f64 noise.
fn inverse_beta_cdf(q: f64, a: f64, b: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&q));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided Dvoretzky-Kiefer-Wolfowitz uniform deviation for an empirical
/// CDF at confidence `1 - alpha`: `sup |F_hat - F| <= sqrt(ln(2/alpha)/(2m))`
/// with probability >= 1 - alpha.
///
/// A window probability is a difference of two CDF values, so its deviation
/// is at most twice that; [`dkw_window_halfwidth`] returns the doubled bound,
/// capped at 1.
pub fn dkw_window_halfwidth(sample_size: usize, alpha: f64) -> f64 {
    assert!(sample_size >= 1);
    let t = ((2.0 / alpha).ln() / (2.0 * sample_size as f64)).sqrt();
    (2.0 * t).min(1.0)
}

/// Median of a sample (average of the two central order statistics for even
/// lengths). Sorts a copy.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of y against x.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        num += (xi - mx) * (yi - my);
        den += (xi - mx) * (xi - mx);
    }
    num / den
}
