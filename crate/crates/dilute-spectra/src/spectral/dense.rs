//! Dense SVD kernel: Householder bidiagonalization followed by
//! implicit-shift QR iteration on the bidiagonal.
//!
//! Only singular values are needed on the hot Monte Carlo path, so vector
//! accumulation is optional: `with_vectors` additionally returns the right
//! singular vectors (needed by residual checks and desk-scale validation).
//!
//! Storage is column-major so that every inner loop of the bidiagonalization
//! runs down a contiguous column; the right-reflector application is
//! rewritten as column combinations for the same reason.

use crate::error::{Error, Result};

/// Deflation threshold relative to neighboring diagonal mass.
const DEFLATE_TOL: f64 = 100.0 * f64::EPSILON;
/// Sweep budget multiplier; exceeding it signals a kernel bug.
const MAX_SWEEPS_PER_COL: usize = 100;

/// Result of the dense kernel.
pub struct DenseSvd {
    /// Singular values, descending.
    pub values: Vec<f64>,
    /// Right singular vectors (column-major n x n), aligned with `values`;
    /// present iff requested.
    pub right_vectors: Option<Vec<f64>>,
    /// QR sweeps consumed.
    pub sweeps: usize,
}

/// Compute all singular values of the column-major `m x n` matrix `a`
/// (`m >= n`). Consumes the buffer as scratch.
pub fn singular_values(a: Vec<f64>, m: usize, n: usize) -> Result<DenseSvd> {
    svd_impl(a, m, n, false)
}

/// As [`singular_values`], additionally accumulating right singular vectors.
pub fn with_vectors(a: Vec<f64>, m: usize, n: usize) -> Result<DenseSvd> {
    svd_impl(a, m, n, true)
}

fn svd_impl(mut a: Vec<f64>, m: usize, n: usize, want_v: bool) -> Result<DenseSvd> {
    assert_eq!(a.len(), m * n);
    assert!(m >= n && n >= 1);
    let mut v = want_v.then(|| identity(n));
    let (mut d, mut e) = bidiagonalize(&mut a, m, n, v.as_mut());
    let sweeps = bidiagonal_qr(&mut d, &mut e, v.as_mut().map(|vv| (vv.as_mut_slice(), n)))?;

    // magnitudes, then sort descending carrying vectors along
    for di in d.iter_mut() {
        *di = di.abs();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    // the accumulator is row-major; emit column-major with columns ordered
    // by descending singular value
    let right_vectors = v.map(|vv| {
        let mut sorted = vec![0.0; n * n];
        for (new, &old) in order.iter().enumerate() {
            for r in 0..n {
                sorted[new * n + r] = vv[r * n + old];
            }
        }
        sorted
    });
    Ok(DenseSvd { values, right_vectors, sweeps })
}

fn identity(n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    v
}

/// Householder vector for `x`, normalized with v[0] = 1.
/// Returns (beta, alpha) where alpha = ||x|| is the resulting pivot value
/// and `x` is overwritten by v. The reflection maps x to +||x|| e_1.
fn house(x: &mut [f64]) -> (f64, f64) {
    let sigma: f64 = x[1..].iter().map(|&t| t * t).sum();
    let x0 = x[0];
    if sigma == 0.0 {
        // already reduced; keep the sign of the pivot as-is
        return (0.0, x0);
    }
    let mu = (x0 * x0 + sigma).sqrt();
    // x0 - mu, computed without cancellation for x0 > 0
    let v0 = if x0 <= 0.0 { x0 - mu } else { -sigma / (x0 + mu) };
    let beta = 2.0 * v0 * v0 / (sigma + v0 * v0);
    x[0] = 1.0;
    for t in x[1..].iter_mut() {
        *t /= v0;
    }
    (beta, mu)
}

/// Dot product with eight accumulators; the default scalar chain is latency
/// bound and costs 3-4x on the bidiagonalization inner loop.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let chunks = a.len() / 8;
    let mut acc = [0.0f64; 8];
    for i in 0..chunks {
        let base = i * 8;
        for lane in 0..8 {
            acc[lane] += a[base + lane] * b[base + lane];
        }
    }
    let mut tail = 0.0;
    for i in chunks * 8..a.len() {
        tail += a[i] * b[i];
    }
    acc.iter().sum::<f64>() + tail
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Golub-Kahan Householder bidiagonalization, column-major. Returns the
/// diagonal `d` (length n) and superdiagonal `e` (length n-1); accumulates
/// the right reflectors into `v` (row-major n x n) when given.
fn bidiagonalize(
    a: &mut [f64],
    m: usize,
    n: usize,
    mut v: Option<&mut Vec<f64>>,
) -> (Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut hv = vec![0.0; m];
    let mut hw = vec![0.0; n];
    let mut u = vec![0.0; m];

    let col = |j: usize| j * m;

    for k in 0..n {
        // left reflector: zero column k below the diagonal
        let len = m - k;
        hv[..len].copy_from_slice(&a[col(k) + k..col(k) + m]);
        let (beta, alpha) = house(&mut hv[..len]);
        d[k] = alpha;
        if beta != 0.0 {
            for j in k + 1..n {
                let cj = &mut a[col(j) + k..col(j) + m];
                let s = beta * dot(&hv[..len], cj);
                axpy(cj, -s, &hv[..len]);
            }
        }

        if k + 1 < n {
            // right reflector: zero row k beyond the first superdiagonal
            let rlen = n - k - 1;
            for (t, j) in (k + 1..n).enumerate() {
                hw[t] = a[col(j) + k];
            }
            if rlen == 1 {
                e[k] = hw[0];
                continue;
            }
            let (beta_r, alpha_r) = house(&mut hw[..rlen]);
            e[k] = alpha_r;
            if beta_r != 0.0 {
                // row k collapses to (e_k, 0, ..., 0)
                a[col(k + 1) + k] = e[k];
                for j in k + 2..n {
                    a[col(j) + k] = 0.0;
                }
                // trailing block: A := A (I - beta w w^T), done column-wise
                let sub = m - k - 1;
                u[..sub].fill(0.0);
                for (t, j) in (k + 1..n).enumerate() {
                    let cj = &a[col(j) + k + 1..col(j) + m];
                    axpy(&mut u[..sub], hw[t], cj);
                }
                for (t, j) in (k + 1..n).enumerate() {
                    let cj = &mut a[col(j) + k + 1..col(j) + m];
                    axpy(cj, -beta_r * hw[t], &u[..sub]);
                }
                if let Some(vmat) = v.as_deref_mut() {
                    // V := V (I - beta w w^T) on rows of the row-major buffer
                    for row in vmat.chunks_exact_mut(n) {
                        let t = beta_r * dot(&row[k + 1..], &hw[..rlen]);
                        axpy(&mut row[k + 1..], -t, &hw[..rlen]);
                    }
                }
            }
        }
    }
    (d, e)
}

struct VAcc<'a> {
    data: &'a mut [f64],
    n: usize,
}

impl VAcc<'_> {
    /// Rotate columns (i, j) of the row-major matrix by (c, s):
    /// col_i' = c col_i + s col_j ; col_j' = -s col_i + c col_j.
    #[inline]
    fn rotate(&mut self, i: usize, j: usize, c: f64, s: f64) {
        for row in self.data.chunks_exact_mut(self.n) {
            let (a, b) = (row[i], row[j]);
            row[i] = c * a + s * b;
            row[j] = -s * a + c * b;
        }
    }
}

#[inline]
fn givens(y: f64, z: f64) -> (f64, f64, f64) {
    if z == 0.0 {
        (1.0, 0.0, y)
    } else {
        let r = y.hypot(z);
        (y / r, z / r, r)
    }
}

/// Implicit-shift QR on the bidiagonal (d, e). Right rotations are
/// accumulated into `v` when given. Returns the sweep count.
fn bidiagonal_qr(
    d: &mut [f64],
    e: &mut [f64],
    v: Option<(&mut [f64], usize)>,
) -> Result<usize> {
    let n = d.len();
    if n == 1 {
        return Ok(0);
    }
    let mut vacc = v.map(|(data, n)| VAcc { data, n });
    let max_sweeps = MAX_SWEEPS_PER_COL * n;
    let mut sweeps = 0usize;

    let scale = d
        .iter()
        .chain(e.iter())
        .fold(0.0f64, |acc, &t| acc.max(t.abs()));
    if scale == 0.0 {
        return Ok(0);
    }

    loop {
        // deflate negligible superdiagonal entries
        for i in 0..n - 1 {
            if e[i].abs() <= DEFLATE_TOL * (d[i].abs() + d[i + 1].abs()) {
                e[i] = 0.0;
            }
        }
        // active trailing block [lo, hi]
        let mut hi = n - 1;
        while hi > 0 && e[hi - 1] == 0.0 {
            hi -= 1;
        }
        if hi == 0 {
            return Ok(sweeps);
        }
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1] != 0.0 {
            lo -= 1;
        }

        sweeps += 1;
        if sweeps > max_sweeps {
            return Err(Error::NonConvergence { sweeps });
        }

        // zero diagonals inside the block split it
        let mut split = false;
        for i in lo..hi {
            if d[i].abs() <= DEFLATE_TOL * scale {
                d[i] = 0.0;
                // chase e[i] off the row with left rotations (rows i, j)
                let mut f = e[i];
                e[i] = 0.0;
                for j in i + 1..=hi {
                    let (c, s, r) = givens(d[j], f);
                    d[j] = r;
                    if j < hi {
                        f = -s * e[j];
                        e[j] *= c;
                    }
                }
                split = true;
                break;
            }
        }
        if split {
            continue;
        }
        if d[hi].abs() <= DEFLATE_TOL * scale {
            d[hi] = 0.0;
            // chase e[hi-1] off the column with right rotations (cols j, hi)
            let mut f = e[hi - 1];
            e[hi - 1] = 0.0;
            for j in (lo..hi).rev() {
                let (c, s, r) = givens(d[j], f);
                d[j] = r;
                if let Some(va) = vacc.as_mut() {
                    va.rotate(j, hi, c, s);
                }
                if j > lo {
                    f = -s * e[j - 1];
                    e[j - 1] *= c;
                }
            }
            continue;
        }

        // Wilkinson shift from the trailing 2x2 of B^T B
        let dm = d[hi - 1];
        let em1 = if hi >= 2 && hi - 1 > lo { e[hi - 2] } else { 0.0 };
        let t11 = dm * dm + em1 * em1;
        let t12 = dm * e[hi - 1];
        let t22 = d[hi] * d[hi] + e[hi - 1] * e[hi - 1];
        let mu = if t12 == 0.0 {
            t22
        } else {
            let tr2 = 0.5 * (t11 - t22);
            let sgn = if tr2 >= 0.0 { 1.0 } else { -1.0 };
            t22 - t12 * t12 / (tr2 + sgn * tr2.hypot(t12))
        };

        // bulge chase
        let mut y = d[lo] * d[lo] - mu;
        let mut z = d[lo] * e[lo];
        for k in lo..hi {
            let (c, s, r) = givens(y, z);
            if k > lo {
                e[k - 1] = r;
            }
            let f1 = d[k];
            let g1 = e[k];
            d[k] = c * f1 + s * g1;
            e[k] = -s * f1 + c * g1;
            let h1 = s * d[k + 1];
            d[k + 1] *= c;
            if let Some(va) = vacc.as_mut() {
                va.rotate(k, k + 1, c, s);
            }

            let (c2, s2, r2) = givens(d[k], h1);
            d[k] = r2;
            let f2 = e[k];
            let g2 = d[k + 1];
            e[k] = c2 * f2 + s2 * g2;
            d[k + 1] = -s2 * f2 + c2 * g2;
            if k + 1 < hi {
                let g3 = e[k + 1];
                y = e[k];
                z = s2 * g3;
                e[k + 1] = c2 * g3;
            }
        }
    }
}
