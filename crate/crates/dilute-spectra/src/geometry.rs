//! Sphere-vector taxonomy: distance to sparse vectors, the
//! compressible/incompressible split, spread sets, and random epsilon-nets
//! with cardinality accounting.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

/// Unit-sphere dimension cap for full-sphere nets; beyond this the
/// (1 + 2/eps)^d cardinality makes the greedy packing a memory bomb.
pub const NET_DIM_GUARD: usize = 30;

const NORM_CERT_TOL: f64 = 1e-12;

/// (delta, rho) of the compressibility definition, both strictly in (0,1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressibilityParams {
    pub delta: f64,
    pub rho: f64,
}

impl CompressibilityParams {
    pub fn new(delta: f64, rho: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter {
                field: "delta",
                message: format!("need delta in (0,1), got {delta}"),
            });
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidParameter {
                field: "rho",
                message: format!("need rho in (0,1), got {rho}"),
            });
        }
        Ok(Self { delta, rho })
    }
}

/// A vector certified to lie on the unit sphere (norm 1 within 1e-12).
#[derive(Debug, Clone, PartialEq)]
pub struct SphereVector {
    coords: Vec<f64>,
}

impl SphereVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|t| t * t).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_CERT_TOL {
            return Err(Error::InvalidParameter {
                field: "coords",
                message: format!("norm {norm} not within 1e-12 of 1"),
            });
        }
        Ok(Self { coords })
    }

    /// Normalize an arbitrary nonzero vector onto the sphere.
    pub fn from_unnormalized(mut coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|t| t * t).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter {
                field: "coords",
                message: "cannot normalize a zero or non-finite vector".into(),
            });
        }
        for t in &mut coords {
            *t /= norm;
        }
        Ok(Self { coords })
    }

    /// Uniform point on the sphere in R^dim.
    pub fn uniform(dim: usize, rng: &mut Rng) -> Self {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            if let Ok(s) = Self::from_unnormalized(v) {
                return s;
            }
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Distance from `x` to the set of floor(delta n)-sparse vectors, with a
/// degeneracy flag when no sparse vector other than 0 exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseDistance {
    pub distance: f64,
    /// floor(delta n) = 0: the only sparse vector is 0, at distance 1 from
    /// the sphere.
    pub degenerate: bool,
}

/// Exact Euclidean distance from `x` to its best floor(delta n)-supported
/// approximation: the norm of the n - k smallest-magnitude coordinates.
/// Magnitude ties are broken by keeping the lower index in the support.
pub fn distance_to_sparse(x: &SphereVector, delta: f64) -> SparseDistance {
    let n = x.dim();
    let k = (delta * n as f64).floor() as usize;
    if k == 0 {
        return SparseDistance { distance: 1.0, degenerate: true };
    }
    if k >= n {
        return SparseDistance { distance: 0.0, degenerate: false };
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        x.coords[j]
            .abs()
            .partial_cmp(&x.coords[i].abs())
            .unwrap()
            .then(i.cmp(&j))
    });
    // residual summed in ascending index order for a reproducible value
    let mut rest: Vec<usize> = order[k..].to_vec();
    rest.sort_unstable();
    let dist_sq: f64 = rest.iter().map(|&i| x.coords[i] * x.coords[i]).sum();
    SparseDistance { distance: dist_sq.sqrt(), degenerate: false }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compressibility {
    Compressible,
    Incompressible,
}

/// Compressible iff within distance rho of the sparse set (ties count as
/// compressible).
pub fn classify(x: &SphereVector, params: &CompressibilityParams) -> Compressibility {
    if distance_to_sparse(x, params.delta).distance <= params.rho {
        Compressibility::Compressible
    } else {
        Compressibility::Incompressible
    }
}

/// The spread set: coordinates with `1/(2 sqrt n) <= |x_k| <= sqrt(2/(n delta))`.
/// For an incompressible `x` the set carries energy >= rho^2; the energy
/// check failing means the caller passed a compressible vector or an
/// inconsistent (delta, rho).
pub fn spread_set(x: &SphereVector, delta: f64, rho: f64) -> Result<Vec<usize>> {
    let n = x.dim() as f64;
    let lower = 1.0 / (2.0 * n.sqrt());
    let upper = (2.0 / (n * delta)).sqrt();
    let set: Vec<usize> = x
        .coords
        .iter()
        .enumerate()
        .filter(|(_, &v)| {
            let a = v.abs();
            a >= lower && a <= upper
        })
        .map(|(i, _)| i)
        .collect();
    let energy: f64 = set.iter().map(|&i| x.coords[i] * x.coords[i]).sum();
    if energy < rho * rho {
        return Err(Error::SpreadGuarantee { energy, required: rho * rho });
    }
    Ok(set)
}

/// Which subset of the sphere a net should cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetTarget {
    FullSphere,
    /// Vectors supported on the first k coordinates (the per-support piece
    /// of a sparse-set union bound).
    SparseSupport(usize),
}

/// A random epsilon-separated set together with the packing cardinality
/// bound it is reported against.
#[derive(Debug, Clone)]
pub struct NetSpec {
    pub epsilon: f64,
    pub ambient_dim: usize,
    pub target: NetTarget,
    pub points: Vec<SphereVector>,
    /// (1 + 2/eps)^d for the effective sphere dimension d; every
    /// eps-separated subset of the sphere respects it.
    pub cardinality_bound: f64,
}

/// Greedy maximin packing: sample uniform points, keep one iff it is more
/// than `epsilon` from every kept point, stop after a stall of
/// `50 * |net| + 1000` consecutive rejections. The kept set is an
/// epsilon-net of its own packing radius by the packing-to-covering
/// argument.
pub fn build_net(ambient_dim: usize, epsilon: f64, target: NetTarget, seed: u64) -> Result<NetSpec> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter {
            field: "epsilon",
            message: format!("need epsilon in (0,1], got {epsilon}"),
        });
    }
    let sphere_dim = match target {
        NetTarget::FullSphere => ambient_dim,
        NetTarget::SparseSupport(k) => {
            if k == 0 || k > ambient_dim {
                return Err(Error::InvalidParameter {
                    field: "k",
                    message: format!("need 1 <= k <= ambient_dim, got {k}"),
                });
            }
            k
        }
    };
    if sphere_dim == 0 {
        return Err(Error::InvalidParameter {
            field: "ambient_dim",
            message: "need a positive dimension".into(),
        });
    }
    if sphere_dim > NET_DIM_GUARD {
        return Err(Error::NetDimensionGuard { dim: sphere_dim, limit: NET_DIM_GUARD });
    }

    let mut rng = rng_from_seed(seed);
    let mut points: Vec<SphereVector> = Vec::new();
    let mut stall = 0usize;
    loop {
        let candidate = SphereVector::uniform(sphere_dim, &mut rng);
        let embedded = match target {
            NetTarget::FullSphere => candidate,
            NetTarget::SparseSupport(_) => {
                let mut c = vec![0.0; ambient_dim];
                c[..sphere_dim].copy_from_slice(candidate.coords());
                SphereVector { coords: c }
            }
        };
        let separated = points.iter().all(|p| {
            let d2: f64 = p
                .coords
                .iter()
                .zip(&embedded.coords)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2.sqrt() > epsilon
        });
        if separated {
            points.push(embedded);
            stall = 0;
        } else {
            stall += 1;
            if stall > 50 * points.len() + 1000 {
                break;
            }
        }
    }
    let cardinality_bound = (1.0 + 2.0 / epsilon).powi(sphere_dim as i32);
    Ok(NetSpec { epsilon, ambient_dim, target, points, cardinality_bound })
}

/// Rejection-sample a uniform sphere vector until it classifies as
/// incompressible.
pub fn sample_incompressible(
    n: usize,
    params: &CompressibilityParams,
    seed: u64,
    max_rejects: usize,
) -> Result<SphereVector> {
    let mut rng = rng_from_seed(seed);
    for _ in 0..max_rejects {
        let x = SphereVector::uniform(n, &mut rng);
        if classify(&x, params) == Compressibility::Incompressible {
            return Ok(x);
        }
    }
    Err(Error::IncompressibleInfeasible { attempts: max_rejects, acceptance_rate: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis(n: usize, i: usize) -> SphereVector {
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        SphereVector::new(c).unwrap()
    }

    fn uniform_vec(n: usize) -> SphereVector {
        SphereVector::from_unnormalized(vec![1.0; n]).unwrap()
    }

    #[test]
    fn sphere_vector_certifies_norm() {
        assert!(SphereVector::new(vec![0.5, 0.5]).is_err());
        assert!(SphereVector::new(vec![1.0, 0.0]).is_ok());
        assert!(SphereVector::from_unnormalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn basis_vector_is_sparse() {
        let x = basis(10, 0);
        let d = distance_to_sparse(&x, 0.1); // k = 1
        assert!(!d.degenerate);
        assert_eq!(d.distance, 0.0);
    }

    #[test]
    fn uniform_vector_closed_form() {
        // keep k of n equal coordinates: distance = sqrt((n-k)/n)
        let n = 10;
        let x = uniform_vec(n);
        for delta in [0.2, 0.5, 0.7] {
            let k = (delta * n as f64).floor() as usize;
            let d = distance_to_sparse(&x, delta);
            assert_relative_eq!(
                d.distance,
                ((n - k) as f64 / n as f64).sqrt(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn degenerate_support_flagged() {
        let x = uniform_vec(5);
        let d = distance_to_sparse(&x, 0.1); // floor(0.5) = 0
        assert!(d.degenerate);
        assert_eq!(d.distance, 1.0);
    }

    #[test]
    fn brute_force_support_enumeration_agrees() {
        // n = 8, k = 3: exact match against the minimum over all C(8,3)
        // supports, summed in the same (ascending index) order.
        let n = 8;
        let mut rng = rng_from_seed(31);
        for _ in 0..50 {
            let x = SphereVector::uniform(n, &mut rng);
            let got = distance_to_sparse(&x, 3.0 / 8.0).distance;
            let mut best = f64::INFINITY;
            for a in 0..n {
                for b in a + 1..n {
                    for c in b + 1..n {
                        let resid: f64 = (0..n)
                            .filter(|&i| i != a && i != b && i != c)
                            .map(|i| x.coords()[i] * x.coords()[i])
                            .sum();
                        best = best.min(resid.sqrt());
                    }
                }
            }
            assert_eq!(got, best);
        }
    }

    #[test]
    fn classify_examples() {
        let p = CompressibilityParams::new(0.1, 0.3).unwrap();
        assert_eq!(classify(&basis(100, 0), &p), Compressibility::Compressible);
        // uniform vector in R^100 with k = 10: distance sqrt(0.9) > 0.3
        assert_eq!(classify(&uniform_vec(100), &p), Compressibility::Incompressible);
    }

    #[test]
    fn classify_boundary_is_compressible() {
        // x = (sqrt(3)/2, 1/2): distance to the 1-sparse set is exactly 0.5
        let x = SphereVector::new(vec![(3.0f64).sqrt() / 2.0, 0.5]).unwrap();
        let d = distance_to_sparse(&x, 0.5); // k = 1
        assert_eq!(d.distance, 0.5);
        let p = CompressibilityParams::new(0.5, 0.5).unwrap();
        assert_eq!(classify(&x, &p), Compressibility::Compressible);
    }

    #[test]
    fn spread_set_uniform_vector_has_full_energy() {
        // delta <= 2 puts every equal coordinate inside the bracket
        let n = 16;
        let x = uniform_vec(n);
        let set = spread_set(&x, 0.5, 0.9).unwrap();
        assert_eq!(set.len(), n);
        let energy: f64 = set.iter().map(|&i| x.coords()[i] * x.coords()[i]).sum();
        assert_relative_eq!(energy, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spread_set_rejects_basis_vector() {
        // e_1 is compressible: the bracket misses all its energy
        let x = basis(64, 0);
        assert!(matches!(
            spread_set(&x, 0.1, 0.3),
            Err(Error::SpreadGuarantee { .. })
        ));
    }

    #[test]
    fn spread_set_bracket_is_exact() {
        let mut rng = rng_from_seed(5);
        let delta = 0.1;
        for _ in 0..20 {
            let x = SphereVector::uniform(64, &mut rng);
            if let Ok(set) = spread_set(&x, delta, 0.3) {
                let lower = 1.0 / (2.0 * 64.0f64.sqrt());
                let upper = (2.0 / (64.0 * delta)).sqrt();
                for &i in &set {
                    let a = x.coords()[i].abs();
                    assert!(a >= lower && a <= upper);
                }
            }
        }
    }

    #[test]
    fn net_on_zero_sphere_is_both_points() {
        let net = build_net(1, 0.5, NetTarget::FullSphere, 3).unwrap();
        assert_eq!(net.points.len(), 2);
        let mut vals: Vec<f64> = net.points.iter().map(|p| p.coords()[0]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals, vec![-1.0, 1.0]);
        assert!(net.points.len() as f64 <= net.cardinality_bound);
    }

    #[test]
    fn circle_net_within_packing_bounds() {
        // chord 0.5 packing on the circle admits at most 12 points:
        // 2 pi / (2 asin(0.25)) = 12.43
        let net = build_net(2, 0.5, NetTarget::FullSphere, 7).unwrap();
        assert!(net.points.len() <= 12, "got {}", net.points.len());
        assert!(net.points.len() >= 7, "got {}", net.points.len());
        assert_relative_eq!(net.cardinality_bound, 25.0, epsilon = 1e-12);
        assert!((net.points.len() as f64) <= net.cardinality_bound);
    }

    #[test]
    fn sparse_support_net_points_are_sparse() {
        let net = build_net(10, 0.5, NetTarget::SparseSupport(2), 9).unwrap();
        for p in &net.points {
            let nnz = p.coords().iter().filter(|&&v| v != 0.0).count();
            assert!(nnz <= 2);
            assert_eq!(p.dim(), 10);
        }
        assert!(!net.points.is_empty());
    }

    #[test]
    fn net_points_pairwise_separated() {
        let net = build_net(3, 0.4, NetTarget::FullSphere, 11).unwrap();
        for i in 0..net.points.len() {
            for j in i + 1..net.points.len() {
                let d: f64 = net.points[i]
                    .coords()
                    .iter()
                    .zip(net.points[j].coords())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                assert!(d > 0.4);
            }
        }
    }

    #[test]
    fn net_guards() {
        assert!(matches!(
            build_net(31, 0.5, NetTarget::FullSphere, 0),
            Err(Error::NetDimensionGuard { .. })
        ));
        assert!(build_net(2, 0.0, NetTarget::FullSphere, 0).is_err());
        assert!(build_net(5, 0.5, NetTarget::SparseSupport(6), 0).is_err());
    }

    #[test]
    fn incompressible_sampling_accepts_most_uniform_vectors() {
        let p = CompressibilityParams::new(0.05, 0.2).unwrap();
        let mut rng = rng_from_seed(17);
        let mut accepted = 0;
        for _ in 0..1000 {
            let x = SphereVector::uniform(100, &mut rng);
            if classify(&x, &p) == Compressibility::Incompressible {
                accepted += 1;
            }
        }
        assert!(accepted >= 900, "acceptance {accepted}/1000");
        let x = sample_incompressible(100, &p, 23, 100).unwrap();
        assert_eq!(classify(&x, &p), Compressibility::Incompressible);
    }

    #[test]
    fn incompressible_sampling_infeasible_regime_errors() {
        // every unit 2-vector is within 0.99 of a 1-sparse vector
        let p = CompressibilityParams::new(0.6, 0.99).unwrap();
        assert!(matches!(
            sample_incompressible(2, &p, 1, 200),
            Err(Error::IncompressibleInfeasible { .. })
        ));
    }
}
