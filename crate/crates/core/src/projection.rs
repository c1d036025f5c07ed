//! Classical (Torgerson) MDS and convex hulls for the tree map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;

pub const PROJECTION_SCHEMA: &str = "forestview.projection/v1";

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dims: usize,
    /// One row of `dims` coordinates per object.
    pub coords: Vec<Vec<f64>>,
    /// Eigenvalues of the double-centered matrix, largest first.
    pub eigenvalues: Vec<f64>,
}

/// Embeds a symmetric dissimilarity matrix in `k` dimensions.
///
/// Eigenpairs of `B = -1/2 J D^2 J` are found one at a time by power
/// iteration with deflation. Negative eigenvalues are clamped to zero. Each axis is
/// oriented so object 0 has a non-negative coordinate.
pub fn mds(matrix: &DistanceMatrix, k: usize) -> Result<Embedding> {
    if !(1..=2).contains(&k) {
        return Err(Error::InvalidArgument(format!("mds supports 1 or 2 dimensions, got {k}")));
    }
    matrix.check_symmetric(1e-12)?;
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Empty("distance matrix"));
    }

    let sq: Vec<f64> = matrix.values().iter().map(|d| d * d).collect();
    let row_mean: Vec<f64> = (0..n).map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x6d64_73);
    let mut found: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k.min(n) {
        let start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (vec, val) = top_eigenpair(&b, n, start, &found);
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] -= val * vec[i] * vec[j];
            }
        }
        eigenvalues.push(val);
        found.push(vec);
    }
    while eigenvalues.len() < k {
        eigenvalues.push(0.0);
        found.push(vec![0.0; n]);
    }

    let mut coords = vec![vec![0.0; k]; n];
    for (axis, (v, &lambda)) in found.iter().zip(&eigenvalues).enumerate() {
        let scale = lambda.max(0.0).sqrt();
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][axis] = sign * v[i] * scale;
        }
    }
    Ok(Embedding {
        dims: k,
        coords,
        eigenvalues,
    })
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for u in basis {
        let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
    }
}

/// Largest algebraic eigenpair of symmetric `a` restricted to the
/// complement of `basis`.
///
/// A plain run finds the eigenvalue of largest magnitude; when that is
/// non-negative it is also the largest. Otherwise the matrix is shifted by
/// exactly that magnitude, which makes it positive semi-definite without
/// slowing convergence more than needed. The Gershgorin bound is the shift of
/// last resort when the plain run does not settle.
fn top_eigenpair(a: &[f64], n: usize, start: Vec<f64>, basis: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let (v, mu, converged) = power_iteration(a, n, start.clone(), basis, 0.0);
    if converged && mu >= 0.0 {
        return (v, mu);
    }
    let shift = if converged {
        -mu
    } else {
        (0..n)
            .map(|i| a[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let (v, lambda, _) = power_iteration(a, n, start, basis, shift);
    (v, lambda)
}

/// Iterates `v <- (a + shift I) v`. Returns the final vector, its Rayleigh
/// quotient under the unshifted `a`, and whether the direction settled
/// (up to sign) within [`POWER_TOLERANCE`].
fn power_iteration(a: &[f64], n: usize, mut v: Vec<f64>, basis: &[Vec<f64>], shift: f64) -> (Vec<f64>, f64, bool) {
    orthogonalize(&mut v, basis);
    if normalize(&mut v) == 0.0 {
        return (v, 0.0, true);
    }
    let mut next = vec![0.0; n];
    let mut converged = false;
    for _ in 0..POWER_MAX_ITERATIONS {
        for i in 0..n {
            next[i] = a[i * n..(i + 1) * n].iter().zip(&v).map(|(x, y)| x * y).sum::<f64>() + shift * v[i];
        }
        orthogonalize(&mut next, basis);
        if normalize(&mut next) == 0.0 {
            // v lies in the null space of the shifted matrix
            converged = true;
            break;
        }
        let same = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let flipped = next.iter().zip(&v).map(|(a, b)| (a + b).powi(2)).sum::<f64>();
        std::mem::swap(&mut v, &mut next);
        if same.min(flipped).sqrt() < POWER_TOLERANCE {
            converged = true;
            break;
        }
    }
    let mut lambda = 0.0;
    for i in 0..n {
        let av: f64 = a[i * n..(i + 1) * n].iter().zip(&v).map(|(x, y)| x * y).sum();
        lambda += v[i] * av;
    }
    (v, lambda, converged)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain hull. Returns indices into `points`, counterclockwise,
/// starting at the lowest-x (then lowest-y) point. Collinear boundary points
/// and duplicates are dropped.
pub fn convex_hull(points: &[(f64, f64)]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::Empty("hull input"));
    }
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .0
            .total_cmp(&points[b].0)
            .then(points[a].1.total_cmp(&points[b].1))
            .then(a.cmp(&b))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return Ok(idx);
    }
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &usize>> = if pass == 0 {
            Box::new(idx.iter())
        } else {
            Box::new(idx.iter().rev())
        };
        for &i in iter {
            while hull.len() >= start + 2
                && cross(points[hull[hull.len() - 2]], points[hull[hull.len() - 1]], points[i]) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    if hull.len() == 1 {
        // all points collinear and the two chains met at one end
        return Ok(vec![idx[0], idx[idx.len() - 1]]);
    }
    Ok(hull)
}

/// Whether `p` lies inside or on the convex polygon `hull` (CCW).
pub fn hull_contains(points: &[(f64, f64)], hull: &[usize], p: (f64, f64), eps: f64) -> bool {
    match hull.len() {
        0 => false,
        1 => {
            let q = points[hull[0]];
            (q.0 - p.0).abs() <= eps && (q.1 - p.1).abs() <= eps
        }
        2 => {
            let (a, b) = (points[hull[0]], points[hull[1]]);
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt().max(f64::MIN_POSITIVE);
            let on_line = cross(a, b, p).abs() / len <= eps;
            let t = ((p.0 - a.0) * (b.0 - a.0) + (p.1 - a.1) * (b.1 - a.1)) / (len * len);
            on_line && (-eps..=1.0 + eps).contains(&t)
        }
        _ => (0..hull.len()).all(|i| {
            let a = points[hull[i]];
            let b = points[hull[(i + 1) % hull.len()]];
            let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
            cross(a, b, p) / len >= -eps
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterHull {
    pub cluster: usize,
    /// Tree indices, counterclockwise.
    pub vertices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionData {
    pub schema: String,
    pub min_cluster_size: usize,
    pub points: Vec<[f64; 2]>,
    pub labels: Vec<usize>,
    pub hulls: Vec<ClusterHull>,
    pub medoids: Vec<usize>,
    pub representative: Vec<bool>,
}

/// Tree map payload: 2-D positions plus one hull and medoid per cluster.
pub fn projection_data(embedding: &Embedding, clustering: &Clustering) -> Result<ProjectionData> {
    if embedding.dims != 2 {
        return Err(Error::InvalidArgument("projection needs a 2-D embedding".into()));
    }
    let points: Vec<[f64; 2]> = embedding.coords.iter().map(|c| [c[0], c[1]]).collect();
    let mut hulls = Vec::with_capacity(clustering.clusters.len());
    let mut representative = vec![false; points.len()];
    for c in &clustering.clusters {
        let pts: Vec<(f64, f64)> = c.members.iter().map(|&t| (points[t][0], points[t][1])).collect();
        let hull = convex_hull(&pts)?;
        hulls.push(ClusterHull {
            cluster: c.id,
            vertices: hull.into_iter().map(|i| c.members[i]).collect(),
        });
        representative[c.medoid] = true;
    }
    Ok(ProjectionData {
        schema: PROJECTION_SCHEMA.to_string(),
        min_cluster_size: clustering.min_cluster_size,
        points,
        labels: clustering.labels.clone(),
        hulls,
        medoids: clustering.clusters.iter().map(|c| c.medoid).collect(),
        representative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn equilateral_triangle() {
        let m = DistanceMatrix::from_fn(3, |_, _| 1.0);
        let e = mds(&m, 2).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((dist(&e.coords[i], &e.coords[j]) - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn two_points_one_dimension() {
        let m = DistanceMatrix::from_fn(2, |_, _| 0.37);
        let e = mds(&m, 1).unwrap();
        assert!(((e.coords[0][0] - e.coords[1][0]).abs() - 0.37).abs() < 1e-9);
        assert!(e.coords[0][0] >= 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let e = mds(&DistanceMatrix::zeros(1), 2).unwrap();
        assert_eq!(e.coords, vec![vec![0.0, 0.0]]);
        let e = mds(&DistanceMatrix::zeros(4), 2).unwrap();
        assert!(e.coords.iter().flatten().all(|v| *v == 0.0));
        let mut m = DistanceMatrix::zeros(2);
        m.set(0, 1, 1.0);
        assert!(matches!(mds(&m, 2), Err(Error::NotSymmetric(0, 1))));
        assert!(mds(&DistanceMatrix::zeros(2), 3).is_err());
    }

    #[test]
    fn hull_square_with_center() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.5)];
        let h = convex_hull(&pts).unwrap();
        assert_eq!(h, vec![0, 1, 2, 3]);
    }

    #[test]
    fn hull_collinear_and_small() {
        let pts = [(0.0, 0.0), (2.0, 2.0), (1.0, 1.0)];
        assert_eq!(convex_hull(&pts).unwrap(), vec![0, 1]);
        assert_eq!(convex_hull(&[(3.0, 4.0)]).unwrap(), vec![0]);
        assert_eq!(convex_hull(&[(3.0, 4.0), (3.0, 4.0)]).unwrap(), vec![0]);
        assert_eq!(convex_hull(&[(1.0, 0.0), (0.0, 0.0)]).unwrap(), vec![1, 0]);
        assert!(convex_hull(&[]).is_err());
        // collinear point on an edge of a square is excluded
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        assert_eq!(convex_hull(&pts).unwrap(), vec![0, 2, 3, 4]);
    }
}
