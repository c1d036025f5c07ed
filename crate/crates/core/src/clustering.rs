//! Complete-linkage dendrograms, a branch-local dynamic cut with a minimum
//! cluster size, medoids, and the cluster-count curve used to pick a default
//! minimum size.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;
use crate::stats::quantile_sorted;

/// Quantile of merge heights used for the static and per-branch cuts.
pub const CUT_QUANTILE: f64 = 0.99;
/// Minimum height gap, as a fraction of the global height range, for a
/// branch split to be accepted.
pub const GAP_FRACTION: f64 = 0.05;

/// One agglomeration step. Node ids below `n` are leaves; merge `k` creates
/// node `n + k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn root(&self) -> usize {
        if self.n == 1 {
            0
        } else {
            self.n + self.merges.len() - 1
        }
    }

    fn merge_of(&self, node: usize) -> Option<&Merge> {
        node.checked_sub(self.n).map(|k| &self.merges[k])
    }

    pub fn size(&self, node: usize) -> usize {
        self.merge_of(node).map_or(1, |m| m.size)
    }

    /// Height of a node; leaves sit at 0.
    pub fn height(&self, node: usize) -> f64 {
        self.merge_of(node).map_or(0.0, |m| m.height)
    }

    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size(node));
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.merge_of(x) {
                Some(m) => {
                    stack.push(m.right);
                    stack.push(m.left);
                }
                None => out.push(x),
            }
        }
        out.sort_unstable();
        out
    }

    /// Heights of all merges inside the subtree rooted at `node`.
    fn internal_heights(&self, node: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if let Some(m) = self.merge_of(x) {
                out.push(m.height);
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out
    }

    /// Text rows `left right height size`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for m in &self.merges {
            out.push_str(&format!("{}\t{}\t{:?}\t{}\n", m.left, m.right, m.height, m.size));
        }
        out
    }
}

/// Agglomerative clustering where the distance between clusters is the
/// largest pairwise distance. Ties go to the lexicographically smallest pair
/// of cluster slots, where a slot is identified by its smallest member.
pub fn complete_linkage(matrix: &DistanceMatrix) -> Result<Dendrogram> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Empty("distance matrix"));
    }
    let mut d: Vec<f64> = matrix.values().to_vec();
    let mut active: Vec<bool> = vec![true; n];
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut size: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if !active[j] {
                    continue;
                }
                let v = d[i * n + j];
                if best.map_or(true, |(_, _, b)| v < b) {
                    best = Some((i, j, v));
                }
            }
        }
        let (i, j, h) = best.expect("at least two active clusters");
        merges.push(Merge {
            left: node_of[i],
            right: node_of[j],
            height: h,
            size: size[i] + size[j],
        });
        for k in 0..n {
            if active[k] && k != i && k != j {
                let v = d[i * n + k].max(d[j * n + k]);
                d[i * n + k] = v;
                d[k * n + i] = v;
            }
        }
        active[j] = false;
        size[i] += size[j];
        node_of[i] = n + step;
    }
    Ok(Dendrogram { n, merges })
}

/// Member minimizing the summed distance to the other members; ties go to the
/// lowest tree index.
pub fn medoid(members: &[usize], matrix: &DistanceMatrix) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    for &i in &sorted {
        let s: f64 = sorted.iter().map(|&j| matrix.get(i, j)).sum();
        if best.map_or(true, |(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::Empty("cluster"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    /// Ascending tree indices.
    pub members: Vec<usize>,
    pub medoid: usize,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub min_cluster_size: usize,
    /// Cluster id per tree.
    pub labels: Vec<usize>,
    /// Ordered by descending size; `clusters[k].id == k`.
    pub clusters: Vec<Cluster>,
}

impl Clustering {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

/// Splits `node` at the given cut height: the maximal subtrees whose root
/// height does not exceed `cut`, each with the height of the merge that
/// joined it.
fn cut_below(dendro: &Dendrogram, node: usize, cut: f64) -> Vec<(usize, f64)> {
    let mut parts = Vec::new();
    let mut stack = vec![(node, f64::INFINITY)];
    while let Some((x, join)) = stack.pop() {
        match dendro.merge_of(x) {
            Some(m) if m.height > cut => {
                stack.push((m.right, m.height));
                stack.push((m.left, m.height));
            }
            _ => parts.push((x, join)),
        }
    }
    parts
}

fn recut(dendro: &Dendrogram, node: usize, m: usize, gap: f64, out: &mut Vec<usize>) {
    if dendro.size(node) < 2 * m || node < dendro.n {
        out.push(node);
        return;
    }
    let mut heights = dendro.internal_heights(node);
    heights.sort_by(f64::total_cmp);
    let cut = quantile_sorted(&heights, CUT_QUANTILE);
    let parts = cut_below(dendro, node, cut);
    let accepted = parts.len() >= 2
        && parts.iter().all(|&(p, join)| {
            let inner = dendro.height(p);
            dendro.size(p) >= m && join > inner && join - inner >= gap
        });
    if accepted {
        for (p, _) in parts {
            recut(dendro, p, m, gap, out);
        }
    } else {
        out.push(node);
    }
}

/// Branch-local dendrogram cut with total assignment.
///
/// 1. Static cut at the 0.99 quantile of all merge heights.
/// 2. Branches of at least `2m` trees are re-cut at the 0.99 quantile of
///    their own merge heights; a split is kept only when every part has at
///    least `m` trees and sits below its joining merge by at least 5% of the
///    global height range.
/// 3. Branches smaller than `m` are dissolved into the cluster with the
///    nearest medoid.
/// 4. Clusters are renumbered by descending size.
pub fn dynamic_hybrid_cut(dendro: &Dendrogram, matrix: &DistanceMatrix, m: usize) -> Result<Clustering> {
    let n = dendro.n;
    if n == 0 {
        return Err(Error::Empty("dendrogram"));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("minimum cluster size must be at least 1".into()));
    }
    if matrix.len() != n {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{0} but dendrogram has {n} leaves",
            matrix.len()
        )));
    }
    let everything = || -> Result<Clustering> {
        let members: Vec<usize> = (0..n).collect();
        let medoid = medoid(&members, matrix)?;
        Ok(Clustering {
            min_cluster_size: m,
            labels: vec![0; n],
            clusters: vec![Cluster { id: 0, members, medoid }],
        })
    };
    if m > n || n == 1 {
        return everything();
    }

    let mut heights: Vec<f64> = dendro.merges.iter().map(|mg| mg.height).collect();
    heights.sort_by(f64::total_cmp);
    let gap = GAP_FRACTION * (heights[heights.len() - 1] - heights[0]);
    let h0 = quantile_sorted(&heights, CUT_QUANTILE);

    let mut branches = Vec::new();
    for (b, _) in cut_below(dendro, dendro.root(), h0) {
        recut(dendro, b, m, gap, &mut branches);
    }

    let mut surviving: Vec<Vec<usize>> = Vec::new();
    let mut leftovers: Vec<usize> = Vec::new();
    for b in branches {
        let members = dendro.members(b);
        if members.len() >= m {
            surviving.push(members);
        } else {
            leftovers.extend(members);
        }
    }
    if surviving.is_empty() {
        return everything();
    }
    surviving.sort_by_key(|c| c[0]);
    leftovers.sort_unstable();

    let medoids: Vec<usize> = surviving.iter().map(|c| medoid(c, matrix)).collect::<Result<_>>()?;
    for &t in &leftovers {
        let mut best = 0;
        for (k, &md) in medoids.iter().enumerate() {
            if matrix.get(t, md) < matrix.get(t, medoids[best]) {
                best = k;
            }
        }
        surviving[best].push(t);
    }

    let mut order: Vec<usize> = (0..surviving.len()).collect();
    order.sort_by(|&a, &b| surviving[b].len().cmp(&surviving[a].len()).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    let mut clusters = Vec::with_capacity(order.len());
    for (id, &k) in order.iter().enumerate() {
        let mut members = std::mem::take(&mut surviving[k]);
        members.sort_unstable();
        for &t in &members {
            labels[t] = id;
        }
        let medoid = medoid(&members, matrix)?;
        clusters.push(Cluster { id, members, medoid });
    }
    Ok(Clustering {
        min_cluster_size: m,
        labels,
        clusters,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub min_size: usize,
    pub clusters: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterCurve {
    pub samples: Vec<CurvePoint>,
    pub knee: Option<usize>,
    pub default_min_size: usize,
}

/// Cluster count for every minimum size `2..=max(2, n/2)` and an elbow
/// default: the point after the largest change in slope where the slope
/// change is smallest.
pub fn cluster_curve(dendro: &Dendrogram, matrix: &DistanceMatrix) -> Result<ClusterCurve> {
    let n = dendro.n;
    let hi = (n / 2).max(2);
    let samples: Vec<CurvePoint> = (2..=hi)
        .into_par_iter()
        .map(|m| {
            dynamic_hybrid_cut(dendro, matrix, m).map(|c| CurvePoint {
                min_size: m,
                clusters: c.len(),
            })
        })
        .collect::<Result<_>>()?;
    let counts: Vec<usize> = samples.iter().map(|p| p.clusters).collect();
    let (knee, default_min_size) = if n < 6 {
        (None, 2)
    } else {
        match elbow(&counts) {
            Some((k, d)) => (Some(k + 2), d + 2),
            None => (None, 2),
        }
    };
    Ok(ClusterCurve {
        samples,
        knee,
        default_min_size,
    })
}

/// Elbow over counts indexed from 0. Returns `(knee, default)` indices, or
/// `None` when there are too few points for a second difference.
pub fn elbow(counts: &[usize]) -> Option<(usize, usize)> {
    let c: Vec<i64> = counts.iter().map(|&x| x as i64).collect();
    let slope: Vec<i64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    let accel: Vec<i64> = slope.windows(2).map(|w| w[1] - w[0]).collect();
    if accel.is_empty() {
        return None;
    }
    let mut knee = 0;
    for (i, a) in accel.iter().enumerate() {
        if a.abs() > accel[knee].abs() {
            knee = i;
        }
    }
    let mut default = knee + 1;
    for i in knee + 1..accel.len() {
        if accel[i].abs() < accel[default].abs() {
            default = i;
        }
    }
    Some((knee, default))
}
