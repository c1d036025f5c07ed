//! Random trees, forests and datasets for tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::{Dataset, FeatureKind, FeatureMeta, Split};
use crate::forest::Forest;
use crate::rules::Interval;
use crate::tree::{DecisionTree, Shape};

pub fn unit_features(n: usize) -> Vec<FeatureMeta> {
    (0..n)
        .map(|i| FeatureMeta {
            name: format!("x{i}"),
            kind: FeatureKind::Quantitative,
            range: [0.0, 1.0],
            category_names: None,
        })
        .collect()
}

fn pick_threshold<R: Rng + ?Sized>(rng: &mut R, iv: &Interval) -> f64 {
    iv.lo + (iv.hi - iv.lo) * rng.gen_range(0.1..0.9)
}

fn splittable(bounds: &[Interval]) -> Vec<usize> {
    (0..bounds.len()).filter(|&f| bounds[f].len() > 1e-6).collect()
}

fn narrowed(bounds: &[Interval], feature: usize, threshold: f64, left: bool) -> Vec<Interval> {
    let mut b = bounds.to_vec();
    if left {
        b[feature].hi = threshold;
    } else {
        b[feature].lo = threshold;
    }
    b
}

/// A random tree whose every path is satisfiable within `bounds`.
pub fn random_shape<R: Rng + ?Sized>(rng: &mut R, bounds: &[Interval], n_classes: usize, depth: usize) -> Shape {
    let candidates = splittable(bounds);
    if depth == 0 || candidates.is_empty() || rng.gen_bool(0.25) {
        return Shape::Leaf(rng.gen_range(0..n_classes));
    }
    let f = *candidates.choose(rng).expect("nonempty");
    let t = pick_threshold(rng, &bounds[f]);
    Shape::split(
        f,
        t,
        random_shape(rng, &narrowed(bounds, f, t, true), n_classes, depth - 1),
        random_shape(rng, &narrowed(bounds, f, t, false), n_classes, depth - 1),
    )
}

pub fn random_tree<R: Rng + ?Sized>(
    rng: &mut R,
    features: &[FeatureMeta],
    n_classes: usize,
    max_depth: usize,
    tree_index: usize,
) -> DecisionTree {
    let bounds: Vec<Interval> = features.iter().map(|f| Interval::new(f.min(), f.max())).collect();
    DecisionTree::from_shape(&random_shape(rng, &bounds, n_classes, max_depth), n_classes, tree_index)
}

pub fn random_forest<R: Rng + ?Sized>(
    rng: &mut R,
    features: &[FeatureMeta],
    n_classes: usize,
    n_trees: usize,
    max_depth: usize,
) -> Forest {
    let trees = (0..n_trees)
        .map(|i| random_tree(rng, features, n_classes, max_depth, i))
        .collect();
    Forest::new(trees, features.len(), n_classes, None).expect("at least one tree")
}

/// Two trees with the same multiset of rules but different split order.
///
/// Wherever the generator places a swap site, one tree splits on `f1` then
/// on `f2` in both branches, while the other splits on `f2` first.
pub fn split_order_pair<R: Rng + ?Sized>(
    rng: &mut R,
    features: &[FeatureMeta],
    n_classes: usize,
    max_depth: usize,
) -> (DecisionTree, DecisionTree) {
    let bounds: Vec<Interval> = features.iter().map(|f| Interval::new(f.min(), f.max())).collect();
    let mut swaps = 0;
    let (mut a, mut b) = pair(rng, &bounds, n_classes, max_depth, &mut swaps);
    while swaps == 0 {
        (a, b) = pair(rng, &bounds, n_classes, max_depth, &mut swaps);
    }
    (
        DecisionTree::from_shape(&a, n_classes, 0),
        DecisionTree::from_shape(&b, n_classes, 1),
    )
}

fn pair<R: Rng + ?Sized>(
    rng: &mut R,
    bounds: &[Interval],
    n_classes: usize,
    depth: usize,
    swaps: &mut usize,
) -> (Shape, Shape) {
    let candidates = splittable(bounds);
    let roll: f64 = rng.gen();
    if depth == 0 || candidates.is_empty() || roll < 0.15 {
        let c = rng.gen_range(0..n_classes);
        return (Shape::Leaf(c), Shape::Leaf(c));
    }
    if depth >= 2 && candidates.len() >= 2 && roll < 0.65 {
        let mut fs = candidates.clone();
        fs.shuffle(rng);
        let (f1, f2) = (fs[0], fs[1]);
        let t1 = pick_threshold(rng, &bounds[f1]);
        let t2 = pick_threshold(rng, &bounds[f2]);
        let quad = |l1: bool, l2: bool, rng: &mut R, swaps: &mut usize| {
            let b = narrowed(&narrowed(bounds, f1, t1, l1), f2, t2, l2);
            pair(rng, &b, n_classes, depth - 2, swaps)
        };
        let (ll, lr, rl, rr) = (
            quad(true, true, rng, swaps),
            quad(true, false, rng, swaps),
            quad(false, true, rng, swaps),
            quad(false, false, rng, swaps),
        );
        *swaps += 1;
        let a = Shape::split(
            f1,
            t1,
            Shape::split(f2, t2, ll.0, lr.0),
            Shape::split(f2, t2, rl.0, rr.0),
        );
        let b = Shape::split(
            f2,
            t2,
            Shape::split(f1, t1, ll.1, rl.1),
            Shape::split(f1, t1, lr.1, rr.1),
        );
        return (a, b);
    }
    let f = *candidates.choose(rng).expect("nonempty");
    let t = pick_threshold(rng, &bounds[f]);
    let l = pair(rng, &narrowed(bounds, f, t, true), n_classes, depth - 1, swaps);
    let r = pair(rng, &narrowed(bounds, f, t, false), n_classes, depth - 1, swaps);
    (Shape::split(f, t, l.0, r.0), Shape::split(f, t, l.1, r.1))
}

/// Rows uniform in the unit cube, labelled by a random tree with some noise,
/// 30% held out for testing.
pub fn random_dataset<R: Rng + ?Sized>(rng: &mut R, n_rows: usize, n_features: usize, n_classes: usize) -> Dataset {
    let features = unit_features(n_features);
    let truth = random_tree(rng, &features, n_classes, 4, 0);
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        // coarse grid so ties between values occur
        let row: Vec<f64> = (0..n_features).map(|_| f64::from(rng.gen_range(0u8..=20)) / 20.0).collect();
        let label = if rng.gen_bool(0.1) {
            rng.gen_range(0..n_classes)
        } else {
            truth.predict(&row)
        };
        rows.push(row);
        labels.push(label);
    }
    let split = (0..n_rows)
        .map(|_| if rng.gen_bool(0.3) { Split::Test } else { Split::Train })
        .collect();
    let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
    Dataset::new("synthetic", features, classes, rows, labels, split).expect("valid synthetic dataset")
}
