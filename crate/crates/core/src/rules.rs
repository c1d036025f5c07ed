//! Decision rules: one closed interval per feature plus a predicted class.

use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMeta;
use crate::tree::{DecisionTree, NodeId, NodeKind};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Length of the overlap, zero when disjoint.
    pub fn overlap(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    /// Closed-interval intersection test (touching endpoints intersect).
    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo.max(other.lo) <= self.hi.min(other.hi)
    }
}

/// Identifies a rule by tree and leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuleRef {
    pub tree: usize,
    pub leaf: NodeId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub tree_index: usize,
    pub leaf: NodeId,
    pub predicted_class: usize,
    pub intervals: Vec<Interval>,
}

impl Rule {
    pub fn rule_ref(&self) -> RuleRef {
        RuleRef {
            tree: self.tree_index,
            leaf: self.leaf,
        }
    }
}

pub fn full_ranges(features: &[FeatureMeta]) -> Vec<Interval> {
    features.iter().map(|f| Interval::new(f.min(), f.max())).collect()
}

/// Tightens `bounds` with one split decision and clips to the global range.
/// An impossible path (possible only in hand-written trees) collapses to a
/// point rather than producing `lo > hi`.
pub fn constrain(bounds: &mut [Interval], feature: usize, threshold: f64, went_left: bool, global: &FeatureMeta) {
    let iv = &mut bounds[feature];
    if went_left {
        iv.hi = iv.hi.min(threshold);
    } else {
        iv.lo = iv.lo.max(threshold);
    }
    iv.lo = iv.lo.clamp(global.min(), global.max());
    iv.hi = iv.hi.clamp(global.min(), global.max());
    if iv.lo > iv.hi {
        iv.hi = iv.lo;
    }
}

/// The constraints accumulated on the way from the root down to `node`,
/// excluding the node's own split.
pub fn prefix_intervals(tree: &DecisionTree, node: NodeId, features: &[FeatureMeta]) -> Vec<Interval> {
    let path = tree.path_to(node);
    let mut bounds = full_ranges(features);
    for w in path.windows(2) {
        if let NodeKind::Internal {
            feature,
            threshold,
            left,
            ..
        } = tree.node(w[0]).kind
        {
            constrain(&mut bounds, feature, threshold, w[1] == left, &features[feature]);
        }
    }
    bounds
}

/// One rule per leaf, depth-first left to right.
pub fn extract_rules(tree: &DecisionTree, features: &[FeatureMeta]) -> Vec<Rule> {
    let mut rules = Vec::new();
    let mut stack = vec![(tree.root, full_ranges(features))];
    while let Some((id, bounds)) = stack.pop() {
        match tree.node(id).kind {
            NodeKind::Leaf { class } => rules.push(Rule {
                tree_index: tree.tree_index,
                leaf: id,
                predicted_class: class,
                intervals: bounds,
            }),
            NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let mut rb = bounds.clone();
                constrain(&mut rb, feature, threshold, false, &features[feature]);
                let mut lb = bounds;
                constrain(&mut lb, feature, threshold, true, &features[feature]);
                stack.push((right, rb));
                stack.push((left, lb));
            }
        }
    }
    rules
}
