//! Binary decision trees stored as a node arena in depth-first preorder.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    /// Rows with `value <= threshold` go left, the rest go right.
    Internal {
        feature: usize,
        threshold: f64,
        left: NodeId,
        right: NodeId,
    },
    Leaf { class: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub depth: usize,
    /// Training rows routed here, per true class.
    pub train_by_class: Vec<usize>,
    /// Test rows routed here, per true class.
    pub test_by_class: Vec<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn train_count(&self) -> usize {
        self.train_by_class.iter().sum()
    }

    pub fn test_count(&self) -> usize {
        self.test_by_class.iter().sum()
    }

    pub fn total_count(&self) -> usize {
        self.train_count() + self.test_count()
    }

    pub fn children(&self) -> Option<(NodeId, NodeId)> {
        match self.kind {
            NodeKind::Internal { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    /// Sparse `(true, predicted)` test counts; empty for internal nodes.
    pub fn test_confusion(&self) -> Vec<ConfusionCell> {
        match self.kind {
            NodeKind::Leaf { class } => self
                .test_by_class
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(t, &count)| ConfusionCell {
                    true_class: t,
                    predicted: class,
                    count,
                })
                .collect(),
            NodeKind::Internal { .. } => Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCell {
    pub true_class: usize,
    pub predicted: usize,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub root: NodeId,
    pub tree_index: usize,
}

impl DecisionTree {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf reached by `row`.
    pub fn leaf_for(&self, row: &[f64]) -> NodeId {
        let mut id = self.root;
        loop {
            match self.nodes[id.0].kind {
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
                NodeKind::Leaf { .. } => return id,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> usize {
        match self.nodes[self.leaf_for(row).0].kind {
            NodeKind::Leaf { class } => class,
            NodeKind::Internal { .. } => unreachable!("leaf_for returns a leaf"),
        }
    }

    /// Leaves in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match self.nodes[id.0].children() {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(id),
            }
        }
        out
    }

    /// Depth of the deepest leaf (a single leaf has depth 0).
    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Parent of every node; `None` for the root.
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some((l, r)) = n.children() {
                parents[l.0] = Some(NodeId(i));
                parents[r.0] = Some(NodeId(i));
            }
        }
        parents
    }

    /// Root-to-node path, root first, `id` last.
    pub fn path_to(&self, id: NodeId) -> Vec<NodeId> {
        let parents = self.parents();
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = parents[cur.0] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Re-derives depths and routes every dataset row to refresh the
    /// per-node class counts.
    pub fn recompute_counts(&mut self, dataset: &Dataset) {
        let n_classes = dataset.n_classes();
        for node in &mut self.nodes {
            node.train_by_class = vec![0; n_classes];
            node.test_by_class = vec![0; n_classes];
        }
        let mut stack = vec![(self.root, 0usize)];
        while let Some((id, depth)) = stack.pop() {
            self.nodes[id.0].depth = depth;
            if let Some((l, r)) = self.nodes[id.0].children() {
                stack.push((l, depth + 1));
                stack.push((r, depth + 1));
            }
        }
        for i in 0..dataset.n_rows() {
            let row = dataset.row(i);
            let label = dataset.label(i);
            let test = dataset.split_of(i) == Split::Test;
            let mut id = self.root;
            loop {
                let node = &mut self.nodes[id.0];
                if test {
                    node.test_by_class[label] += 1;
                } else {
                    node.train_by_class[label] += 1;
                }
                match node.kind {
                    NodeKind::Internal {
                        feature,
                        threshold,
                        left,
                        right,
                    } => id = if row[feature] <= threshold { left } else { right },
                    NodeKind::Leaf { .. } => break,
                }
            }
        }
    }

    /// Fraction of `split` rows this tree alone classifies correctly.
    pub fn accuracy(&self, split: Split) -> Option<f64> {
        let (mut correct, mut total) = (0usize, 0usize);
        for id in self.leaves() {
            let node = self.node(id);
            let counts = match split {
                Split::Train => &node.train_by_class,
                Split::Test => &node.test_by_class,
            };
            if let NodeKind::Leaf { class } = node.kind {
                correct += counts.get(class).copied().unwrap_or(0);
            }
            total += counts.iter().sum::<usize>();
        }
        (total > 0).then(|| correct as f64 / total as f64)
    }
}

/// Index of the largest count; ties go to the lowest index.
pub fn plurality(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Nested description of a tree, convenient for building trees by hand.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Shape>,
        right: Box<Shape>,
    },
    Leaf(usize),
}

impl Shape {
    pub fn split(feature: usize, threshold: f64, left: Shape, right: Shape) -> Shape {
        Shape::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

impl DecisionTree {
    /// Builds the preorder arena for `shape` with zeroed counts.
    pub fn from_shape(shape: &Shape, n_classes: usize, tree_index: usize) -> DecisionTree {
        fn go(shape: &Shape, depth: usize, nodes: &mut Vec<Node>, n_classes: usize) -> NodeId {
            let id = NodeId(nodes.len());
            nodes.push(Node {
                kind: NodeKind::Leaf { class: 0 },
                depth,
                train_by_class: vec![0; n_classes],
                test_by_class: vec![0; n_classes],
            });
            let kind = match shape {
                Shape::Leaf(c) => NodeKind::Leaf { class: *c },
                Shape::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let left = go(left, depth + 1, nodes, n_classes);
                    let right = go(right, depth + 1, nodes, n_classes);
                    NodeKind::Internal {
                        feature: *feature,
                        threshold: *threshold,
                        left,
                        right,
                    }
                }
            };
            nodes[id.0].kind = kind;
            id
        }
        let mut nodes = Vec::new();
        let root = go(shape, 0, &mut nodes, n_classes);
        DecisionTree {
            nodes,
            root,
            tree_index,
        }
    }

    pub fn to_shape(&self) -> Shape {
        fn go(t: &DecisionTree, id: NodeId) -> Shape {
            match t.node(id).kind {
                NodeKind::Leaf { class } => Shape::Leaf(class),
                NodeKind::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => Shape::split(feature, threshold, go(t, left), go(t, right)),
            }
        }
        go(self, self.root)
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    pub type Spec = Shape;

    pub fn split(f: usize, t: f64, l: Spec, r: Spec) -> Spec {
        Shape::split(f, t, l, r)
    }

    pub fn leaf(c: usize) -> Spec {
        Shape::Leaf(c)
    }

    pub fn build(spec: &Spec, n_classes: usize, tree_index: usize) -> DecisionTree {
        DecisionTree::from_shape(spec, n_classes, tree_index)
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn leaves_are_depth_first_left_to_right() {
        let t = build(&split(0, 5.0, split(1, 2.0, leaf(0), leaf(1)), leaf(2)), 3, 0);
        let leaves = t.leaves();
        let classes: Vec<usize> = leaves
            .iter()
            .map(|&id| match t.node(id).kind {
                NodeKind::Leaf { class } => class,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(classes, vec![0, 1, 2]);
        assert_eq!(t.max_depth(), 2);
        assert_eq!(t.path_to(leaves[1]), vec![NodeId(0), NodeId(1), NodeId(3)]);
    }

    #[test]
    fn routing_uses_less_equal_for_left() {
        let t = build(&split(0, 5.0, leaf(0), leaf(1)), 2, 0);
        assert_eq!(t.predict(&[5.0]), 0);
        assert_eq!(t.predict(&[5.0001]), 1);
        assert_eq!(t.predict(&[-100.0]), 0);
    }

    #[test]
    fn plurality_ties_to_lowest() {
        assert_eq!(plurality(&[1, 3, 3]), 1);
        assert_eq!(plurality(&[0, 0]), 0);
    }
}
