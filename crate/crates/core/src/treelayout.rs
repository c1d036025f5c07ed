//! Node-link geometry for single decision trees.
//!
//! The layout is a layered tidy drawing for boxes of varying width: subtrees
//! are laid out bottom-up, each keeps its left and right contour per level,
//! and siblings are pushed apart just far enough that the contours keep the
//! configured gap. Parents sit centered over their outermost children.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMeta};
use crate::error::{Error, Result};
use crate::rules::{prefix_intervals, Interval};
use crate::stats::FeatureSummary;
use crate::tree::{plurality, DecisionTree, NodeId, NodeKind};

pub const TREE_LAYOUT_SCHEMA: &str = "forestview.tree-layout/v1";
/// Thickness given to edges that carry no samples.
pub const MIN_THICKNESS: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub sibling_gap: f64,
    pub level_gap: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            sibling_gap: 12.0,
            level_gap: 40.0,
        }
    }
}

/// A placed box: `x` is the horizontal center, `y` the top edge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl NodeBox {
    pub fn left(&self) -> f64 {
        self.x - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.x + self.w / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }
}

struct Subtree {
    /// Per relative level: (leftmost edge, rightmost edge) relative to the
    /// subtree root's center.
    contour: Vec<(f64, f64)>,
}

/// Lays out an ordered tree given as child lists. `sizes[i]` is `(w, h)`.
/// Nodes at equal depth share a row; row height is the tallest box in it.
pub fn tidy_layout(
    children: &[Vec<usize>],
    root: usize,
    sizes: &[(f64, f64)],
    cfg: &LayoutConfig,
) -> Result<Vec<NodeBox>> {
    let n = children.len();
    if sizes.len() != n {
        return Err(Error::InvalidArgument(format!("{} sizes for {n} nodes", sizes.len())));
    }
    if let Some(i) = sizes.iter().position(|&(w, h)| !(w > 0.0 && h > 0.0)) {
        return Err(Error::InvalidArgument(format!("node {i} has non-positive size")));
    }
    if root >= n {
        return Err(Error::InvalidArgument(format!("root {root} out of range")));
    }

    // iterative post-order
    let mut order = Vec::with_capacity(n);
    let mut depth = vec![0usize; n];
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        order.push(v);
        for &c in &children[v] {
            depth[c] = depth[v] + 1;
            stack.push(c);
        }
    }
    order.reverse();

    // offset of each child's center relative to its parent's center
    let mut rel = vec![0.0; n];
    let mut subtrees: Vec<Option<Subtree>> = (0..n).map(|_| None).collect();
    for &v in &order {
        let (w, _) = sizes[v];
        let kids = &children[v];
        if kids.is_empty() {
            subtrees[v] = Some(Subtree {
                contour: vec![(-w / 2.0, w / 2.0)],
            });
            continue;
        }
        // place children left to right, positions relative to the first child
        let mut merged: Vec<(f64, f64)> = Vec::new();
        let mut pos = Vec::with_capacity(kids.len());
        for &c in kids {
            let sub = subtrees[c].take().expect("child laid out first");
            let mut shift: f64 = 0.0;
            if !merged.is_empty() {
                shift = f64::NEG_INFINITY;
                for (lvl, &(l, _)) in sub.contour.iter().enumerate() {
                    if let Some(&(_, r)) = merged.get(lvl) {
                        shift = shift.max(r + cfg.sibling_gap - l);
                    }
                }
            }
            for (lvl, &(l, r)) in sub.contour.iter().enumerate() {
                match merged.get_mut(lvl) {
                    Some(m) => {
                        m.0 = m.0.min(l + shift);
                        m.1 = m.1.max(r + shift);
                    }
                    None => merged.push((l + shift, r + shift)),
                }
            }
            pos.push(shift);
        }
        let center = (pos[0] + pos[pos.len() - 1]) / 2.0;
        for (&c, &p) in kids.iter().zip(&pos) {
            rel[c] = p - center;
        }
        let mut contour = vec![(-w / 2.0, w / 2.0)];
        contour.extend(merged.into_iter().map(|(l, r)| (l - center, r - center)));
        subtrees[v] = Some(Subtree { contour });
    }

    let levels = depth.iter().max().copied().unwrap_or(0) + 1;
    let mut row_height = vec![0.0f64; levels];
    for v in 0..n {
        row_height[depth[v]] = row_height[depth[v]].max(sizes[v].1);
    }
    let mut row_y = vec![0.0; levels];
    for l in 1..levels {
        row_y[l] = row_y[l - 1] + row_height[l - 1] + cfg.level_gap;
    }

    let mut x = vec![0.0; n];
    for &v in order.iter().rev() {
        for &c in &children[v] {
            x[c] = x[v] + rel[c];
        }
    }
    let min_left = (0..n).map(|v| x[v] - sizes[v].0 / 2.0).fold(f64::INFINITY, f64::min);
    Ok((0..n)
        .map(|v| NodeBox {
            x: x[v] - min_left,
            y: row_y[depth[v]],
            w: sizes[v].0,
            h: sizes[v].1,
        })
        .collect())
}

/// Box sizes for a decision tree: one size for split nodes, one for leaves.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSizes {
    pub internal: (f64, f64),
    pub leaf: (f64, f64),
}

impl Default for NodeSizes {
    fn default() -> Self {
        Self {
            internal: (120.0, 60.0),
            leaf: (64.0, 28.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGeometry {
    pub id: NodeId,
    #[serde(flatten)]
    pub bounds: NodeBox,
    pub depth: usize,
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub class: Option<usize>,
    /// Where the threshold falls inside the box, whose width spans the
    /// feature's global range.
    pub split_anchor: Option<f64>,
    /// Range of the split feature still reachable at this node.
    pub active: Option<Interval>,
    pub train_by_class: Vec<usize>,
    pub test_by_class: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeGeometry {
    pub parent: NodeId,
    pub child: NodeId,
    /// Start, two control points, end.
    pub points: [[f64; 2]; 4],
    pub samples: usize,
    pub thickness: f64,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeLayout {
    pub schema: String,
    pub tree: usize,
    pub width: f64,
    pub height: f64,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub nodes: Vec<NodeGeometry>,
    pub edges: Vec<EdgeGeometry>,
}

fn anchor(b: &NodeBox, threshold: f64, meta: &FeatureMeta) -> f64 {
    let t = if meta.width() > 0.0 {
        ((threshold - meta.min()) / meta.width()).clamp(0.0, 1.0)
    } else {
        0.5
    };
    b.left() + t * b.w
}

pub fn layout_tree(
    tree: &DecisionTree,
    features: &[FeatureMeta],
    sizes: &NodeSizes,
    cfg: &LayoutConfig,
) -> Result<TreeLayout> {
    let children: Vec<Vec<usize>> = tree
        .nodes
        .iter()
        .map(|n| n.children().map_or_else(Vec::new, |(l, r)| vec![l.0, r.0]))
        .collect();
    let box_sizes: Vec<(f64, f64)> = tree
        .nodes
        .iter()
        .map(|n| if n.is_leaf() { sizes.leaf } else { sizes.internal })
        .collect();
    let boxes = tidy_layout(&children, tree.root.0, &box_sizes, cfg)?;

    let nodes: Vec<NodeGeometry> = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let (feature, threshold, class) = match n.kind {
                NodeKind::Internal { feature, threshold, .. } => (Some(feature), Some(threshold), None),
                NodeKind::Leaf { class } => (None, None, Some(class)),
            };
            let active = feature.map(|f| prefix_intervals(tree, NodeId(i), features)[f]);
            NodeGeometry {
                id: NodeId(i),
                bounds: boxes[i],
                depth: n.depth,
                feature,
                threshold,
                class,
                split_anchor: feature.zip(threshold).map(|(f, t)| anchor(&boxes[i], t, &features[f])),
                active,
                train_by_class: n.train_by_class.clone(),
                test_by_class: n.test_by_class.clone(),
            }
        })
        .collect();

    let edges = edge_geometry(tree, &nodes);
    let width = boxes.iter().map(NodeBox::right).fold(0.0, f64::max);
    let height = boxes.iter().map(NodeBox::bottom).fold(0.0, f64::max);
    Ok(TreeLayout {
        schema: TREE_LAYOUT_SCHEMA.to_string(),
        tree: tree.tree_index,
        width,
        height,
        train_accuracy: tree.accuracy(crate::dataset::Split::Train),
        test_accuracy: tree.accuracy(crate::dataset::Split::Test),
        nodes,
        edges,
    })
}

/// Bezier edges from a parent's split anchor to each child's top center,
/// scaled by routed samples relative to the busiest edge at that depth.
pub fn edge_geometry(tree: &DecisionTree, nodes: &[NodeGeometry]) -> Vec<EdgeGeometry> {
    let max_depth = tree.max_depth();
    let mut depth_max = vec![0usize; max_depth + 1];
    for n in &tree.nodes {
        depth_max[n.depth] = depth_max[n.depth].max(n.total_count());
    }
    let mut edges = Vec::new();
    for (i, n) in tree.nodes.iter().enumerate() {
        let Some((l, r)) = n.children() else { continue };
        let p = &nodes[i];
        let start = [p.split_anchor.unwrap_or(p.bounds.x), p.bounds.bottom()];
        for c in [l, r] {
            let child = tree.node(c);
            let cb = &nodes[c.0].bounds;
            let end = [cb.x, cb.y];
            let mid = (end[1] - start[1]) / 2.0;
            let samples = child.total_count();
            let peak = depth_max[child.depth];
            let thickness = if peak == 0 {
                MIN_THICKNESS
            } else {
                (samples as f64 / peak as f64).max(MIN_THICKNESS)
            };
            edges.push(EdgeGeometry {
                parent: NodeId(i),
                child: c,
                points: [start, [start[0], start[1] + mid], [end[0], end[1] - mid], end],
                samples,
                thickness,
                class: plurality(&child.train_by_class),
            });
        }
    }
    edges
}

/// Where a split node sits within its feature's global range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRange {
    pub node: NodeId,
    pub feature: usize,
    pub threshold: f64,
    pub active: Interval,
    /// Parts of the global range excluded by ancestor splits.
    pub gray: Vec<Interval>,
}

/// `None` for leaves.
pub fn split_range(tree: &DecisionTree, node: NodeId, features: &[FeatureMeta]) -> Option<SplitRange> {
    let NodeKind::Internal { feature, threshold, .. } = tree.node(node).kind else {
        return None;
    };
    let meta = &features[feature];
    let active = prefix_intervals(tree, node, features)[feature];
    let mut gray = Vec::new();
    if active.lo > meta.min() {
        gray.push(Interval::new(meta.min(), active.lo));
    }
    if active.hi < meta.max() {
        gray.push(Interval::new(active.hi, meta.max()));
    }
    Some(SplitRange {
        node,
        feature,
        threshold,
        active,
        gray,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeContent {
    pub node: NodeId,
    pub feature: usize,
    pub threshold: f64,
    pub distribution: FeatureSummary,
    pub active: Interval,
    pub gray: Vec<Interval>,
}

/// Thumbnail data for a split node. `None` for leaves.
pub fn node_content(
    tree: &DecisionTree,
    node: NodeId,
    dataset: &Dataset,
    summaries: &[FeatureSummary],
) -> Option<NodeContent> {
    let r = split_range(tree, node, &dataset.features)?;
    Some(NodeContent {
        node,
        feature: r.feature,
        threshold: r.threshold,
        distribution: summaries[r.feature].clone(),
        active: r.active,
        gray: r.gray,
    })
}
