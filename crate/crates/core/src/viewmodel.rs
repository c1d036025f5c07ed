//! Feature Plot and Rule Plot payloads, rule mapping and filtering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::clustering::Cluster;
use crate::dataset::{Dataset, FeatureMeta};
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::metric::{rule_distance_unchecked, DistanceMatrix};
use crate::projection::mds;
use crate::rules::{constrain, full_ranges, Interval, Rule, RuleRef};
use crate::tree::{DecisionTree, NodeId, NodeKind};

pub const FEATURE_PLOT_SCHEMA: &str = "forestview.feature-plot/v1";
pub const RULE_PLOT_SCHEMA: &str = "forestview.rule-plot/v1";
pub const MAX_WIDTH_SCALE: f64 = 10.0;

/// Request-scoped selection: value ranges per feature and confusion cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    /// Feature index to `[lo, hi]` in raw units.
    #[serde(default)]
    pub ranges: BTreeMap<usize, [f64; 2]>,
    /// Selected `(true, predicted)` cells.
    #[serde(default)]
    pub cells: BTreeSet<(usize, usize)>,
}

impl FilterState {
    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty() && self.cells.is_empty()
    }

    pub fn validate(&self, n_features: usize, n_classes: usize) -> Result<()> {
        for (&f, &[lo, hi]) in &self.ranges {
            if f >= n_features {
                return Err(Error::InvalidFilter(format!("feature index {f} out of range")));
            }
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidFilter(format!("range [{lo}, {hi}] on feature {f} is empty")));
            }
        }
        for &(t, p) in &self.cells {
            if t >= n_classes || p >= n_classes {
                return Err(Error::InvalidFilter(format!("cell ({t}, {p}) out of range")));
            }
        }
        Ok(())
    }

    /// Parses clauses of the form `FEATURE:lo..hi` and `cell:TRUE->PRED`.
    ///
    /// Each item may hold several clauses separated by `;`. Features and
    /// classes are given by name or index. Either range bound may be left
    /// empty to mean the feature's global bound, and `*` in a cell selects a
    /// whole row or column of the confusion matrix.
    pub fn parse<'a>(items: impl IntoIterator<Item = &'a str>, dataset: &Dataset) -> Result<Self> {
        let mut filter = FilterState::default();
        for clause in items.into_iter().flat_map(|s| s.split(';')) {
            let clause = clause.trim();
            if clause.is_empty() {
                continue;
            }
            if let Some(cell) = clause.strip_prefix("cell:") {
                let (t, p) = cell
                    .split_once("->")
                    .ok_or_else(|| Error::InvalidFilter(format!("expected TRUE->PRED in `{clause}`")))?;
                let truths = class_set(t.trim(), dataset)?;
                let preds = class_set(p.trim(), dataset)?;
                for &a in &truths {
                    for &b in &preds {
                        filter.cells.insert((a, b));
                    }
                }
                continue;
            }
            let (name, range) = clause
                .rsplit_once(':')
                .ok_or_else(|| Error::InvalidFilter(format!("expected FEATURE:lo..hi in `{clause}`")))?;
            let f = lookup(name.trim(), dataset.n_features(), |s| dataset.feature_index(s))
                .ok_or_else(|| Error::InvalidFilter(format!("unknown feature `{}`", name.trim())))?;
            let (lo, hi) = range
                .split_once("..")
                .ok_or_else(|| Error::InvalidFilter(format!("expected lo..hi in `{clause}`")))?;
            let meta = &dataset.features[f];
            let bound = |s: &str, default: f64| -> Result<f64> {
                let s = s.trim();
                if s.is_empty() {
                    return Ok(default);
                }
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidFilter(format!("bad number `{s}` in `{clause}`")))
            };
            filter.ranges.insert(f, [bound(lo, meta.min())?, bound(hi, meta.max())?]);
        }
        filter.validate(dataset.n_features(), dataset.n_classes())?;
        Ok(filter)
    }

    /// Clause (a): the box intersects every selected range.
    pub fn admits_box(&self, intervals: &[Interval]) -> bool {
        self.ranges
            .iter()
            .all(|(&f, &[lo, hi])| intervals[f].intersects(&Interval::new(lo, hi)))
    }

    /// Clause (b): the leaf holds a test row in some selected cell.
    pub fn admits_leaf(&self, tree: &DecisionTree, leaf: NodeId) -> bool {
        if self.cells.is_empty() {
            return true;
        }
        let node = tree.node(leaf);
        match node.kind {
            NodeKind::Leaf { class } => node
                .test_by_class
                .iter()
                .enumerate()
                .any(|(t, &c)| c > 0 && self.cells.contains(&(t, class))),
            NodeKind::Internal { .. } => false,
        }
    }
}

fn lookup(s: &str, n: usize, by_name: impl Fn(&str) -> Option<usize>) -> Option<usize> {
    by_name(s).or_else(|| s.parse::<usize>().ok().filter(|&i| i < n))
}

fn class_set(s: &str, dataset: &Dataset) -> Result<Vec<usize>> {
    if s == "*" {
        return Ok((0..dataset.n_classes()).collect());
    }
    lookup(s, dataset.n_classes(), |c| dataset.class_index(c))
        .map(|c| vec![c])
        .ok_or_else(|| Error::InvalidFilter(format!("unknown class `{s}`")))
}

/// Visibility of each rule under `filter`.
pub fn filter_rules(rules: &[Rule], forest: &Forest, filter: &FilterState) -> Vec<bool> {
    rules
        .iter()
        .map(|r| filter.admits_box(&r.intervals) && filter.admits_leaf(&forest.trees[r.tree_index], r.leaf))
        .collect()
}

/// Whether each node's root prefix passes the range clause and some leaf
/// below it passes the cell clause. Indexed by node id.
pub fn active_nodes(tree: &DecisionTree, features: &[FeatureMeta], filter: &FilterState) -> Vec<bool> {
    let n = tree.len();
    // nodes are in preorder, so children come after parents
    let mut leaf_ok = vec![false; n];
    for i in (0..n).rev() {
        leaf_ok[i] = match tree.nodes[i].children() {
            None => filter.admits_leaf(tree, NodeId(i)),
            Some((l, r)) => leaf_ok[l.0] || leaf_ok[r.0],
        };
    }
    let mut active = vec![false; n];
    let mut stack = vec![(tree.root, full_ranges(features))];
    while let Some((id, bounds)) = stack.pop() {
        if !filter.admits_box(&bounds) {
            continue; // every descendant is inactive as well
        }
        active[id.0] = leaf_ok[id.0];
        if let NodeKind::Internal {
            feature,
            threshold,
            left,
            right,
        } = tree.node(id).kind
        {
            let mut lb = bounds.clone();
            constrain(&mut lb, feature, threshold, true, &features[feature]);
            let mut rb = bounds;
            constrain(&mut rb, feature, threshold, false, &features[feature]);
            stack.push((right, rb));
            stack.push((left, lb));
        }
    }
    active
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureShare {
    pub feature: usize,
    pub count: usize,
    pub proportion: f64,
    pub active_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePlotData {
    pub schema: String,
    pub cluster: usize,
    pub max_depth: usize,
    /// One row per level that holds internal nodes, root level first.
    pub rows: Vec<Vec<FeatureShare>>,
}

/// Split-feature frequencies per level over the cluster's trees.
pub fn feature_plot(cluster: &Cluster, forest: &Forest, features: &[FeatureMeta], filter: &FilterState) -> FeaturePlotData {
    // (level, feature) -> (total, active)
    let mut counts: BTreeMap<(usize, usize), (usize, usize)> = BTreeMap::new();
    let mut max_depth = 0;
    for &t in &cluster.members {
        let tree = &forest.trees[t];
        max_depth = max_depth.max(tree.max_depth());
        let active = active_nodes(tree, features, filter);
        for (i, node) in tree.nodes.iter().enumerate() {
            if let NodeKind::Internal { feature, .. } = node.kind {
                let e = counts.entry((node.depth, feature)).or_default();
                e.0 += 1;
                e.1 += active[i] as usize;
            }
        }
    }
    let levels = counts.keys().map(|&(l, _)| l + 1).max().unwrap_or(0);
    let mut rows: Vec<Vec<FeatureShare>> = vec![Vec::new(); levels];
    for (&(level, feature), &(count, active)) in &counts {
        rows[level].push(FeatureShare {
            feature,
            count,
            proportion: 0.0,
            active_fraction: active as f64 / count as f64,
        });
    }
    for row in &mut rows {
        let total: usize = row.iter().map(|s| s.count).sum();
        for s in row.iter_mut() {
            s.proportion = s.count as f64 / total as f64;
        }
    }
    FeaturePlotData {
        schema: FEATURE_PLOT_SCHEMA.to_string(),
        cluster: cluster.id,
        max_depth,
        rows,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappedColumn {
    pub rule: RuleRef,
    pub predicted_class: usize,
    /// Cluster rules whose nearest representative rule is `rule`.
    pub members: Vec<RuleRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleMapping {
    pub cluster: usize,
    pub representative: usize,
    /// In the representative's leaf order.
    pub columns: Vec<MappedColumn>,
    /// Rules whose class the representative never predicts.
    pub unmapped: Vec<RuleRef>,
}

/// Assigns every rule of every cluster tree to its nearest same-class rule of
/// the medoid tree; ties go to the lower leaf id.
pub fn map_rules(cluster: &Cluster, rules: &[Vec<Rule>]) -> RuleMapping {
    let rep = &rules[cluster.medoid];
    let mut columns: Vec<MappedColumn> = rep
        .iter()
        .map(|r| MappedColumn {
            rule: r.rule_ref(),
            predicted_class: r.predicted_class,
            members: Vec::new(),
        })
        .collect();
    let mut unmapped = Vec::new();
    for &t in &cluster.members {
        for r in &rules[t] {
            if t == cluster.medoid {
                let own = rep.iter().position(|s| s.leaf == r.leaf).expect("own rule");
                columns[own].members.push(r.rule_ref());
                continue;
            }
            let mut best: Option<(f64, NodeId, usize)> = None;
            for (c, s) in rep.iter().enumerate() {
                if s.predicted_class != r.predicted_class {
                    continue;
                }
                let d = rule_distance_unchecked(&r.intervals, &s.intervals);
                let better = match best {
                    None => true,
                    Some((bd, bl, _)) => d < bd || (d == bd && s.leaf < bl),
                };
                if better {
                    best = Some((d, s.leaf, c));
                }
            }
            match best {
                Some((_, _, c)) => columns[c].members.push(r.rule_ref()),
                None => unmapped.push(r.rule_ref()),
            }
        }
    }
    RuleMapping {
        cluster: cluster.id,
        representative: cluster.medoid,
        columns,
        unmapped,
    }
}

/// Piecewise-constant function on `[0, 1]`: `values[i]` holds on the open
/// segment `(breakpoints[i], breakpoints[i + 1])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub feature: usize,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl Coverage {
    /// Value on the segment containing `x`; at a breakpoint, the segment to
    /// its right (the last segment at 1).
    pub fn value_at(&self, x: f64) -> f64 {
        let k = self.values.len();
        let i = self.breakpoints[1..k].partition_point(|&b| b <= x);
        self.values[i.min(k - 1)]
    }
}

/// Fraction of `intervals` (already normalized to `[0, 1]`) covering each
/// part of the unit range, over a fixed `denominator`.
pub fn coverage(feature: usize, intervals: &[(f64, f64)], denominator: usize) -> Coverage {
    let mut points: Vec<f64> = vec![0.0, 1.0];
    for &(lo, hi) in intervals {
        points.push(lo.clamp(0.0, 1.0));
        points.push(hi.clamp(0.0, 1.0));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut breakpoints = vec![points[0]];
    let mut values: Vec<f64> = Vec::new();
    for w in points.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let n = intervals.iter().filter(|&&(lo, hi)| lo <= mid && mid <= hi).count();
        let v = if denominator == 0 { 0.0 } else { n as f64 / denominator as f64 };
        if values.last() == Some(&v) {
            *breakpoints.last_mut().unwrap() = w[1];
        } else {
            values.push(v);
            breakpoints.push(w[1]);
        }
    }
    Coverage {
        feature,
        breakpoints,
        values,
    }
}

fn normalize(iv: &Interval, meta: &FeatureMeta) -> (f64, f64) {
    let w = meta.width();
    if w <= 0.0 {
        return (0.0, 1.0);
    }
    (((iv.lo - meta.min()) / w).clamp(0.0, 1.0), ((iv.hi - meta.min()) / w).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleColumn {
    pub rule: RuleRef,
    pub predicted_class: usize,
    pub mapped_rules: usize,
    pub visible_rules: usize,
    pub visible: bool,
    /// Test rows classified by the mapped rules, ignoring the filter.
    pub test_count: usize,
    pub width_scale: f64,
    pub coverage: Vec<Coverage>,
    /// Test rows per true class routed through the visible mapped rules.
    pub confusion: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnmappedSummary {
    pub rules: usize,
    pub test_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RulePlotData {
    pub schema: String,
    pub cluster: usize,
    pub representative: usize,
    /// Display order; equal classes are contiguous.
    pub columns: Vec<RuleColumn>,
    /// Column positions where a new class group starts (excluding 0).
    pub class_boundaries: Vec<usize>,
    pub unmapped: UnmappedSummary,
}

fn find_rule<'a>(rules: &'a [Vec<Rule>], r: &RuleRef) -> &'a Rule {
    rules[r.tree]
        .iter()
        .find(|x| x.leaf == r.leaf)
        .expect("rule reference resolves")
}

/// Order of representative rules for display: a 1-D embedding of their
/// pairwise distances (different classes at distance 1), then grouped by
/// class in order of first appearance.
pub fn column_order(rep_rules: &[&Rule]) -> Result<Vec<usize>> {
    let n = rep_rules.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = DistanceMatrix::from_fn(n, |i, j| {
        if rep_rules[i].predicted_class == rep_rules[j].predicted_class {
            rule_distance_unchecked(&rep_rules[i].intervals, &rep_rules[j].intervals)
        } else {
            1.0
        }
    });
    let x = mds(&m, 1)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x.coords[a][0].total_cmp(&x.coords[b][0]).then(a.cmp(&b)));
    let mut classes: Vec<usize> = Vec::new();
    for &i in &order {
        if !classes.contains(&rep_rules[i].predicted_class) {
            classes.push(rep_rules[i].predicted_class);
        }
    }
    Ok(classes
        .iter()
        .flat_map(|&c| order.iter().copied().filter(move |&i| rep_rules[i].predicted_class == c))
        .collect())
}

pub fn rule_plot(
    mapping: &RuleMapping,
    rules: &[Vec<Rule>],
    forest: &Forest,
    dataset: &Dataset,
    filter: &FilterState,
) -> Result<RulePlotData> {
    let features = &dataset.features;
    let n_classes = dataset.n_classes();
    let leaf_test = |r: &RuleRef| forest.trees[r.tree].node(r.leaf).test_count();

    let mut columns: Vec<RuleColumn> = Vec::with_capacity(mapping.columns.len());
    for col in &mapping.columns {
        let members: Vec<&Rule> = col.members.iter().map(|r| find_rule(rules, r)).collect();
        let visible: Vec<&Rule> = members
            .iter()
            .copied()
            .filter(|r| filter.admits_box(&r.intervals) && filter.admits_leaf(&forest.trees[r.tree_index], r.leaf))
            .collect();
        let coverage = features
            .iter()
            .enumerate()
            .map(|(f, meta)| {
                let ivs: Vec<(f64, f64)> = visible.iter().map(|r| normalize(&r.intervals[f], meta)).collect();
                coverage(f, &ivs, members.len())
            })
            .collect();
        let mut confusion = vec![0; n_classes];
        for r in &visible {
            for (t, &c) in forest.trees[r.tree_index].node(r.leaf).test_by_class.iter().enumerate() {
                confusion[t] += c;
            }
        }
        columns.push(RuleColumn {
            rule: col.rule,
            predicted_class: col.predicted_class,
            mapped_rules: members.len(),
            visible_rules: visible.len(),
            visible: !visible.is_empty(),
            test_count: col.members.iter().map(leaf_test).sum(),
            width_scale: 1.0,
            coverage,
            confusion,
        });
    }

    let nonzero: Vec<usize> = columns.iter().map(|c| c.test_count).filter(|&c| c > 0).collect();
    if !nonzero.is_empty() {
        let mean = nonzero.iter().sum::<usize>() as f64 / nonzero.len() as f64;
        for c in &mut columns {
            c.width_scale = (c.test_count as f64 / mean).clamp(1.0, MAX_WIDTH_SCALE);
        }
    }

    let rep_rules: Vec<&Rule> = mapping.columns.iter().map(|c| find_rule(rules, &c.rule)).collect();
    let order = column_order(&rep_rules)?;
    let mut slots: Vec<Option<RuleColumn>> = columns.into_iter().map(Some).collect();
    let columns: Vec<RuleColumn> = order.iter().map(|&i| slots[i].take().expect("permutation")).collect();
    let class_boundaries = (1..columns.len())
        .filter(|&i| columns[i].predicted_class != columns[i - 1].predicted_class)
        .collect();

    Ok(RulePlotData {
        schema: RULE_PLOT_SCHEMA.to_string(),
        cluster: mapping.cluster,
        representative: mapping.representative,
        columns,
        class_boundaries,
        unmapped: UnmappedSummary {
            rules: mapping.unmapped.len(),
            test_count: mapping.unmapped.iter().map(leaf_test).sum(),
        },
    })
}
