//! Forest interchange document (JSON).
//!
//! ```text
//! { "format": "forestview-forest/1",
//!   "dataset_schema": { "name", "features": [...], "classes": [...] },
//!   "params": {...}?,
//!   "data": { "rows", "labels", "split" }?,
//!   "trees": [ { "root": id, "nodes": [ {id, kind, feature?, threshold?, class?, left?, right?} ] } ] }
//! ```
//!
//! Per-node counts are never read from the document. They are recomputed by
//! routing the embedded rows; without `data` the counts are all zero.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureMeta, Split};
use crate::error::{Error, Result};
use crate::forest::{Forest, TrainParams};
use crate::tree::{DecisionTree, Node, NodeId, NodeKind};

pub const FORMAT: &str = "forestview-forest/1";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub name: String,
    pub features: Vec<FeatureMeta>,
    pub classes: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddedData {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub split: Vec<Split>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeDocKind {
    Internal,
    Leaf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: u64,
    pub kind: NodeDocKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TreeDoc {
    pub root: u64,
    pub nodes: Vec<NodeDoc>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestDoc {
    pub format: String,
    pub dataset_schema: DatasetSchema,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<TrainParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<EmbeddedData>,
    pub trees: Vec<TreeDoc>,
}

#[derive(Clone, Debug)]
pub struct Imported {
    pub dataset: Dataset,
    pub forest: Forest,
    pub warnings: Vec<String>,
}

/// Serializes a forest; `with_data` embeds every dataset row so counts can be
/// rebuilt on import.
pub fn export_forest(forest: &Forest, dataset: &Dataset, with_data: bool) -> Result<Vec<u8>> {
    let doc = ForestDoc {
        format: FORMAT.to_string(),
        dataset_schema: DatasetSchema {
            name: dataset.name.clone(),
            features: dataset.features.clone(),
            classes: dataset.classes.clone(),
        },
        params: forest.params.clone(),
        data: with_data.then(|| EmbeddedData {
            rows: dataset.rows().to_vec(),
            labels: dataset.labels().to_vec(),
            split: dataset.splits().to_vec(),
        }),
        trees: forest.trees.iter().map(tree_doc).collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn tree_doc(tree: &DecisionTree) -> TreeDoc {
    let nodes = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| match n.kind {
            NodeKind::Internal {
                feature,
                threshold,
                left,
                right,
            } => NodeDoc {
                id: i as u64,
                kind: NodeDocKind::Internal,
                feature: Some(feature),
                threshold: Some(threshold),
                class: None,
                left: Some(left.0 as u64),
                right: Some(right.0 as u64),
            },
            NodeKind::Leaf { class } => NodeDoc {
                id: i as u64,
                kind: NodeDocKind::Leaf,
                feature: None,
                threshold: None,
                class: Some(class),
                left: None,
                right: None,
            },
        })
        .collect();
    TreeDoc {
        root: tree.root.0 as u64,
        nodes,
    }
}

pub fn import_forest(bytes: &[u8]) -> Result<Imported> {
    let doc: ForestDoc = serde_json::from_slice(bytes)?;
    if doc.format != FORMAT {
        return Err(Error::Schema(format!("unsupported format `{}`", doc.format)));
    }
    if doc.trees.is_empty() {
        return Err(Error::Schema("n_trees must be at least 1, document has no trees".into()));
    }
    let schema = doc.dataset_schema;
    if schema.classes.is_empty() {
        return Err(Error::Schema("no classes".into()));
    }
    let dataset = match doc.data {
        Some(d) => Dataset::new(schema.name, schema.features, schema.classes, d.rows, d.labels, d.split)?,
        None => Dataset::new(schema.name, schema.features, schema.classes, Vec::new(), Vec::new(), Vec::new())?,
    };
    let mut warnings = Vec::new();
    let mut trees = Vec::with_capacity(doc.trees.len());
    for (t, td) in doc.trees.iter().enumerate() {
        let mut tree = decode_tree(td, t, &dataset, &mut warnings)?;
        tree.recompute_counts(&dataset);
        trees.push(tree);
    }
    let forest = Forest::new(trees, dataset.n_features(), dataset.n_classes(), doc.params)?;
    Ok(Imported {
        dataset,
        forest,
        warnings,
    })
}

/// Rebuilds the arena in preorder, so documents written by
/// [`export_forest`] decode to identical node ids.
fn decode_tree(doc: &TreeDoc, tree_index: usize, dataset: &Dataset, warnings: &mut Vec<String>) -> Result<DecisionTree> {
    let mut by_id: HashMap<u64, &NodeDoc> = HashMap::with_capacity(doc.nodes.len());
    for n in &doc.nodes {
        if by_id.insert(n.id, n).is_some() {
            return Err(Error::Schema(format!("tree {tree_index}: duplicate node id {}", n.id)));
        }
    }
    let n_classes = dataset.n_classes();
    let mut nodes: Vec<Node> = Vec::with_capacity(doc.nodes.len());
    let mut visited: HashSet<u64> = HashSet::new();

    // Explicit stack of (doc id, depth, parent slot to patch, is_left).
    let mut stack: Vec<(u64, usize, Option<(usize, bool)>)> = vec![(doc.root, 0, None)];
    let mut links: Vec<[Option<NodeId>; 2]> = Vec::with_capacity(doc.nodes.len());
    while let Some((doc_id, depth, parent)) = stack.pop() {
        let nd = by_id
            .get(&doc_id)
            .ok_or_else(|| Error::Schema(format!("tree {tree_index}: missing node {doc_id}")))?;
        if !visited.insert(doc_id) {
            return Err(Error::Schema(format!("tree {tree_index}: node {doc_id} reached twice")));
        }
        let id = nodes.len();
        if let Some((p, is_left)) = parent {
            links[p][usize::from(!is_left)] = Some(NodeId(id));
        }
        let kind = match nd.kind {
            NodeDocKind::Leaf => {
                let class = nd
                    .class
                    .ok_or_else(|| Error::Schema(format!("tree {tree_index}: leaf {doc_id} has no class")))?;
                if class >= n_classes {
                    return Err(Error::Schema(format!(
                        "tree {tree_index}: leaf {doc_id} class {class} out of range"
                    )));
                }
                NodeKind::Leaf { class }
            }
            NodeDocKind::Internal => {
                let feature = nd
                    .feature
                    .ok_or_else(|| Error::Schema(format!("tree {tree_index}: node {doc_id} has no feature")))?;
                let threshold = nd
                    .threshold
                    .ok_or_else(|| Error::Schema(format!("tree {tree_index}: node {doc_id} has no threshold")))?;
                if feature >= dataset.n_features() {
                    return Err(Error::Schema(format!(
                        "tree {tree_index}: node {doc_id} feature {feature} out of range"
                    )));
                }
                if !threshold.is_finite() {
                    return Err(Error::Schema(format!("tree {tree_index}: node {doc_id} threshold not finite")));
                }
                let meta = &dataset.features[feature];
                if threshold < meta.min() || threshold > meta.max() {
                    warnings.push(format!(
                        "tree {tree_index}: node {doc_id} threshold {threshold} outside [{}, {}] of `{}`",
                        meta.min(),
                        meta.max(),
                        meta.name
                    ));
                }
                let left = nd
                    .left
                    .ok_or_else(|| Error::Schema(format!("tree {tree_index}: node {doc_id} has no left child")))?;
                let right = nd
                    .right
                    .ok_or_else(|| Error::Schema(format!("tree {tree_index}: node {doc_id} has no right child")))?;
                stack.push((right, depth + 1, Some((id, false))));
                stack.push((left, depth + 1, Some((id, true))));
                NodeKind::Internal {
                    feature,
                    threshold,
                    left: NodeId(usize::MAX),
                    right: NodeId(usize::MAX),
                }
            }
        };
        links.push([None, None]);
        nodes.push(Node {
            kind,
            depth,
            train_by_class: vec![0; n_classes],
            test_by_class: vec![0; n_classes],
        });
    }
    if visited.len() != doc.nodes.len() {
        return Err(Error::Schema(format!(
            "tree {tree_index}: {} nodes unreachable from root",
            doc.nodes.len() - visited.len()
        )));
    }
    for (node, [l, r]) in nodes.iter_mut().zip(links) {
        if let NodeKind::Internal { left, right, .. } = &mut node.kind {
            *left = l.expect("left child decoded");
            *right = r.expect("right child decoded");
        }
    }
    Ok(DecisionTree {
        nodes,
        root: NodeId(0),
        tree_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ingest_csv, IngestOptions};
    use crate::forest::train_forest;

    fn small() -> (Dataset, Forest) {
        let csv = "a,b,y\n1,5,A\n2,4,B\n3,3,A\n4,2,B\n5,1,A\n6,0,B\n7,3,A\n8,9,B\n";
        let d = ingest_csv(csv.as_bytes(), &IngestOptions::default()).unwrap();
        let f = train_forest(
            &d,
            &TrainParams {
                n_trees: 4,
                ..TrainParams::default()
            },
        )
        .unwrap();
        (d, f)
    }

    #[test]
    fn round_trip_is_identity() {
        let (d, f) = small();
        let bytes = export_forest(&f, &d, true).unwrap();
        let imp = import_forest(&bytes).unwrap();
        assert_eq!(imp.forest, f);
        assert_eq!(imp.dataset, d);
        assert!(imp.warnings.is_empty());
        assert_eq!(export_forest(&imp.forest, &imp.dataset, true).unwrap(), bytes);
    }

    #[test]
    fn schema_only_import_has_zero_counts() {
        let (d, f) = small();
        let bytes = export_forest(&f, &d, false).unwrap();
        let imp = import_forest(&bytes).unwrap();
        assert_eq!(imp.dataset.n_rows(), 0);
        assert_eq!(imp.dataset.features, d.features);
        assert!(imp.forest.trees.iter().all(|t| t.nodes.iter().all(|n| n.total_count() == 0)));
    }

    fn doc(trees: &str) -> String {
        format!(
            r#"{{"format":"forestview-forest/1",
                "dataset_schema":{{"name":"x","features":[{{"name":"f","kind":"quantitative","range":[0,10]}}],"classes":["A","B"]}},
                "trees":{trees}}}"#
        )
    }

    #[test]
    fn missing_right_child_is_an_error() {
        let d = doc(r#"[{"root":0,"nodes":[{"id":0,"kind":"internal","feature":0,"threshold":5,"left":1},{"id":1,"kind":"leaf","class":0}]}]"#);
        let err = import_forest(d.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("right child"), "{err}");
    }

    #[test]
    fn empty_tree_list_is_an_error() {
        let err = import_forest(doc("[]").as_bytes()).unwrap_err();
        assert!(err.to_string().contains("n_trees"), "{err}");
    }

    #[test]
    fn out_of_range_threshold_warns_and_ids_are_remapped() {
        let d = doc(
            r#"[{"root":7,"nodes":[{"id":3,"kind":"leaf","class":1},{"id":7,"kind":"internal","feature":0,"threshold":50,"left":9,"right":3},{"id":9,"kind":"leaf","class":0}]}]"#,
        );
        let imp = import_forest(d.as_bytes()).unwrap();
        assert_eq!(imp.warnings.len(), 1);
        let t = &imp.forest.trees[0];
        assert_eq!(t.root, NodeId(0));
        assert_eq!(t.predict(&[1.0]), 0);
        assert_eq!(t.predict(&[60.0]), 1);
    }

    #[test]
    fn orphan_and_cycle_rejected() {
        let orphan = doc(r#"[{"root":0,"nodes":[{"id":0,"kind":"leaf","class":0},{"id":1,"kind":"leaf","class":1}]}]"#);
        assert!(import_forest(orphan.as_bytes()).is_err());
        let cycle = doc(r#"[{"root":0,"nodes":[{"id":0,"kind":"internal","feature":0,"threshold":1,"left":0,"right":1},{"id":1,"kind":"leaf","class":1}]}]"#);
        assert!(import_forest(cycle.as_bytes()).is_err());
    }
}
