//! Training, comparing and summarizing random forests of decision trees.
//!
//! Trees are compared through their rules (one closed interval per feature
//! plus a predicted class), clustered by complete linkage with a dynamic
//! cut, and summarized into view-model payloads.

pub mod clustering;
pub mod dataset;
pub mod datasets;
pub mod error;
pub mod forest;
pub mod interchange;
pub mod metric;
pub mod projection;
pub mod rules;
pub mod stats;
pub mod synth;
pub mod tree;
pub mod treelayout;
pub mod viewmodel;

pub use clustering::{cluster_curve, complete_linkage, dynamic_hybrid_cut, Cluster, ClusterCurve, Clustering, Dendrogram};
pub use dataset::{ingest_csv, Dataset, FeatureKind, FeatureMeta, IngestOptions, Split};
pub use error::{Error, Result};
pub use forest::{train_forest, Forest, TrainParams};
pub use metric::{distance_matrix, forest_distance_matrix, forest_rules, DistanceMatrix};
pub use projection::{convex_hull, mds, ProjectionData};
pub use rules::{extract_rules, Interval, Rule, RuleRef};
pub use stats::{ConfusionMatrix, DensityCurve, FeatureSummary};
pub use tree::{DecisionTree, Node, NodeId, NodeKind};
pub use treelayout::TreeLayout;
pub use viewmodel::{FeaturePlotData, FilterState, RuleMapping, RulePlotData};
