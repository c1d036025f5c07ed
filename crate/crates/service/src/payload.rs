//! Response documents. The CLI and the HTTP layer both build them here and
//! serialize them with [`render`], so identical requests give identical bytes.

use serde::{Deserialize, Serialize};

use forestview_core::clustering::{ClusterCurve, Clustering};
use forestview_core::projection::projection_data;
use forestview_core::stats::forest_confusion;
use forestview_core::treelayout::{layout_tree, split_range, LayoutConfig, NodeSizes, SplitRange};
use forestview_core::viewmodel::{feature_plot, map_rules, rule_plot};
use forestview_core::{
    ConfusionMatrix, FeatureMeta, FeaturePlotData, FeatureSummary, FilterState, NodeId, ProjectionData, RulePlotData,
    Split, TrainParams, TreeLayout,
};

use crate::error::{Result, ServiceError};
use crate::session::Session;

pub const OVERVIEW_SCHEMA: &str = "forestview.overview/v1";
pub const CLUSTERS_SCHEMA: &str = "forestview.clusters/v1";
pub const CLUSTER_SCHEMA: &str = "forestview.cluster/v1";
pub const TREES_SCHEMA: &str = "forestview.trees/v1";
pub const SESSION_SCHEMA: &str = "forestview.session/v1";

/// Pretty JSON with a trailing newline.
pub fn render<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| ServiceError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub features: Vec<FeatureMeta>,
    pub classes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub schema: String,
    pub id: String,
    pub created_at: u64,
    pub n_trees: usize,
    pub dataset: DatasetInfo,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overview {
    pub schema: String,
    pub dataset: DatasetInfo,
    pub n_trees: usize,
    pub params: Option<TrainParams>,
    pub features: Vec<FeatureSummary>,
    /// Forest votes on the test rows; absent without test rows.
    pub confusion: Option<ConfusionMatrix>,
    pub accuracy: Option<f64>,
    pub curve: ClusterCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub schema: String,
    pub min_cluster_size: usize,
    pub cluster: usize,
    pub members: Vec<usize>,
    pub medoid: usize,
    pub filter: FilterState,
    pub feature_plot: FeaturePlotData,
    pub rule_plot: RulePlotData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub schema: String,
    pub min_cluster_size: usize,
    pub labels: Vec<usize>,
    pub filter: FilterState,
    pub clusters: Vec<ClusterView>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeView {
    pub layout: TreeLayout,
    /// One entry per split node, in node order.
    pub splits: Vec<SplitRange>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeSet {
    pub schema: String,
    pub min_cluster_size: usize,
    pub cluster: usize,
    /// Medoid first, then the other members by tree index.
    pub trees: Vec<TreeView>,
}

pub fn session_info(s: &Session) -> SessionInfo {
    SessionInfo {
        schema: SESSION_SCHEMA.into(),
        id: s.id().to_string(),
        created_at: s.created_at(),
        n_trees: s.forest().len(),
        dataset: dataset_info(s),
        warnings: s.warnings().to_vec(),
    }
}

fn dataset_info(s: &Session) -> DatasetInfo {
    let d = s.dataset();
    DatasetInfo {
        name: d.name.clone(),
        n_rows: d.n_rows(),
        n_train: d.indices(Split::Train).len(),
        n_test: d.indices(Split::Test).len(),
        features: d.features.clone(),
        classes: d.classes.clone(),
    }
}

pub fn overview(s: &Session) -> Result<Overview> {
    let confusion = if s.dataset().indices(Split::Test).is_empty() {
        None
    } else {
        Some(forest_confusion(s.forest(), s.dataset(), Split::Test)?)
    };
    Ok(Overview {
        schema: OVERVIEW_SCHEMA.into(),
        dataset: dataset_info(s),
        n_trees: s.forest().len(),
        params: s.forest().params.clone(),
        features: s.summaries()?.to_vec(),
        accuracy: confusion.as_ref().map(ConfusionMatrix::accuracy),
        confusion,
        curve: s.curve()?.clone(),
    })
}

pub fn projection(s: &Session, m: Option<usize>) -> Result<ProjectionData> {
    let m = s.resolve_min_size(m)?;
    Ok(projection_data(s.embedding()?, &*s.clustering(m)?)?)
}

/// Parses `feature:lo..hi` and `cell:TRUE->PRED` clauses.
pub fn parse_filter<'a>(s: &Session, clauses: impl IntoIterator<Item = &'a str>) -> Result<FilterState> {
    Ok(FilterState::parse(clauses, s.dataset())?)
}

fn cluster_view(s: &Session, clustering: &Clustering, c: usize, filter: &FilterState) -> Result<ClusterView> {
    let cluster = &clustering.clusters[c];
    let mapping = map_rules(cluster, s.rules());
    Ok(ClusterView {
        schema: CLUSTER_SCHEMA.into(),
        min_cluster_size: clustering.min_cluster_size,
        cluster: c,
        members: cluster.members.clone(),
        medoid: cluster.medoid,
        filter: filter.clone(),
        feature_plot: feature_plot(cluster, s.forest(), &s.dataset().features, filter),
        rule_plot: rule_plot(&mapping, s.rules(), s.forest(), s.dataset(), filter)?,
    })
}

fn check_cluster(clustering: &Clustering, c: usize) -> Result<()> {
    if c >= clustering.clusters.len() {
        return Err(ServiceError::ClusterNotFound {
            cluster: c,
            min_size: clustering.min_cluster_size,
            count: clustering.clusters.len(),
        });
    }
    Ok(())
}

pub fn clusters(s: &Session, m: Option<usize>, filter: &FilterState) -> Result<ClusterSet> {
    let m = s.resolve_min_size(m)?;
    let clustering = s.clustering(m)?;
    let clusters = (0..clustering.clusters.len())
        .map(|c| cluster_view(s, &clustering, c, filter))
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterSet {
        schema: CLUSTERS_SCHEMA.into(),
        min_cluster_size: m,
        labels: clustering.labels.clone(),
        filter: filter.clone(),
        clusters,
    })
}

pub fn cluster(s: &Session, m: Option<usize>, c: usize, filter: &FilterState) -> Result<ClusterView> {
    let clustering = s.clustering(s.resolve_min_size(m)?)?;
    check_cluster(&clustering, c)?;
    cluster_view(s, &clustering, c, filter)
}

pub fn trees(s: &Session, m: Option<usize>, c: usize) -> Result<TreeSet> {
    let m = s.resolve_min_size(m)?;
    let clustering = s.clustering(m)?;
    check_cluster(&clustering, c)?;
    let cluster = &clustering.clusters[c];
    let order = std::iter::once(cluster.medoid).chain(cluster.members.iter().copied().filter(|&t| t != cluster.medoid));
    let features = &s.dataset().features;
    let trees = order
        .map(|t| {
            let tree = &s.forest().trees[t];
            let layout = layout_tree(tree, features, &NodeSizes::default(), &LayoutConfig::default())?;
            let splits = (0..tree.len()).filter_map(|i| split_range(tree, NodeId(i), features)).collect();
            Ok(TreeView { layout, splits })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeSet {
        schema: TREES_SCHEMA.into(),
        min_cluster_size: m,
        cluster: c,
        trees,
    })
}
