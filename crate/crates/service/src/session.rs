//! A dataset plus forest with lazily built, shared analysis caches.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{SystemTime, UNIX_EPOCH};

use forestview_core::clustering::{cluster_curve, complete_linkage, dynamic_hybrid_cut, ClusterCurve, Clustering, Dendrogram};
use forestview_core::interchange::import_forest;
use forestview_core::projection::{mds, Embedding};
use forestview_core::stats::feature_summaries;
use forestview_core::{
    datasets, distance_matrix, forest_rules, ingest_csv, train_forest, Dataset, DistanceMatrix, FeatureSummary,
    Forest, IngestOptions, Rule, TrainParams,
};

use crate::error::{Result, ServiceError};

/// How to read an uploaded CSV. The split and seed come from the train
/// parameters.
#[derive(Clone, Debug, Default)]
pub struct CsvOptions {
    pub name: Option<String>,
    pub label: Option<String>,
    pub categorical: Vec<String>,
}

type Cell<T> = OnceLock<Result<T>>;

fn cached<T>(cell: &Cell<T>, f: impl FnOnce() -> Result<T>) -> Result<&T> {
    cell.get_or_init(f).as_ref().map_err(Clone::clone)
}

pub struct Session {
    id: String,
    created_at: u64,
    dataset: Dataset,
    forest: Forest,
    warnings: Vec<String>,
    rules: OnceLock<Vec<Vec<Rule>>>,
    matrix: OnceLock<DistanceMatrix>,
    dendrogram: Cell<Dendrogram>,
    curve: Cell<ClusterCurve>,
    embedding: Cell<Embedding>,
    summaries: Cell<Vec<FeatureSummary>>,
    /// One slot per minimum cluster size; the slot's own lock makes
    /// concurrent requests for the same size wait for a single cut.
    clusterings: Mutex<BTreeMap<usize, Arc<Cell<Arc<Clustering>>>>>,
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn new_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}

impl Session {
    pub fn new(id: String, created_at: u64, dataset: Dataset, forest: Forest) -> Result<Self> {
        if forest.n_features != dataset.n_features() || forest.n_classes != dataset.n_classes() {
            return Err(ServiceError::bad_request(format!(
                "forest expects {} features and {} classes, dataset has {} and {}",
                forest.n_features,
                forest.n_classes,
                dataset.n_features(),
                dataset.n_classes()
            )));
        }
        Ok(Self {
            id,
            created_at,
            dataset,
            forest,
            warnings: Vec::new(),
            rules: OnceLock::new(),
            matrix: OnceLock::new(),
            dendrogram: OnceLock::new(),
            curve: OnceLock::new(),
            embedding: OnceLock::new(),
            summaries: OnceLock::new(),
            clusterings: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn from_csv(id: String, bytes: &[u8], opts: &CsvOptions, params: &TrainParams) -> Result<Self> {
        params.validate()?;
        let ingest = IngestOptions {
            name: opts.name.clone().unwrap_or_else(|| "dataset".into()),
            label: opts.label.clone(),
            categorical: opts.categorical.clone(),
            test_fraction: params.test_fraction,
            seed: params.seed,
        };
        let dataset = ingest_csv(bytes, &ingest)?;
        let forest = train_forest(&dataset, params)?;
        Self::new(id, now(), dataset, forest)
    }

    pub fn from_builtin(id: String, name: &str, params: &TrainParams) -> Result<Self> {
        params.validate()?;
        let dataset = datasets::builtin(name, params.test_fraction, params.seed)?;
        let forest = train_forest(&dataset, params)?;
        Self::new(id, now(), dataset, forest)
    }

    pub fn from_interchange(id: String, bytes: &[u8]) -> Result<Self> {
        let imported = import_forest(bytes)?;
        let mut s = Self::new(id, now(), imported.dataset, imported.forest)?;
        s.warnings = imported.warnings;
        Ok(s)
    }

    /// Seeds the matrix cache, e.g. from a persisted copy.
    pub fn with_matrix(self, matrix: DistanceMatrix) -> Result<Self> {
        if matrix.len() != self.forest.len() {
            return Err(ServiceError::bad_request(format!(
                "matrix has {} rows for {} trees",
                matrix.len(),
                self.forest.len()
            )));
        }
        let _ = self.matrix.set(matrix);
        Ok(self)
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings = warnings;
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn forest(&self) -> &Forest {
        &self.forest
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn rules(&self) -> &[Vec<Rule>] {
        self.rules.get_or_init(|| forest_rules(&self.forest, &self.dataset.features))
    }

    pub fn matrix(&self) -> &DistanceMatrix {
        self.matrix
            .get_or_init(|| distance_matrix(self.rules(), self.dataset.n_classes()))
    }

    pub fn matrix_is_cached(&self) -> bool {
        self.matrix.get().is_some()
    }

    pub fn dendrogram(&self) -> Result<&Dendrogram> {
        cached(&self.dendrogram, || Ok(complete_linkage(self.matrix())?))
    }

    pub fn curve(&self) -> Result<&ClusterCurve> {
        cached(&self.curve, || Ok(cluster_curve(self.dendrogram()?, self.matrix())?))
    }

    /// `m` defaults to the curve's elbow.
    pub fn resolve_min_size(&self, m: Option<usize>) -> Result<usize> {
        match m {
            Some(0) => Err(ServiceError::bad_request("minimum cluster size must be at least 1")),
            Some(m) => Ok(m),
            None => Ok(self.curve()?.default_min_size),
        }
    }

    pub fn clustering(&self, m: usize) -> Result<Arc<Clustering>> {
        let slot = {
            let mut map = self.clusterings.lock().unwrap_or_else(|p| p.into_inner());
            Arc::clone(map.entry(m).or_default())
        };
        cached(&slot, || Ok(Arc::new(dynamic_hybrid_cut(self.dendrogram()?, self.matrix(), m)?))).cloned()
    }

    pub fn embedding(&self) -> Result<&Embedding> {
        cached(&self.embedding, || Ok(mds(self.matrix(), 2)?))
    }

    /// Per-feature densities or histograms over all rows; empty when the
    /// dataset carries no rows.
    pub fn summaries(&self) -> Result<&[FeatureSummary]> {
        cached(&self.summaries, || {
            if self.dataset.n_rows() == 0 {
                return Ok(Vec::new());
            }
            Ok(feature_summaries(&self.dataset)?)
        })
        .map(Vec::as_slice)
    }
}
