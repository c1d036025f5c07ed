//! On-disk sessions: one directory per session id holding the dataset, the
//! forest document and the distance matrix.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use forestview_core::interchange::{export_forest, import_forest};
use forestview_core::{Dataset, DistanceMatrix};

use crate::error::{Result, ServiceError};
use crate::session::Session;

pub const SESSION_FILE: &str = "session.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const FOREST_FILE: &str = "forest.json";
pub const MATRIX_FILE: &str = "matrix.tsv";

#[derive(Serialize, Deserialize)]
struct Manifest {
    id: String,
    created_at: u64,
    warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Store {
    root: PathBuf,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| ServiceError::store(&tmp, e))?;
    f.write_all(bytes).map_err(|e| ServiceError::store(&tmp, e))?;
    f.sync_all().map_err(|e| ServiceError::store(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| ServiceError::store(path, e))
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn session_dir(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        valid_id(id) && self.session_dir(id).join(SESSION_FILE).is_file()
    }

    /// Writes every file of the session, the matrix included. The manifest
    /// goes last so a half-written directory is never taken for a session.
    pub fn persist(&self, s: &Session) -> Result<PathBuf> {
        if !valid_id(s.id()) {
            return Err(ServiceError::bad_request(format!("invalid session id `{}`", s.id())));
        }
        let dir = self.session_dir(s.id());
        fs::create_dir_all(&dir).map_err(|e| ServiceError::store(&dir, e))?;
        let dataset = serde_json::to_vec(s.dataset()).map_err(|e| ServiceError::store(dir.join(DATASET_FILE), e))?;
        write_atomic(&dir.join(DATASET_FILE), &dataset)?;
        let forest = export_forest(s.forest(), s.dataset(), false).map_err(|e| ServiceError::store(dir.join(FOREST_FILE), e))?;
        write_atomic(&dir.join(FOREST_FILE), &forest)?;
        write_atomic(&dir.join(MATRIX_FILE), s.matrix().to_table().as_bytes())?;
        let manifest = Manifest {
            id: s.id().to_string(),
            created_at: s.created_at(),
            warnings: s.warnings().to_vec(),
        };
        let bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| ServiceError::store(dir.join(SESSION_FILE), e))?;
        write_atomic(&dir.join(SESSION_FILE), &bytes)?;
        Ok(dir)
    }

    /// Loads a persisted session. A missing matrix file is not an error: the
    /// matrix is then rebuilt on first use.
    pub fn restore(&self, id: &str) -> Result<Session> {
        if !self.exists(id) {
            return Err(ServiceError::SessionNotFound(id.to_string()));
        }
        let dir = self.session_dir(id);
        let read = |name: &str| -> Result<(PathBuf, Vec<u8>)> {
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| ServiceError::store(&path, e))?;
            Ok((path, bytes))
        };

        let (path, bytes) = read(SESSION_FILE)?;
        let manifest: Manifest = serde_json::from_slice(&bytes).map_err(|e| ServiceError::store(&path, e))?;
        if manifest.id != id {
            return Err(ServiceError::store(path, format!("names session `{}`", manifest.id)));
        }

        let (path, bytes) = read(DATASET_FILE)?;
        let raw: Dataset = serde_json::from_slice(&bytes).map_err(|e| ServiceError::store(&path, e))?;
        let dataset = Dataset::new(
            raw.name.clone(),
            raw.features.clone(),
            raw.classes.clone(),
            raw.rows().to_vec(),
            raw.labels().to_vec(),
            raw.splits().to_vec(),
        )
        .map_err(|e| ServiceError::store(&path, e))?;

        let (path, bytes) = read(FOREST_FILE)?;
        let imported = import_forest(&bytes).map_err(|e| ServiceError::store(&path, e))?;
        if imported.dataset.features != dataset.features || imported.dataset.classes != dataset.classes {
            return Err(ServiceError::store(path, format!("schema differs from {DATASET_FILE}")));
        }
        let mut forest = imported.forest;
        forest.recompute_counts(&dataset);

        let mut session = Session::new(id.to_string(), manifest.created_at, dataset, forest)
            .map_err(|e| ServiceError::store(&path, e))?
            .with_warnings(manifest.warnings);

        let matrix_path = dir.join(MATRIX_FILE);
        if matrix_path.exists() {
            let text = fs::read_to_string(&matrix_path).map_err(|e| ServiceError::store(&matrix_path, e))?;
            let matrix = DistanceMatrix::from_table(&text).map_err(|e| ServiceError::store(&matrix_path, e))?;
            session = session.with_matrix(matrix).map_err(|e| ServiceError::store(&matrix_path, e))?;
        }
        Ok(session)
    }
}
