//! Live sessions shared by all request handlers.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use forestview_core::TrainParams;

use crate::error::{Result, ServiceError};
use crate::session::Session;
use crate::store::Store;

pub struct Engine {
    store: Option<Store>,
    defaults: TrainParams,
    sessions: RwLock<HashMap<String, Arc<Session>>>,
    /// Serializes loads from disk so a session is restored once.
    loading: Mutex<()>,
}

impl Engine {
    pub fn new(store: Option<Store>, defaults: TrainParams) -> Self {
        Self {
            store,
            defaults,
            sessions: RwLock::new(HashMap::new()),
            loading: Mutex::new(()),
        }
    }

    pub fn defaults(&self) -> &TrainParams {
        &self.defaults
    }

    pub fn store(&self) -> Option<&Store> {
        self.store.as_ref()
    }

    /// Persists the session when a store is configured, then publishes it.
    pub fn insert(&self, session: Session) -> Result<Arc<Session>> {
        let id = session.id().to_string();
        if self.read().contains_key(&id) || self.store.as_ref().is_some_and(|s| s.exists(&id)) {
            return Err(ServiceError::bad_request(format!("session `{id}` already exists")));
        }
        if let Some(store) = &self.store {
            store.persist(&session)?;
        }
        let session = Arc::new(session);
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id, Arc::clone(&session));
        Ok(session)
    }

    /// A live session, restored from disk on first access.
    pub fn get(&self, id: &str) -> Result<Arc<Session>> {
        if let Some(s) = self.read().get(id) {
            return Ok(Arc::clone(s));
        }
        let Some(store) = &self.store else {
            return Err(ServiceError::SessionNotFound(id.to_string()));
        };
        let _guard = self.loading.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(s) = self.read().get(id) {
            return Ok(Arc::clone(s));
        }
        let session = Arc::new(store.restore(id)?);
        self.sessions
            .write()
            .unwrap_or_else(|p| p.into_inner())
            .insert(id.to_string(), Arc::clone(&session));
        Ok(session)
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.read().keys().cloned().collect();
        ids.sort();
        ids
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, HashMap<String, Arc<Session>>> {
        self.sessions.read().unwrap_or_else(|p| p.into_inner())
    }
}
