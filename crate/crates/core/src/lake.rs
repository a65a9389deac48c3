//! The lake: object store, catalog and security guard behind one handle.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::catalog::{
    Ancestor, AuditError, AuditEvent, AuditFilter, AuditLog, BusinessMeta, Catalog, CatalogEntry,
    CatalogError, LineageEdge, Provenance, SearchQuery, TechnicalMeta, AUDIT_LOG,
};
use crate::clock::Clock;
use crate::security::{AccessDenied, Action, Guard, PolicySet, Secret, Ticket};
use crate::store::{EntityId, EntityInfo, FormatClass, ObjectStore, StoreError};

/// Resource name guarding writes and listings of the object store.
pub const STORE_RESOURCE: &str = "store/*";

pub fn entity_resource(id: EntityId) -> String {
    format!("store/{id}")
}

#[derive(Debug, thiserror::Error)]
pub enum LakeError {
    #[error(transparent)]
    AccessDenied(#[from] AccessDenied),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error("entity {id} is stored as {stored} but metadata says {claimed}")]
    FormatMismatch {
        id: EntityId,
        stored: FormatClass,
        claimed: FormatClass,
    },
}

impl LakeError {
    pub fn is_access_denied(&self) -> bool {
        matches!(self, LakeError::AccessDenied(_))
    }
}

#[derive(Debug)]
pub struct Lake {
    root: Option<PathBuf>,
    clock: Arc<dyn Clock>,
    store: ObjectStore,
    catalog: Catalog,
    guard: Arc<Guard>,
}

impl Lake {
    pub fn in_memory(secret: Secret, policies: PolicySet, clock: Arc<dyn Clock>) -> Self {
        let audit = Arc::new(AuditLog::in_memory());
        Self {
            root: None,
            store: ObjectStore::in_memory(clock.clone()),
            catalog: Catalog::in_memory(clock.clone()),
            guard: Arc::new(Guard::new(secret, policies, audit, clock.clone())),
            clock,
        }
    }

    /// Open a persistent lake rooted at `root`.
    pub fn open(
        root: impl AsRef<Path>,
        secret: Secret,
        policies: PolicySet,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, LakeError> {
        let root = root.as_ref().to_path_buf();
        let store = ObjectStore::open(&root, clock.clone())?;
        let catalog = Catalog::open(&root, clock.clone())?;
        let audit = Arc::new(AuditLog::open(root.join(AUDIT_LOG))?);
        Ok(Self {
            root: Some(root),
            store,
            catalog,
            guard: Arc::new(Guard::new(secret, policies, audit, clock.clone())),
            clock,
        })
    }

    /// Replace the store, e.g. to set a capacity or a seeded id source.
    pub fn with_store(mut self, f: impl FnOnce(ObjectStore) -> ObjectStore) -> Self {
        self.store = f(self.store);
        self
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn guard(&self) -> &Arc<Guard> {
        &self.guard
    }

    pub fn store(&self) -> &ObjectStore {
        &self.store
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn put_blob(
        &self,
        payload: &[u8],
        format: FormatClass,
        ticket: &Ticket,
    ) -> Result<EntityId, LakeError> {
        self.guard
            .require(ticket, STORE_RESOURCE, Action::Write, "put")?;
        Ok(self.store.put(payload, format)?)
    }

    /// Read an entity's exact bytes. Emits one audit event.
    pub fn get_blob(&self, id: EntityId, ticket: &Ticket) -> Result<Arc<[u8]>, LakeError> {
        self.guard
            .require(ticket, &entity_resource(id), Action::Read, "get")?;
        let entity = self.store.get(id)?;
        if self.catalog.contains(id) {
            self.catalog.record_access(id)?;
        }
        Ok(entity.payload)
    }

    pub fn list_entities(
        &self,
        filter: Option<FormatClass>,
        ticket: &Ticket,
    ) -> Result<Vec<EntityInfo>, LakeError> {
        self.guard
            .require(ticket, STORE_RESOURCE, Action::Read, "list")?;
        Ok(self.store.list(filter))
    }

    pub fn register_entity(
        &self,
        id: EntityId,
        technical: TechnicalMeta,
        provenance: Provenance,
        business: BusinessMeta,
    ) -> Result<CatalogEntry, LakeError> {
        let info = self.store.info(id).ok_or(CatalogError::UnknownEntity(id))?;
        if info.format != technical.format {
            return Err(LakeError::FormatMismatch {
                id,
                stored: info.format,
                claimed: technical.format,
            });
        }
        Ok(self.catalog.register(id, technical, provenance, business)?)
    }

    pub fn search(&self, query: &SearchQuery) -> Vec<CatalogEntry> {
        self.catalog.search(query)
    }

    pub fn record_lineage(&self, edge: &LineageEdge) -> Result<(), LakeError> {
        Ok(self.catalog.record_lineage(edge)?)
    }

    pub fn lineage_of(&self, id: EntityId) -> Result<Vec<Ancestor>, LakeError> {
        Ok(self.catalog.lineage_of(id)?)
    }

    pub fn append_audit(&self, event: AuditEvent) -> Result<AuditEvent, LakeError> {
        Ok(self.guard.audit().append(event)?)
    }

    pub fn query_audit(&self, filter: &AuditFilter) -> Vec<AuditEvent> {
        self.guard.audit().query(filter)
    }
}
