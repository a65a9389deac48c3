//! Extended-metadata catalog: classification, centralized audit, search and
//! lineage.
//!
//! Every stored entity gets exactly one [`CatalogEntry`] carrying technical,
//! operational and business metadata. The catalog stamps `ml_time` itself at
//! commit, which is what the ingestion-time metric measures against.
//!
//! On disk the catalog is three append-only, line-delimited `key=value` logs:
//! `catalog.log`, `lineage.log` and `audit.log`.

mod audit;
mod classify;
mod lineage;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use sha2::{Digest, Sha256};

pub use audit::{AuditError, AuditEvent, AuditFilter, AuditLog, Outcome};
pub use classify::{classify_format, sniff_delimiter};
pub use lineage::{Ancestor, LineageEdge};

use crate::clock::{Clock, Work};
use crate::kv::{self, KvError, Record};
use crate::store::{EntityId, FormatClass};
use lineage::LineageGraph;

pub const CATALOG_LOG: &str = "catalog.log";
pub const LINEAGE_LOG: &str = "lineage.log";
pub const AUDIT_LOG: &str = "audit.log";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceKind {
    Bulk,
    Event,
    Stream,
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceKind::Bulk => "Bulk",
            SourceKind::Event => "Event",
            SourceKind::Stream => "Stream",
        })
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bulk" => Ok(SourceKind::Bulk),
            "event" => Ok(SourceKind::Event),
            "stream" => Ok(SourceKind::Stream),
            _ => Err(format!("unknown source kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TechnicalMeta {
    pub format: FormatClass,
    pub schema_hint: Option<Vec<String>>,
    pub size_bytes: u64,
    pub checksum: u64,
}

impl TechnicalMeta {
    pub fn describe(payload: &[u8], format: FormatClass, schema_hint: Option<Vec<String>>) -> Self {
        Self {
            format,
            schema_hint,
            size_bytes: payload.len() as u64,
            checksum: checksum64(payload),
        }
    }
}

/// First eight bytes of the SHA-256 digest, big-endian.
pub fn checksum64(payload: &[u8]) -> u64 {
    let digest = Sha256::digest(payload);
    u64::from_be_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Operational metadata supplied by the ingesting connector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub source_kind: SourceKind,
    pub source_name: String,
    pub creator: String,
    pub da_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OperationalMeta {
    pub source_kind: SourceKind,
    pub source_name: String,
    pub creator: String,
    pub da_time: u64,
    pub ml_time: u64,
    pub access_history_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BusinessMeta {
    pub tags: BTreeSet<String>,
    pub domain: String,
}

impl BusinessMeta {
    pub fn new<I, S>(domain: &str, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tags: tags.into_iter().map(Into::into).collect(),
            domain: domain.to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    pub entity: EntityId,
    pub technical: TechnicalMeta,
    pub operational: OperationalMeta,
    pub business: BusinessMeta,
}

/// Conjunction of optional clauses. The time range applies to `ml_time`
/// and is half-open `[from, to)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SearchQuery {
    pub format: Option<FormatClass>,
    pub source_kind: Option<SourceKind>,
    pub tags: BTreeSet<String>,
    pub creator: Option<String>,
    pub from: Option<u64>,
    pub to: Option<u64>,
}

impl SearchQuery {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn format(mut self, f: FormatClass) -> Self {
        self.format = Some(f);
        self
    }

    pub fn source_kind(mut self, k: SourceKind) -> Self {
        self.source_kind = Some(k);
        self
    }

    pub fn tag(mut self, t: impl Into<String>) -> Self {
        self.tags.insert(t.into());
        self
    }

    pub fn creator(mut self, c: impl Into<String>) -> Self {
        self.creator = Some(c.into());
        self
    }

    pub fn between(mut self, from: Option<u64>, to: Option<u64>) -> Self {
        self.from = from;
        self.to = to;
        self
    }

    pub fn matches(&self, e: &CatalogEntry) -> bool {
        let op = &e.operational;
        self.format.is_none_or(|f| f == e.technical.format)
            && self.source_kind.is_none_or(|k| k == op.source_kind)
            && self.tags.is_subset(&e.business.tags)
            && self.creator.as_ref().is_none_or(|c| *c == op.creator)
            && self.from.is_none_or(|f| op.ml_time >= f)
            && self.to.is_none_or(|t| op.ml_time < t)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CatalogError {
    #[error("entity {0} is already registered")]
    DuplicateEntry(EntityId),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("lineage edge would create a cycle through {0}")]
    CycleDetected(EntityId),
    #[error("lineage edge for {0} has no parents")]
    NoParents(EntityId),
    #[error("commit time {ml_time} precedes arrival time {da_time}")]
    ClockSkew { da_time: u64, ml_time: u64 },
    #[error("catalog i/o: {0}")]
    Io(#[from] io::Error),
    #[error("catalog log: {0}")]
    Corrupt(#[from] KvError),
}

#[derive(Debug, Default)]
struct State {
    entries: Vec<CatalogEntry>,
    by_id: HashMap<EntityId, usize>,
    lineage: LineageGraph,
}

#[derive(Debug)]
struct Logs {
    catalog: File,
    lineage: File,
}

#[derive(Debug)]
pub struct Catalog {
    clock: Arc<dyn Clock>,
    state: RwLock<State>,
    logs: Mutex<Option<Logs>>,
}

fn json_list<'a>(items: impl IntoIterator<Item = &'a String>) -> String {
    serde_json::Value::from(items.into_iter().cloned().collect::<Vec<_>>()).to_string()
}

fn parse_json_list(raw: &str) -> Result<Vec<String>, KvError> {
    serde_json::from_str(raw).map_err(|_| KvError::BadValue {
        key: "list".into(),
        value: raw.into(),
    })
}

fn parse_field<T: FromStr>(rec: &Record, key: &str) -> Result<T, KvError> {
    rec.parse(key)
}

impl CatalogEntry {
    fn to_record(&self) -> Record {
        let mut rec = Record::new()
            .with("kind", "entry")
            .with("entity", self.entity)
            .with("format", self.technical.format);
        if let Some(cols) = &self.technical.schema_hint {
            rec.push("schema_hint", json_list(cols));
        }
        rec.with("size_bytes", self.technical.size_bytes)
            .with("checksum", format!("{:016x}", self.technical.checksum))
            .with("source_kind", self.operational.source_kind)
            .with("source_name", &self.operational.source_name)
            .with("creator", &self.operational.creator)
            .with("da_time", self.operational.da_time)
            .with("ml_time", self.operational.ml_time)
            .with("tags", json_list(&self.business.tags))
            .with("domain", &self.business.domain)
    }

    fn from_record(rec: &Record) -> Result<Self, KvError> {
        let bad = |key: &str| KvError::BadValue {
            key: key.into(),
            value: rec.get(key).unwrap_or_default().into(),
        };
        let checksum =
            u64::from_str_radix(rec.require("checksum")?, 16).map_err(|_| bad("checksum"))?;
        Ok(Self {
            entity: rec.require("entity")?.parse().map_err(|_| bad("entity"))?,
            technical: TechnicalMeta {
                format: rec.require("format")?.parse().map_err(|_| bad("format"))?,
                schema_hint: rec.get("schema_hint").map(parse_json_list).transpose()?,
                size_bytes: parse_field(rec, "size_bytes")?,
                checksum,
            },
            operational: OperationalMeta {
                source_kind: rec
                    .require("source_kind")?
                    .parse()
                    .map_err(|_| bad("source_kind"))?,
                source_name: rec.require("source_name")?.into(),
                creator: rec.require("creator")?.into(),
                da_time: parse_field(rec, "da_time")?,
                ml_time: parse_field(rec, "ml_time")?,
                access_history_count: 0,
            },
            business: BusinessMeta {
                tags: parse_json_list(rec.require("tags")?)?.into_iter().collect(),
                domain: rec.get("domain").unwrap_or_default().into(),
            },
        })
    }
}

impl LineageEdge {
    fn to_record(&self) -> Record {
        let parents: Vec<String> = self.parents.iter().map(ToString::to_string).collect();
        Record::new()
            .with("child", self.child)
            .with("parents", parents.join(","))
            .with("transform", &self.transform)
    }

    fn from_record(rec: &Record) -> Result<Self, KvError> {
        let bad = |key: &str| KvError::BadValue {
            key: key.into(),
            value: rec.get(key).unwrap_or_default().into(),
        };
        Ok(Self {
            child: rec.require("child")?.parse().map_err(|_| bad("child"))?,
            parents: rec
                .require("parents")?
                .split(',')
                .map(|p| p.parse().map_err(|_| bad("parents")))
                .collect::<Result<_, _>>()?,
            transform: rec.require("transform")?.into(),
        })
    }
}

fn append_line(file: &mut File, rec: &Record) -> io::Result<()> {
    let mut line = rec.to_line();
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.flush()
}

impl Catalog {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            state: RwLock::default(),
            logs: Mutex::new(None),
        }
    }

    /// Open the catalog and lineage logs under `root`, replaying both.
    pub fn open(root: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, CatalogError> {
        let root = root.as_ref();
        std::fs::create_dir_all(root)?;
        let mut state = State::default();
        let catalog_path = root.join(CATALOG_LOG);
        if catalog_path.exists() {
            let text = std::fs::read_to_string(&catalog_path)?;
            for (line_no, line) in kv::complete_lines(&text) {
                let rec = Record::from_line(line, line_no)?;
                match rec.get("kind") {
                    Some("access") => {
                        let id: EntityId =
                            rec.require("entity")?
                                .parse()
                                .map_err(|_| KvError::BadValue {
                                    key: "entity".into(),
                                    value: line.into(),
                                })?;
                        if let Some(&pos) = state.by_id.get(&id) {
                            state.entries[pos].operational.access_history_count += 1;
                        }
                    }
                    _ => {
                        let entry = CatalogEntry::from_record(&rec)?;
                        let pos = state.entries.len();
                        state.by_id.insert(entry.entity, pos);
                        state.entries.push(entry);
                    }
                }
            }
        }
        let lineage_path = root.join(LINEAGE_LOG);
        if lineage_path.exists() {
            let text = std::fs::read_to_string(&lineage_path)?;
            for (line_no, line) in kv::complete_lines(&text) {
                state
                    .lineage
                    .insert(&LineageEdge::from_record(&Record::from_line(
                        line, line_no,
                    )?)?);
            }
        }
        let open = |p: &Path| OpenOptions::new().create(true).append(true).open(p);
        let logs = Logs {
            catalog: open(&catalog_path)?,
            lineage: open(&lineage_path)?,
        };
        Ok(Self {
            clock,
            state: RwLock::new(state),
            logs: Mutex::new(Some(logs)),
        })
    }

    /// Commit metadata for an entity. `ml_time` is taken from the lake clock
    /// at the commit instant.
    pub fn register(
        &self,
        id: EntityId,
        technical: TechnicalMeta,
        provenance: Provenance,
        business: BusinessMeta,
    ) -> Result<CatalogEntry, CatalogError> {
        let mut logs = self.logs.lock().expect("catalog log lock");
        let mut state = self.state.write().expect("catalog lock");
        if state.by_id.contains_key(&id) {
            return Err(CatalogError::DuplicateEntry(id));
        }
        self.clock.charge(Work::CatalogCommit);
        let ml_time = self.clock.now_millis();
        if ml_time < provenance.da_time {
            return Err(CatalogError::ClockSkew {
                da_time: provenance.da_time,
                ml_time,
            });
        }
        let entry = CatalogEntry {
            entity: id,
            technical,
            operational: OperationalMeta {
                source_kind: provenance.source_kind,
                source_name: provenance.source_name,
                creator: provenance.creator,
                da_time: provenance.da_time,
                ml_time,
                access_history_count: 0,
            },
            business,
        };
        if let Some(logs) = logs.as_mut() {
            append_line(&mut logs.catalog, &entry.to_record())?;
        }
        let pos = state.entries.len();
        state.by_id.insert(id, pos);
        state.entries.push(entry.clone());
        Ok(entry)
    }

    pub fn get(&self, id: EntityId) -> Option<CatalogEntry> {
        let state = self.state.read().expect("catalog lock");
        state.by_id.get(&id).map(|&pos| state.entries[pos].clone())
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.state
            .read()
            .expect("catalog lock")
            .by_id
            .contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.state.read().expect("catalog lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Count one guarded access against an entity.
    pub fn record_access(&self, id: EntityId) -> Result<(), CatalogError> {
        let mut logs = self.logs.lock().expect("catalog log lock");
        let mut state = self.state.write().expect("catalog lock");
        let pos = *state
            .by_id
            .get(&id)
            .ok_or(CatalogError::UnknownEntity(id))?;
        if let Some(logs) = logs.as_mut() {
            append_line(
                &mut logs.catalog,
                &Record::new().with("kind", "access").with("entity", id),
            )?;
        }
        state.entries[pos].operational.access_history_count += 1;
        Ok(())
    }

    /// Entries satisfying every clause of `query`, ordered by `ml_time`.
    pub fn search(&self, query: &SearchQuery) -> Vec<CatalogEntry> {
        let state = self.state.read().expect("catalog lock");
        let mut hits: Vec<CatalogEntry> = state
            .entries
            .iter()
            .filter(|e| query.matches(e))
            .cloned()
            .collect();
        hits.sort_by_key(|e| e.operational.ml_time);
        hits
    }

    pub fn record_lineage(&self, edge: &LineageEdge) -> Result<(), CatalogError> {
        if edge.parents.is_empty() {
            return Err(CatalogError::NoParents(edge.child));
        }
        let mut logs = self.logs.lock().expect("catalog log lock");
        let mut state = self.state.write().expect("catalog lock");
        for id in std::iter::once(&edge.child).chain(&edge.parents) {
            if !state.by_id.contains_key(id) {
                return Err(CatalogError::UnknownEntity(*id));
            }
        }
        if state.lineage.creates_cycle(edge.child, &edge.parents) {
            return Err(CatalogError::CycleDetected(edge.child));
        }
        if let Some(logs) = logs.as_mut() {
            append_line(&mut logs.lineage, &edge.to_record())?;
        }
        state.lineage.insert(edge);
        Ok(())
    }

    pub fn lineage_of(&self, id: EntityId) -> Result<Vec<Ancestor>, CatalogError> {
        let state = self.state.read().expect("catalog lock");
        if !state.by_id.contains_key(&id) {
            return Err(CatalogError::UnknownEntity(id));
        }
        Ok(state.lineage.ancestors(id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;
    use std::collections::HashSet;

    fn catalog() -> (Arc<SimClock>, Catalog) {
        let clock = Arc::new(SimClock::new(1_000));
        (clock.clone(), Catalog::in_memory(clock))
    }

    fn provenance(da: u64) -> Provenance {
        Provenance {
            source_kind: SourceKind::Bulk,
            source_name: "ehr".into(),
            creator: "alice".into(),
            da_time: da,
        }
    }

    fn register(cat: &Catalog, n: u128, tags: &[&str]) -> EntityId {
        let id = EntityId::from_u128(n);
        cat.register(
            id,
            TechnicalMeta::describe(b"x", FormatClass::Structured, None),
            provenance(900),
            BusinessMeta::new("diabetes-encounter", tags.iter().copied()),
        )
        .unwrap();
        id
    }

    #[test]
    fn register_stamps_commit_time() {
        let (clock, cat) = catalog();
        clock.advance_millis(5);
        let id = EntityId::from_u128(1);
        let e = cat
            .register(
                id,
                TechnicalMeta::describe(b"abc", FormatClass::Structured, None),
                provenance(1_000),
                BusinessMeta::default(),
            )
            .unwrap();
        assert_eq!(e.operational.ml_time, 1_005);
        assert!(e.operational.ml_time >= e.operational.da_time);
        assert!(matches!(
            cat.register(
                id,
                e.technical.clone(),
                provenance(1_000),
                BusinessMeta::default()
            ),
            Err(CatalogError::DuplicateEntry(_))
        ));
    }

    #[test]
    fn arrival_after_commit_is_rejected() {
        let (_, cat) = catalog();
        assert!(matches!(
            cat.register(
                EntityId::from_u128(1),
                TechnicalMeta::describe(b"", FormatClass::Unstructured, None),
                provenance(2_000),
                BusinessMeta::default()
            ),
            Err(CatalogError::ClockSkew { .. })
        ));
    }

    #[test]
    fn tag_search() {
        let (_, cat) = catalog();
        assert!(cat.search(&SearchQuery::all()).is_empty());
        for i in 0..5 {
            register(
                &cat,
                i,
                if i % 2 == 0 && i > 0 {
                    &["lab"]
                } else {
                    &["ehr"]
                },
            );
        }
        assert_eq!(cat.search(&SearchQuery::all().tag("lab")).len(), 2);
        assert_eq!(
            cat.search(&SearchQuery::all().tag("lab").tag("ehr")).len(),
            0
        );
    }

    #[test]
    fn lineage_chain_and_cycle() {
        let (_, cat) = catalog();
        let [a, b, c] = [1, 2, 3].map(|n| register(&cat, n, &[]));
        assert!(cat.lineage_of(a).unwrap().is_empty());
        cat.record_lineage(&LineageEdge {
            child: b,
            parents: vec![a],
            transform: "clean".into(),
        })
        .unwrap();
        cat.record_lineage(&LineageEdge {
            child: c,
            parents: vec![b],
            transform: "kmeans-input".into(),
        })
        .unwrap();
        let ids: HashSet<_> = cat
            .lineage_of(c)
            .unwrap()
            .into_iter()
            .map(|x| x.id)
            .collect();
        assert_eq!(ids, HashSet::from([a, b]));
        assert!(matches!(
            cat.record_lineage(&LineageEdge {
                child: a,
                parents: vec![c],
                transform: "loop".into()
            }),
            Err(CatalogError::CycleDetected(_))
        ));
        assert!(matches!(
            cat.record_lineage(&LineageEdge {
                child: a,
                parents: vec![a],
                transform: "self".into()
            }),
            Err(CatalogError::CycleDetected(_))
        ));
        assert!(matches!(
            cat.record_lineage(&LineageEdge {
                child: a,
                parents: vec![EntityId::from_u128(99)],
                transform: "x".into()
            }),
            Err(CatalogError::UnknownEntity(_))
        ));
        assert!(matches!(
            cat.lineage_of(EntityId::from_u128(99)),
            Err(CatalogError::UnknownEntity(_))
        ));
    }

    #[test]
    fn labels_follow_direct_edges() {
        let (_, cat) = catalog();
        let [a, b, c] = [1, 2, 3].map(|n| register(&cat, n, &[]));
        cat.record_lineage(&LineageEdge {
            child: c,
            parents: vec![a, b],
            transform: "kmeans-input".into(),
        })
        .unwrap();
        let anc = cat.lineage_of(c).unwrap();
        assert_eq!(anc.len(), 2);
        assert!(anc
            .iter()
            .all(|x| x.transform == "kmeans-input" && x.depth == 1));
    }

    #[test]
    fn reopen_replays_entries_access_and_lineage() {
        let dir = tempfile::tempdir().unwrap();
        let clock: Arc<dyn Clock> = Arc::new(SimClock::new(1_000));
        let (a, b) = {
            let cat = Catalog::open(dir.path(), clock.clone()).unwrap();
            let a = register(&cat, 1, &["lab", "tab\tbed"]);
            let b = register(&cat, 2, &[]);
            cat.record_lineage(&LineageEdge {
                child: b,
                parents: vec![a],
                transform: "derive".into(),
            })
            .unwrap();
            cat.record_access(a).unwrap();
            (a, b)
        };
        let cat = Catalog::open(dir.path(), clock).unwrap();
        let e = cat.get(a).unwrap();
        assert_eq!(e.operational.access_history_count, 1);
        assert!(e.business.tags.contains("tab\tbed"));
        assert_eq!(cat.lineage_of(b).unwrap()[0].id, a);
        assert_eq!(cat.len(), 2);
    }
}
