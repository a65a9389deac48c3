//! Flat, schemaless object store.
//!
//! Payloads are kept verbatim under a random 128-bit [`EntityId`]. On disk
//! each entity is one file at `<root>/objects/<first two hex chars>/<id>` and
//! every accepted write is appended to the `objects.log` manifest as
//! `id<TAB>format<TAB>size<TAB>unix_millis`. The manifest is the source of
//! truth on reopen and fixes the insertion order.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex, RwLock};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::clock::{Clock, Work};

pub const DEFAULT_CAPACITY_BYTES: u64 = 4 * 1024 * 1024 * 1024;
const MANIFEST: &str = "objects.log";

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(u128);

impl EntityId {
    pub fn from_u128(v: u128) -> Self {
        Self(v)
    }

    pub fn as_u128(self) -> u128 {
        self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EntityId({self})")
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("invalid entity id `{0}`")]
pub struct BadEntityId(pub String);

impl FromStr for EntityId {
    type Err = BadEntityId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower_hex = s.len() == 32
            && s.bytes()
                .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if !lower_hex {
            return Err(BadEntityId(s.to_owned()));
        }
        u128::from_str_radix(s, 16)
            .map(Self)
            .map_err(|_| BadEntityId(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FormatClass {
    Structured,
    SemiStructured,
    Unstructured,
}

impl FormatClass {
    pub const ALL: [FormatClass; 3] = [
        FormatClass::Structured,
        FormatClass::SemiStructured,
        FormatClass::Unstructured,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormatClass::Structured => "Structured",
            FormatClass::SemiStructured => "SemiStructured",
            FormatClass::Unstructured => "Unstructured",
        }
    }
}

impl fmt::Display for FormatClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormatClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "structured" => Ok(FormatClass::Structured),
            "semistructured" | "semi" => Ok(FormatClass::SemiStructured),
            "unstructured" => Ok(FormatClass::Unstructured),
            _ => Err(format!("unknown format class `{s}`")),
        }
    }
}

/// One stored entity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataEntity {
    pub id: EntityId,
    pub payload: Arc<[u8]>,
    pub format: FormatClass,
    pub size_bytes: u64,
}

/// Manifest line for one entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityInfo {
    pub id: EntityId,
    pub format: FormatClass,
    pub size_bytes: u64,
    pub stored_at: u64,
}

impl EntityInfo {
    fn to_line(self) -> String {
        format!(
            "{}\t{}\t{}\t{}\n",
            self.id, self.format, self.size_bytes, self.stored_at
        )
    }

    fn from_line(line: &str) -> Option<Self> {
        let mut parts = line.split('\t');
        let id = parts.next()?.parse().ok()?;
        let format = parts.next()?.parse().ok()?;
        let size_bytes = parts.next()?.parse().ok()?;
        let stored_at = parts.next()?.parse().ok()?;
        if parts.next().is_some() {
            return None;
        }
        Some(Self {
            id,
            format,
            size_bytes,
            stored_at,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("entity {0} not found")]
    NotFound(EntityId),
    #[error("storage full: {used} + {requested} bytes exceeds capacity {capacity}")]
    StorageFull {
        used: u64,
        requested: u64,
        capacity: u64,
    },
    #[error("corrupt manifest line {line}: `{text}`")]
    CorruptManifest { line: usize, text: String },
    #[error("store i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Default)]
struct Index {
    order: Vec<EntityInfo>,
    by_id: HashMap<EntityId, usize>,
    used_bytes: u64,
    memory: HashMap<EntityId, Arc<[u8]>>,
}

/// The lake's blob store. Safe to share across threads.
#[derive(Debug)]
pub struct ObjectStore {
    root: Option<PathBuf>,
    capacity_bytes: u64,
    clock: Arc<dyn Clock>,
    index: RwLock<Index>,
    manifest: Mutex<Option<File>>,
    ids: Mutex<ChaCha20Rng>,
}

impl ObjectStore {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Self {
        Self {
            root: None,
            capacity_bytes: DEFAULT_CAPACITY_BYTES,
            clock,
            index: RwLock::default(),
            manifest: Mutex::new(None),
            ids: Mutex::new(ChaCha20Rng::from_os_rng()),
        }
    }

    /// Open (or create) a store rooted at `root`, replaying its manifest.
    pub fn open(root: impl AsRef<Path>, clock: Arc<dyn Clock>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("objects"))?;
        let manifest_path = root.join(MANIFEST);
        let mut index = Index::default();
        if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path)?;
            for (line_no, line) in crate::kv::complete_lines(&text) {
                let info =
                    EntityInfo::from_line(line).ok_or_else(|| StoreError::CorruptManifest {
                        line: line_no,
                        text: line.to_owned(),
                    })?;
                let pos = index.order.len();
                index.by_id.insert(info.id, pos);
                index.used_bytes += info.size_bytes;
                index.order.push(info);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest_path)?;
        Ok(Self {
            root: Some(root),
            capacity_bytes: DEFAULT_CAPACITY_BYTES,
            clock,
            index: RwLock::new(index),
            manifest: Mutex::new(Some(file)),
            ids: Mutex::new(ChaCha20Rng::from_os_rng()),
        })
    }

    pub fn with_capacity(mut self, bytes: u64) -> Self {
        self.capacity_bytes = bytes;
        self
    }

    /// Draw ids from a seeded generator instead of OS entropy.
    pub fn with_id_seed(self, seed: u64) -> Self {
        *self.ids.lock().expect("id lock") = ChaCha20Rng::seed_from_u64(seed);
        self
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn object_path(root: &Path, id: EntityId) -> PathBuf {
        let hex = id.to_string();
        root.join("objects").join(&hex[..2]).join(hex)
    }

    fn fresh_id(&self) -> EntityId {
        let mut rng = self.ids.lock().expect("id lock");
        let index = self.index.read().expect("index lock");
        loop {
            let mut bytes = [0u8; 16];
            rng.fill_bytes(&mut bytes);
            let id = EntityId(u128::from_be_bytes(bytes));
            if !index.by_id.contains_key(&id) {
                return id;
            }
        }
    }

    /// Store `payload` verbatim and return its new id.
    pub fn put(&self, payload: &[u8], format: FormatClass) -> Result<EntityId, StoreError> {
        let size = payload.len() as u64;
        {
            let index = self.index.read().expect("index lock");
            if index.used_bytes + size > self.capacity_bytes {
                return Err(StoreError::StorageFull {
                    used: index.used_bytes,
                    requested: size,
                    capacity: self.capacity_bytes,
                });
            }
        }
        let id = self.fresh_id();
        self.clock.charge(Work::StoreWrite {
            bytes: payload.len(),
        });

        let mut written = None;
        if let Some(root) = &self.root {
            let path = Self::object_path(root, id);
            fs::create_dir_all(path.parent().expect("object dir"))?;
            let tmp = path.with_extension("tmp");
            {
                let mut f = File::create(&tmp)?;
                f.write_all(payload)?;
                f.sync_data()?;
            }
            fs::rename(&tmp, &path)?;
            written = Some(path);
        }

        let mut manifest = self.manifest.lock().expect("manifest lock");
        let mut index = self.index.write().expect("index lock");
        if index.used_bytes + size > self.capacity_bytes {
            if let Some(path) = written {
                let _ = fs::remove_file(path);
            }
            return Err(StoreError::StorageFull {
                used: index.used_bytes,
                requested: size,
                capacity: self.capacity_bytes,
            });
        }
        let info = EntityInfo {
            id,
            format,
            size_bytes: size,
            stored_at: self.clock.now_millis(),
        };
        if let Some(file) = manifest.as_mut() {
            file.write_all(info.to_line().as_bytes())?;
            file.flush()?;
        } else {
            index.memory.insert(id, Arc::from(payload));
        }
        let pos = index.order.len();
        index.by_id.insert(id, pos);
        index.used_bytes += size;
        index.order.push(info);
        Ok(id)
    }

    pub fn get(&self, id: EntityId) -> Result<DataEntity, StoreError> {
        let (info, mem) = {
            let index = self.index.read().expect("index lock");
            let pos = *index.by_id.get(&id).ok_or(StoreError::NotFound(id))?;
            (index.order[pos], index.memory.get(&id).cloned())
        };
        let payload = match (mem, &self.root) {
            (Some(bytes), _) => bytes,
            (None, Some(root)) => Arc::from(fs::read(Self::object_path(root, id))?),
            (None, None) => return Err(StoreError::NotFound(id)),
        };
        Ok(DataEntity {
            id,
            payload,
            format: info.format,
            size_bytes: info.size_bytes,
        })
    }

    pub fn info(&self, id: EntityId) -> Option<EntityInfo> {
        let index = self.index.read().expect("index lock");
        index.by_id.get(&id).map(|&pos| index.order[pos])
    }

    pub fn contains(&self, id: EntityId) -> bool {
        self.index
            .read()
            .expect("index lock")
            .by_id
            .contains_key(&id)
    }

    /// Entities in insertion order, optionally restricted to one format.
    pub fn list(&self, filter: Option<FormatClass>) -> Vec<EntityInfo> {
        self.index
            .read()
            .expect("index lock")
            .order
            .iter()
            .filter(|e| filter.is_none_or(|f| e.format == f))
            .copied()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("index lock").order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn used_bytes(&self) -> u64 {
        self.index.read().expect("index lock").used_bytes
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;
    use std::collections::HashSet;

    fn clock() -> Arc<dyn Clock> {
        Arc::new(SimClock::new(1_000))
    }

    #[test]
    fn id_renders_as_32_lowercase_hex() {
        let id = EntityId::from_u128(0xAB);
        let s = id.to_string();
        assert_eq!(s.len(), 32);
        assert_eq!(s, "000000000000000000000000000000ab");
        assert_eq!(s.parse::<EntityId>().unwrap(), id);
        assert!("000000000000000000000000000000AB"
            .parse::<EntityId>()
            .is_err());
        assert!("abc".parse::<EntityId>().is_err());
    }

    #[test]
    fn empty_payload_round_trips() {
        let store = ObjectStore::in_memory(clock());
        let id = store.put(b"", FormatClass::Unstructured).unwrap();
        let e = store.get(id).unwrap();
        assert!(e.payload.is_empty());
        assert_eq!(e.size_bytes, 0);
    }

    #[test]
    fn duplicates_get_distinct_ids() {
        let store = ObjectStore::in_memory(clock());
        let a = store.put(b"x", FormatClass::Structured).unwrap();
        let b = store.put(b"x", FormatClass::Structured).unwrap();
        assert_ne!(a, b);
        assert_eq!(store.len(), 2);
    }

    #[test]
    fn unknown_id_is_not_found() {
        let store = ObjectStore::in_memory(clock());
        assert!(matches!(
            store.get(EntityId::from_u128(7)),
            Err(StoreError::NotFound(_))
        ));
    }

    #[test]
    fn capacity_is_enforced() {
        let store = ObjectStore::in_memory(clock()).with_capacity(4);
        store.put(b"abc", FormatClass::Unstructured).unwrap();
        assert!(matches!(
            store.put(b"de", FormatClass::Unstructured),
            Err(StoreError::StorageFull { used: 3, .. })
        ));
        store.put(b"d", FormatClass::Unstructured).unwrap();
    }

    #[test]
    fn list_filters_by_format_in_insertion_order() {
        let store = ObjectStore::in_memory(clock());
        let a = store.put(b"a,b", FormatClass::Structured).unwrap();
        store.put(b"note", FormatClass::Unstructured).unwrap();
        let c = store.put(b"c,d", FormatClass::Structured).unwrap();
        let ids: Vec<_> = store
            .list(Some(FormatClass::Structured))
            .iter()
            .map(|e| e.id)
            .collect();
        assert_eq!(ids, [a, c]);
        assert!(ObjectStore::in_memory(clock()).list(None).is_empty());
    }

    #[test]
    fn persisted_layout_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let ids: Vec<_> = {
            let store = ObjectStore::open(dir.path(), clock()).unwrap();
            (0..5u8)
                .map(|i| store.put(&[i; 3], FormatClass::Structured).unwrap())
                .collect()
        };
        let hex = ids[0].to_string();
        assert!(dir
            .path()
            .join("objects")
            .join(&hex[..2])
            .join(&hex)
            .is_file());
        let manifest = fs::read_to_string(dir.path().join(MANIFEST)).unwrap();
        let first: Vec<_> = manifest.lines().next().unwrap().split('\t').collect();
        assert_eq!(first, [hex.as_str(), "Structured", "3", "1000"]);

        let store = ObjectStore::open(dir.path(), clock()).unwrap();
        let listed: Vec<_> = store.list(None).iter().map(|e| e.id).collect();
        assert_eq!(listed, ids);
        assert_eq!(&*store.get(ids[3]).unwrap().payload, &[3u8; 3]);
        assert_eq!(store.used_bytes(), 15);
    }

    #[test]
    fn concurrent_writers_never_collide() {
        let store = Arc::new(ObjectStore::in_memory(clock()));
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let store = Arc::clone(&store);
                std::thread::spawn(move || {
                    (0..250)
                        .map(|i| {
                            store
                                .put(format!("{t}-{i}").as_bytes(), FormatClass::Unstructured)
                                .unwrap()
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let all: HashSet<_> = handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect();
        assert_eq!(all.len(), 1_000);
        assert_eq!(store.len(), 1_000);
    }
}
