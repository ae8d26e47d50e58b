//! Append-only-log backed store.
//!
//! Layout: one file per collection, `<dir>/<collection>.log`. Each record is
//! a little-endian `u32` byte length followed by that many bytes of UTF-8
//! JSON `{"key":..,"version":..,"body":..}`. Replaying the log in order
//! rebuilds the collection; the last record for a key wins.
//!
//! A torn tail (short length prefix, short payload or unparsable JSON in
//! the final record) is truncated on open. A bad record followed by further
//! valid data is reported as corruption instead.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::table::Table;
use super::{platform_schema, CollectionSpec, Document, DocumentStore, Query, StoreError, StoreResult};

/// How far a write is pushed before it is acknowledged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SyncMode {
    /// Written to the OS; survives a process crash.
    #[default]
    Flush,
    /// `fsync` after every record; survives power loss.
    Fsync,
}

#[derive(Debug, Clone)]
pub struct FileStoreOptions {
    pub sync: SyncMode,
    /// Compact once the log holds this many records and at least twice as
    /// many records as live documents.
    pub compact_min_records: usize,
}

impl Default for FileStoreOptions {
    fn default() -> Self {
        Self {
            sync: SyncMode::Flush,
            compact_min_records: 4096,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Record {
    key: String,
    version: u64,
    body: Value,
}

struct Log {
    path: PathBuf,
    out: BufWriter<File>,
    records: usize,
}

struct Collection {
    table: Table,
    log: Mutex<Log>,
}

pub struct FileStore {
    dir: PathBuf,
    opts: FileStoreOptions,
    collections: HashMap<String, Collection>,
}

impl std::fmt::Debug for FileStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FileStore").field("dir", &self.dir).finish()
    }
}

impl FileStore {
    pub fn open(dir: impl AsRef<Path>, schema: Vec<CollectionSpec>) -> StoreResult<Self> {
        Self::open_with(dir, schema, FileStoreOptions::default())
    }

    pub fn open_platform(dir: impl AsRef<Path>) -> StoreResult<Self> {
        Self::open(dir, platform_schema())
    }

    pub fn open_with(
        dir: impl AsRef<Path>,
        schema: Vec<CollectionSpec>,
        opts: FileStoreOptions,
    ) -> StoreResult<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut collections = HashMap::new();
        for spec in schema {
            let path = dir.join(format!("{}.log", spec.name));
            let (docs, records) = replay(&path, &spec.name)?;
            let file = OpenOptions::new().create(true).append(true).open(&path)?;
            let table = Table::new(spec);
            *table.docs.write() = docs;
            collections.insert(
                table.spec.name.clone(),
                Collection {
                    table,
                    log: Mutex::new(Log {
                        path,
                        out: BufWriter::new(file),
                        records,
                    }),
                },
            );
        }
        Ok(Self {
            dir,
            opts,
            collections,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn collection(&self, name: &str) -> StoreResult<&Collection> {
        self.collections
            .get(name)
            .ok_or_else(|| StoreError::UnknownCollection(name.to_string()))
    }

    fn write(&self, collection: &str, key: &str, expected: Option<u64>, body: Value) -> StoreResult<u64> {
        let c = self.collection(collection)?;
        let mut docs = c.table.docs.write();
        let version = c.table.next_version(&docs, key, expected)?;
        let mut log = c.log.lock();
        append(&mut log.out, key, version, &body, self.opts.sync)?;
        log.records += 1;
        Table::install(&mut docs, collection, key, body, version);
        if log.records >= self.opts.compact_min_records && log.records >= 2 * docs.len() {
            compact(&mut log, &docs, self.opts.sync)?;
        }
        Ok(version)
    }

    /// Rewrites every collection log to hold only live documents.
    pub fn compact_all(&self) -> StoreResult<()> {
        for c in self.collections.values() {
            let docs = c.table.docs.read();
            let mut log = c.log.lock();
            compact(&mut log, &docs, self.opts.sync)?;
        }
        Ok(())
    }
}

fn append(out: &mut BufWriter<File>, key: &str, version: u64, body: &Value, sync: SyncMode) -> StoreResult<()> {
    let bytes = serde_json::to_vec(&Record {
        key: key.to_string(),
        version,
        body: body.clone(),
    })?;
    let len = u32::try_from(bytes.len()).map_err(|_| {
        std::io::Error::new(std::io::ErrorKind::InvalidInput, "record exceeds 4 GiB")
    })?;
    out.write_all(&len.to_le_bytes())?;
    out.write_all(&bytes)?;
    out.flush()?;
    if sync == SyncMode::Fsync {
        out.get_ref().sync_data()?;
    }
    Ok(())
}

fn compact(log: &mut Log, docs: &BTreeMap<String, Document>, sync: SyncMode) -> StoreResult<()> {
    let tmp = log.path.with_extension("log.compact");
    {
        let mut out = BufWriter::new(File::create(&tmp)?);
        for doc in docs.values() {
            append(&mut out, &doc.key, doc.version, &doc.body, SyncMode::Flush)?;
        }
        out.get_ref().sync_all()?;
    }
    fs::rename(&tmp, &log.path)?;
    let file = OpenOptions::new().append(true).open(&log.path)?;
    if sync == SyncMode::Fsync {
        file.sync_all()?;
    }
    log.out = BufWriter::new(file);
    log.records = docs.len();
    Ok(())
}

fn replay(path: &Path, collection: &str) -> StoreResult<(BTreeMap<String, Document>, usize)> {
    let mut docs = BTreeMap::new();
    let mut bytes = Vec::new();
    match File::open(path) {
        Ok(mut f) => {
            f.read_to_end(&mut bytes)?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((docs, 0)),
        Err(e) => return Err(e.into()),
    }

    let mut pos = 0usize;
    let mut records = 0usize;
    let mut torn_at = None;
    while pos < bytes.len() {
        let Some(header) = bytes.get(pos..pos + 4) else {
            torn_at = Some(pos);
            break;
        };
        let len = u32::from_le_bytes(header.try_into().expect("4-byte slice")) as usize;
        let Some(payload) = bytes.get(pos + 4..pos + 4 + len) else {
            torn_at = Some(pos);
            break;
        };
        match serde_json::from_slice::<Record>(payload) {
            Ok(rec) => {
                Table::install(&mut docs, collection, &rec.key, rec.body, rec.version);
                records += 1;
                pos += 4 + len;
            }
            Err(_) if pos + 4 + len == bytes.len() => {
                torn_at = Some(pos);
                break;
            }
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.display().to_string(),
                    reason: format!("record at byte {pos}: {e}"),
                })
            }
        }
    }

    if let Some(at) = torn_at {
        let f = OpenOptions::new().write(true).open(path)?;
        f.set_len(at as u64)?;
        f.sync_all()?;
    }
    Ok((docs, records))
}

impl DocumentStore for FileStore {
    fn put(&self, collection: &str, key: &str, body: Value) -> StoreResult<u64> {
        self.write(collection, key, None, body)
    }

    fn get(&self, collection: &str, key: &str) -> StoreResult<Option<Document>> {
        Ok(self.collection(collection)?.table.get(key))
    }

    fn query(&self, collection: &str, query: &Query) -> StoreResult<Vec<Document>> {
        self.collection(collection)?.table.query(query)
    }

    fn compare_and_put(&self, collection: &str, key: &str, expected: u64, body: Value) -> StoreResult<u64> {
        self.write(collection, key, Some(expected), body)
    }
}
