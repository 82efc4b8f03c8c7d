//! On-disk entity cache: one JSON document per QID under `entities/`, plus
//! an `index.json` listing what is stored.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::client::{WikidataClient, WikidataError};
use super::record::EntityRecord;
use crate::locale::Locale;
use crate::qid::Qid;

type Slot = Arc<Mutex<Option<Arc<EntityRecord>>>>;

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    qid: Qid,
    retrieved_at: DateTime<Utc>,
}

/// Result of a cache lookup.
#[derive(Debug, Clone)]
pub struct Lookup {
    pub record: Arc<EntityRecord>,
    pub from_cache: bool,
    /// Set when the freshly fetched record could not be written to disk.
    pub persist_error: Option<String>,
}

#[derive(Debug)]
pub struct EntityCache {
    storage_path: Option<PathBuf>,
    slots: Mutex<HashMap<Qid, Slot>>,
    index_lock: Mutex<()>,
}

impl EntityCache {
    pub fn in_memory() -> Self {
        EntityCache {
            storage_path: None,
            slots: Mutex::new(HashMap::new()),
            index_lock: Mutex::new(()),
        }
    }

    /// Opens (creating if needed) a cache directory. Unreadable entries are
    /// skipped and returned as warnings.
    pub fn open(dir: &Path) -> io::Result<(Self, Vec<String>)> {
        let entities = dir.join("entities");
        fs::create_dir_all(&entities)?;
        let mut slots = HashMap::new();
        let mut warnings = Vec::new();
        for entry in fs::read_dir(&entities)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let parsed = fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|text| {
                    serde_json::from_str::<EntityRecord>(&text).map_err(|e| e.to_string())
                });
            match parsed {
                Ok(record) => {
                    slots.insert(
                        record.qid.clone(),
                        Arc::new(Mutex::new(Some(Arc::new(record)))),
                    );
                }
                Err(e) => warnings.push(format!("skipping {}: {e}", path.display())),
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        let cache = EntityCache {
            storage_path: Some(dir.to_path_buf()),
            slots: Mutex::new(slots),
            index_lock: Mutex::new(()),
        };
        Ok((cache, warnings))
    }

    pub fn storage_path(&self) -> Option<&Path> {
        self.storage_path.as_deref()
    }

    fn slot(&self, qid: &Qid) -> Slot {
        let mut slots = self.slots.lock().expect("cache slots lock");
        slots.entry(qid.clone()).or_default().clone()
    }

    pub fn get(&self, qid: &Qid) -> Option<Arc<EntityRecord>> {
        let slot = self
            .slots
            .lock()
            .expect("cache slots lock")
            .get(qid)
            .cloned()?;
        let guard = slot.lock().expect("cache slot lock");
        guard.clone()
    }

    pub fn len(&self) -> usize {
        self.snapshot().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All stored records, ordered by QID.
    pub fn snapshot(&self) -> BTreeMap<Qid, Arc<EntityRecord>> {
        let slots: Vec<(Qid, Slot)> = self
            .slots
            .lock()
            .expect("cache slots lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        slots
            .into_iter()
            .filter_map(|(qid, slot)| {
                let record = slot.lock().expect("cache slot lock").clone()?;
                Some((qid, record))
            })
            .collect()
    }

    /// Stores a record in memory and on disk.
    pub fn insert(&self, record: EntityRecord) -> io::Result<Arc<EntityRecord>> {
        let record = Arc::new(record);
        let slot = self.slot(&record.qid);
        *slot.lock().expect("cache slot lock") = Some(record.clone());
        self.persist(&record)?;
        Ok(record)
    }

    /// Returns the cached record, or fetches, stores and persists it.
    ///
    /// Concurrent misses for one QID wait on the same slot, so only the
    /// first caller reaches the network.
    pub fn get_or_fetch(
        &self,
        client: &WikidataClient,
        qid: &Qid,
        locales: &[Locale],
    ) -> Result<Lookup, WikidataError> {
        let slot = self.slot(qid);
        let mut guard = slot.lock().expect("cache slot lock");
        if let Some(record) = guard.as_ref() {
            return Ok(Lookup {
                record: record.clone(),
                from_cache: true,
                persist_error: None,
            });
        }
        let record = Arc::new(client.fetch_entity(qid, locales)?);
        *guard = Some(record.clone());
        drop(guard);
        let persist_error = self.persist(&record).err().map(|e| {
            log::error!("failed to persist {qid}: {e}");
            e.to_string()
        });
        Ok(Lookup {
            record,
            from_cache: false,
            persist_error,
        })
    }

    fn persist(&self, record: &EntityRecord) -> io::Result<()> {
        let Some(dir) = &self.storage_path else {
            return Ok(());
        };
        let text = serde_json::to_string_pretty(record).map_err(io::Error::other)?;
        let path = dir.join("entities").join(format!("{}.json", record.qid));
        write_atomic(&path, text.as_bytes())?;

        let _index = self.index_lock.lock().expect("index lock");
        let index: Vec<IndexEntry> = self
            .snapshot()
            .into_values()
            .map(|r| IndexEntry {
                qid: r.qid.clone(),
                retrieved_at: r.retrieved_at,
            })
            .collect();
        let text = serde_json::to_string_pretty(&index).map_err(io::Error::other)?;
        write_atomic(&dir.join("index.json"), text.as_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
