use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::hashing::sha256_hex;

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One cached response. `checksum` covers the other fields so a damaged line
/// is detected and ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_id: String,
    pub response: String,
    pub timestamp: f64,
    pub checksum: String,
}

impl CacheEntry {
    pub fn new(key: String, model_id: &str, response: &str, timestamp: f64) -> Self {
        let checksum = entry_checksum(&key, model_id, response, timestamp);
        Self {
            key,
            model_id: model_id.to_string(),
            response: response.to_string(),
            timestamp,
            checksum,
        }
    }

    pub fn is_intact(&self) -> bool {
        self.checksum == entry_checksum(&self.key, &self.model_id, &self.response, self.timestamp)
    }
}

fn entry_checksum(key: &str, model_id: &str, response: &str, timestamp: f64) -> String {
    sha256_hex(serde_json::to_vec(&(key, model_id, response, timestamp)).expect("tuple serializes"))
}

/// Append-only JSON-lines response cache. Lines are appended whole under a
/// lock and flushed; entries are never rewritten. Unreadable lines are logged
/// and treated as misses.
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: Mutex<HashMap<String, CacheEntry>>,
    file: Mutex<Option<File>>,
    corrupt_lines: usize,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: Mutex::new(HashMap::new()),
            file: Mutex::new(None),
            corrupt_lines: 0,
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| CacheError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)
            .map_err(io)?;
        let mut entries = HashMap::new();
        let mut corrupt_lines = 0;
        for (n, line) in BufReader::new(&file).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CacheEntry>(&line) {
                Ok(e) if e.is_intact() => {
                    entries.entry(e.key.clone()).or_insert(e);
                }
                _ => {
                    corrupt_lines += 1;
                    log::warn!("{}:{}: unreadable cache line ignored", path.display(), n + 1);
                }
            }
        }
        // A torn final line must not swallow the next append.
        let len = file.metadata().map_err(io)?.len();
        if len > 0 {
            let mut last = [0u8; 1];
            file.seek(SeekFrom::Start(len - 1)).map_err(io)?;
            file.read_exact(&mut last).map_err(io)?;
            if last[0] != b'\n' {
                file.write_all(b"\n").map_err(io)?;
            }
        }
        Ok(Self {
            path: Some(path),
            entries: Mutex::new(entries),
            file: Mutex::new(Some(file)),
            corrupt_lines,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn corrupt_lines(&self) -> usize {
        self.corrupt_lines
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<CacheEntry> {
        self.entries.lock().expect("cache lock").get(key).cloned()
    }

    /// Store an entry. A key already present keeps its first entry.
    pub fn put(&self, entry: CacheEntry) -> Result<(), CacheError> {
        let mut file = self.file.lock().expect("cache file lock");
        if self.entries.lock().expect("cache lock").contains_key(&entry.key) {
            return Ok(());
        }
        if let Some(f) = file.as_mut() {
            let mut line = serde_json::to_string(&entry).expect("entry serializes");
            line.push('\n');
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|source| CacheError::Io {
                    path: self.path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
                    source,
                })?;
        }
        self.entries.lock().expect("cache lock").insert(entry.key.clone(), entry);
        Ok(())
    }
}
