//! Append-only JSON-lines run ledger.
//!
//! Line 1 is a header naming the experiment and the config and prompt
//! template hashes. Every further line is one scored provider call, keyed by
//! (shot count, repetition or permutation index, item position). Reopening a
//! ledger with a different config is refused; a torn final line left by a
//! crash is cut off.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::ItemRef;
use crate::metrics::MetricReport;

#[derive(Debug, thiserror::Error)]
pub enum LedgerError {
    #[error("ledger {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ledger {path} line {line}: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("ledger {path} belongs to another run ({field}: ledger {found}, config {expected})")]
    HashMismatch {
        path: String,
        field: &'static str,
        found: String,
        expected: String,
    },
    #[error("duplicate ledger row for {0:?}")]
    Duplicate(RowKey),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ShotSweep,
    PermutationSweep,
    FinalEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerHeader {
    pub kind: String,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub prompt_hash: String,
    pub config: serde_json::Value,
}

impl LedgerHeader {
    pub fn new(experiment: ExperimentKind, config_hash: &str, prompt_hash: &str, config: serde_json::Value) -> Self {
        Self {
            kind: "header".into(),
            experiment,
            config_hash: config_hash.to_string(),
            prompt_hash: prompt_hash.to_string(),
            config,
        }
    }
}

/// (shots, repetition or permutation index, item position).
pub type RowKey = (usize, u64, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub kind: String,
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub prompt_hash: String,
    pub shots: usize,
    /// Repetition index for shot sweeps and final evaluation, lexicographic
    /// permutation rank for permutation sweeps.
    pub index: u64,
    pub position: usize,
    pub item: ItemRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
    pub reference: String,
    pub response: String,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub report: MetricReport,
    pub started_at: f64,
    pub finished_at: f64,
}

impl LedgerRow {
    pub fn key(&self) -> RowKey {
        (self.shots, self.index, self.position)
    }

    /// The row with wall-clock fields zeroed, for comparing runs.
    pub fn without_timing(&self) -> LedgerRow {
        LedgerRow {
            started_at: 0.0,
            finished_at: 0.0,
            ..self.clone()
        }
    }
}

pub struct Ledger {
    path: PathBuf,
    header: LedgerHeader,
    rows: HashMap<RowKey, LedgerRow>,
    file: File,
}

impl Ledger {
    /// Open or create the ledger at `path` for a run described by `header`.
    pub fn open(path: impl AsRef<Path>, header: LedgerHeader) -> Result<Self, LedgerError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| LedgerError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let existing = match std::fs::metadata(&path) {
            Ok(m) if m.len() > 0 => true,
            Ok(_) => false,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => false,
            Err(e) => return Err(io(e)),
        };
        if !existing {
            let mut file = File::create(&path).map_err(io)?;
            let mut line = serde_json::to_string(&header).expect("header serializes");
            line.push('\n');
            file.write_all(line.as_bytes()).and_then(|_| file.flush()).map_err(io)?;
            return Ok(Self {
                path,
                header,
                rows: HashMap::new(),
                file,
            });
        }

        let (found, rows, good_len) = read_ledger(&path)?;
        for (field, found, expected) in [
            ("config_hash", &found.config_hash, &header.config_hash),
            ("prompt_hash", &found.prompt_hash, &header.prompt_hash),
        ] {
            if found != expected {
                return Err(LedgerError::HashMismatch {
                    path: path.display().to_string(),
                    field,
                    found: found.clone(),
                    expected: expected.clone(),
                });
            }
        }
        let file = OpenOptions::new().write(true).open(&path).map_err(io)?;
        if file.metadata().map_err(io)?.len() != good_len {
            log::warn!("{}: dropping torn final line", path.display());
            file.set_len(good_len).map_err(io)?;
        }
        let file = OpenOptions::new().append(true).open(&path).map_err(io)?;
        Ok(Self {
            path,
            header: found,
            rows: rows.into_iter().map(|r| (r.key(), r)).collect(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn header(&self) -> &LedgerHeader {
        &self.header
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, key: &RowKey) -> Option<&LedgerRow> {
        self.rows.get(key)
    }

    pub fn contains(&self, key: &RowKey) -> bool {
        self.rows.contains_key(key)
    }

    pub fn append(&mut self, row: LedgerRow) -> Result<(), LedgerError> {
        if self.rows.contains_key(&row.key()) {
            return Err(LedgerError::Duplicate(row.key()));
        }
        let mut line = serde_json::to_string(&row).expect("row serializes");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|source| LedgerError::Io {
                path: self.path.display().to_string(),
                source,
            })?;
        self.rows.insert(row.key(), row);
        Ok(())
    }
}

/// Header, rows in file order, and the byte length of the intact prefix.
fn read_ledger(path: &Path) -> Result<(LedgerHeader, Vec<LedgerRow>, u64), LedgerError> {
    let io = |source| LedgerError::Io {
        path: path.display().to_string(),
        source,
    };
    let corrupt = |line: usize, message: String| LedgerError::Corrupt {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut header: Option<LedgerHeader> = None;
    let mut rows = Vec::new();
    let mut good_len = 0u64;
    let mut n = 0;
    loop {
        let mut buf = String::new();
        let read = reader.read_line(&mut buf).map_err(io)?;
        if read == 0 {
            break;
        }
        n += 1;
        if !buf.ends_with('\n') {
            // Only the final line can be torn, and never the header.
            if header.is_none() {
                return Err(corrupt(n, "truncated header".into()));
            }
            break;
        }
        let line = buf.trim_end();
        if header.is_none() {
            header = Some(serde_json::from_str(line).map_err(|e| corrupt(n, e.to_string()))?);
        } else {
            rows.push(serde_json::from_str(line).map_err(|e| corrupt(n, e.to_string()))?);
        }
        good_len += read as u64;
    }
    let header = header.ok_or_else(|| corrupt(1, "missing header".into()))?;
    Ok((header, rows, good_len))
}

/// Header and rows of a ledger file, for replay and reporting.
pub fn load_ledger(path: impl AsRef<Path>) -> Result<(LedgerHeader, Vec<LedgerRow>), LedgerError> {
    let (header, rows, _) = read_ledger(path.as_ref())?;
    let mut seen = std::collections::HashSet::new();
    for r in &rows {
        if !seen.insert(r.key()) {
            return Err(LedgerError::Duplicate(r.key()));
        }
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TokenRange;

    fn header(hash: &str) -> LedgerHeader {
        LedgerHeader::new(ExperimentKind::ShotSweep, hash, "p", serde_json::json!({"a": 1}))
    }

    fn row(shots: usize, index: u64, position: usize) -> LedgerRow {
        LedgerRow {
            kind: "row".into(),
            experiment: ExperimentKind::ShotSweep,
            config_hash: "c".into(),
            prompt_hash: "p".into(),
            shots,
            index,
            position,
            item: ItemRef {
                scenario_id: "s".into(),
                sentence_index: position,
                verb_range: TokenRange::single(0),
            },
            ordering: None,
            reference: "User gets x".into(),
            response: "User gets x".into(),
            failed: false,
            error: None,
            report: MetricReport::ZERO,
            started_at: 1.5,
            finished_at: 2.0,
        }
    }

    #[test]
    fn reopen_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        {
            let mut l = Ledger::open(&p, header("c")).unwrap();
            l.append(row(0, 0, 0)).unwrap();
            l.append(row(0, 0, 1)).unwrap();
            assert!(matches!(l.append(row(0, 0, 1)), Err(LedgerError::Duplicate(_))));
        }
        let mut l = Ledger::open(&p, header("c")).unwrap();
        assert_eq!(l.len(), 2);
        assert!(l.contains(&(0, 0, 1)));
        l.append(row(1, 0, 0)).unwrap();
        let (_, rows) = load_ledger(&p).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(matches!(Ledger::open(&p, header("other")), Err(LedgerError::HashMismatch { .. })));
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        {
            let mut l = Ledger::open(&p, header("c")).unwrap();
            l.append(row(0, 0, 0)).unwrap();
        }
        let full = serde_json::to_string(&row(0, 0, 1)).unwrap();
        let mut f = OpenOptions::new().append(true).open(&p).unwrap();
        f.write_all(&full.as_bytes()[..full.len() / 2]).unwrap();
        drop(f);
        let mut l = Ledger::open(&p, header("c")).unwrap();
        assert_eq!(l.len(), 1);
        l.append(row(0, 0, 1)).unwrap();
        let (_, rows) = load_ledger(&p).unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.jsonl");
        let h = serde_json::to_string(&header("c")).unwrap();
        let r = serde_json::to_string(&row(0, 0, 0)).unwrap();
        std::fs::write(&p, format!("{h}\ngarbage\n{r}\n")).unwrap();
        assert!(matches!(Ledger::open(&p, header("c")), Err(LedgerError::Corrupt { line: 2, .. })));
    }
}
