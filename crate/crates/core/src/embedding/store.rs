//! Content-addressed embedding store persisted as JSON Lines.
//!
//! One record per line, append-only. On load, a later line for the same
//! `(content_id, model_id)` replaces an earlier one. Vector components are
//! written with 17 significant digits so every `f64` survives a reload bit
//! for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbeddingError, Result};
use crate::scores::{EmbeddingVector, Modality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub content_id: String,
    pub kind: Modality,
    pub model_id: String,
    pub dim: usize,
    pub vector: Vec<f64>,
    pub source_id: String,
}

impl StoreRecord {
    fn check(&self) -> std::result::Result<(), String> {
        if self.dim == 0 {
            return Err("dim must be positive".into());
        }
        if self.vector.len() != self.dim {
            return Err(format!(
                "vector has {} values, dim says {}",
                self.vector.len(),
                self.dim
            ));
        }
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err("vector contains a non-finite value".into());
        }
        Ok(())
    }

    /// One JSON line without the trailing newline.
    pub fn to_json_line(&self) -> String {
        let quote = |s: &str| serde_json::to_string(s).expect("string serializes");
        let kind = match self.kind {
            Modality::Text => "text",
            Modality::Image => "image",
        };
        let mut line = format!(
            "{{\"content_id\":{},\"kind\":\"{kind}\",\"model_id\":{},\"dim\":{},\"source_id\":{},\"vector\":[",
            quote(&self.content_id),
            quote(&self.model_id),
            self.dim,
            quote(&self.source_id),
        );
        for (i, v) in self.vector.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            write!(line, "{v:.16e}").expect("writing to a String");
        }
        line.push_str("]}");
        line
    }
}

type Key = (String, String);

#[derive(Debug)]
pub struct EmbeddingStore {
    path: Option<PathBuf>,
    records: BTreeMap<Key, StoreRecord>,
    writer: Option<File>,
}

impl Default for EmbeddingStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl EmbeddingStore {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            records: BTreeMap::new(),
            writer: None,
        }
    }

    /// Loads the store at `path`; a missing file is an empty store that will
    /// be created on the first insert.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut store = Self {
            path: Some(path.clone()),
            records: BTreeMap::new(),
            writer: None,
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(store),
            Err(source) => return Err(EmbeddingError::Io { path, source }),
        };
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| EmbeddingError::Io {
                path: path.clone(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let invalid = |message: String| EmbeddingError::InvalidRecord {
                path: path.clone(),
                line: i + 1,
                message,
            };
            let record: StoreRecord =
                serde_json::from_str(&line).map_err(|e| invalid(e.to_string()))?;
            record.check().map_err(invalid)?;
            store.records.insert(
                (record.content_id.clone(), record.model_id.clone()),
                record,
            );
        }
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Adds or replaces a record, appending it to the backing file if any.
    pub fn insert(&mut self, record: StoreRecord) -> Result<()> {
        record.check().map_err(|message| EmbeddingError::InvalidRecord {
            path: self.path.clone().unwrap_or_default(),
            line: 0,
            message,
        })?;
        if let Some(path) = &self.path {
            if self.writer.is_none() {
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|source| EmbeddingError::Io {
                        path: path.clone(),
                        source,
                    })?;
                self.writer = Some(file);
            }
            let writer = self.writer.as_mut().expect("writer opened above");
            let mut line = record.to_json_line();
            line.push('\n');
            writer
                .write_all(line.as_bytes())
                .map_err(|source| EmbeddingError::Io {
                    path: path.clone(),
                    source,
                })?;
        }
        self.records
            .insert((record.content_id.clone(), record.model_id.clone()), record);
        Ok(())
    }

    /// Writes every record, sorted by key, to `path` (replacing its contents).
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for record in self.records.values() {
            out.push_str(&record.to_json_line());
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|source| EmbeddingError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &StoreRecord> {
        self.records.values()
    }

    pub fn contains(&self, content_id: &str, model_id: &str) -> bool {
        self.get(content_id, model_id).is_some()
    }

    pub fn get(&self, content_id: &str, model_id: &str) -> Option<&StoreRecord> {
        self.records
            .get(&(content_id.to_owned(), model_id.to_owned()))
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.records.keys().map(|(_, m)| m.as_str()).collect()
    }

    pub fn has_model(&self, model_id: &str) -> bool {
        self.records.keys().any(|(_, m)| m == model_id)
    }

    /// Dimension of the first stored record for `model_id`.
    pub fn dim_for(&self, model_id: &str) -> Option<usize> {
        self.records
            .values()
            .find(|r| r.model_id == model_id)
            .map(|r| r.dim)
    }

    /// The stored vector, tagged with the modality its kind implies.
    pub fn lookup(&self, content_id: &str, model_id: &str) -> Result<EmbeddingVector> {
        let record = self
            .get(content_id, model_id)
            .ok_or_else(|| EmbeddingError::NotFound {
                content_id: content_id.to_owned(),
                model_id: model_id.to_owned(),
            })?;
        Ok(EmbeddingVector::new(
            record.vector.clone(),
            record.kind,
            record.source_id.clone(),
        )?)
    }
}
