//! The model boundary: NDJSON logit tables, a pixel-prototype classifier
//! for self-contained runs, per-sample CoVer scoring and validation-set
//! corruption selection.
//!
//! One NDJSON line holds one `(sample, dimension)` record:
//!
//! ```text
//! {"sample_id":"cat/001.png","split":"id","dim":"fog:2","label":3,"logits":[0.12,-1.5]}
//! ```
//!
//! `label` is omitted for OOD samples. For the fused NegLabel/CLIPN scores
//! the `logits` array holds the K class logits followed by the M negative
//! logits, and [`ScoreConfig::neg_count`] gives M.

mod ndjson;
mod prototype;
mod select;

pub use ndjson::{read_logits, read_logits_path, write_logits, write_logits_path};
pub use prototype::{
    fit_prototype, fit_prototype_images, load_class_dataset, load_flat_dataset, prototype_logits, ClassDataset,
    PrototypeModel, DEFAULT_IMAGE_SIZE, DEFAULT_SCALE,
};
pub use select::{select_corruptions, RankedCandidate, SelectionResult};

use std::collections::HashMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruption::{CorruptionError, DimensionSet, DimensionTag};
use crate::metrics::{MetricsError, ScoredSplit, Split};
use crate::scoring::{oriented_cover_score, DimensionalLogits, LogitVector, ScoreConfig, ScoringError};

#[derive(Debug, Error)]
pub enum IngestionError {
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: expected {expected} logits, found {got}")]
    InconsistentK { line: usize, expected: usize, got: usize },
    #[error("duplicate record for sample `{sample_id}` in dimension `{dim}`")]
    DuplicateKey { sample_id: String, dim: String },
    #[error("sample `{sample_id}` has a non-finite logit in dimension `{dim}`")]
    NonFinite { sample_id: String, dim: String },
    #[error("sample `{sample_id}` is tagged both id and ood")]
    SplitConflict { sample_id: String },
    #[error("sample `{sample_id}` has no record for dimension `{dim}`")]
    MissingDimension { sample_id: String, dim: String },
    #[error("need at least 2 classes with images, found {0}")]
    TooFewClasses(usize),
    #[error("cannot decode image {path}: {message}")]
    UndecodableImage { path: PathBuf, message: String },
    #[error("image feature has zero norm after mean subtraction")]
    ZeroFeature,
    #[error("no samples to score")]
    EmptyTable,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Corruption(#[from] CorruptionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord {
    pub sample_id: String,
    pub split: Split,
    pub dim: DimensionTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub logits: Vec<f64>,
}

/// Records keyed by `(sample_id, dim)` with a common logit length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LogitTable {
    records: Vec<LogitRecord>,
    index: HashMap<(String, DimensionTag), usize>,
    k: usize,
}

impl LogitTable {
    pub fn new(records: Vec<LogitRecord>) -> Result<Self, IngestionError> {
        let mut table = LogitTable::default();
        for (i, r) in records.into_iter().enumerate() {
            table.push(r, i + 1)?;
        }
        Ok(table)
    }

    fn push(&mut self, r: LogitRecord, line: usize) -> Result<(), IngestionError> {
        if self.records.is_empty() {
            self.k = r.logits.len();
        } else if r.logits.len() != self.k {
            return Err(IngestionError::InconsistentK { line, expected: self.k, got: r.logits.len() });
        }
        if r.logits.iter().any(|v| !v.is_finite()) {
            return Err(IngestionError::NonFinite { sample_id: r.sample_id, dim: r.dim.to_string() });
        }
        let key = (r.sample_id.clone(), r.dim);
        if self.index.contains_key(&key) {
            return Err(IngestionError::DuplicateKey { sample_id: r.sample_id, dim: r.dim.to_string() });
        }
        self.index.insert(key, self.records.len());
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[LogitRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<LogitRecord> {
        self.records
    }

    /// Logit length shared by every record (0 for an empty table).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, sample_id: &str, dim: &DimensionTag) -> Option<&LogitRecord> {
        self.index.get(&(sample_id.to_string(), *dim)).map(|&i| &self.records[i])
    }

    /// Sample ids in order of first appearance, with their split.
    pub fn samples(&self) -> Result<Vec<(&str, Split)>, IngestionError> {
        let mut seen: HashMap<&str, Split> = HashMap::new();
        let mut out = Vec::new();
        for r in &self.records {
            match seen.get(r.sample_id.as_str()) {
                None => {
                    seen.insert(&r.sample_id, r.split);
                    out.push((r.sample_id.as_str(), r.split));
                }
                Some(&s) if s != r.split => {
                    return Err(IngestionError::SplitConflict { sample_id: r.sample_id.clone() })
                }
                Some(_) => {}
            }
        }
        Ok(out)
    }
}

/// One CoVer score per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub sample_id: String,
    pub split: Split,
    pub score: f64,
}

fn split_logits(logits: &[f64], cfg: &ScoreConfig) -> Result<(LogitVector, Option<LogitVector>), IngestionError> {
    if !cfg.kind.uses_negatives() {
        return Ok((LogitVector::new(logits.to_vec())?, None));
    }
    let m = cfg.neg_count;
    if m == 0 {
        return Err(ScoringError::MissingNegatives.into());
    }
    if m >= logits.len() {
        return Err(ScoringError::NegativeLengthMismatch { expected: logits.len().saturating_sub(1), got: m }.into());
    }
    let (pos, neg) = logits.split_at(logits.len() - m);
    Ok((LogitVector::new(pos.to_vec())?, Some(LogitVector::new(neg.to_vec())?)))
}

/// Gathers one sample's logits over `dims`.
pub fn dimensional_logits(
    table: &LogitTable,
    sample_id: &str,
    dims: &DimensionSet,
    cfg: &ScoreConfig,
) -> Result<DimensionalLogits, IngestionError> {
    let mut pos = Vec::with_capacity(dims.len());
    let mut neg = Vec::with_capacity(dims.len());
    for tag in dims.tags() {
        let r = table.get(sample_id, tag).ok_or_else(|| IngestionError::MissingDimension {
            sample_id: sample_id.to_string(),
            dim: tag.to_string(),
        })?;
        let (p, n) = split_logits(&r.logits, cfg)?;
        pos.push((*tag, p));
        if let Some(n) = n {
            neg.push((*tag, n));
        }
    }
    let dl = DimensionalLogits::new(pos)?;
    Ok(if neg.is_empty() { dl } else { dl.with_negatives(neg)? })
}

/// Per-sample detector scores (higher is ID) in table order.
pub fn score_samples(
    table: &LogitTable,
    dims: &DimensionSet,
    cfg: &ScoreConfig,
) -> Result<Vec<SampleScore>, IngestionError> {
    cfg.validate()?;
    table
        .samples()?
        .into_iter()
        .map(|(sample_id, split)| {
            let dl = dimensional_logits(table, sample_id, dims, cfg)?;
            Ok(SampleScore { sample_id: sample_id.to_string(), split, score: oriented_cover_score(&dl, cfg)? })
        })
        .collect()
}

/// CoVer scores over `dims`, routed to their split.
pub fn score_table(table: &LogitTable, dims: &DimensionSet, cfg: &ScoreConfig) -> Result<ScoredSplit, IngestionError> {
    let scores = score_samples(table, dims, cfg)?;
    if scores.is_empty() {
        return Err(IngestionError::EmptyTable);
    }
    Ok(split_scores(&scores))
}

pub fn split_scores(scores: &[SampleScore]) -> ScoredSplit {
    let pick = |split| scores.iter().filter(|s| s.split == split).map(|s| s.score).collect();
    ScoredSplit::new(pick(Split::Id), pick(Split::Ood))
}
