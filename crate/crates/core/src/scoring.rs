//! Confidence scores over logits and their average across dimensions.
//!
//! All scores follow the higher-is-ID convention except the raw CLIPN
//! agreeing-to-differ value, which measures the "no" mass; use
//! [`oriented_cover_score`] when a detector-ready score is needed.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruption::DimensionTag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("logits contain a non-finite value")]
    NonFinite,
    #[error("a logit vector needs at least one value")]
    EmptyLogits,
    #[error("cosine similarity of a zero-norm vector")]
    ZeroNorm,
    #[error("vector lengths differ: {expected} vs {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{name} must be positive and finite, got {value}")]
    InvalidTemperature { name: &'static str, value: f64 },
    #[error("at least one dimension is required")]
    EmptyDimensions,
    #[error("the fused score needs negative logits")]
    MissingNegatives,
    #[error("negative logits have length {got}, expected {expected}")]
    NegativeLengthMismatch { expected: usize, got: usize },
    #[error("positive logits for the original input are missing")]
    MissingOriginal,
    #[error("negative logits are tagged {got} where {expected} was expected")]
    TagMismatch { expected: String, got: String },
    #[error("unknown score kind `{0}` (expected msp, energy, max_logit, neglabel_sum_softmax or clipn_atd)")]
    UnknownKind(String),
}

fn check_finite(values: &[f64]) -> Result<(), ScoringError> {
    if values.is_empty() {
        return Err(ScoringError::EmptyLogits);
    }
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ScoringError::NonFinite)
    }
}

fn check_temperature(name: &'static str, value: f64) -> Result<(), ScoringError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ScoringError::InvalidTemperature { name, value })
    }
}

/// Class-wise logits of one input, non-empty and finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ScoringError> {
        check_finite(&values)?;
        Ok(Self(values))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for LogitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = ScoringError;

    fn try_from(values: Vec<f64>) -> Result<Self, ScoringError> {
        Self::new(values)
    }
}

impl From<LogitVector> for Vec<f64> {
    fn from(v: LogitVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Msp,
    Energy,
    MaxLogit,
    NeglabelSumSoftmax,
    ClipnAtd,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 5] =
        [ScoreKind::Msp, ScoreKind::Energy, ScoreKind::MaxLogit, ScoreKind::NeglabelSumSoftmax, ScoreKind::ClipnAtd];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Msp => "msp",
            ScoreKind::Energy => "energy",
            ScoreKind::MaxLogit => "max_logit",
            ScoreKind::NeglabelSumSoftmax => "neglabel_sum_softmax",
            ScoreKind::ClipnAtd => "clipn_atd",
        }
    }

    /// Whether the kind reads negative logits packed after the positives.
    pub fn uses_negatives(self) -> bool {
        matches!(self, ScoreKind::NeglabelSumSoftmax | ScoreKind::ClipnAtd)
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = ScoringError;

    fn from_str(s: &str) -> Result<Self, ScoringError> {
        ScoreKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| ScoringError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    /// Softmax temperature.
    pub tau: f64,
    /// Energy temperature.
    pub temperature: f64,
    /// Number of negative logits (negative labels, or "no" prompts).
    pub neg_count: usize,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { kind: ScoreKind::Msp, tau: 1.0, temperature: 1.0, neg_count: 0 }
    }
}

impl ScoreConfig {
    pub fn new(kind: ScoreKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        check_temperature("tau", self.tau)?;
        check_temperature("temperature", self.temperature)
    }
}

/// Logits of one sample across a dimension set, with optional negative
/// logits per dimension for the fused scores.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalLogits {
    per_dim: Vec<(DimensionTag, LogitVector)>,
    per_dim_negative: Option<Vec<(DimensionTag, LogitVector)>>,
}

impl DimensionalLogits {
    pub fn new(per_dim: Vec<(DimensionTag, LogitVector)>) -> Result<Self, ScoringError> {
        let k = per_dim.first().ok_or(ScoringError::EmptyDimensions)?.1.k();
        if let Some((_, v)) = per_dim.iter().find(|(_, v)| v.k() != k) {
            return Err(ScoringError::LengthMismatch { expected: k, got: v.k() });
        }
        Ok(Self { per_dim, per_dim_negative: None })
    }

    /// Attaches negative logits; tags must follow the positive tags in order.
    pub fn with_negatives(mut self, negatives: Vec<(DimensionTag, LogitVector)>) -> Result<Self, ScoringError> {
        if negatives.len() != self.per_dim.len() {
            return Err(ScoringError::LengthMismatch { expected: self.per_dim.len(), got: negatives.len() });
        }
        for ((tag, _), (neg_tag, _)) in self.per_dim.iter().zip(&negatives) {
            if tag != neg_tag {
                return Err(ScoringError::TagMismatch { expected: tag.to_string(), got: neg_tag.to_string() });
            }
        }
        let m = negatives[0].1.k();
        if let Some((_, v)) = negatives.iter().find(|(_, v)| v.k() != m) {
            return Err(ScoringError::NegativeLengthMismatch { expected: m, got: v.k() });
        }
        self.per_dim_negative = Some(negatives);
        Ok(self)
    }

    pub fn per_dim(&self) -> &[(DimensionTag, LogitVector)] {
        &self.per_dim
    }

    pub fn per_dim_negative(&self) -> Option<&[(DimensionTag, LogitVector)]> {
        self.per_dim_negative.as_deref()
    }

    pub fn k(&self) -> usize {
        self.per_dim[0].1.k()
    }

    fn original(&self) -> Result<&LogitVector, ScoringError> {
        self.per_dim
            .iter()
            .find(|(t, _)| *t == DimensionTag::Original)
            .map(|(_, v)| v)
            .ok_or(ScoringError::MissingOriginal)
    }

    fn negatives(&self) -> Result<&[(DimensionTag, LogitVector)], ScoringError> {
        self.per_dim_negative.as_deref().ok_or(ScoringError::MissingNegatives)
    }
}

/// `softmax(values / tau)` with max subtraction.
pub fn softmax(values: &[f64], tau: f64) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| ((v - m) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `log softmax(values / tau)` computed as `x - logsumexp(x)`.
pub fn log_softmax(values: &[f64], tau: f64) -> Vec<f64> {
    let scaled: Vec<f64> = values.iter().map(|v| v / tau).collect();
    let lse = log_sum_exp(&scaled);
    scaled.into_iter().map(|v| v - lse).collect()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Maximum softmax probability at temperature `tau`.
pub fn msp_score(logits: &[f64], tau: f64) -> Result<f64, ScoringError> {
    check_finite(logits)?;
    check_temperature("tau", tau)?;
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // The arg-max term is exp(0) = 1.
    Ok(1.0 / logits.iter().map(|v| ((v - m) / tau).exp()).sum::<f64>())
}

/// `T * log sum_j exp(s_j / T)`.
pub fn energy_score(logits: &[f64], temperature: f64) -> Result<f64, ScoringError> {
    check_finite(logits)?;
    check_temperature("temperature", temperature)?;
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(m + temperature * logits.iter().map(|v| ((v - m) / temperature).exp()).sum::<f64>().ln())
}

pub fn max_logit_score(logits: &[f64]) -> Result<f64, ScoringError> {
    check_finite(logits)?;
    Ok(logits.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Cosine similarity of `feature` against each class embedding.
pub fn cosine_logits(feature: &[f64], class_embeddings: &[Vec<f64>]) -> Result<LogitVector, ScoringError> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let fnorm = norm(feature);
    if fnorm == 0.0 {
        return Err(ScoringError::ZeroNorm);
    }
    let values = class_embeddings
        .iter()
        .map(|e| {
            if e.len() != feature.len() {
                return Err(ScoringError::LengthMismatch { expected: feature.len(), got: e.len() });
            }
            let enorm = norm(e);
            if enorm == 0.0 {
                return Err(ScoringError::ZeroNorm);
            }
            let dot: f64 = feature.iter().zip(e).map(|(a, b)| a * b).sum();
            Ok((dot / (fnorm * enorm)).clamp(-1.0, 1.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    LogitVector::new(values)
}

fn base_score(logits: &[f64], cfg: &ScoreConfig) -> Result<f64, ScoringError> {
    match cfg.kind {
        ScoreKind::Msp => msp_score(logits, cfg.tau),
        ScoreKind::Energy => energy_score(logits, cfg.temperature),
        ScoreKind::MaxLogit => max_logit_score(logits),
        ScoreKind::NeglabelSumSoftmax | ScoreKind::ClipnAtd => unreachable!("fused kinds have no base score"),
    }
}

fn mean(values: impl ExactSizeIterator<Item = Result<f64, ScoringError>>) -> Result<f64, ScoringError> {
    let n = values.len() as f64;
    let mut total = 0.0;
    for v in values {
        total += v?;
    }
    Ok(total / n)
}

/// The CoVer score: mean of the selected score over all dimensions. Fused
/// kinds dispatch to their own averages.
pub fn cover_score(dl: &DimensionalLogits, cfg: &ScoreConfig) -> Result<f64, ScoringError> {
    cfg.validate()?;
    match cfg.kind {
        ScoreKind::NeglabelSumSoftmax => neglabel_cover_score(dl, cfg),
        ScoreKind::ClipnAtd => clipn_cover_score(dl, cfg),
        _ => mean(dl.per_dim.iter().map(|(_, v)| base_score(v, cfg))),
    }
}

/// [`cover_score`] with CLIPN flipped to `1 - ATD`, so that every kind
/// ranks ID inputs higher.
pub fn oriented_cover_score(dl: &DimensionalLogits, cfg: &ScoreConfig) -> Result<f64, ScoringError> {
    let s = cover_score(dl, cfg)?;
    Ok(if cfg.kind == ScoreKind::ClipnAtd { 1.0 - s } else { s })
}

/// Sum-softmax NegLabel score of positives `pos` against negatives `neg`.
pub fn neglabel_score(pos: &[f64], neg: &[f64], tau: f64) -> Result<f64, ScoringError> {
    check_finite(pos)?;
    check_finite(neg)?;
    check_temperature("tau", tau)?;
    let m = pos.iter().chain(neg).copied().fold(f64::NEG_INFINITY, f64::max);
    let p: f64 = pos.iter().map(|v| ((v - m) / tau).exp()).sum();
    let n: f64 = neg.iter().map(|v| ((v - m) / tau).exp()).sum();
    Ok(p / (p + n))
}

/// CLIPN agreeing-to-differ: `sum_j p_no(j) * p_cls(j)`.
pub fn clipn_atd_score(pos: &[f64], no: &[f64], tau: f64) -> Result<f64, ScoringError> {
    check_finite(pos)?;
    check_finite(no)?;
    check_temperature("tau", tau)?;
    if no.len() != pos.len() {
        return Err(ScoringError::NegativeLengthMismatch { expected: pos.len(), got: no.len() });
    }
    let p_cls = softmax(pos, tau);
    Ok(p_cls.iter().zip(pos.iter().zip(no)).map(|(pc, (s, sn))| pc / (1.0 + ((s - sn) / tau).exp())).sum())
}

/// NegLabel fused with CoVer: positives from the original input, negatives
/// from each dimension, averaged over dimensions.
pub fn neglabel_cover_score(dl: &DimensionalLogits, cfg: &ScoreConfig) -> Result<f64, ScoringError> {
    let pos = dl.original()?;
    let negs = dl.negatives()?;
    mean(negs.iter().map(|(_, neg)| neglabel_score(pos, neg, cfg.tau)))
}

/// CLIPN fused with CoVer: "no" logits from each dimension, class logits
/// from the original input, averaged over dimensions.
pub fn clipn_cover_score(dl: &DimensionalLogits, cfg: &ScoreConfig) -> Result<f64, ScoringError> {
    let pos = dl.original()?;
    let negs = dl.negatives()?;
    mean(negs.iter().map(|(_, no)| clipn_atd_score(pos, no, cfg.tau)))
}
