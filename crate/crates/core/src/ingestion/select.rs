use serde::{Deserialize, Serialize};

use super::{score_samples, IngestionError, LogitTable};
use crate::corruption::{Corruption, DimensionSet};
use crate::metrics::{evaluate, EvalResult, ScoredSplit, Split, DEFAULT_TPR};
use crate::scoring::ScoreConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub corruption: Corruption,
    pub auroc: f64,
    pub fpr95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Original-only metrics on the same tables.
    pub baseline: EvalResult,
    pub ranked: Vec<RankedCandidate>,
    pub chosen: Vec<Corruption>,
}

fn evaluate_dims(
    id_table: &LogitTable,
    ood_table: &LogitTable,
    dims: &DimensionSet,
    cfg: &ScoreConfig,
) -> Result<EvalResult, IngestionError> {
    let pick = |table, split| -> Result<Vec<f64>, IngestionError> {
        Ok(score_samples(table, dims, cfg)?.into_iter().filter(|s| s.split == split).map(|s| s.score).collect())
    };
    let split = ScoredSplit::new(pick(id_table, Split::Id)?, pick(ood_table, Split::Ood)?);
    Ok(evaluate(&split, DEFAULT_TPR)?)
}

/// Ranks each candidate by the AUROC of CoVer over `{original, c}`, with
/// ID samples from `id_table` and OOD samples from `val_ood_table` (the
/// same table may serve both). Ties go to the lower FPR95, then to the
/// lexicographically smaller `kind:severity`.
pub fn select_corruptions(
    id_table: &LogitTable,
    val_ood_table: &LogitTable,
    candidates: &[Corruption],
    cfg: &ScoreConfig,
    k: usize,
) -> Result<SelectionResult, IngestionError> {
    let baseline = evaluate_dims(id_table, val_ood_table, &DimensionSet::original_only(), cfg)?;
    let mut ranked = candidates
        .iter()
        .map(|&c| {
            let r = evaluate_dims(id_table, val_ood_table, &DimensionSet::single_expansion(c), cfg)?;
            Ok(RankedCandidate { corruption: c, auroc: r.auroc, fpr95: r.fpr_at_tpr })
        })
        .collect::<Result<Vec<_>, IngestionError>>()?;
    ranked.sort_by(|a, b| {
        b.auroc
            .total_cmp(&a.auroc)
            .then(a.fpr95.total_cmp(&b.fpr95))
            .then_with(|| a.corruption.to_string().cmp(&b.corruption.to_string()))
    });
    ranked.dedup_by(|a, b| a.corruption == b.corruption);
    let chosen = ranked.iter().take(k).map(|r| r.corruption).collect();
    Ok(SelectionResult { baseline, ranked, chosen })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruption::{CorruptionKind, DimensionTag};
    use crate::ingestion::LogitRecord;
    use crate::metrics::auroc;

    fn c(kind: CorruptionKind, sev: u8) -> Corruption {
        Corruption::new(kind, sev).unwrap()
    }

    fn two_class(p: f64) -> Vec<f64> {
        vec![(p / (1.0 - p)).ln(), 0.0]
    }

    /// ID and OOD original confidences overlap; `a` pulls OOD confidence
    /// down, `b` pulls ID confidence down, `same` repeats the original.
    fn construction() -> (LogitTable, Corruption, Corruption, Corruption) {
        let (a, b, same) = (c(CorruptionKind::Fog, 1), c(CorruptionKind::Contrast, 2), c(CorruptionKind::Pixelate, 1));
        let id = [0.9, 0.8, 0.7, 0.6];
        let ood = [0.85, 0.75, 0.65, 0.55];
        let mut records = Vec::new();
        let mut push = |name: String, split, dim, p: f64| {
            records.push(LogitRecord { sample_id: name, split, dim, label: None, logits: two_class(p) })
        };
        for (i, &p) in id.iter().enumerate() {
            let name = format!("id{i}");
            push(name.clone(), Split::Id, DimensionTag::Original, p);
            push(name.clone(), Split::Id, DimensionTag::Corrupted(a), p);
            push(name.clone(), Split::Id, DimensionTag::Corrupted(b), 0.5 + 0.01 * i as f64);
            push(name, Split::Id, DimensionTag::Corrupted(same), p);
        }
        for (i, &p) in ood.iter().enumerate() {
            let name = format!("ood{i}");
            push(name.clone(), Split::Ood, DimensionTag::Original, p);
            push(name.clone(), Split::Ood, DimensionTag::Corrupted(a), 0.5 + 0.01 * i as f64);
            push(name.clone(), Split::Ood, DimensionTag::Corrupted(b), p);
            push(name, Split::Ood, DimensionTag::Corrupted(same), p);
        }
        (LogitTable::new(records).unwrap(), a, b, same)
    }

    /// Brute-force pairwise AUROC, independent of the rank statistic.
    fn pairwise(id: &[f64], ood: &[f64]) -> f64 {
        let mut wins = 0.0;
        for x in id {
            for y in ood {
                wins += if x > y {
                    1.0
                } else if x == y {
                    0.5
                } else {
                    0.0
                };
            }
        }
        wins / (id.len() * ood.len()) as f64
    }

    #[test]
    fn collapsing_ood_beats_collapsing_id() {
        let (table, a, b, same) = construction();
        let cfg = ScoreConfig::default();
        let result = select_corruptions(&table, &table, &[b, same, a], &cfg, 1).unwrap();
        assert_eq!(result.chosen, vec![a]);
        let order: Vec<Corruption> = result.ranked.iter().map(|r| r.corruption).collect();
        assert_eq!(order, vec![a, same, b]);

        for r in &result.ranked {
            let s = crate::ingestion::score_table(&table, &DimensionSet::single_expansion(r.corruption), &cfg).unwrap();
            assert!((r.auroc - pairwise(&s.id_scores, &s.ood_scores)).abs() < 1e-12);
        }
    }

    #[test]
    fn no_op_candidate_matches_baseline() {
        let (table, _, _, same) = construction();
        let cfg = ScoreConfig::default();
        let result = select_corruptions(&table, &table, &[same], &cfg, 3).unwrap();
        let base = crate::ingestion::score_table(&table, &DimensionSet::original_only(), &cfg).unwrap();
        assert_eq!(result.ranked[0].auroc, auroc(&base).unwrap());
        assert_eq!(result.ranked[0].auroc, result.baseline.auroc);
        assert_eq!(result.chosen, vec![same]);
    }

    #[test]
    fn candidate_order_does_not_matter() {
        let (table, a, b, same) = construction();
        let cfg = ScoreConfig::default();
        let x = select_corruptions(&table, &table, &[a, b, same], &cfg, 2).unwrap();
        let y = select_corruptions(&table, &table, &[same, b, a], &cfg, 2).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn missing_candidate_dimension() {
        let (table, ..) = construction();
        let absent = c(CorruptionKind::Snow, 5);
        let err = select_corruptions(&table, &table, &[absent], &ScoreConfig::default(), 1).unwrap_err();
        assert!(matches!(err, IngestionError::MissingDimension { .. }));
    }
}
