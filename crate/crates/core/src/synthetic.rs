//! Desk-scale benchmarks with the confidence-mutation structure built in.
//!
//! Original scores `s` come from two-component mixtures: confident and
//! unconfident ID, overconfident and unconfident OOD. The corrupted score
//! is `clip(s - drop_rate * s - gap * [overconfident OOD] + e)` with
//! `e ~ N(0, corruption_noise)`, so every sample loses a little confidence
//! and only the overconfident OOD subpopulation pays the extra `gap`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corruption::{expand_dimensions, image_seed, DimensionSet, DimensionTag};
use crate::image::Image;
use crate::ingestion::{fit_prototype_images, prototype_logits, IngestionError, PrototypeModel};
use crate::metrics::{evaluate, EvalResult, MetricsError, ScoredSplit};
use crate::rng::CounterRng;
use crate::scoring::msp_score;

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("mutation gap must be finite and non-negative, got {0}")]
    InvalidGap(f64),
    #[error("the image-backed benchmark needs exactly one corrupted dimension next to `original`")]
    Dimensions,
    #[error(transparent)]
    Ingestion(#[from] IngestionError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A two-component Gaussian mixture `weight * N(a) + (1 - weight) * N(b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weight: f64,
    pub a: (f64, f64),
    pub b: (f64, f64),
}

impl Mixture {
    /// Returns the draw and whether it came from component `a`.
    fn sample(&self, rng: &mut CounterRng) -> (f64, bool) {
        let first = rng.next_f64() < self.weight;
        let (mean, std) = if first { self.a } else { self.b };
        (rng.normal(mean, std), first)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    /// Component `a` is confident ID.
    pub id: Mixture,
    /// Component `a` is overconfident OOD.
    pub ood: Mixture,
    pub drop_rate: f64,
    pub corruption_noise: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            id: Mixture { weight: 0.8, a: (0.78, 0.08), b: (0.55, 0.07) },
            ood: Mixture { weight: 0.1, a: (0.55, 0.05), b: (0.35, 0.1) },
            drop_rate: 0.15,
            corruption_noise: 0.055,
        }
    }
}

/// Scores of the same samples seen through the original and the
/// corrupted view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBenchmark {
    pub original: ScoredSplit,
    pub corrupted: ScoredSplit,
}

impl SyntheticBenchmark {
    /// Per-sample mean of the two views.
    pub fn averaged(&self) -> ScoredSplit {
        let mean = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
        ScoredSplit::new(
            mean(&self.original.id_scores, &self.corrupted.id_scores),
            mean(&self.original.ood_scores, &self.corrupted.ood_scores),
        )
    }
}

pub fn gen_synthetic_benchmark(
    n_id: usize,
    n_ood: usize,
    mutation_gap: f64,
    seed: u64,
) -> Result<SyntheticBenchmark, SyntheticError> {
    gen_synthetic_benchmark_with(&SyntheticParams::default(), n_id, n_ood, mutation_gap, seed)
}

pub fn gen_synthetic_benchmark_with(
    params: &SyntheticParams,
    n_id: usize,
    n_ood: usize,
    mutation_gap: f64,
    seed: u64,
) -> Result<SyntheticBenchmark, SyntheticError> {
    if !(mutation_gap >= 0.0 && mutation_gap.is_finite()) {
        return Err(SyntheticError::InvalidGap(mutation_gap));
    }
    let views = |mix: &Mixture, n: usize, gap: f64, rng: &mut CounterRng| -> (Vec<f64>, Vec<f64>) {
        (0..n)
            .map(|_| {
                let (z, first) = mix.sample(rng);
                let extra = if first { gap } else { 0.0 };
                let original = z.clamp(0.0, 1.0);
                let corrupted =
                    original - params.drop_rate * original - extra + rng.normal(0.0, params.corruption_noise);
                (original, corrupted.clamp(0.0, 1.0))
            })
            .unzip()
    };
    let (id_o, id_c) = views(&params.id, n_id, 0.0, &mut CounterRng::stream(seed, 0));
    let (ood_o, ood_c) = views(&params.ood, n_ood, mutation_gap, &mut CounterRng::stream(seed, 1));
    Ok(SyntheticBenchmark { original: ScoredSplit::new(id_o, ood_o), corrupted: ScoredSplit::new(id_c, ood_c) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverExperiment {
    pub original_only: EvalResult,
    pub corrupted_only: EvalResult,
    pub averaged: EvalResult,
}

/// Evaluates the three input modes of the benchmark.
pub fn run_cover_experiment(bench: &SyntheticBenchmark, tpr: f64) -> Result<CoverExperiment, MetricsError> {
    Ok(CoverExperiment {
        original_only: evaluate(&bench.original, tpr)?,
        corrupted_only: evaluate(&bench.corrupted, tpr)?,
        averaged: evaluate(&bench.averaged(), tpr)?,
    })
}

/// Procedural test patterns for the image-backed pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    HorizontalStripes,
    VerticalStripes,
    Checkerboard,
}

/// A `size x size` pattern with period 8, random contrast and pixel noise.
pub fn pattern_image(pattern: Pattern, size: usize, rng: &mut CounterRng) -> Image {
    let amplitude = rng.uniform(0.25, 0.4);
    let base = rng.uniform(0.4, 0.6);
    Image::from_fn(size, size, |y, x, _| {
        let on = match pattern {
            Pattern::HorizontalStripes => (y / 4) % 2 == 0,
            Pattern::VerticalStripes => (x / 4) % 2 == 0,
            Pattern::Checkerboard => ((y / 4) + (x / 4)) % 2 == 0,
        };
        let sign = if on { 1.0 } else { -1.0 };
        (base + sign * amplitude + rng.normal(0.0, 0.03)).clamp(0.0, 1.0)
    })
}

/// Two stripe classes as ID, checkerboards as OOD, scored by MSP of a
/// prototype model on `{original, corruption}`. For smoke coverage only:
/// nothing is asserted about the effect size.
pub fn image_backed_benchmark(
    n_per_class: usize,
    n_ood: usize,
    size: usize,
    dims: &DimensionSet,
    seed: u64,
) -> Result<(PrototypeModel, SyntheticBenchmark), SyntheticError> {
    if dims.len() != 2 || dims.tags()[0] != DimensionTag::Original {
        return Err(SyntheticError::Dimensions);
    }
    let mut rng = CounterRng::stream(seed, 0);
    let mut draw = |p, n| (0..n).map(|_| pattern_image(p, size, &mut rng)).collect::<Vec<_>>();
    let classes = vec![
        ("horizontal".to_string(), draw(Pattern::HorizontalStripes, n_per_class)),
        ("vertical".to_string(), draw(Pattern::VerticalStripes, n_per_class)),
    ];
    let ood = draw(Pattern::Checkerboard, n_ood);
    let model = fit_prototype_images(&classes, size)?;

    let mut index = 0u64;
    let mut score = |imgs: &[Image]| -> Result<(Vec<f64>, Vec<f64>), SyntheticError> {
        let mut pair = (Vec::new(), Vec::new());
        for img in imgs {
            let views = expand_dimensions(img, dims, image_seed(seed, index)).map_err(IngestionError::from)?;
            index += 1;
            let msp = |i: &Image| -> Result<f64, SyntheticError> {
                let logits = prototype_logits(&model, i)?;
                Ok(msp_score(&logits, 1.0).map_err(IngestionError::from)?)
            };
            pair.0.push(msp(&views[0].1)?);
            pair.1.push(msp(&views[1].1)?);
        }
        Ok(pair)
    };
    let id_imgs: Vec<Image> = classes.into_iter().flat_map(|(_, v)| v).collect();
    let (id_o, id_c) = score(&id_imgs)?;
    let (ood_o, ood_c) = score(&ood)?;
    Ok((
        model,
        SyntheticBenchmark { original: ScoredSplit::new(id_o, ood_o), corrupted: ScoredSplit::new(id_c, ood_c) },
    ))
}

fn variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// `(original, averaged)` sample variance of the ID scores.
pub fn id_variances(bench: &SyntheticBenchmark) -> (f64, f64) {
    (variance(&bench.original.id_scores), variance(&bench.averaged().id_scores))
}
