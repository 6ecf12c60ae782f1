//! Confidence mutation under corruption: per-sample differences, the
//! band-matched ID/OOD gap, the four confidence groups, and the circular
//! low/high frequency split with its KL statistic.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::{Image, CHANNELS};
use crate::metrics::Split;
use crate::scoring::{log_softmax, ScoringError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MutationError {
    #[error("no OOD record has an ID record within the confidence band")]
    EmptyBand,
    #[error("radius fraction must lie in (0, 1], got {0}")]
    InvalidRadius(f64),
    #[error("inverse transform left an imaginary residue of {0:e}")]
    ImaginaryResidue(f64),
    #[error("logit vectors differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// `original - corrupted`.
pub fn confidence_difference(original: f64, corrupted: f64) -> f64 {
    original - corrupted
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRecord {
    pub sample_id: String,
    pub original_score: f64,
    pub corrupted_score: f64,
    pub mu: f64,
    pub split: Split,
}

impl MutationRecord {
    pub fn new(sample_id: impl Into<String>, split: Split, original_score: f64, corrupted_score: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            original_score,
            corrupted_score,
            mu: confidence_difference(original_score, corrupted_score),
            split,
        }
    }
}

pub const DEFAULT_BAND_EPS: f64 = 0.01;

/// Mean confidence drop of ID and OOD records at matched confidence.
///
/// An OOD record is kept when some ID record's original score lies within
/// `band_eps` of it; an ID record is kept when it matches some OOD record.
/// Returns `(mean_mu_id, mean_mu_ood)` over the kept records.
pub fn mutation_gap(records: &[MutationRecord], band_eps: f64) -> Result<(f64, f64), MutationError> {
    let mut id: Vec<&MutationRecord> = records.iter().filter(|r| r.split == Split::Id).collect();
    id.sort_by(|a, b| a.original_score.total_cmp(&b.original_score));
    let mut id_kept = vec![false; id.len()];
    let (mut ood_sum, mut ood_n) = (0.0, 0usize);
    for r in records.iter().filter(|r| r.split == Split::Ood) {
        let lo = id.partition_point(|x| x.original_score < r.original_score - band_eps);
        let hi = id.partition_point(|x| x.original_score <= r.original_score + band_eps);
        if lo < hi {
            ood_sum += r.mu;
            ood_n += 1;
            id_kept[lo..hi].iter_mut().for_each(|k| *k = true);
        }
    }
    if ood_n == 0 {
        return Err(MutationError::EmptyBand);
    }
    let kept: Vec<f64> = id.iter().zip(&id_kept).filter(|(_, &k)| k).map(|(r, _)| r.mu).collect();
    Ok((kept.iter().sum::<f64>() / kept.len() as f64, ood_sum / ood_n as f64))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub confident_id: Vec<MutationRecord>,
    pub unconfident_id: Vec<MutationRecord>,
    pub overconfident_ood: Vec<MutationRecord>,
    pub unconfident_ood: Vec<MutationRecord>,
    pub cut_id: f64,
    pub cut_ood: f64,
}

/// Splits records by split and by `original_score >= cut`.
pub fn partition_groups(records: &[MutationRecord], cut_id: f64, cut_ood: f64) -> GroupPartition {
    let mut g = GroupPartition { cut_id, cut_ood, ..Default::default() };
    for r in records.iter().cloned() {
        match r.split {
            Split::Id if r.original_score >= cut_id => g.confident_id.push(r),
            Split::Id => g.unconfident_id.push(r),
            Split::Ood if r.original_score >= cut_ood => g.overconfident_ood.push(r),
            Split::Ood => g.unconfident_ood.push(r),
        }
    }
    g
}

/// Median original score per split (`None` for an absent split).
pub fn median_cuts(records: &[MutationRecord]) -> (Option<f64>, Option<f64>) {
    let median = |split: Split| {
        let mut v: Vec<f64> = records.iter().filter(|r| r.split == split).map(|r| r.original_score).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
    };
    (median(Split::Id), median(Split::Ood))
}

/// [`partition_groups`] at the per-split median cuts.
pub fn partition_at_medians(records: &[MutationRecord]) -> GroupPartition {
    let (id, ood) = median_cuts(records);
    partition_groups(records, id.unwrap_or(f64::INFINITY), ood.unwrap_or(f64::INFINITY))
}

/// An H x W x 3 buffer whose values may leave [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SignedImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl SignedImage {
    /// Affine map of the value range onto [0, 1] for viewing; returns the
    /// image with the `(offset, scale)` such that `view = (v - offset) * scale`.
    pub fn to_viewable(&self) -> (Image, f64, f64) {
        let lo = self.data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { 1.0 / (hi - lo) } else { 1.0 };
        let data = self.data.iter().map(|v| (v - lo) * scale).collect();
        (Image::from_clipped(self.height, self.width, data), lo, scale)
    }

    pub fn to_image_clipped(&self) -> Image {
        Image::from_clipped(self.height, self.width, self.data.clone())
    }
}

/// What the radius fraction is relative to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusBasis {
    #[default]
    HalfMinSide,
    HalfDiagonal,
}

pub const DEFAULT_RADIUS_FRACTION: f64 = 0.6;

/// Low part inside a centred circle of the spectrum; high part is the
/// residual, so `low + high` reconstructs the input.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySplit {
    pub low: SignedImage,
    pub high: SignedImage,
    pub radius_fraction: f64,
    pub radius_px: f64,
}

const IMAGINARY_TOLERANCE: f64 = 1e-9;

/// Circular low-pass mask in unshifted FFT layout.
pub fn low_pass_mask(h: usize, w: usize, radius: f64) -> Vec<bool> {
    let centred = |u: usize, n: usize| ((u + n / 2) % n) as f64 - (n / 2) as f64;
    (0..h).flat_map(|u| (0..w).map(move |v| centred(u, h).hypot(centred(v, w)) <= radius)).collect()
}

pub fn filter_radius(h: usize, w: usize, radius_fraction: f64, basis: RadiusBasis) -> f64 {
    match basis {
        RadiusBasis::HalfMinSide => radius_fraction * h.min(w) as f64 / 2.0,
        RadiusBasis::HalfDiagonal => radius_fraction * (h as f64).hypot(w as f64) / 2.0,
    }
}

pub fn frequency_split(img: &Image, radius_fraction: f64) -> Result<FrequencySplit, MutationError> {
    frequency_split_with(img, radius_fraction, RadiusBasis::HalfMinSide)
}

pub fn frequency_split_with(
    img: &Image,
    radius_fraction: f64,
    basis: RadiusBasis,
) -> Result<FrequencySplit, MutationError> {
    if !(radius_fraction > 0.0 && radius_fraction <= 1.0) {
        return Err(MutationError::InvalidRadius(radius_fraction));
    }
    let (h, w) = (img.height(), img.width());
    let radius = filter_radius(h, w, radius_fraction, basis);
    let mask = low_pass_mask(h, w, radius);
    let mut fft = Fft2::new(h, w);
    let mut low = vec![0.0; h * w * CHANNELS];
    for c in 0..CHANNELS {
        let mut buf: Vec<Complex<f64>> = img.channel(c).into_iter().map(|v| Complex::new(v, 0.0)).collect();
        fft.forward(&mut buf);
        buf.iter_mut().zip(&mask).filter(|(_, &keep)| !keep).for_each(|(z, _)| *z = Complex::new(0.0, 0.0));
        fft.inverse(&mut buf);
        let n = (h * w) as f64;
        for (i, z) in buf.iter().enumerate() {
            let residue = z.im.abs() / n;
            if residue > IMAGINARY_TOLERANCE {
                return Err(MutationError::ImaginaryResidue(residue));
            }
            low[i * CHANNELS + c] = z.re / n;
        }
    }
    let high = img.data().iter().zip(&low).map(|(x, l)| x - l).collect();
    Ok(FrequencySplit {
        low: SignedImage { height: h, width: w, data: low },
        high: SignedImage { height: h, width: w, data: high },
        radius_fraction,
        radius_px: radius,
    })
}

/// Unnormalized 2-D DFT over a row-major `h x w` buffer.
pub struct Fft2 {
    h: usize,
    w: usize,
    planner: FftPlanner<f64>,
}

impl Fft2 {
    pub fn new(h: usize, w: usize) -> Self {
        Self { h, w, planner: FftPlanner::new() }
    }

    pub fn forward(&mut self, buf: &mut [Complex<f64>]) {
        self.run(buf, false);
    }

    /// Inverse without the `1 / (h w)` factor.
    pub fn inverse(&mut self, buf: &mut [Complex<f64>]) {
        self.run(buf, true);
    }

    fn run(&mut self, buf: &mut [Complex<f64>], inverse: bool) {
        let (h, w) = (self.h, self.w);
        let plan = |p: &mut FftPlanner<f64>, n| if inverse { p.plan_fft_inverse(n) } else { p.plan_fft_forward(n) };
        plan(&mut self.planner, w).process(buf);
        let cols = plan(&mut self.planner, h);
        let mut col = vec![Complex::new(0.0, 0.0); h];
        for x in 0..w {
            for y in 0..h {
                col[y] = buf[y * w + x];
            }
            cols.process(&mut col);
            for y in 0..h {
                buf[y * w + x] = col[y];
            }
        }
    }
}

/// `KL(softmax(p / tau) || softmax(q / tau))`.
pub fn kl_softmax(p_logits: &[f64], q_logits: &[f64], tau: f64) -> Result<f64, MutationError> {
    if p_logits.len() != q_logits.len() {
        return Err(MutationError::LengthMismatch(p_logits.len(), q_logits.len()));
    }
    // Validates finiteness and temperature.
    crate::scoring::msp_score(p_logits, tau)?;
    crate::scoring::msp_score(q_logits, tau)?;
    let lp = log_softmax(p_logits, tau);
    let lq = log_softmax(q_logits, tau);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
    Ok(kl.max(0.0))
}

/// Pearson correlation; `None` for fewer than two points or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
