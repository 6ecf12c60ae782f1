//! Seeded common-corruption transforms and the dimension sets built from them.
//!
//! Each corruption is a `(kind, severity)` pair with severity 1..=5; the
//! numeric parameters per severity come from a [`SeverityTable`] (the
//! 224x224 calibration is embedded, others can be loaded from JSON).
//! Every transform is a pure function of the input image, the spec and
//! its seed.

mod blur;
mod color;
mod digital;
pub mod filters;
pub mod noise;
mod table;
mod weather;

pub use table::SeverityTable;

use crate::image::Image;
use crate::rng::CounterRng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorruptionError {
    #[error("unsupported corruption kind `{0}`; valid kinds: {valid}", valid = CorruptionKind::valid_names())]
    UnsupportedKind(String),
    #[error("severity must be in 1..=5, got {0}")]
    InvalidSeverity(i64),
    #[error("malformed corruption `{0}`, expected `<kind>:<severity>`")]
    Malformed(String),
    #[error("{kind} needs a kernel radius of {radius}px but the image's shorter side is {side}px")]
    ImageTooSmall { kind: CorruptionKind, radius: usize, side: usize },
    #[error("severity table: {0}")]
    Table(String),
    #[error("jpeg round trip failed: {0}")]
    Jpeg(String),
    #[error("duplicate dimension tag `{0}`")]
    DuplicateTag(String),
    #[error("a dimension set needs at least one tag")]
    EmptyDimensionSet,
}

macro_rules! kinds {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum CorruptionKind {
            $($variant),+
        }

        impl CorruptionKind {
            /// Every implemented kind, including `frost_substitute`.
            pub const ALL: &'static [CorruptionKind] = &[$(CorruptionKind::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(CorruptionKind::$variant => $name),+
                }
            }
        }

        impl FromStr for CorruptionKind {
            type Err = CorruptionError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($name => Ok(CorruptionKind::$variant),)+
                    other => Err(CorruptionError::UnsupportedKind(other.to_string())),
                }
            }
        }
    };
}

kinds! {
    GaussianNoise => "gaussian_noise",
    ShotNoise => "shot_noise",
    ImpulseNoise => "impulse_noise",
    SpeckleNoise => "speckle_noise",
    DefocusBlur => "defocus_blur",
    GaussianBlur => "gaussian_blur",
    GlassBlur => "glass_blur",
    MotionBlur => "motion_blur",
    ZoomBlur => "zoom_blur",
    Snow => "snow",
    Fog => "fog",
    FrostSubstitute => "frost_substitute",
    Brightness => "brightness",
    Contrast => "contrast",
    Saturate => "saturate",
    ElasticTransform => "elastic_transform",
    Pixelate => "pixelate",
    JpegCompression => "jpeg_compression",
    Spatter => "spatter",
}

impl CorruptionKind {
    /// The 18 kinds of the standard catalogue (18 x 5 = 90 corruptions).
    /// `frost_substitute` is implemented but not part of the catalogue.
    pub fn catalogue() -> impl Iterator<Item = CorruptionKind> {
        Self::ALL.iter().copied().filter(|k| *k != CorruptionKind::FrostSubstitute)
    }

    pub fn is_noise(self) -> bool {
        matches!(self, Self::GaussianNoise | Self::ShotNoise | Self::ImpulseNoise | Self::SpeckleNoise)
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
    }

    fn stream_index(self) -> u64 {
        Self::ALL.iter().position(|k| *k == self).unwrap() as u64
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const SEVERITIES: [u8; 5] = [1, 2, 3, 4, 5];

/// A corruption kind at one severity level, written `<kind>:<severity>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Corruption {
    pub kind: CorruptionKind,
    pub severity: u8,
}

impl Corruption {
    pub fn new(kind: CorruptionKind, severity: u8) -> Result<Self, CorruptionError> {
        if !(1..=5).contains(&severity) {
            return Err(CorruptionError::InvalidSeverity(severity as i64));
        }
        Ok(Self { kind, severity })
    }

    pub fn with_seed(self, seed: u64) -> CorruptionSpec {
        CorruptionSpec { kind: self.kind, severity: self.severity, seed }
    }
}

impl fmt::Display for Corruption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.severity)
    }
}

impl FromStr for Corruption {
    type Err = CorruptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, severity) = s.trim().split_once(':').ok_or_else(|| CorruptionError::Malformed(s.to_string()))?;
        let kind: CorruptionKind = kind.parse()?;
        let severity: i64 = severity.trim().parse().map_err(|_| CorruptionError::Malformed(s.to_string()))?;
        if !(1..=5).contains(&severity) {
            return Err(CorruptionError::InvalidSeverity(severity));
        }
        Corruption::new(kind, severity as u8)
    }
}

impl Serialize for Corruption {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Corruption {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A corruption with the seed that drives its stochastic parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub seed: u64,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: u8, seed: u64) -> Result<Self, CorruptionError> {
        Corruption::new(kind, severity).map(|c| c.with_seed(seed))
    }

    pub fn corruption(&self) -> Corruption {
        Corruption { kind: self.kind, severity: self.severity }
    }

    fn rng(&self) -> CounterRng {
        CounterRng::stream(self.seed, self.kind.stream_index())
    }
}

/// `original` or a corruption; the string form is the NDJSON `dim` field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DimensionTag {
    Original,
    Corrupted(Corruption),
}

impl fmt::Display for DimensionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DimensionTag::Original => f.write_str("original"),
            DimensionTag::Corrupted(c) => c.fmt(f),
        }
    }
}

impl FromStr for DimensionTag {
    type Err = CorruptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "original" => Ok(DimensionTag::Original),
            other => other.parse().map(DimensionTag::Corrupted),
        }
    }
}

impl Serialize for DimensionTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DimensionTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered, duplicate-free, non-empty sequence of dimension tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionSet {
    dims: Vec<DimensionTag>,
}

impl DimensionSet {
    pub fn new(dims: Vec<DimensionTag>) -> Result<Self, CorruptionError> {
        if dims.is_empty() {
            return Err(CorruptionError::EmptyDimensionSet);
        }
        for (i, d) in dims.iter().enumerate() {
            if dims[..i].contains(d) {
                return Err(CorruptionError::DuplicateTag(d.to_string()));
            }
        }
        Ok(Self { dims })
    }

    pub fn original_only() -> Self {
        Self { dims: vec![DimensionTag::Original] }
    }

    /// `{original, c}`
    pub fn single_expansion(c: Corruption) -> Self {
        Self { dims: vec![DimensionTag::Original, DimensionTag::Corrupted(c)] }
    }

    pub fn tags(&self) -> &[DimensionTag] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }
}

impl FromStr for DimensionSet {
    type Err = CorruptionError;

    /// Comma-separated tags, e.g. `original,brightness:1,fog:2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let dims = s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect::<Result<Vec<_>, _>>()?;
        Self::new(dims)
    }
}

impl fmt::Display for DimensionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.dims.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Every catalogue kind with its severities (18 kinds, 90 corruptions).
pub fn list_corruptions() -> Vec<(CorruptionKind, Vec<u8>)> {
    CorruptionKind::catalogue().map(|k| (k, SEVERITIES.to_vec())).collect()
}

/// Applies `spec` with the embedded 224x224 severity calibration.
pub fn apply_corruption(img: &Image, spec: &CorruptionSpec) -> Result<Image, CorruptionError> {
    apply_corruption_with(img, spec, SeverityTable::builtin())
}

pub fn apply_corruption_with(
    img: &Image,
    spec: &CorruptionSpec,
    table: &SeverityTable,
) -> Result<Image, CorruptionError> {
    use CorruptionKind::*;
    Corruption::new(spec.kind, spec.severity)?;
    let p = table.params(spec.kind, spec.severity)?;
    let mut rng = spec.rng();
    let out = match spec.kind {
        GaussianNoise => noise::gaussian_noise(img, p[0], &mut rng),
        ShotNoise => noise::shot_noise(img, p[0], &mut rng),
        ImpulseNoise => noise::impulse_noise(img, p[0], &mut rng),
        SpeckleNoise => noise::speckle_noise(img, p[0], &mut rng),
        DefocusBlur => blur::defocus_blur(img, p[0], p[1])?,
        GaussianBlur => blur::gaussian_blur(img, p[0])?,
        GlassBlur => blur::glass_blur(img, p[0], p[1] as usize, p[2] as usize, &mut rng)?,
        MotionBlur => blur::motion_blur(img, p[0] as usize, p[1], &mut rng)?,
        ZoomBlur => blur::zoom_blur(img, p[0], p[1], p[2]),
        Snow => weather::snow(img, p, &mut rng),
        Fog => weather::fog(img, p[0], p[1], &mut rng),
        FrostSubstitute => weather::frost_substitute(img, p[0], p[1], &mut rng),
        Spatter => weather::spatter(img, p, &mut rng),
        Brightness => color::brightness(img, p[0]),
        Contrast => color::contrast(img, p[0]),
        Saturate => color::saturate(img, p[0], p[1]),
        ElasticTransform => digital::elastic_transform(img, p[0], p[1], p[2], &mut rng),
        Pixelate => digital::pixelate(img, p[0]),
        JpegCompression => digital::jpeg_compression(img, p[0] as u8)?,
    };
    debug_assert_eq!((out.height(), out.width()), (img.height(), img.width()));
    Ok(out)
}

/// One image per tag, in tag order; `original` is the input itself.
pub fn expand_dimensions(
    img: &Image,
    dims: &DimensionSet,
    seed: u64,
) -> Result<Vec<(DimensionTag, Image)>, CorruptionError> {
    expand_dimensions_with(img, dims, seed, SeverityTable::builtin())
}

pub fn expand_dimensions_with(
    img: &Image,
    dims: &DimensionSet,
    seed: u64,
    table: &SeverityTable,
) -> Result<Vec<(DimensionTag, Image)>, CorruptionError> {
    dims.tags()
        .iter()
        .map(|&tag| match tag {
            DimensionTag::Original => Ok((tag, img.clone())),
            DimensionTag::Corrupted(c) => apply_corruption_with(img, &c.with_seed(seed), table).map(|out| (tag, out)),
        })
        .collect()
}

/// Seed for the `index`-th image of a dataset expanded under `seed`.
pub fn image_seed(seed: u64, index: u64) -> u64 {
    CounterRng::stream(seed, index).next_u64()
}
