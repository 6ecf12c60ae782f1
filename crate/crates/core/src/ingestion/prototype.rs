use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IngestionError;
use crate::image::Image;
use crate::scoring::{cosine_logits, LogitVector, ScoringError};

pub const DEFAULT_IMAGE_SIZE: usize = 32;
pub const DEFAULT_SCALE: f64 = 100.0;

/// Nearest-class-mean classifier on raw pixels.
///
/// Features are the image resized to `image_size` square, flattened, shifted
/// by the training set's scalar pixel mean and L2-normalized. Class means
/// are renormalized to unit length, and logits are `scale * cosine`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeModel {
    pub class_names: Vec<String>,
    pub class_means: Vec<Vec<f64>>,
    pub scale: f64,
    pub image_size: usize,
    pub pixel_mean: f64,
}

impl PrototypeModel {
    pub fn k(&self) -> usize {
        self.class_means.len()
    }

    /// Feature dimension.
    pub fn d(&self) -> usize {
        self.image_size * self.image_size * crate::image::CHANNELS
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn raw_feature(&self, img: &Image) -> Vec<f64> {
        raw_pixels(img, self.image_size)
    }
}

fn raw_pixels(img: &Image, size: usize) -> Vec<f64> {
    if img.height() == size && img.width() == size {
        img.data().to_vec()
    } else {
        img.resize_bilinear(size, size).into_data()
    }
}

fn unit(mut v: Vec<f64>) -> Result<Vec<f64>, IngestionError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(IngestionError::ZeroFeature);
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Fits on in-memory classes, in the given order.
pub fn fit_prototype_images(
    classes: &[(String, Vec<Image>)],
    image_size: usize,
) -> Result<PrototypeModel, IngestionError> {
    let populated = classes.iter().filter(|(_, imgs)| !imgs.is_empty()).count();
    if populated < 2 || populated != classes.len() {
        return Err(IngestionError::TooFewClasses(populated));
    }
    let raw: Vec<Vec<Vec<f64>>> =
        classes.iter().map(|(_, imgs)| imgs.iter().map(|i| raw_pixels(i, image_size)).collect()).collect();
    let (sum, count) = raw.iter().flatten().fold((0.0, 0usize), |(s, n), f| (s + f.iter().sum::<f64>(), n + f.len()));
    let pixel_mean = sum / count as f64;

    let class_means = raw
        .iter()
        .map(|feats| {
            let mut acc = vec![0.0; feats[0].len()];
            for f in feats {
                let f = unit(f.iter().map(|v| v - pixel_mean).collect())?;
                acc.iter_mut().zip(&f).for_each(|(a, b)| *a += b);
            }
            unit(acc)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PrototypeModel {
        class_names: classes.iter().map(|(n, _)| n.clone()).collect(),
        class_means,
        scale: DEFAULT_SCALE,
        image_size,
        pixel_mean,
    })
}

/// Fits on `root/<class_name>/*.{png,jpg,jpeg}`, classes in name order.
pub fn fit_prototype(dataset_root: impl AsRef<Path>, image_size: usize) -> Result<PrototypeModel, IngestionError> {
    let classes: Vec<(String, Vec<Image>)> = load_class_dataset(dataset_root)?
        .into_iter()
        .map(|(name, items)| (name, items.into_iter().map(|(_, img)| img).collect()))
        .collect();
    fit_prototype_images(&classes, image_size)
}

/// `scale * cosine(feature, mean_j)` for every class.
pub fn prototype_logits(model: &PrototypeModel, img: &Image) -> Result<LogitVector, IngestionError> {
    let feature: Vec<f64> = model.raw_feature(img).into_iter().map(|v| v - model.pixel_mean).collect();
    let cos = cosine_logits(&feature, &model.class_means).map_err(|e| match e {
        ScoringError::ZeroNorm => IngestionError::ZeroFeature,
        other => other.into(),
    })?;
    Ok(LogitVector::new(cos.iter().map(|c| c * model.scale).collect())?)
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, IngestionError> {
    let io = |e| IngestionError::Io { path: dir.to_path_buf(), source: e };
    let mut entries =
        fs::read_dir(dir).map_err(io)?.map(|e| e.map(|e| e.path())).collect::<Result<Vec<_>, _>>().map_err(io)?;
    entries.sort();
    Ok(entries)
}

fn load(path: &Path) -> Result<Image, IngestionError> {
    Image::load(path).map_err(|e| IngestionError::UndecodableImage { path: path.to_path_buf(), message: e.to_string() })
}

fn relative_id(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().replace('\\', "/")
}

/// `(class_name, [(sample_id, image)])` per class.
pub type ClassDataset = Vec<(String, Vec<(String, Image)>)>;

/// Class directories under `root` with their `(sample_id, image)` lists;
/// sample ids are paths relative to `root`. Directories without images
/// are skipped.
pub fn load_class_dataset(root: impl AsRef<Path>) -> Result<ClassDataset, IngestionError> {
    let root = root.as_ref();
    let mut classes = Vec::new();
    for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
        let items = sorted_entries(&dir)?
            .into_iter()
            .filter(|p| is_image(p))
            .map(|p| Ok((relative_id(root, &p), load(&p)?)))
            .collect::<Result<Vec<_>, IngestionError>>()?;
        if !items.is_empty() {
            let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            classes.push((name, items));
        }
    }
    Ok(classes)
}

/// Every image directly inside `root`, as `(sample_id, image)`.
pub fn load_flat_dataset(root: impl AsRef<Path>) -> Result<Vec<(String, Image)>, IngestionError> {
    let root = root.as_ref();
    sorted_entries(root)?.into_iter().filter(|p| is_image(p)).map(|p| Ok((relative_id(root, &p), load(&p)?))).collect()
}
