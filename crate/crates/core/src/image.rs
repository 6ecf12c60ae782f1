//! RGB images with unit-interval `f64` intensities.

use std::path::Path;
use thiserror::Error;

pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image must be at least 1x1, got {height}x{width}")]
    EmptyShape { height: usize, width: usize },
    #[error("expected {expected} intensities for the shape, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("intensity {value} at index {index} is outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: ::image::ImageError,
    },
    #[error("cannot encode image: {0}")]
    Encode(#[from] ::image::ImageError),
}

/// Row-major `height x width x 3` image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyShape { height, width });
        }
        let expected = height * width * CHANNELS;
        if data.len() != expected {
            return Err(ImageError::LengthMismatch { expected, actual: data.len() });
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange { index, value });
        }
        Ok(Self { height, width, data })
    }

    /// Builds an image from arbitrary values, clipping each into [0, 1]
    /// (NaN maps to 0).
    pub fn from_clipped(height: usize, width: usize, mut data: Vec<f64>) -> Self {
        assert_eq!(data.len(), height * width * CHANNELS, "shape/data mismatch");
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self { height, width, data }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::from_clipped(height, width, vec![value; height * width * CHANNELS])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::from_clipped(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(CHANNELS).copied().collect()
    }

    pub fn from_planes(height: usize, width: usize, planes: &[Vec<f64>; CHANNELS]) -> Self {
        let mut data = vec![0.0; height * width * CHANNELS];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * CHANNELS + c] = v;
            }
        }
        Self::from_clipped(height, width, data)
    }

    pub fn mean_squared_difference(&self, other: &Image) -> f64 {
        assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / self.data.len() as f64
    }

    /// `byte / 255` per channel.
    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Self {
        Self::from_clipped(height, width, bytes.iter().map(|&b| b as f64 / 255.0).collect())
    }

    /// `round(v * 255)` with ties to even.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        let decoded = ::image::open(path)
            .map_err(|source| ImageError::Decode { path: path.display().to_string(), source })?
            .to_rgb8();
        let (w, h) = decoded.dimensions();
        Ok(Self::from_rgb8(h as usize, w as usize, decoded.as_raw()))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let buf = ::image::RgbImage::from_raw(self.width as u32, self.height as u32, self.to_rgb8())
            .expect("buffer length matches shape");
        buf.save_with_format(path, ::image::ImageFormat::Png)?;
        Ok(())
    }

    /// Bilinear resize (pixel-centre aligned, edge clamped).
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Image {
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Image::from_fn(height, width, |y, x, c| {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
            let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
            let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
            let top = self.get(y0, x0, c) * (1.0 - tx) + self.get(y0, x1, c) * tx;
            let bottom = self.get(y1, x0, c) * (1.0 - tx) + self.get(y1, x1, c) * tx;
            top * (1.0 - ty) + bottom * ty
        })
    }
}

#[inline]
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8
}
