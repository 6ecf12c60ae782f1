use super::filters::{clipped_zoom, convolve2d, gaussian_filter, gaussian_radius, map_planes, reflect, reflect101};
use super::{CorruptionError, CorruptionKind};
use crate::image::{Image, CHANNELS};
use crate::rng::CounterRng;

const TRUNCATE: f64 = 4.0;

fn require_side(img: &Image, kind: CorruptionKind, radius: usize) -> Result<(), CorruptionError> {
    let side = img.height().min(img.width());
    if radius >= side {
        return Err(CorruptionError::ImageTooSmall { kind, radius, side });
    }
    Ok(())
}

pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image, CorruptionError> {
    require_side(img, CorruptionKind::GaussianBlur, gaussian_radius(sigma, TRUNCATE))?;
    let (h, w) = (img.height(), img.width());
    Ok(map_planes(img, |p| gaussian_filter(p, h, w, sigma, TRUNCATE)))
}

/// Anti-aliased disk of the given radius on a `(2 * max(8, r) + 1)^2` grid,
/// softened by a small Gaussian (3x3 below radius 8, 5x5 above).
fn disk_kernel(radius: f64, alias_blur: f64) -> (Vec<f64>, usize) {
    let half = radius.max(8.0) as isize;
    let k = (2 * half + 1) as usize;
    let mut disk: Vec<f64> = (-half..=half)
        .flat_map(|y| (-half..=half).map(move |x| ((x * x + y * y) as f64 <= radius * radius) as u8 as f64))
        .collect();
    let total: f64 = disk.iter().sum();
    disk.iter_mut().for_each(|v| *v /= total);

    let ks: isize = if radius <= 8.0 { 3 } else { 5 };
    let mut taps: Vec<f64> = (0..ks)
        .map(|i| {
            let d = (i - (ks - 1) / 2) as f64;
            (-d * d / (2.0 * alias_blur * alias_blur)).exp()
        })
        .collect();
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    let r = ks / 2;
    let smooth = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; k * k];
        for y in 0..k {
            for x in 0..k {
                out[y * k + x] = taps
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        let o = i as isize - r;
                        if horizontal {
                            t * src[y * k + reflect101(x as isize + o, k)]
                        } else {
                            t * src[reflect101(y as isize + o, k) * k + x]
                        }
                    })
                    .sum();
            }
        }
        out
    };
    let mut kernel = smooth(&smooth(&disk, true), false);
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= total);
    (kernel, k)
}

pub fn defocus_blur(img: &Image, radius: f64, alias_blur: f64) -> Result<Image, CorruptionError> {
    let (kernel, k) = disk_kernel(radius, alias_blur);
    require_side(img, CorruptionKind::DefocusBlur, k / 2)?;
    let (h, w) = (img.height(), img.width());
    Ok(map_planes(img, |p| convolve2d(p, h, w, &kernel, k)))
}

/// Gaussian blur, then `iterations` sweeps of random pixel swaps within
/// `delta`, then a second Gaussian blur.
pub fn glass_blur(
    img: &Image,
    sigma: f64,
    delta: usize,
    iterations: usize,
    rng: &mut CounterRng,
) -> Result<Image, CorruptionError> {
    let radius = gaussian_radius(sigma, TRUNCATE).max(delta);
    require_side(img, CorruptionKind::GlassBlur, radius)?;
    let (h, w) = (img.height(), img.width());
    let blurred = map_planes(img, |p| gaussian_filter(p, h, w, sigma, TRUNCATE));
    let mut data = blurred.into_data();
    let d = delta as i64;
    for _ in 0..iterations {
        for y in ((d + 1)..=(h as i64 - d)).rev() {
            for x in ((d + 1)..=(w as i64 - d)).rev() {
                let dx = rng.range_inclusive(-d, d - 1);
                let dy = rng.range_inclusive(-d, d - 1);
                let (y2, x2) = ((y + dy) as usize, (x + dx) as usize);
                let (y, x) = (y as usize, x as usize);
                if y >= h || x >= w || y2 >= h || x2 >= w {
                    continue;
                }
                for c in 0..CHANNELS {
                    data.swap((y * w + x) * CHANNELS + c, (y2 * w + x2) * CHANNELS + c);
                }
            }
        }
    }
    let swapped = Image::from_clipped(h, w, data);
    Ok(map_planes(&swapped, |p| gaussian_filter(p, h, w, sigma, TRUNCATE)))
}

/// One-sided Gaussian-weighted line blur: tap `i` (0..=2r) samples the
/// pixel `i` steps along `angle_deg` with weight `exp(-i^2 / 2 sigma^2)`.
pub fn motion_blur_plane(plane: &[f64], h: usize, w: usize, radius: usize, sigma: f64, angle_deg: f64) -> Vec<f64> {
    let width = 2 * radius + 1;
    let mut weights: Vec<f64> = (0..width).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= s);
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let offsets: Vec<(isize, isize)> =
        (0..width).map(|i| ((i as f64 * sin).round() as isize, (i as f64 * cos).round() as isize)).collect();
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = weights
                .iter()
                .zip(&offsets)
                .map(|(wt, (oy, ox))| wt * plane[reflect(y as isize + oy, h) * w + reflect(x as isize + ox, w)])
                .sum();
        }
    }
    out
}

pub fn motion_blur(img: &Image, radius: usize, sigma: f64, rng: &mut CounterRng) -> Result<Image, CorruptionError> {
    require_side(img, CorruptionKind::MotionBlur, radius)?;
    let angle = rng.uniform(-45.0, 45.0);
    let (h, w) = (img.height(), img.width());
    Ok(map_planes(img, |p| motion_blur_plane(p, h, w, radius, sigma, angle)))
}

/// Zoom factors `start + i * step` for `i < ceil((stop - start) / step)`.
pub fn zoom_factors(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).ceil().max(0.0) as usize;
    (0..n).map(|i| start + i as f64 * step).collect()
}

/// Mean of the image and its progressively zoomed centre crops.
pub fn zoom_blur(img: &Image, start: f64, stop: f64, step: f64) -> Image {
    let factors = zoom_factors(start, stop, step);
    let (h, w) = (img.height(), img.width());
    let n = factors.len() as f64;
    map_planes(img, |p| {
        let mut acc = p.to_vec();
        for &z in &factors {
            for (a, v) in acc.iter_mut().zip(clipped_zoom(p, h, w, z)) {
                *a += v;
            }
        }
        acc.iter().map(|v| v / (n + 1.0)).collect()
    })
}
