//! Plane-level filtering primitives shared by the corruption transforms.
//!
//! Planes are row-major `f64` buffers of one channel. Out-of-range indices
//! use half-sample symmetric reflection (`d c b a | a b c d | d c b a`),
//! applied periodically so any offset is valid.

use crate::image::{Image, CHANNELS};

/// Half-sample symmetric reflection of `i` into `0..n`.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

/// Whole-sample symmetric reflection (`d c b | a b c d | c b a`).
#[inline]
pub fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Normalized 1-D Gaussian taps of radius `floor(truncate * sigma + 0.5)`.
pub fn gaussian_kernel(sigma: f64, truncate: f64) -> Vec<f64> {
    let radius = gaussian_radius(sigma, truncate) as isize;
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let mut taps: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

pub fn gaussian_radius(sigma: f64, truncate: f64) -> usize {
    if sigma <= 0.0 {
        0
    } else {
        (truncate * sigma + 0.5) as usize
    }
}

/// Separable convolution with a symmetric odd-length kernel.
pub fn convolve_separable(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[reflect(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * tmp[reflect(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

pub fn gaussian_filter(plane: &[f64], h: usize, w: usize, sigma: f64, truncate: f64) -> Vec<f64> {
    convolve_separable(plane, h, w, &gaussian_kernel(sigma, truncate))
}

/// Dense 2-D correlation with a centred `k x k` kernel.
pub fn convolve2d(plane: &[f64], h: usize, w: usize, kernel: &[f64], k: usize) -> Vec<f64> {
    let r = (k / 2) as isize;
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..k {
                let sy = reflect(y as isize + ky as isize - r, h);
                for kx in 0..k {
                    let wgt = kernel[ky * k + kx];
                    if wgt != 0.0 {
                        acc += wgt * plane[sy * w + reflect(x as isize + kx as isize - r, w)];
                    }
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Bilinear sample at fractional `(y, x)` with reflected borders.
#[inline]
pub fn sample_bilinear(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (ty, tx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |yy: isize, xx: isize| plane[reflect(yy, h) * w + reflect(xx, w)];
    let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
    let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Applies `f` to each channel plane and reassembles a clipped image.
pub fn map_planes(img: &Image, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Image {
    let planes: [Vec<f64>; CHANNELS] = std::array::from_fn(|c| f(&img.channel(c)));
    Image::from_planes(img.height(), img.width(), &planes)
}

/// Centre crop by `1/zoom` followed by a bilinear upscale back to `h x w`
/// (the "clipped zoom" used by zoom blur and the snow layer).
pub fn clipped_zoom(plane: &[f64], h: usize, w: usize, zoom: f64) -> Vec<f64> {
    let ch = ((h as f64 / zoom).ceil() as usize).clamp(1, h);
    let cw = ((w as f64 / zoom).ceil() as usize).clamp(1, w);
    let top = (h - ch) / 2;
    let left = (w - cw) / 2;
    let zh = ((ch as f64 * zoom).round() as usize).max(1);
    let zw = ((cw as f64 * zoom).round() as usize).max(1);
    let trim_top = zh.saturating_sub(h) / 2;
    let trim_left = zw.saturating_sub(w) / 2;
    // Endpoint-aligned linear mapping from the zoomed grid onto the crop.
    let scale = |n_in: usize, n_out: usize| {
        if n_out > 1 {
            (n_in - 1) as f64 / (n_out - 1) as f64
        } else {
            0.0
        }
    };
    let (sy, sx) = (scale(ch, zh), scale(cw, zw));
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let fy = top as f64 + ((y + trim_top).min(zh - 1)) as f64 * sy;
        for x in 0..w {
            let fx = left as f64 + ((x + trim_left).min(zw - 1)) as f64 * sx;
            out[y * w + x] = sample_bilinear(plane, h, w, fy, fx);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_modes() {
        let r: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(r, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        let r: Vec<usize> = (-3..7).map(|i| reflect101(i, 4)).collect();
        assert_eq!(r, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect(100, 1), 0);
    }

    #[test]
    fn gaussian_kernel_is_normalized() {
        let k = gaussian_kernel(2.0, 4.0);
        assert_eq!(k.len(), 17);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.0, 4.0), vec![1.0]);
    }

    #[test]
    fn smoothing_preserves_constant() {
        let plane = vec![0.4; 9 * 5];
        for v in gaussian_filter(&plane, 9, 5, 3.0, 4.0) {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_zoom_is_identity() {
        let plane: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let out = clipped_zoom(&plane, 5, 6, 1.0);
        for (a, b) in plane.iter().zip(&out) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
