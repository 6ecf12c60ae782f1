use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};

use super::filters::{gaussian_filter, map_planes, reflect101, sample_bilinear};
use super::CorruptionError;
use crate::image::Image;
use crate::rng::CounterRng;

/// Solves the 2x3 affine map taking each `src[i]` to `dst[i]`.
fn affine_from_points(src: [[f64; 2]; 3], dst: [[f64; 2]; 3]) -> [[f64; 3]; 2] {
    let [[x0, y0], [x1, y1], [x2, y2]] = src;
    let det = x0 * (y1 - y2) - y0 * (x1 - x2) + (x1 * y2 - x2 * y1);
    let mut m = [[0.0; 3]; 2];
    for (row, out) in m.iter_mut().enumerate() {
        let (u0, u1, u2) = (dst[0][row], dst[1][row], dst[2][row]);
        out[0] = (u0 * (y1 - y2) - y0 * (u1 - u2) + (u1 * y2 - u2 * y1)) / det;
        out[1] = (x0 * (u1 - u2) - u0 * (x1 - x2) + (x1 * u2 - x2 * u1)) / det;
        out[2] = (x0 * (y1 * u2 - y2 * u1) - y0 * (x1 * u2 - x2 * u1) + u0 * (x1 * y2 - x2 * y1)) / det;
    }
    m
}

fn invert_affine(m: [[f64; 3]; 2]) -> [[f64; 3]; 2] {
    let [[a, b, c], [d, e, f]] = m;
    let det = a * e - b * d;
    let (ia, ib, id, ie) = (e / det, -b / det, -d / det, a / det);
    [[ia, ib, -(ia * c + ib * f)], [id, ie, -(id * c + ie * f)]]
}

fn sample_bilinear101(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (ty, tx) = (y - y0, x - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let at = |yy: isize, xx: isize| plane[reflect101(yy, h) * w + reflect101(xx, w)];
    let top = at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx;
    let bottom = at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Random affine jitter of three anchor points by up to `affine` pixels,
/// followed by a smooth random displacement field of amplitude `alpha` and
/// smoothness `sigma`.
pub fn elastic_transform(img: &Image, alpha: f64, sigma: f64, affine: f64, rng: &mut CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let (cy, cx) = ((h / 2) as f64, (w / 2) as f64);
    let s = (h.min(w) / 3) as f64;
    // Anchor coordinates are (row, col) pairs read as (x, y), as the
    // reference pipeline does.
    let src = [[cy + s, cx + s], [cy + s, cx - s], [cy - s, cx - s]];
    let mut dst = src;
    for p in dst.iter_mut() {
        for v in p.iter_mut() {
            *v += rng.uniform(-affine, affine);
        }
    }
    let inv = invert_affine(affine_from_points(src, dst));
    let warped = map_planes(img, |p| {
        let mut out = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = (x as f64, y as f64);
                let sx = inv[0][0] * xf + inv[0][1] * yf + inv[0][2];
                let sy = inv[1][0] * xf + inv[1][1] * yf + inv[1][2];
                out[y * w + x] = sample_bilinear101(p, h, w, sy, sx);
            }
        }
        out
    });

    let mut field = || {
        let raw: Vec<f64> = (0..h * w).map(|_| rng.uniform(-1.0, 1.0)).collect();
        gaussian_filter(&raw, h, w, sigma, 3.0).into_iter().map(|v| v * alpha).collect::<Vec<f64>>()
    };
    let dx = field();
    let dy = field();
    map_planes(&warped, |p| {
        (0..h * w).map(|i| sample_bilinear(p, h, w, (i / w) as f64 + dy[i], (i % w) as f64 + dx[i])).collect()
    })
}

/// Box-average down to `floor(side * factor)` then nearest-neighbour back up.
pub fn pixelate(img: &Image, factor: f64) -> Image {
    let (h, w) = (img.height(), img.width());
    let sh = ((h as f64 * factor) as usize).max(1);
    let sw = ((w as f64 * factor) as usize).max(1);
    map_planes(img, |p| {
        let mut small = vec![0.0; sh * sw];
        for i in 0..sh {
            let (r0, r1) = (i * h / sh, ((i + 1) * h / sh).max(i * h / sh + 1));
            for j in 0..sw {
                let (c0, c1) = (j * w / sw, ((j + 1) * w / sw).max(j * w / sw + 1));
                let mut acc = 0.0;
                for y in r0..r1 {
                    acc += p[y * w + c0..y * w + c1].iter().sum::<f64>();
                }
                small[i * sw + j] = acc / ((r1 - r0) * (c1 - c0)) as f64;
            }
        }
        (0..h * w).map(|k| small[(k / w) * sh / h * sw + (k % w) * sw / w]).collect()
    })
}

/// Baseline JPEG round trip at the given quality.
pub fn jpeg_compression(img: &Image, quality: u8) -> Result<Image, CorruptionError> {
    let (h, w) = (img.height(), img.width());
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100))
        .encode(&img.to_rgb8(), w as u32, h as u32, ExtendedColorType::Rgb8)
        .map_err(|e| CorruptionError::Jpeg(e.to_string()))?;
    let decoded =
        image::load(Cursor::new(buf), ImageFormat::Jpeg).map_err(|e| CorruptionError::Jpeg(e.to_string()))?.to_rgb8();
    Ok(Image::from_rgb8(h, w, decoded.as_raw()))
}
