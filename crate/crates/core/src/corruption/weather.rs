use super::blur::motion_blur_plane;
use super::color::gray;
use super::filters::{clipped_zoom, gaussian_filter};
use crate::image::{Image, CHANNELS};
use crate::rng::CounterRng;

/// Diamond-square plasma fractal on a `size x size` grid (`size` a power
/// of two), normalized to [0, 1]. Grid wraps toroidally.
pub fn plasma_fractal(size: usize, wibble_decay: f64, rng: &mut CounterRng) -> Vec<f64> {
    assert!(size.is_power_of_two() && size >= 2);
    let mut map = vec![0.0; size * size];
    let mut step = size;
    let mut wibble = 100.0;
    while step >= 2 {
        let half = step / 2;
        let n = size / step;
        let at = |map: &[f64], y: usize, x: usize| map[(y % size) * size + (x % size)];

        // Squares: centre of each cell from its four corners.
        for i in 0..n {
            for j in 0..n {
                let (y, x) = (i * step, j * step);
                let sum = at(&map, y, x) + at(&map, y + step, x) + at(&map, y, x + step) + at(&map, y + step, x + step);
                map[(y + half) * size + x + half] = sum / 4.0 + wibble * rng.uniform(-wibble, wibble);
            }
        }
        // Diamonds on the top edges of each cell.
        for i in 0..n {
            for j in 0..n {
                let (y, x) = (i * step, j * step);
                let above = (y + size - half) % size;
                let sum =
                    at(&map, y + half, x + half) + at(&map, above, x + half) + at(&map, y, x) + at(&map, y, x + step);
                map[y * size + x + half] = sum / 4.0 + wibble * rng.uniform(-wibble, wibble);
            }
        }
        // Diamonds on the left edges of each cell.
        for i in 0..n {
            for j in 0..n {
                let (y, x) = (i * step, j * step);
                let left = (x + size - half) % size;
                let sum =
                    at(&map, y + half, x + half) + at(&map, y + half, left) + at(&map, y, x) + at(&map, y + step, x);
                map[(y + half) * size + x] = sum / 4.0 + wibble * rng.uniform(-wibble, wibble);
            }
        }
        step /= 2;
        wibble /= wibble_decay;
    }
    let lo = map.iter().copied().fold(f64::INFINITY, f64::min);
    map.iter_mut().for_each(|v| *v -= lo);
    let hi = map.iter().copied().fold(0.0, f64::max);
    if hi > 0.0 {
        map.iter_mut().for_each(|v| *v /= hi);
    }
    map
}

fn plasma_crop(h: usize, w: usize, wibble_decay: f64, rng: &mut CounterRng) -> Vec<f64> {
    let size = h.max(w).next_power_of_two().max(2);
    let plasma = plasma_fractal(size, wibble_decay, rng);
    (0..h).flat_map(|y| plasma[y * size..y * size + w].to_vec()).collect()
}

/// Adds `strength * plasma` and renormalizes by the original peak.
pub fn fog(img: &Image, strength: f64, wibble_decay: f64, rng: &mut CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let layer = plasma_crop(h, w, wibble_decay, rng);
    let peak = img.data().iter().copied().fold(0.0, f64::max);
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v + strength * layer[i / CHANNELS]) * peak / (peak + strength))
        .collect();
    Image::from_clipped(h, w, data)
}

/// Snow: a thresholded, zoomed noise layer motion-blurred at a random
/// angle, composited (with its 180-degree rotation) over a brightened image.
///
/// `p = [loc, scale, zoom, threshold, blur_radius, blur_sigma, blend]`.
pub fn snow(img: &Image, p: &[f64], rng: &mut CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let (loc, scale, zoom, threshold) = (p[0], p[1], p[2], p[3]);
    let (radius, sigma, blend) = (p[4] as usize, p[5], p[6]);
    let raw: Vec<f64> = (0..h * w).map(|_| rng.normal(loc, scale)).collect();
    let layer: Vec<f64> = clipped_zoom(&raw, h, w, zoom)
        .into_iter()
        .map(|v| if v < threshold { 0.0 } else { v.clamp(0.0, 1.0) })
        .collect();
    let angle = rng.uniform(-135.0, -45.0);
    let layer = motion_blur_plane(&layer, h, w, radius, sigma, angle);

    let mut out = img.data().to_vec();
    for (i, px) in out.chunks_exact_mut(CHANNELS).enumerate() {
        let lifted = gray(px[0], px[1], px[2]) * 1.5 + 0.5;
        let flakes = layer[i] + layer[h * w - 1 - i];
        for v in px.iter_mut() {
            *v = blend * *v + (1.0 - blend) * v.max(lifted) + flakes;
        }
    }
    Image::from_clipped(h, w, out)
}

/// Procedural stand-in for frost: ridged plasma plus short bright needle
/// strokes, blended as `keep * x + strength * texture`.
pub fn frost_substitute(img: &Image, keep: f64, strength: f64, rng: &mut CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let base = plasma_crop(h, w, 2.0, rng);
    let mut needles = vec![0.0f64; h * w];
    let side = h.min(w) as f64;
    let count = (h * w / 48).max(4);
    for _ in 0..count {
        let (y0, x0) = (rng.uniform(0.0, h as f64), rng.uniform(0.0, w as f64));
        let len = rng.uniform(2.0, (0.15 * side).max(3.0));
        let (sin, cos) = rng.uniform(0.0, std::f64::consts::PI).sin_cos();
        let level = rng.uniform(0.5, 1.0);
        let steps = len.ceil() as usize;
        for t in 0..=steps {
            let (y, x) = ((y0 + t as f64 * sin).floor(), (x0 + t as f64 * cos).floor());
            if y >= 0.0 && x >= 0.0 && (y as usize) < h && (x as usize) < w {
                let idx = y as usize * w + x as usize;
                needles[idx] = needles[idx].max(level);
            }
        }
    }
    let needles = gaussian_filter(&needles, h, w, 0.7, 4.0);
    let tint = [0.9, 0.96, 1.0];
    let mut out = img.data().to_vec();
    for (i, px) in out.chunks_exact_mut(CHANNELS).enumerate() {
        let ridged = (1.0 - (2.0 * base[i] - 1.0).abs()).powi(3);
        let texture = (0.55 * ridged + 0.6 * needles[i]).min(1.0);
        for (c, v) in px.iter_mut().enumerate() {
            *v = keep * *v + strength * texture * tint[c];
        }
    }
    Image::from_clipped(h, w, out)
}

/// Liquid splashes from a smoothed, thresholded noise layer.
///
/// `p = [loc, scale, sigma, threshold, intensity, mode]`; mode 0 adds pale
/// water highlights, mode 1 pastes opaque mud.
pub fn spatter(img: &Image, p: &[f64], rng: &mut CounterRng) -> Image {
    let (h, w) = (img.height(), img.width());
    let (loc, scale, sigma, threshold, intensity) = (p[0], p[1], p[2], p[3], p[4]);
    let raw: Vec<f64> = (0..h * w).map(|_| rng.normal(loc, scale)).collect();
    let liquid: Vec<f64> =
        gaussian_filter(&raw, h, w, sigma, 4.0).into_iter().map(|v| if v < threshold { 0.0 } else { v }).collect();
    let mut out = img.data().to_vec();
    if p[5] == 0.0 {
        let peak = liquid.iter().copied().fold(0.0, f64::max);
        let color = [175.0 / 255.0, 238.0 / 255.0, 238.0 / 255.0];
        for (i, px) in out.chunks_exact_mut(CHANNELS).enumerate() {
            let m = if peak > 0.0 { liquid[i] / peak * intensity } else { 0.0 };
            for (c, v) in px.iter_mut().enumerate() {
                *v += m * color[c];
            }
        }
    } else {
        let mask: Vec<f64> = liquid.iter().map(|&v| if v > threshold { 1.0 } else { 0.0 }).collect();
        let mask: Vec<f64> =
            gaussian_filter(&mask, h, w, intensity, 4.0).into_iter().map(|v| if v < 0.8 { 0.0 } else { v }).collect();
        let color = [63.0 / 255.0, 42.0 / 255.0, 20.0 / 255.0];
        for (i, px) in out.chunks_exact_mut(CHANNELS).enumerate() {
            for (c, v) in px.iter_mut().enumerate() {
                *v = *v * (1.0 - mask[i]) + color[c] * mask[i];
            }
        }
    }
    Image::from_clipped(h, w, out)
}
