use crate::image::{Image, CHANNELS};

pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let v = r.max(g).max(b);
    let delta = v - r.min(g).min(b);
    let s = if v == 0.0 { 0.0 } else { delta / v };
    let h = if delta == 0.0 {
        0.0
    } else if v == r {
        (g - b) / delta
    } else if v == g {
        2.0 + (b - r) / delta
    } else {
        4.0 + (r - g) / delta
    };
    ((h / 6.0).rem_euclid(1.0), s, v)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - f * s);
    let t = v * (1.0 - (1.0 - f) * s);
    match (sector as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn map_hsv(img: &Image, f: impl Fn(f64, f64, f64) -> (f64, f64, f64)) -> Image {
    let mut out = img.data().to_vec();
    for px in out.chunks_exact_mut(CHANNELS) {
        let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
        let (h, s, v) = f(h, s, v);
        let (r, g, b) = hsv_to_rgb(h, s.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        px.copy_from_slice(&[r, g, b]);
    }
    Image::from_clipped(img.height(), img.width(), out)
}

/// Adds `shift` to the HSV value channel.
pub fn brightness(img: &Image, shift: f64) -> Image {
    map_hsv(img, |h, s, v| (h, s, v + shift))
}

/// `s * scale + offset` on the HSV saturation channel.
pub fn saturate(img: &Image, scale: f64, offset: f64) -> Image {
    map_hsv(img, |h, s, v| (h, s * scale + offset, v))
}

/// `(x - channel_mean) * factor + channel_mean`
pub fn contrast(img: &Image, factor: f64) -> Image {
    let n = (img.height() * img.width()) as f64;
    let mut means = [0.0; CHANNELS];
    for px in img.data().chunks_exact(CHANNELS) {
        for c in 0..CHANNELS {
            means[c] += px[c];
        }
    }
    means.iter_mut().for_each(|m| *m /= n);
    let mut out = img.data().to_vec();
    for px in out.chunks_exact_mut(CHANNELS) {
        for c in 0..CHANNELS {
            px[c] = (px[c] - means[c]) * factor + means[c];
        }
    }
    Image::from_clipped(img.height(), img.width(), out)
}

/// ITU-R 601 luma.
pub fn gray(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip() {
        let samples = [(0.2, 0.4, 0.9), (1.0, 0.0, 0.0), (0.3, 0.3, 0.3), (0.0, 0.0, 0.0), (0.9, 0.8, 0.1)];
        for (r, g, b) in samples {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
    }

    #[test]
    fn contrast_fixes_uniform_image() {
        let img = Image::filled(10, 10, 0.5);
        for f in [0.4, 0.3, 0.2, 0.1, 0.05] {
            assert_eq!(contrast(&img, f), img);
        }
    }

    #[test]
    fn brightness_lifts_value() {
        let img = Image::filled(2, 2, 0.5);
        assert!(brightness(&img, 0.2).data().iter().all(|v| (v - 0.7).abs() < 1e-12));
        assert!(brightness(&img, 0.9).data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn saturate_zero_scale_is_gray() {
        let img = Image::from_fn(3, 3, |y, x, c| [0.9, 0.2, 0.4][c] * (1.0 + (y + x) as f64) / 5.0);
        let out = saturate(&img, 0.0, 0.0);
        for px in out.data().chunks_exact(3) {
            assert!((px[0] - px[1]).abs() < 1e-12 && (px[1] - px[2]).abs() < 1e-12);
        }
    }
}
