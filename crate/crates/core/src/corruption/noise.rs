//! Pixel-independent noise. These take the raw noise parameter so callers
//! can go outside the severity table (e.g. a zero-noise identity check).

use crate::image::Image;
use crate::rng::CounterRng;

fn map_values(img: &Image, f: impl FnMut(f64) -> f64) -> Image {
    Image::from_clipped(img.height(), img.width(), img.data().iter().copied().map(f).collect())
}

/// `clip(x + N(0, sigma))`
pub fn gaussian_noise(img: &Image, sigma: f64, rng: &mut CounterRng) -> Image {
    if sigma == 0.0 {
        return img.clone();
    }
    map_values(img, |v| v + sigma * rng.standard_normal())
}

/// `clip(Poisson(x * rate) / rate)`
pub fn shot_noise(img: &Image, rate: f64, rng: &mut CounterRng) -> Image {
    map_values(img, |v| rng.poisson(v * rate) as f64 / rate)
}

/// Salt-and-pepper: each value is replaced with probability `amount`,
/// by 1 or 0 with equal odds.
pub fn impulse_noise(img: &Image, amount: f64, rng: &mut CounterRng) -> Image {
    map_values(img, |v| {
        let flip = rng.next_f64() < amount;
        let salt = rng.next_f64() < 0.5;
        match (flip, salt) {
            (false, _) => v,
            (true, true) => 1.0,
            (true, false) => 0.0,
        }
    })
}

/// `clip(x + x * N(0, sigma))`
pub fn speckle_noise(img: &Image, sigma: f64, rng: &mut CounterRng) -> Image {
    map_values(img, |v| v + v * sigma * rng.standard_normal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmm::special::{gaussian_cdf, gaussian_pdf};

    #[test]
    fn zero_sigma_is_identity() {
        let mut rng = CounterRng::new(0);
        let img = Image::from_fn(6, 6, |y, x, c| ((y * 6 + x) * 3 + c) as f64 / 107.0);
        let out = gaussian_noise(&img, 0.0, &mut rng);
        assert_eq!(out.to_rgb8(), img.to_rgb8());
        assert_eq!(out, img);
    }

    /// Standard deviation of clip(0.5 + N(0, sigma), 0, 1), estimated by
    /// Monte Carlo with an independent generator stream.
    fn clipped_std_monte_carlo(sigma: f64, draws: usize) -> f64 {
        let mut rng = CounterRng::stream(0xC1A5, 99);
        let xs: Vec<f64> = (0..draws).map(|_| (0.5 + sigma * rng.standard_normal()).clamp(0.0, 1.0)).collect();
        let m = xs.iter().sum::<f64>() / draws as f64;
        (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / draws as f64).sqrt()
    }

    /// Closed form of the same quantity, as a cross-check of the oracle.
    fn clipped_std_closed_form(sigma: f64) -> f64 {
        // Symmetric clipping at +-a with a = 0.5: E[Y^2] for Y = clip(Z*sigma, -a, a).
        let a = 0.5 / sigma;
        let tail = 1.0 - gaussian_cdf(a);
        let inner = sigma * sigma * ((2.0 * gaussian_cdf(a) - 1.0) - 2.0 * a * gaussian_pdf(a));
        (inner + 2.0 * 0.25 * tail).sqrt()
    }

    #[test]
    fn gaussian_noise_std_matches_clipped_oracle() {
        let img = Image::filled(100, 100, 0.5);
        for (severity, sigma) in [0.08, 0.12, 0.18, 0.26, 0.38].into_iter().enumerate() {
            let oracle = clipped_std_monte_carlo(sigma, 1_000_000);
            assert!((oracle / clipped_std_closed_form(sigma) - 1.0).abs() < 0.005);
            let mut rng = CounterRng::stream(1, severity as u64);
            let out = gaussian_noise(&img, sigma, &mut rng);
            let d = out.data();
            let m = d.iter().sum::<f64>() / d.len() as f64;
            let s = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
            assert!((s / oracle - 1.0).abs() < 0.05, "sigma {sigma}: {s} vs {oracle}");
        }
    }

    #[test]
    fn impulse_rate() {
        let img = Image::filled(100, 100, 0.5);
        let mut rng = CounterRng::new(3);
        let out = impulse_noise(&img, 0.27, &mut rng);
        let flipped = out.data().iter().filter(|&&v| v != 0.5).count() as f64 / 30_000.0;
        assert!((flipped - 0.27).abs() < 0.015);
    }

    #[test]
    fn shot_noise_is_unbiased() {
        let img = Image::filled(100, 100, 0.3);
        let mut rng = CounterRng::new(4);
        let out = shot_noise(&img, 60.0, &mut rng);
        let m = out.data().iter().sum::<f64>() / 30_000.0;
        assert!((m - 0.3).abs() < 0.005);
    }

    #[test]
    fn speckle_leaves_black_untouched() {
        let img = Image::filled(4, 4, 0.0);
        let mut rng = CounterRng::new(5);
        assert_eq!(speckle_noise(&img, 0.6, &mut rng), img);
    }
}
