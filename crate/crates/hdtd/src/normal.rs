//! Standard normal CDF, survival function and upper quantile.
//!
//! The CDF goes through the complementary error function, which keeps the
//! tails accurate; the quantile starts from a rational approximation and is
//! polished with Newton steps against the erfc-based survival function, so
//! both directions agree to well under 1e-12 absolute.

use std::f64::consts::FRAC_1_SQRT_2;

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

/// Phi(x), the standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 - Phi(x), the upper tail probability.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Lower-tail quantile by Acklam's rational approximation (relative error
/// below 1.2e-9 on its own; refined by the caller). Coefficients kept
/// verbatim from the published algorithm.
#[allow(clippy::excessive_precision)]
fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

/// z such that 1 - Phi(z) = p, for p in (0, 1).
pub fn std_normal_upper_quantile(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "upper quantile requires p in (0,1), got {p}"
    );
    // initial guess for the upper tail: z = -acklam(p) mirrored
    let mut z = -acklam(p);
    for _ in 0..3 {
        let err = std_normal_sf(z) - p;
        let d = std_normal_pdf(z);
        if d == 0.0 {
            break;
        }
        z += err / d;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_matches_reference_values() {
        let cases = [
            (0.0, 0.5),
            (0.5, 0.6914624612740131),
            (1.0, 0.8413447460685429),
            (2.0, 0.9772498680518208),
            (3.0, 0.9986501019683699),
            (-1.0, 0.15865525393145707),
            (-3.0, 0.0013498980316300933),
        ];
        for (x, want) in cases {
            assert!(
                (std_normal_cdf(x) - want).abs() < 1e-15,
                "Phi({x}) = {} != {want}",
                std_normal_cdf(x)
            );
        }
        // deep tail through the survival function
        assert!((std_normal_sf(5.0) - 2.866515718791933e-07).abs() < 1e-19);
        assert!((std_normal_sf(8.0) - 6.22096057427174e-16).abs() < 1e-28);
    }

    #[test]
    fn quantile_matches_reference_values() {
        let cases = [
            (0.5, 0.0),
            (0.1, 1.2815515655446004),
            (0.05, 1.6448536269514722),
            (0.025, 1.959963984540054),
            (0.01, 2.3263478740408408),
            (0.005, 2.5758293035489004),
            (1e-6, 4.753424308822899),
            (1e-10, 6.361340902404056),
        ];
        for (p, want) in cases {
            let got = std_normal_upper_quantile(p);
            assert!((got - want).abs() < 1e-12, "z({p}) = {got} != {want}");
        }
    }

    #[test]
    fn quantile_and_sf_are_inverse() {
        for &p in &[0.4, 0.2, 0.05, 0.01, 1e-4, 1e-8] {
            let z = std_normal_upper_quantile(p);
            assert!((std_normal_sf(z) - p).abs() <= 1e-12 * p.max(1e-12));
        }
    }

    #[test]
    #[should_panic]
    fn quantile_rejects_out_of_range() {
        std_normal_upper_quantile(0.0);
    }
}
