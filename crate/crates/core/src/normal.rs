//! Standard normal density, distribution function and the tail-stable
//! helpers needed by the probit gate.

use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the log-CDF and the inverse Mills ratio switch to
/// their asymptotic series.
const ASYMPTOTIC_CUTOFF: f64 = -8.0;

pub fn pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / SQRT_2)
}

/// `ln Φ(u)`, finite for any finite `u`.
pub fn ln_cdf(u: f64) -> f64 {
    if u >= ASYMPTOTIC_CUTOFF {
        cdf(u).ln()
    } else {
        // Φ(u) = φ(u)/|u| · (1 − 1/u² + 3/u⁴ − 15/u⁶ + …)
        -0.5 * u * u - LN_SQRT_2PI - (-u).ln() + tail_series(u).ln()
    }
}

/// Inverse Mills ratio `φ(u)/Φ(u)`.
pub fn pdf_over_cdf(u: f64) -> f64 {
    if u >= ASYMPTOTIC_CUTOFF {
        pdf(u) / cdf(u)
    } else {
        -u / tail_series(u)
    }
}

fn tail_series(u: f64) -> f64 {
    let z = 1.0 / (u * u);
    1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)))
}
