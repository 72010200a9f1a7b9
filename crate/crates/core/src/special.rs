//! Gamma-function wrappers with explicit pole handling, and the incomplete-beta
//! combinations used by the ball Green's function.

use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma as statrs_gamma;

use crate::error::{Error, Result};

fn is_pole(x: f64) -> bool {
    x <= 0.0 && (x - x.round()).abs() < 1e-12
}

/// Γ(x), with negative non-integer arguments handled by reflection.
pub fn gamma(x: f64) -> Result<f64> {
    if is_pole(x) {
        return Err(Error::Pole(x));
    }
    if x < 0.5 {
        // Γ(x) = π / (sin(πx) Γ(1−x))
        let s = (std::f64::consts::PI * x).sin();
        return Ok(std::f64::consts::PI / (s * statrs_gamma(1.0 - x)));
    }
    Ok(statrs_gamma(x))
}

/// Γ(x)/Γ(y) for moderate arguments.
pub fn gamma_ratio(x: f64, y: f64) -> Result<f64> {
    Ok(gamma(x)? / gamma(y)?)
}

/// Generalized binomial coefficient x(x−1)…(x−k+1)/k!.
pub fn binomial_generalized(x: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (x - j as f64) / (j as f64 + 1.0))
}

pub fn beta_fn(a: f64, b: f64) -> f64 {
    beta(a, b)
}

/// w^{−a} B_w(a, b), the lower incomplete beta with its leading power removed.
/// Finite and smooth at w = 0, where it equals 1/a.
pub fn beta_lower_scaled(a: f64, b: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 1.0 / a;
    }
    let w = w.min(1.0);
    beta_reg(a, b, w) * beta(a, b) / w.powf(a)
}
