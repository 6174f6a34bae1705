//! Scalar special functions: `ln Γ` and the exponentially scaled modified
//! Bessel function of the first kind, `e^{-x} I_ν(x)`.
//!
//! Densities built on top of these are assembled in log space, so the Bessel
//! function is also exposed as `ln(e^{-x} I_ν(x))`.

use std::f64::consts::PI;

use crate::error::{domain, Result};

const LANCZOS_G: f64 = 4.742_187_5;
const LANCZOS_COEFFS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_049e-4,
    2.174_396_181_152_126_5e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_141e-5,
    3.689_918_265_953_162e-6,
];

/// Series terms are dropped once they fall below this fraction of the partial sum.
const SERIES_REL_CUTOFF: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 500;

/// Index `ν > -1` of a modified Bessel function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselIndex(f64);

impl BesselIndex {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu.is_finite() && nu > -1.0) {
            return domain(format!("Bessel index must satisfy nu > -1, got {nu}"));
        }
        Ok(Self(nu))
    }

    /// Index `(δ - 2) / 2` attached to a squared Bessel process of dimension δ.
    pub fn from_dimension(delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return domain(format!("dimension must be positive, got {delta}"));
        }
        Self::new((delta - 2.0) / 2.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 607/128).
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("ln_gamma requires a finite x > 0, got {x}"));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return ln_gamma_unchecked(x + 1.0) - x.ln();
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEFFS[0];
    for (k, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        sum += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}

/// Argument above which the large-argument expansion replaces the power series.
///
/// For `x >= ν²` the expansion terms decrease from the start, and by `x = 20`
/// its smallest term is below `e^{-40}`.
fn crossover(nu: f64) -> f64 {
    (nu * nu).max(20.0)
}

/// `ln(e^{-x} I_ν(x))`.
///
/// Returns `-inf` at `x = 0` for `ν > 0` and `+inf` for `-1 < ν < 0`.
pub fn ln_bessel_i_scaled(nu: BesselIndex, x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return domain(format!("Bessel argument must be finite and >= 0, got {x}"));
    }
    let nu = nu.value();
    if x == 0.0 {
        return Ok(if nu == 0.0 {
            0.0
        } else if nu > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        });
    }
    if x <= crossover(nu) {
        Ok(ln_series(nu, x))
    } else {
        Ok(ln_large_argument(nu, x))
    }
}

/// `e^{-x} I_ν(x)`; finite for every `x >= 0` when `ν >= 0`.
pub fn bessel_i_scaled(nu: BesselIndex, x: f64) -> Result<f64> {
    ln_bessel_i_scaled(nu, x).map(f64::exp)
}

fn ln_series(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..SERIES_MAX_TERMS {
        let k = k as f64;
        term *= q / ((k + 1.0) * (k + 1.0 + nu));
        sum += term;
        if term < SERIES_REL_CUTOFF * sum {
            break;
        }
    }
    nu * (0.5 * x).ln() - ln_gamma_unchecked(nu + 1.0) - x + sum.ln()
}

fn ln_large_argument(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term: f64 = 1.0;
    let mut sum = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        // asymptotic series: stop at the smallest term
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < SERIES_REL_CUTOFF * sum.abs() {
            break;
        }
    }
    sum.ln() - 0.5 * (2.0 * PI * x).ln()
}
