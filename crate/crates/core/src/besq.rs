//! Squared Bessel processes: transition densities, their boundary and
//! far-field forms, and exact skeleton sampling.
//!
//! BESQ(δ) has generator `2x d²/dx² + δ d/dx`. For `x > 0`
//!
//! ```text
//! p_t(x, y) = (1/2t) (y/x)^{ν/2} exp(-(x + y)/2t) I_ν(√(xy)/t),   ν = (δ - 2)/2
//! ```
//!
//! and from `x = 0` the law is Gamma with shape `δ/2` and scale `2t`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_nodes, QuadratureSpec};
use crate::specfun::{ln_bessel_i_scaled, ln_gamma_unchecked, BesselIndex};

/// Below this Bessel argument the leading small-argument term is exact to
/// double precision, and the density is evaluated in closed form.
const SMALL_ARGUMENT: f64 = 1e-8;
/// Largest `ln` that still exponentiates to a finite double.
const LN_MAX: f64 = 709.782;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct BesqParams {
    delta: f64,
    nu: BesselIndex,
}

impl BesqParams {
    pub fn new(delta: f64) -> Result<Self> {
        let nu = BesselIndex::from_dimension(delta)?;
        Ok(Self { delta, nu })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn nu(&self) -> f64 {
        self.nu.value()
    }

    pub fn index(&self) -> BesselIndex {
        self.nu
    }

    fn half(&self) -> f64 {
        0.5 * self.delta
    }
}

impl TryFrom<f64> for BesqParams {
    type Error = Error;

    fn try_from(delta: f64) -> Result<Self> {
        Self::new(delta)
    }
}

impl From<BesqParams> for f64 {
    fn from(p: BesqParams) -> f64 {
        p.delta
    }
}

/// A discretely observed path: strictly increasing times and one value per time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return domain("path times and values differ in length");
        }
        check_times(&times)?;
        if values.iter().any(|v| !v.is_finite()) {
            return domain("path values must be finite");
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with header `t,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,value")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

/// Checks that observation times are finite, nonnegative and strictly increasing.
pub fn check_times(times: &[f64]) -> Result<()> {
    if let Some(&t0) = times.first() {
        if !(t0 >= 0.0) {
            return domain(format!("observation times must be >= 0, got {t0}"));
        }
    }
    if times.iter().any(|t| !t.is_finite()) {
        return domain("observation times must be finite");
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("observation times must be strictly increasing");
    }
    Ok(())
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("time must be positive, got {t}"));
    }
    Ok(())
}

fn check_start(x: f64) -> Result<()> {
    if !(x >= 0.0 && x.is_finite()) {
        return domain(format!("starting point must be >= 0, got {x}"));
    }
    Ok(())
}

fn check_target(y: f64) -> Result<()> {
    if !(y > 0.0 && y.is_finite()) {
        return domain(format!("target point must be > 0, got {y}"));
    }
    Ok(())
}

/// `ln p_t^δ(x, y)`.
pub fn ln_transition_density(p: &BesqParams, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_start(x)?;
    check_target(y)?;
    Ok(ln_density_unchecked(p, t, x, y))
}

pub(crate) fn ln_density_unchecked(p: &BesqParams, t: f64, x: f64, y: f64) -> f64 {
    let z = (x * y).sqrt() / t;
    if x == 0.0 || z < SMALL_ARGUMENT {
        return ln_from_zero(p, t, y) - x / (2.0 * t);
    }
    let nu = p.nu();
    let sq = x.sqrt() - y.sqrt();
    // nonnegative z and valid index: cannot fail
    let ln_i = ln_bessel_i_scaled(p.index(), z).unwrap_or(f64::NAN);
    -(2.0 * t).ln() + 0.5 * nu * (y.ln() - x.ln()) - sq * sq / (2.0 * t) + ln_i
}

fn ln_from_zero(p: &BesqParams, t: f64, y: f64) -> f64 {
    let h = p.half();
    (h - 1.0) * y.ln() - h * (2.0 * t).ln() - ln_gamma_unchecked(h) - y / (2.0 * t)
}

/// `p_t^δ(x, y)` for `t > 0`, `x >= 0`, `y > 0`.
///
/// For `δ < 2` the density diverges as `y → 0`; an error is returned only
/// when the log-space value is too large to exponentiate.
pub fn transition_density(p: &BesqParams, t: f64, x: f64, y: f64) -> Result<f64> {
    let ln = ln_transition_density(p, t, x, y)?;
    if ln > LN_MAX {
        return Err(Error::Overflow(format!(
            "ln p_t(x, y) = {ln} at t = {t}, x = {x}, y = {y}"
        )));
    }
    Ok(ln.exp())
}

/// `lim_{y→0+} y^{1-δ/2} p_t^δ(x, y) = (2t)^{-δ/2} e^{-x/2t} / Γ(δ/2)`.
pub fn weighted_zero_limit(p: &BesqParams, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    check_start(x)?;
    Ok(ln_weighted_zero_limit(p, t, x).exp())
}

pub(crate) fn ln_weighted_zero_limit(p: &BesqParams, t: f64, x: f64) -> f64 {
    let h = p.half();
    -h * (2.0 * t).ln() - ln_gamma_unchecked(h) - x / (2.0 * t)
}

/// Large-`√(xy)` approximation of the transition density,
/// `(2t√(2π))^{-1} y^{(δ-3)/4} x^{-(δ-1)/4} exp(-(√x - √y)²/2t)`.
pub fn far_field_density(p: &BesqParams, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_target(x)?;
    check_target(y)?;
    let d = p.delta();
    let sq = x.sqrt() - y.sqrt();
    let ln = -(2.0 * t * (2.0 * PI).sqrt()).ln() + 0.25 * (d - 3.0) * y.ln()
        - 0.25 * (d - 1.0) * x.ln()
        - sq * sq / (2.0 * t);
    Ok(ln.exp())
}

/// `P(X_t <= y | X_0 = x)` by quadrature of the density.
pub fn transition_cdf(p: &BesqParams, t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    check_start(x)?;
    if y <= 0.0 {
        return Ok(0.0);
    }
    let spec = QuadratureSpec::default()
        .with_tolerance(1e-10, 1e-15)
        .with_exponents(p.half().min(1.0), 1.0);
    let r = integrate_nodes(
        |n| ln_density_unchecked(p, t, x, n.left_gap).exp(),
        0.0,
        y,
        &spec,
    )?;
    Ok(r.value.clamp(0.0, 1.0))
}

/// One exact draw from `p_t^δ(x, ·)`.
///
/// `X_t = 2t·G`, `G ~ Gamma(δ/2 + N, 1)`, `N ~ Poisson(x / 2t)`: the
/// noncentral chi-square representation of the BESQ transition.
pub fn sample_transition<R: Rng + ?Sized>(
    rng: &mut R,
    p: &BesqParams,
    t: f64,
    x: f64,
) -> Result<f64> {
    check_time(t)?;
    check_start(x)?;
    Ok(draw(rng, p.half(), t, x))
}

pub(crate) fn draw<R: Rng + ?Sized>(rng: &mut R, half_delta: f64, t: f64, x: f64) -> f64 {
    let lambda = x / (2.0 * t);
    let n = if lambda > 0.0 {
        // lambda is finite and positive here
        Poisson::new(lambda).map(|d| d.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    };
    let shape = half_delta + n;
    Gamma::new(shape, 2.0 * t)
        .map(|g| g.sample(rng))
        .unwrap_or(0.0)
}

/// Exact skeleton of BESQ(δ) started at `x0`, observed at `times`.
pub fn sample_path<R: Rng + ?Sized>(
    rng: &mut R,
    p: &BesqParams,
    x0: f64,
    times: &[f64],
) -> Result<PathSample> {
    check_start(x0)?;
    check_times(times)?;
    let mut values = Vec::with_capacity(times.len());
    let mut now = 0.0;
    let mut x = x0;
    for &t in times {
        if t > now {
            x = draw(rng, p.half(), t - now, x);
            now = t;
        }
        values.push(x);
    }
    Ok(PathSample {
        times: times.to_vec(),
        values,
    })
}

/// Bessel process of dimension δ started at `xi0`: the square root of a BESQ path from `xi0²`.
pub fn bessel_path<R: Rng + ?Sized>(
    rng: &mut R,
    p: &BesqParams,
    xi0: f64,
    times: &[f64],
) -> Result<PathSample> {
    check_start(xi0)?;
    let mut path = sample_path(rng, p, xi0 * xi0, times)?;
    for v in &mut path.values {
        *v = v.sqrt();
    }
    Ok(path)
}
