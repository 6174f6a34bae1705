//! Laplace-type asymptotics of `∫₀¹ e^{-λφ(x)} f(λ, x) x^{ν-1} dx`.
//!
//! For increasing `φ` with `φ(0+) = a`, `φ'(0+) = b > 0`, and
//! `f(λ, x/λ) → f(∞, 0)`, the integral behaves like
//! `f(∞, 0) Γ(ν) b^{-ν} λ^{-ν} e^{-aλ}`.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::specfun::ln_gamma;

type Phi = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type Amplitude = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

pub struct LaplaceProblem {
    /// `φ(0+)`.
    pub a: f64,
    /// `φ'(0+)`.
    pub b: f64,
    pub nu: f64,
    pub phi: Phi,
    pub f: Amplitude,
    /// `lim f(λ, x/λ)`.
    pub f_inf0: f64,
}

impl fmt::Debug for LaplaceProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LaplaceProblem")
            .field("a", &self.a)
            .field("b", &self.b)
            .field("nu", &self.nu)
            .field("f_inf0", &self.f_inf0)
            .finish_non_exhaustive()
    }
}

impl LaplaceProblem {
    pub fn new(
        a: f64,
        b: f64,
        nu: f64,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        f_inf0: f64,
    ) -> Result<Self> {
        if !(b > 0.0 && nu > 0.0 && a.is_finite() && f_inf0.is_finite()) {
            return domain(format!("need b > 0, nu > 0 and finite a, f_inf0; got a = {a}, b = {b}, nu = {nu}"));
        }
        Ok(Self {
            a,
            b,
            nu,
            phi: Box::new(phi),
            f: Box::new(f),
            f_inf0,
        })
    }

    /// `f ≡ 1`.
    pub fn unit_amplitude(
        a: f64,
        b: f64,
        nu: f64,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(a, b, nu, phi, |_, _| 1.0, 1.0)
    }
}

/// `K = inf (φ(x) - a)/x` over an interior grid of `(0, 1)`.
///
/// Errors unless `K > 0`, `φ` is strictly increasing on the grid and the
/// declared `a`, `b` match `φ` near 0: the conditions under which the
/// asymptotic form can be trusted.
pub fn hypothesis_constant(p: &LaplaceProblem, grid_points: usize) -> Result<f64> {
    if grid_points < 2 {
        return domain("hypothesis grid needs at least two points");
    }
    let x0 = 1e-8;
    let slope = ((p.phi)(x0) - p.a) / x0;
    if !((slope - p.b).abs() <= 1e-4 * (1.0 + p.b.abs() + p.a.abs())) {
        return domain(format!(
            "declared phi(0+) = {}, phi'(0+) = {} disagree with phi (slope {slope} at 0+)",
            p.a, p.b
        ));
    }
    let mut k = f64::INFINITY;
    let mut prev = f64::NEG_INFINITY;
    for i in 1..=grid_points {
        // geometric near 0, where the bound is tight
        let x = (i as f64 / (grid_points + 1) as f64).powi(3);
        let v = (p.phi)(x);
        if !(v > prev) {
            return domain(format!("phi is not strictly increasing near x = {x}"));
        }
        prev = v;
        k = k.min((v - p.a) / x);
    }
    if !(k > 0.0) {
        return domain(format!("inf (phi(x) - a)/x = {k} is not positive"));
    }
    Ok(k)
}

/// `f(∞, 0) Γ(ν) b^{-ν} λ^{-ν} e^{-aλ}`.
pub fn laplace_asymptotic(p: &LaplaceProblem, lambda: f64) -> f64 {
    p.f_inf0 * scaled_asymptotic(p, lambda) * (-p.a * lambda).exp()
}

fn scaled_asymptotic(p: &LaplaceProblem, lambda: f64) -> f64 {
    // nu > 0 is a constructor invariant
    let lg = ln_gamma(p.nu).unwrap_or(f64::NAN);
    (lg - p.nu * (p.b * lambda).ln()).exp()
}

fn scaled_numeric(p: &LaplaceProblem, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    let spec = spec.with_exponents(p.nu.min(1.0), 1.0);
    let r = integrate(
        |x| {
            let e = -lambda * ((p.phi)(x) - p.a) + (p.nu - 1.0) * x.ln();
            e.exp() * (p.f)(lambda, x)
        },
        0.0,
        1.0,
        &spec,
    )?;
    if !r.converged {
        return Err(Error::NonConvergence(format!(
            "Laplace integral at lambda = {lambda}: estimate {:e}",
            r.value
        )));
    }
    Ok(r.value)
}

/// `∫₀¹ e^{-λφ(x)} f(λ, x) x^{ν-1} dx` by quadrature.
pub fn laplace_numeric(p: &LaplaceProblem, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(scaled_numeric(p, lambda, spec)? * (-p.a * lambda).exp())
}

/// numeric / asymptotic, with `e^{-aλ}` cancelled before evaluation.
pub fn laplace_ratio(p: &LaplaceProblem, lambda: f64, spec: &QuadratureSpec) -> Result<f64> {
    Ok(scaled_numeric(p, lambda, spec)? / (p.f_inf0 * scaled_asymptotic(p, lambda)))
}
