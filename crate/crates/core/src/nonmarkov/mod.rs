//! Joint densities of `Z = c·X + Y` at the times `(ε, 1, 2)`, with `X`, `Y`
//! independent BESQ(δ₁), BESQ(δ₂) processes from 0, and the limits that
//! expose the dependence of the conditional law of `Z(2)` on `(ε, Z(ε))`.
//!
//! Writing `y = z - c·x`, the densities are
//!
//! ```text
//! q(z₂; ε, z₁)     = ∫dx₁ ∫dx₂       A₁₁ A₁₂
//! q(z₂, z₃; ε, z₁) = ∫dx₁ ∫dx₂ ∫dx₃  A₁₁ A₁₂ A₁₃
//!
//! A₁₁ = p_ε(0, x₁) p_ε(0, y₁)
//! A₁₂ = p_{1-ε}(x₁, x₂) p_{1-ε}(y₁, y₂)
//! A₁₃ = p_1(x₂, x₃) p_1(y₂, y₃)
//! ```
//!
//! (first factor in dimension δ₁, second in δ₂). The `ε → 0` objects replace
//! `A₁₁ A₁₂` by `A₂₁ = p_1(0, x₂) p_1(z₁, y₂)`.
//!
//! Each `x_i` ranges over `(0, z_i/c)`, the set where both factors live; see
//! [`Support`] for the truncated variant. Kernels are assembled in log space,
//! and the `ε`-dependent integrals carry the factor `e^{-z₁/2ε}` separately so
//! that small `ε` does not underflow.

pub mod laplace;

use serde::{Deserialize, Serialize};

use crate::besq::{ln_density_unchecked, ln_weighted_zero_limit, BesqParams};
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_nodes, tanh_sinh, Node, QuadratureResult, QuadratureSpec};

pub use laplace::{
    hypothesis_constant, laplace_asymptotic, laplace_numeric, laplace_ratio, LaplaceProblem,
};

/// Pair densities below this are treated as unresolvable denominators.
pub const RATIO_FLOOR: f64 = 1e-300;

/// Range of each `x_i` integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    /// `x ∈ (0, z/c)`: the full set where `z - c·x > 0`. The joint densities
    /// are then true densities: they marginalize and normalize.
    #[default]
    Exact,
    /// `x ∈ (0, z)`. For `c < 1` this drops the part `(z, z/c)`; the small-`z₃`
    /// limit then carries the constant `∫₀¹` instead of `∫₀^{1/c}`.
    Truncated,
}

impl Support {
    fn upper(self, z: f64, c: f64) -> f64 {
        match self {
            Support::Exact => z / c,
            Support::Truncated => z,
        }
    }

    /// `z - c·x` at `node`, taken from the right gap so that it stays exact
    /// next to the upper end.
    fn residual(self, z: f64, c: f64, node: Node) -> f64 {
        let head = match self {
            Support::Exact => 0.0,
            Support::Truncated => z * (1.0 - c),
        };
        head + c * node.right_gap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub c: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub eps: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    #[serde(default)]
    pub support: Support,
}

impl ScenarioParams {
    pub fn new(c: f64, delta1: f64, delta2: f64, eps: f64, z1: f64, z2: f64, z3: f64) -> Result<Self> {
        let s = Self {
            c,
            delta1,
            delta2,
            eps,
            z1,
            z2,
            z3,
            support: Support::Exact,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    /// `c` may equal 1, where `Z` is BESQ(δ₁+δ₂) and the ratios are known exactly.
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c <= 1.0) {
            return domain(format!("c must lie in (0, 1], got {}", self.c));
        }
        BesqParams::new(self.delta1)?;
        BesqParams::new(self.delta2)?;
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return domain(format!("eps must lie in (0, 1), got {}", self.eps));
        }
        for (name, z) in [("z1", self.z1), ("z2", self.z2), ("z3", self.z3)] {
            if !(z > 0.0 && z.is_finite()) {
                return domain(format!("{name} must be > 0, got {z}"));
            }
        }
        Ok(())
    }
}

/// An integral value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error_estimate: f64,
}

impl Estimate {
    pub fn relative_error(&self) -> f64 {
        self.error_estimate / self.value.abs()
    }
}

/// `value · e^{ln_scale}`.
#[derive(Debug, Clone, Copy)]
struct Scaled {
    value: f64,
    error: f64,
    ln_scale: f64,
}

impl Scaled {
    fn ln_value(&self) -> f64 {
        self.value.ln() + self.ln_scale
    }

    fn unscaled(&self) -> Estimate {
        let k = self.ln_scale.exp();
        Estimate {
            value: self.value * k,
            error_estimate: self.error * k,
        }
    }
}

/// Tolerances used when the caller does not supply any.
pub fn default_quadrature() -> QuadratureSpec {
    QuadratureSpec::default().with_tolerance(1e-9, 1e-300)
}

fn ln_p(p: &BesqParams, t: f64, x: f64, y: f64) -> f64 {
    if y > 0.0 {
        ln_density_unchecked(p, t, x, y)
    } else {
        f64::NEG_INFINITY
    }
}

struct Kernels<'a> {
    s: &'a ScenarioParams,
    p1: BesqParams,
    p2: BesqParams,
    outer: QuadratureSpec,
    inner: QuadratureSpec,
}

impl<'a> Kernels<'a> {
    fn new(s: &'a ScenarioParams, spec: &QuadratureSpec) -> Result<Self> {
        s.validate()?;
        spec.validate()?;
        let exps = (
            (0.5 * s.delta1).min(1.0),
            (0.5 * s.delta2).min(1.0),
        );
        let outer = spec.with_exponents(exps.0, exps.1);
        let inner = outer.with_tolerance(0.1 * spec.rel_tol, spec.abs_tol);
        Ok(Self {
            s,
            p1: BesqParams::new(s.delta1)?,
            p2: BesqParams::new(s.delta2)?,
            outer,
            inner,
        })
    }

    fn upper(&self, z: f64) -> f64 {
        self.s.support.upper(z, self.s.c)
    }

    fn residual(&self, z: f64, node: Node) -> f64 {
        self.s.support.residual(z, self.s.c, node)
    }

    /// `ln A₁₁ + z₁/2ε`.
    fn ln_a11_scaled(&self, x1: f64, y1: f64) -> f64 {
        let e = self.s.eps;
        ln_p(&self.p1, e, 0.0, x1) + ln_p(&self.p2, e, 0.0, y1) + self.s.z1 / (2.0 * e)
    }

    fn eps_scale(&self) -> f64 {
        -self.s.z1 / (2.0 * self.s.eps)
    }

    fn a21(&self, x2: f64, y2: f64) -> f64 {
        (ln_p(&self.p1, 1.0, 0.0, x2) + ln_p(&self.p2, 1.0, self.s.z1, y2)).exp()
    }

    /// `∫dx₁ A₁₁ A₁₂ · e^{z₁/2ε}` at fixed `(x₂, y₂)`.
    fn first_leg(&self, x2: f64, y2: f64) -> (f64, f64) {
        let s = self.s;
        let t = 1.0 - s.eps;
        let r = tanh_sinh(
            |n| {
                let x1 = n.left_gap;
                let y1 = self.residual(s.z1, n);
                let ln = self.ln_a11_scaled(x1, y1)
                    + ln_p(&self.p1, t, x1, x2)
                    + ln_p(&self.p2, t, y1, y2);
                (ln.exp(), 0.0)
            },
            0.0,
            self.upper(s.z1),
            &self.inner,
        );
        settle(r)
    }

    /// `∫dx₃ A₁₃` at fixed `(x₂, y₂)`.
    fn last_leg(&self, x2: f64, y2: f64) -> (f64, f64) {
        let s = self.s;
        let r = tanh_sinh(
            |n| {
                let x3 = n.left_gap;
                let y3 = self.residual(s.z3, n);
                let ln = ln_p(&self.p1, 1.0, x2, x3) + ln_p(&self.p2, 1.0, y2, y3);
                (ln.exp(), 0.0)
            },
            0.0,
            self.upper(s.z3),
            &self.inner,
        );
        settle(r)
    }

    fn over_x2<F>(&self, f: F) -> Result<QuadratureResult>
    where
        F: Fn(f64, f64) -> (f64, f64),
    {
        let z2 = self.s.z2;
        tanh_sinh(
            |n| f(n.left_gap, self.residual(z2, n)),
            0.0,
            self.upper(z2),
            &self.outer,
        )
    }

    fn pair(&self, use_eps: bool) -> Result<Scaled> {
        if use_eps {
            let r = self.over_x2(|x2, y2| self.first_leg(x2, y2))?;
            finish(r, self.eps_scale(), "pair density")
        } else {
            let r = self.over_x2(|x2, y2| (self.a21(x2, y2), 0.0))?;
            finish(r, 0.0, "limit pair density")
        }
    }

    fn triple(&self, use_eps: bool) -> Result<Scaled> {
        let combine = |(gv, ge): (f64, f64), x2: f64, y2: f64| {
            if gv == 0.0 && ge == 0.0 {
                return (0.0, 0.0);
            }
            let (hv, he) = self.last_leg(x2, y2);
            (gv * hv, gv * he + ge * hv)
        };
        if use_eps {
            let r = self.over_x2(|x2, y2| combine(self.first_leg(x2, y2), x2, y2))?;
            finish(r, self.eps_scale(), "triple density")
        } else {
            let r = self.over_x2(|x2, y2| combine((self.a21(x2, y2), 0.0), x2, y2))?;
            finish(r, 0.0, "limit triple density")
        }
    }

    /// `∫dx₂ A₂₁ · x₂^{1-δ₁/2} y₂^{1-δ₂/2} p_1(0, x₂) p_1(0, y₂)`.
    fn zero_limit_pair(&self) -> Result<Scaled> {
        let r = self.over_x2(|x2, y2| {
            let w = ln_weighted_zero_limit(&self.p1, 1.0, x2)
                + ln_weighted_zero_limit(&self.p2, 1.0, y2);
            (self.a21(x2, y2) * w.exp(), 0.0)
        })?;
        finish(r, 0.0, "zero-limit pair density")
    }
}

fn settle(r: Result<QuadratureResult>) -> (f64, f64) {
    match r {
        Ok(r) => (r.value, r.error_estimate),
        // only reachable for an empty interval, which carries no mass
        Err(_) => (0.0, 0.0),
    }
}

fn finish(r: QuadratureResult, ln_scale: f64, what: &str) -> Result<Scaled> {
    if !r.converged || !r.value.is_finite() {
        return Err(Error::NonConvergence(format!(
            "{what}: estimate {:e} with error {:e} after {} evaluations",
            r.value, r.error_estimate, r.evaluations
        )));
    }
    Ok(Scaled {
        value: r.value,
        error: r.error_estimate,
        ln_scale,
    })
}

/// `A₁₁ = p_ε^{δ₁}(0, x₁) p_ε^{δ₂}(0, z₁ - c·x₁)` for `0 < x₁ < z₁/c`.
pub fn kernel_a11(s: &ScenarioParams, x1: f64) -> Result<f64> {
    s.validate()?;
    let y1 = s.z1 - s.c * x1;
    if !(x1 > 0.0 && y1 > 0.0) {
        return domain(format!("x1 must lie in (0, z1/c), got {x1}"));
    }
    let p1 = BesqParams::new(s.delta1)?;
    let p2 = BesqParams::new(s.delta2)?;
    Ok((ln_p(&p1, s.eps, 0.0, x1) + ln_p(&p2, s.eps, 0.0, y1)).exp())
}

/// Density of `(Z(ε), Z(1))` at `(z₁, z₂)`; with `use_eps = false`, the
/// `ε → 0` object `∫dx₂ A₂₁`, i.e. the density of `Z(1)` when `X` starts at
/// 0 and `Y` at `z₁`.
pub fn joint_density_pair(s: &ScenarioParams, use_eps: bool, spec: &QuadratureSpec) -> Result<Estimate> {
    Ok(Kernels::new(s, spec)?.pair(use_eps)?.unscaled())
}

/// Density of `(Z(ε), Z(1), Z(2))` at `(z₁, z₂, z₃)`, or its `ε → 0` object.
pub fn joint_density_triple(s: &ScenarioParams, use_eps: bool, spec: &QuadratureSpec) -> Result<Estimate> {
    Ok(Kernels::new(s, spec)?.triple(use_eps)?.unscaled())
}

/// Conditional density of `Z(2)` at `z₃` given `Z(ε) = z₁`, `Z(1) = z₂`
/// (or its `ε → 0` limit).
pub fn conditional_ratio(s: &ScenarioParams, use_eps: bool, spec: &QuadratureSpec) -> Result<Estimate> {
    let k = Kernels::new(s, spec)?;
    let den = k.pair(use_eps)?;
    if den.ln_value() < RATIO_FLOOR.ln() {
        return Err(Error::UnreliableRatio(den.unscaled().value));
    }
    let num = k.triple(use_eps)?;
    let value = num.value / den.value;
    let rel = num.error / num.value.abs() + den.error / den.value;
    let rel = if rel.is_finite() { rel } else { num.error / den.value };
    Ok(Estimate {
        value,
        error_estimate: value.abs() * rel,
    })
}

/// `∫ u^{δ₁/2-1} (1 - c·u)^{δ₂/2-1} du` over `(0, 1/c)` ([`Support::Exact`],
/// equal to `c^{-δ₁/2} B(δ₁/2, δ₂/2)`) or over `(0, 1)` ([`Support::Truncated`]).
pub fn c1_constant(c: f64, delta1: f64, delta2: f64, support: Support) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return domain(format!("c must lie in (0, 1], got {c}"));
    }
    BesqParams::new(delta1)?;
    BesqParams::new(delta2)?;
    let (h1, h2) = (0.5 * delta1, 0.5 * delta2);
    let right = match support {
        Support::Exact => h2.min(1.0),
        Support::Truncated if c == 1.0 => h2.min(1.0),
        Support::Truncated => 1.0,
    };
    let spec = QuadratureSpec::default()
        .with_tolerance(1e-12, 1e-300)
        .with_exponents(h1.min(1.0), right);
    let r = integrate_nodes(
        |n| {
            let u = n.left_gap;
            let v = support.residual(1.0, c, n);
            ((h1 - 1.0) * u.ln() + (h2 - 1.0) * v.ln()).exp()
        },
        0.0,
        support.upper(1.0, c),
        &spec,
    )?;
    if !r.converged {
        return Err(Error::NonConvergence(format!("C1 constant: estimate {:e}", r.value)));
    }
    Ok(r.value)
}

/// `∫dx₂ A₂₁ · w^{δ₁}(x₂) w^{δ₂}(z₂ - c·x₂)` with `w^δ(x) = lim_{y→0} y^{1-δ/2} p_1^δ(x, y)`.
pub fn zero_limit_pair(s: &ScenarioParams, spec: &QuadratureSpec) -> Result<Estimate> {
    Ok(Kernels::new(s, spec)?.zero_limit_pair()?.unscaled())
}

/// `C₁ · zero_limit_pair`: the limit of `z₃^{1-(δ₁+δ₂)/2} q(z₂, z₃; z₁)` as `z₃ → 0`.
pub fn zero_limit_weighted_triple(s: &ScenarioParams, spec: &QuadratureSpec) -> Result<Estimate> {
    let c1 = c1_constant(s.c, s.delta1, s.delta2, s.support)?;
    let q = zero_limit_pair(s, spec)?;
    Ok(Estimate {
        value: c1 * q.value,
        error_estimate: c1 * q.error_estimate,
    })
}

/// `D(r) = 1 + (1 - c)/(1 - c + √r·c)`.
pub fn d_of_r(r: f64, c: f64) -> f64 {
    1.0 + (1.0 - c) / (1.0 - c + r.sqrt() * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleRatio {
    /// `[q̃/q](r₁) / [q̃/q](r₂)` at `z₁ = z₂·r`.
    pub observed: f64,
    /// `(D(r₁)/D(r₂))^{-δ₁/2}`.
    pub predicted: f64,
    pub residual: f64,
    pub error_estimate: f64,
}

/// Compares the ratio of zero-limit to limit pair densities at `z₁ = z₂·r₁`
/// and `z₁ = z₂·r₂` with its large-`z₂` prediction; unknown constants cancel.
pub fn double_ratio_residual(
    r1: f64,
    r2: f64,
    z2: f64,
    c: f64,
    delta1: f64,
    delta2: f64,
    support: Support,
    spec: &QuadratureSpec,
) -> Result<DoubleRatio> {
    for r in [r1, r2] {
        if !(r > 0.0 && r.is_finite()) {
            return domain(format!("r must be > 0, got {r}"));
        }
    }
    let single = |r: f64| -> Result<(f64, f64)> {
        // eps and z3 do not enter the limit objects
        let s = ScenarioParams::new(c, delta1, delta2, 0.5, z2 * r, z2, 1.0)?.with_support(support);
        let k = Kernels::new(&s, spec)?;
        let q = k.pair(false)?;
        if q.ln_value() < RATIO_FLOOR.ln() {
            return Err(Error::UnreliableRatio(q.unscaled().value));
        }
        let qt = k.zero_limit_pair()?;
        Ok((qt.value / q.value, qt.error / qt.value + q.error / q.value))
    };
    let (a, ea) = single(r1)?;
    let (b, eb) = if r1 == r2 { (a, ea) } else { single(r2)? };
    let observed = a / b;
    let predicted = (d_of_r(r1, c) / d_of_r(r2, c)).powf(-0.5 * delta1);
    Ok(DoubleRatio {
        observed,
        predicted,
        residual: observed - predicted,
        error_estimate: observed * (ea + eb),
    })
}

/// Conditional ratios over several `(ε, z₁)` settings sharing `(z₂, z₃)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub settings: Vec<(f64, f64)>,
    pub ratios: Vec<Estimate>,
    pub mean: f64,
    /// `max |ratio - mean| / mean`.
    pub relative_spread: f64,
    /// Largest relative error estimate among the ratios.
    pub relative_error: f64,
}

impl Spread {
    /// Whether the settings are separated by more than `factor` error estimates.
    pub fn resolved(&self, factor: f64) -> bool {
        self.relative_spread > factor * self.relative_error
    }
}

pub fn ratio_spread(
    base: &ScenarioParams,
    settings: &[(f64, f64)],
    use_eps: bool,
    spec: &QuadratureSpec,
) -> Result<Spread> {
    if settings.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ratios = settings
        .iter()
        .map(|&(eps, z1)| {
            let s = ScenarioParams { eps, z1, ..*base };
            conditional_ratio(&s, use_eps, spec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = ratios.iter().map(|r| r.value).sum::<f64>() / ratios.len() as f64;
    let relative_spread = ratios
        .iter()
        .map(|r| (r.value - mean).abs() / mean)
        .fold(0.0, f64::max);
    let relative_error = ratios.iter().map(Estimate::relative_error).fold(0.0, f64::max);
    Ok(Spread {
        settings: settings.to_vec(),
        ratios,
        mean,
        relative_spread,
        relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scenario() -> ScenarioParams {
        ScenarioParams::new(0.5, 1.0, 1.0, 0.5, 1.0, 4.0, 1.0).unwrap()
    }

    #[test]
    fn kernel_a11_examples() {
        let s = ScenarioParams::new(0.5, 2.0, 2.0, 0.5, 2.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(kernel_a11(&s, 1.0).unwrap(), (-2.5f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(kernel_a11(&s, 1.0).unwrap(), 0.082_085, epsilon = 1e-6);
        let s = ScenarioParams::new(0.5, 1.0, 3.0, 0.5, 2.0, 1.0, 1.0).unwrap();
        assert!(kernel_a11(&s, 4.0 - 1e-9).unwrap() < 1e-3);
        let s = ScenarioParams::new(0.5, 0.5, 1.0, 0.01, 2.0, 1.0, 1.0).unwrap();
        let v = kernel_a11(&s, 1e-12).unwrap();
        assert!(v.is_finite() && v > 0.0);
        assert!(kernel_a11(&s, 0.0).is_err());
        assert!(kernel_a11(&s, 4.0).is_err());
    }

    #[test]
    fn scenario_validation() {
        assert!(ScenarioParams::new(0.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ScenarioParams::new(1.5, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ScenarioParams::new(0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(ScenarioParams::new(0.5, 1.0, -1.0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(ScenarioParams::new(0.5, 1.0, 1.0, 0.5, 1.0, 0.0, 1.0).is_err());
        assert!(ScenarioParams::new(1.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0).is_ok());
    }

    #[test]
    fn c1_examples() {
        let t = Support::Truncated;
        assert_relative_eq!(c1_constant(0.3, 2.0, 2.0, t).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(c1_constant(0.5, 2.0, 4.0, t).unwrap(), 0.75, max_relative = 1e-12);
        assert_relative_eq!(c1_constant(1e-12, 1.0, 2.0, t).unwrap(), 2.0, max_relative = 1e-10);
        // exact support: c^{-δ₁/2} B(δ₁/2, δ₂/2)
        assert_relative_eq!(c1_constant(0.5, 2.0, 2.0, Support::Exact).unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(
            c1_constant(0.5, 1.0, 1.0, Support::Exact).unwrap(),
            std::f64::consts::PI * 2f64.sqrt(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn d_of_r_examples() {
        assert_eq!(d_of_r(1.0, 0.5), 1.5);
        assert_relative_eq!(d_of_r(1e20, 0.5), 1.0, epsilon = 1e-9);
        assert_relative_eq!(d_of_r(1e-20, 0.3), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn double_ratio_is_zero_for_equal_r() {
        let d = double_ratio_residual(2.0, 2.0, 10.0, 0.5, 1.0, 1.0, Support::Exact, &default_quadrature()).unwrap();
        assert_eq!(d.residual, 0.0);
    }

    #[test]
    fn densities_are_positive_and_ratio_consistent() {
        let s = scenario();
        let spec = default_quadrature();
        let pair = joint_density_pair(&s, true, &spec).unwrap();
        let triple = joint_density_triple(&s, true, &spec).unwrap();
        let ratio = conditional_ratio(&s, true, &spec).unwrap();
        assert!(pair.value > 0.0 && triple.value > 0.0);
        assert_relative_eq!(ratio.value, triple.value / pair.value, max_relative = 1e-12);
    }

    #[test]
    fn tiny_pair_density_is_reported() {
        let s = ScenarioParams::new(0.5, 1.0, 1.0, 0.5, 1.0, 3000.0, 1.0).unwrap();
        assert!(matches!(
            conditional_ratio(&s, false, &default_quadrature()),
            Err(Error::UnreliableRatio(_))
        ));
    }
}
