//! Double-exponential (tanh-sinh) quadrature on finite intervals.
//!
//! Nodes cluster doubly exponentially at both endpoints, so integrands that
//! behave like `(x - a)^{α-1}` or `(b - x)^{α-1}` with `α ∈ (0, 1]` converge
//! without any user-side substitution. Endpoint values are never evaluated.
//!
//! Integrands that need the distance to an endpoint at full precision (for
//! example `z - c·x` near `x = z/c`) can use [`integrate_nodes`], which hands
//! each evaluation a [`Node`] carrying both gaps.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Nodes whose distance to the endpoint (relative to `b - a`) falls below
/// this are never generated.
const MIN_RELATIVE_GAP: f64 = 1e-300;
/// A tail is truncated once a weighted term drops below this fraction of the running sum.
const TAIL_CUTOFF: f64 = 1e-20;
const MIN_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_levels: usize,
    /// `α` such that the integrand behaves like `(x - a)^{α-1}` at the left end.
    pub left_exponent: f64,
    /// `α` such that the integrand behaves like `(b - x)^{α-1}` at the right end.
    pub right_exponent: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-14,
            max_levels: 12,
            left_exponent: 1.0,
            right_exponent: 1.0,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_exponents(mut self, left: f64, right: f64) -> Self {
        self.left_exponent = left;
        self.right_exponent = right;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return domain("quadrature tolerances must be positive");
        }
        if self.max_levels < 1 {
            return domain("max_levels must be at least 1");
        }
        for e in [self.left_exponent, self.right_exponent] {
            if !(e > 0.0 && e <= 1.0) {
                return domain(format!("singularity exponent must lie in (0, 1], got {e}"));
            }
        }
        Ok(())
    }

    fn tolerance(&self, value: f64) -> f64 {
        (self.rel_tol * value.abs()).max(self.abs_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// An interior evaluation point together with its exact distances to both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub left_gap: f64,
    pub right_gap: f64,
}

/// `∫_a^b f(x) dx`.
///
/// Non-convergence is reported through [`QuadratureResult::converged`], not as an error.
pub fn integrate<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    integrate_nodes(
        |node| {
            // rounding can land a node on an endpoint when a != 0
            if node.x <= a || node.x >= b {
                0.0
            } else {
                f(node.x)
            }
        },
        a,
        b,
        spec,
    )
}

/// Same contract as [`integrate`], with the integrand receiving the full [`Node`].
pub fn integrate_nodes<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(Node) -> f64,
{
    tanh_sinh(|node| (f(node), 0.0), a, b, spec)
}

/// `∫_a^∞ f(y) dy` through `y = a + u/(1-u)`, `u ∈ (0, 1)`.
///
/// `spec.left_exponent` still describes the behaviour at `y = a`; the mapped
/// right end is treated as regular.
pub fn integrate_to_infinity<F>(f: F, a: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !a.is_finite() {
        return domain("lower limit must be finite");
    }
    let spec = QuadratureSpec {
        right_exponent: 1.0,
        ..*spec
    };
    integrate_nodes(
        |node| {
            let u = node.left_gap;
            let w = node.right_gap;
            let y = a + u / w;
            if !y.is_finite() {
                return 0.0;
            }
            let v = f(y) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        &spec,
    )
}

type BoundFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;

/// Integration limits for one axis, as functions of the outer coordinates.
pub struct AxisBounds<'a> {
    pub lower: BoundFn<'a>,
    pub upper: BoundFn<'a>,
}

impl<'a> AxisBounds<'a> {
    pub fn constant(lower: f64, upper: f64) -> Self {
        Self {
            lower: Box::new(move |_| lower),
            upper: Box::new(move |_| upper),
        }
    }

    pub fn new(
        lower: impl Fn(&[f64]) -> f64 + 'a,
        upper: impl Fn(&[f64]) -> f64 + 'a,
    ) -> Self {
        Self {
            lower: Box::new(lower),
            upper: Box::new(upper),
        }
    }
}

/// Iterated integral over at most three axes, outermost first.
///
/// The bounds of axis `k` may depend on coordinates `0..k`. The error
/// estimate adds the outer refinement difference to the weighted inner
/// estimates; non-convergence on any axis is propagated.
pub fn integrate_iterated<F>(
    f: F,
    axes: &[AxisBounds<'_>],
    specs: &[QuadratureSpec],
) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64,
{
    if axes.is_empty() || axes.len() > 3 {
        return domain(format!("iterated integration supports 1 to 3 axes, got {}", axes.len()));
    }
    if specs.len() != axes.len() {
        return domain("one quadrature spec is required per axis");
    }
    let mut coords = [0.0; 3];
    iterated_axis(&f, axes, specs, &mut coords, 0)
}

fn iterated_axis<F>(
    f: &F,
    axes: &[AxisBounds<'_>],
    specs: &[QuadratureSpec],
    coords: &mut [f64; 3],
    depth: usize,
) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64,
{
    let outer = &coords[..depth];
    let a = (axes[depth].lower)(outer);
    let b = (axes[depth].upper)(outer);
    if depth > 0 && !(a < b) {
        // dependent bounds can collapse (or cross by rounding) near an outer endpoint
        return Ok(QuadratureResult {
            value: 0.0,
            error_estimate: 0.0,
            evaluations: 0,
            converged: true,
        });
    }
    let last = depth + 1 == axes.len();
    let prefix: Vec<f64> = outer.to_vec();
    let failure = std::cell::Cell::new(None);
    let inner_converged = std::cell::Cell::new(true);
    let inner_evals = std::cell::Cell::new(0usize);

    let mut result = tanh_sinh(
        |node| {
            let mut local = [0.0; 3];
            local[..depth].copy_from_slice(&prefix);
            local[depth] = node.x;
            if last {
                (f(&local[..=depth]), 0.0)
            } else {
                match iterated_axis(f, axes, specs, &mut local, depth + 1) {
                    Ok(r) => {
                        if !r.converged {
                            inner_converged.set(false);
                        }
                        inner_evals.set(inner_evals.get() + r.evaluations);
                        (r.value, r.error_estimate)
                    }
                    Err(e) => {
                        failure.set(Some(e));
                        (0.0, 0.0)
                    }
                }
            }
        },
        a,
        b,
        &specs[depth],
    )?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    result.evaluations += inner_evals.get();
    result.converged &= inner_converged.get();
    Ok(result)
}

struct Side {
    /// Largest `t` at which this side still contributes.
    t_max: f64,
}

/// Core tanh-sinh routine. The integrand returns a value and an error bound
/// for that value (zero for plain integrands); the bounds are accumulated
/// with the same weights as the values.
pub(crate) fn tanh_sinh<F>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(Node) -> (f64, f64),
{
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return domain("integration limits must be finite");
    }
    if !(a < b) {
        return domain(format!("integration requires a < b, got a = {a}, b = {b}"));
    }
    let width = b - a;
    let t_limit = t_limit();

    let mut evaluations = 0usize;
    let eval = |t: f64, evaluations: &mut usize| -> Option<[(f64, f64, f64); 2]> {
        let (gap, weight) = abscissa(t);
        if gap < MIN_RELATIVE_GAP {
            return None;
        }
        let d = width * gap;
        let w = width * weight;
        let left = Node {
            x: a + d,
            left_gap: d,
            right_gap: width - d,
        };
        let right = Node {
            x: b - d,
            left_gap: width - d,
            right_gap: d,
        };
        let (fl, el) = f(left);
        let (fr, er) = f(right);
        *evaluations += 2;
        Some([(w, fl, el), (w, fr, er)])
    };

    // Level 0 on the unit step fixes how far each tail has to be followed.
    let h0 = 1.0;
    let (centre_value, centre_err) = f(Node {
        x: a + 0.5 * width,
        left_gap: 0.5 * width,
        right_gap: 0.5 * width,
    });
    evaluations += 1;
    let centre_weight = width * FRAC_PI_2 * 0.5;
    let mut sum = centre_weight * centre_value;
    let mut err_sum = centre_weight * centre_err.abs();
    let mut sides = [Side { t_max: 0.0 }, Side { t_max: 0.0 }];
    let mut active = [true, true];
    let mut k = 1;
    while active[0] || active[1] {
        let t = k as f64 * h0;
        if t > t_limit {
            break;
        }
        let Some(pair) = eval(t, &mut evaluations) else {
            break;
        };
        for (side, &(w, v, e)) in pair.iter().enumerate() {
            if !active[side] {
                continue;
            }
            let term = w * v;
            let term = if term.is_finite() { term } else { 0.0 };
            sum += term;
            err_sum += w * e.abs();
            sides[side].t_max = t;
            if term.abs() <= TAIL_CUTOFF * sum.abs() && t >= 3.0 {
                active[side] = false;
            }
        }
        k += 1;
    }
    // allow half a unit step of extra reach before the cutoff kicked in
    for s in sides.iter_mut() {
        s.t_max = (s.t_max + 0.5 * h0).min(t_limit);
    }

    let mut estimate = sum * h0;
    let mut err_weighted;
    let mut error_estimate = f64::INFINITY;
    let mut converged = false;
    let mut h = h0;
    for level in 1..=spec.max_levels {
        h *= 0.5;
        let mut new_sum = 0.0;
        let mut new_err = 0.0;
        let t_max = sides[0].t_max.max(sides[1].t_max);
        let mut j = 1usize;
        loop {
            let t = j as f64 * h;
            if t > t_max {
                break;
            }
            let Some(pair) = eval(t, &mut evaluations) else {
                break;
            };
            for (side, &(w, v, e)) in pair.iter().enumerate() {
                if t > sides[side].t_max {
                    continue;
                }
                let term = w * v;
                if term.is_finite() {
                    new_sum += term;
                }
                new_err += w * e.abs();
            }
            j += 2;
        }
        sum += new_sum;
        err_sum += new_err;
        let refined = sum * h;
        err_weighted = err_sum * h;
        error_estimate = (refined - estimate).abs() + err_weighted;
        estimate = refined;
        if level >= MIN_LEVELS.min(spec.max_levels) && error_estimate <= spec.tolerance(estimate) {
            converged = true;
            break;
        }
    }
    if !estimate.is_finite() {
        converged = false;
    }
    Ok(QuadratureResult {
        value: estimate,
        error_estimate,
        evaluations,
        converged,
    })
}

/// Relative endpoint gap `(1 - tanh(π/2 sinh t))/2` and the matching
/// relative weight `(π/4) cosh t sech²(π/2 sinh t)`, both computed without
/// cancellation for `t >= 0`.
fn abscissa(t: f64) -> (f64, f64) {
    let s = FRAC_PI_2 * t.sinh();
    let e = (-2.0 * s).exp();
    let gap = e / (1.0 + e);
    let sech2 = 4.0 * e / ((1.0 + e) * (1.0 + e));
    let weight = 0.5 * FRAC_PI_2 * t.cosh() * sech2;
    (gap, weight)
}

/// Largest `t` whose relative gap is still above [`MIN_RELATIVE_GAP`].
fn t_limit() -> f64 {
    // gap ≈ e^{-π sinh t}
    let s = -MIN_RELATIVE_GAP.ln() / std::f64::consts::PI;
    s.asinh()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    #[test]
    fn examples() {
        let r = integrate(|x| x.powf(-0.5), 0.0, 1.0, &spec().with_exponents(0.5, 1.0)).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-9);

        let r = integrate(|x| (-x).exp(), 0.0, 1.0, &spec()).unwrap();
        assert_relative_eq!(r.value, 1.0 - (-1f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(r.value, 0.632_120_6, epsilon = 1e-7);

        let r = integrate(|_| 1.0, 0.0, 1.0, &spec()).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_interval_and_spec() {
        assert!(integrate(|_| 1.0, 1.0, 1.0, &spec()).is_err());
        assert!(integrate(|_| 1.0, 2.0, 1.0, &spec()).is_err());
        assert!(integrate(|_| 1.0, 0.0, 1.0, &spec().with_exponents(0.0, 1.0)).is_err());
        assert!(integrate(|_| 1.0, 0.0, 1.0, &spec().with_exponents(1.0, 1.5)).is_err());
        let bad = QuadratureSpec {
            max_levels: 0,
            ..spec()
        };
        assert!(integrate(|_| 1.0, 0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn flags_non_convergence() {
        let tight = QuadratureSpec {
            max_levels: 1,
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            ..spec()
        };
        let r = integrate(|x| (50.0 * x).sin().abs(), 0.0, 3.0, &tight).unwrap();
        assert!(!r.converged);
        assert!(r.error_estimate > 0.0);
    }

    #[test]
    fn right_singularity_via_gap() {
        // ∫_0^2 (2 - x)^{-0.8} dx = 2^{0.2} / 0.2, needs the right gap at full precision
        let r = integrate_nodes(
            |n| n.right_gap.powf(-0.8),
            0.0,
            2.0,
            &spec().with_exponents(1.0, 0.2),
        )
        .unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 2f64.powf(0.2) / 0.2, max_relative = 1e-9);
    }

    #[test]
    fn infinite_upper_limit() {
        let r = integrate_to_infinity(|y| (-y).exp(), 0.0, &spec()).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-10);
        // Γ(0.3) = ∫ y^{-0.7} e^{-y} dy
        let r = integrate_to_infinity(
            |y| y.powf(-0.7) * (-y).exp(),
            0.0,
            &spec().with_exponents(0.3, 1.0),
        )
        .unwrap();
        let gamma = crate::specfun::ln_gamma(0.3).unwrap().exp();
        assert_relative_eq!(r.value, gamma, max_relative = 1e-9);
    }

    #[test]
    fn iterated_examples() {
        let unit = [AxisBounds::constant(0.0, 1.0), AxisBounds::constant(0.0, 1.0)];
        let specs = [spec(), spec()];
        let r = integrate_iterated(|_| 1.0, &unit, &specs).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-12);

        let r = integrate_iterated(|p| p[0] * p[1], &unit, &specs).unwrap();
        assert_relative_eq!(r.value, 0.25, max_relative = 1e-12);

        let singular = [spec().with_exponents(0.5, 1.0), spec().with_exponents(0.5, 1.0)];
        let r = integrate_iterated(|p| (p[0] * p[1]).powf(-0.5), &unit, &singular).unwrap();
        assert!(r.converged);
        assert_relative_eq!(r.value, 4.0, max_relative = 1e-8);
    }

    #[test]
    fn iterated_dependent_bounds() {
        // triangle 0 < y < x < 1: ∫∫ 1 = 1/2; simplex volume 1/6
        let tri = [
            AxisBounds::constant(0.0, 1.0),
            AxisBounds::new(|_| 0.0, |o| o[0]),
        ];
        let r = integrate_iterated(|_| 1.0, &tri, &[spec(), spec()]).unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-12);

        let simplex = [
            AxisBounds::constant(0.0, 1.0),
            AxisBounds::new(|_| 0.0, |o| 1.0 - o[0]),
            AxisBounds::new(|_| 0.0, |o| 1.0 - o[0] - o[1]),
        ];
        let r = integrate_iterated(|_| 1.0, &simplex, &[spec(), spec(), spec()]).unwrap();
        assert_relative_eq!(r.value, 1.0 / 6.0, max_relative = 1e-10);
    }

    #[test]
    fn iterated_rejects_bad_shapes() {
        assert!(integrate_iterated(|_| 1.0, &[], &[]).is_err());
        let axes = [AxisBounds::constant(0.0, 1.0)];
        assert!(integrate_iterated(|_| 1.0, &axes, &[spec(), spec()]).is_err());
    }
}
