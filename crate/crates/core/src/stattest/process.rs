//! Process models for the Monte-Carlo Markov probes and their registry.
//!
//! A model produces exact skeletons at times `(ε, 1, 2)`. Each model draws
//! its skeleton in whatever order rejects fastest; the joint law of the
//! triple is exact regardless of the order.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::besq::{self, check_times, BesqParams, PathSample};
use crate::error::{domain, Error, Result};
use crate::rng::SimRng;

/// Acceptance set `|v - center| <= halfwidth`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditioningWindow {
    pub center: f64,
    pub halfwidth: f64,
}

impl ConditioningWindow {
    pub fn new(center: f64, halfwidth: f64) -> Result<Self> {
        let w = Self { center, halfwidth };
        w.validate()?;
        Ok(w)
    }

    /// Window covering `[lo, hi]`.
    pub fn from_bounds(lo: f64, hi: f64) -> Result<Self> {
        Self::new(0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.halfwidth > 0.0 && self.halfwidth.is_finite() && self.center.is_finite()) {
            return domain(format!(
                "window needs finite center and positive halfwidth, got ({}, {})",
                self.center, self.halfwidth
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        (v - self.center).abs() <= self.halfwidth
    }
}

/// Parameters shared by all models; a model ignores what it does not use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    #[serde(default)]
    pub delta1: f64,
    #[serde(default)]
    pub delta2: f64,
}

/// Draws conditioned skeletons for one `(params, ε)`.
pub trait SkeletonSampler: Send {
    /// One skeleton. Returns `(arm, value at 2)` for the first arm whose
    /// window holds the value at `ε`, provided the value at 1 lies in `w2`.
    fn draw(
        &self,
        rng: &mut SimRng,
        w2: &ConditioningWindow,
        arms: &[ConditioningWindow],
    ) -> Option<(usize, f64)>;
}

pub trait ProcessModel: Send + Sync {
    fn name(&self) -> &str;
    fn description(&self) -> &str;
    fn validate(&self, p: &ModelParams) -> Result<()>;
    /// Exact observation of the process at `times`.
    fn path(&self, rng: &mut SimRng, p: &ModelParams, times: &[f64]) -> Result<PathSample>;
    fn skeleton_sampler(&self, p: &ModelParams, eps: f64) -> Result<Box<dyn SkeletonSampler>>;
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("conditioning time eps must lie in (0, 1), got {eps}"));
    }
    Ok(())
}

fn first_arm(arms: &[ConditioningWindow], v: f64) -> Option<usize> {
    arms.iter().position(|w| w.contains(v))
}

// ---------------------------------------------------------------------------
// Z = cX + Y

/// `Z = c·X^{δ₁} + Y^{δ₂}` for independent BESQ processes from 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct BesqSum;

/// Two independent exact BESQ paths from 0, combined as `c·X + Y`.
pub fn sample_z_process(
    rng: &mut SimRng,
    c: f64,
    delta1: f64,
    delta2: f64,
    times: &[f64],
) -> Result<PathSample> {
    BesqSum.path(rng, &ModelParams { c, delta1, delta2 }, times)
}

struct BesqSumSampler {
    c: f64,
    h1: f64,
    h2: f64,
    from0_x: Gamma<f64>,
    from0_y: Gamma<f64>,
    eps: f64,
    back_t: f64,
}

impl SkeletonSampler for BesqSumSampler {
    fn draw(
        &self,
        rng: &mut SimRng,
        w2: &ConditioningWindow,
        arms: &[ConditioningWindow],
    ) -> Option<(usize, f64)> {
        // Time 1 first: from 0 it is a Gamma draw.
        let x1 = self.from0_x.sample(rng);
        let y1 = self.from0_y.sample(rng);
        if !w2.contains(self.c * x1 + y1) {
            return None;
        }
        // s²X(1/s) is again BESQ(δ) from 0, so given X(1) = x,
        // X(ε)/ε² is a transition of length 1/ε - 1 from x.
        let e2 = self.eps * self.eps;
        let xe = e2 * besq::draw(rng, self.h1, self.back_t, x1);
        let ye = e2 * besq::draw(rng, self.h2, self.back_t, y1);
        let arm = first_arm(arms, self.c * xe + ye)?;
        let x2 = besq::draw(rng, self.h1, 1.0, x1);
        let y2 = besq::draw(rng, self.h2, 1.0, y1);
        Some((arm, self.c * x2 + y2))
    }
}

impl ProcessModel for BesqSum {
    fn name(&self) -> &str {
        "besq-sum"
    }

    fn description(&self) -> &str {
        "Z = c X + Y, X ~ BESQ(delta1), Y ~ BESQ(delta2) independent, both from 0"
    }

    fn validate(&self, p: &ModelParams) -> Result<()> {
        if !(0.0..=1.0).contains(&p.c) {
            return domain(format!("besq-sum needs c in [0, 1] (rescale c > 1 first), got {}", p.c));
        }
        BesqParams::new(p.delta1)?;
        BesqParams::new(p.delta2)?;
        if p.delta1 == 0.0 || p.delta2 == 0.0 {
            return domain("besq-sum needs positive dimensions (BESQ(0) from 0 stays at 0)");
        }
        Ok(())
    }

    fn path(&self, rng: &mut SimRng, p: &ModelParams, times: &[f64]) -> Result<PathSample> {
        self.validate(p)?;
        let x = besq::sample_path(rng, &BesqParams::new(p.delta1)?, 0.0, times)?;
        let y = besq::sample_path(rng, &BesqParams::new(p.delta2)?, 0.0, times)?;
        let values = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| p.c * a + b)
            .collect();
        Ok(PathSample {
            times: times.to_vec(),
            values,
        })
    }

    fn skeleton_sampler(&self, p: &ModelParams, eps: f64) -> Result<Box<dyn SkeletonSampler>> {
        self.validate(p)?;
        check_eps(eps)?;
        let gamma = |h: f64| Gamma::new(h, 2.0).map_err(|e| Error::Domain(e.to_string()));
        Ok(Box::new(BesqSumSampler {
            c: p.c,
            h1: 0.5 * p.delta1,
            h2: 0.5 * p.delta2,
            from0_x: gamma(0.5 * p.delta1)?,
            from0_y: gamma(0.5 * p.delta2)?,
            eps,
            back_t: (1.0 - eps) / eps,
        }))
    }
}

// ---------------------------------------------------------------------------
// cM - X

/// How the running maximum is formed on each internal step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunningMax {
    /// Exact maximum of the Brownian bridge between grid points.
    #[default]
    Bridge,
    /// Maximum over grid points only; biased low by about `0.58·√dt`.
    Grid,
}

/// Advances `(x, m)` by a Brownian step of length `dt`.
#[inline]
fn brownian_step(rng: &mut SimRng, x: f64, m: f64, dt: f64, method: RunningMax) -> (f64, f64) {
    let z: f64 = StandardNormal.sample(rng);
    let y = x + dt.sqrt() * z;
    let top = match method {
        RunningMax::Bridge => {
            // P(max > u | ends x, y) = exp(-2(u - x)(u - y)/dt); invert at 1 - U
            let u: f64 = 1.0 - rng.random::<f64>();
            let d = y - x;
            0.5 * (x + y + (d * d - 2.0 * dt * u.ln()).sqrt())
        }
        RunningMax::Grid => y,
    };
    (y, m.max(top))
}

/// `cM - X` for a Brownian motion `X` from 0 and its running maximum `M`.
///
/// Each output interval is split into `refinement` equal steps.
pub fn cmx_path(
    rng: &mut SimRng,
    c: f64,
    times: &[f64],
    refinement: usize,
    method: RunningMax,
) -> Result<PathSample> {
    if !(c >= 0.0 && c.is_finite()) {
        return domain(format!("cmx needs finite c >= 0, got {c}"));
    }
    if refinement == 0 {
        return domain("refinement must be at least 1");
    }
    check_times(times)?;
    let (mut now, mut x, mut m) = (0.0, 0.0, 0.0);
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        if t > now {
            let dt = (t - now) / refinement as f64;
            for _ in 0..refinement {
                (x, m) = brownian_step(rng, x, m, dt, method);
            }
            now = t;
        }
        values.push(c * m - x);
    }
    Ok(PathSample {
        times: times.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Cmx;

struct CmxSampler {
    c: f64,
    eps: f64,
}

impl SkeletonSampler for CmxSampler {
    fn draw(
        &self,
        rng: &mut SimRng,
        w2: &ConditioningWindow,
        arms: &[ConditioningWindow],
    ) -> Option<(usize, f64)> {
        let b = RunningMax::Bridge;
        let (xe, me) = brownian_step(rng, 0.0, 0.0, self.eps, b);
        let (x1, m1) = brownian_step(rng, xe, me, 1.0 - self.eps, b);
        if !w2.contains(self.c * m1 - x1) {
            return None;
        }
        let arm = first_arm(arms, self.c * me - xe)?;
        let (x2, m2) = brownian_step(rng, x1, m1, 1.0, b);
        Some((arm, self.c * m2 - x2))
    }
}

impl ProcessModel for Cmx {
    fn name(&self) -> &str {
        "cmx"
    }

    fn description(&self) -> &str {
        "c M - X for a Brownian motion X and its running maximum M (exact bridge maxima)"
    }

    fn validate(&self, p: &ModelParams) -> Result<()> {
        if !(p.c >= 0.0 && p.c.is_finite()) {
            return domain(format!("cmx needs finite c >= 0, got {}", p.c));
        }
        Ok(())
    }

    fn path(&self, rng: &mut SimRng, p: &ModelParams, times: &[f64]) -> Result<PathSample> {
        self.validate(p)?;
        cmx_path(rng, p.c, times, 1, RunningMax::Bridge)
    }

    fn skeleton_sampler(&self, p: &ModelParams, eps: f64) -> Result<Box<dyn SkeletonSampler>> {
        self.validate(p)?;
        check_eps(eps)?;
        Ok(Box::new(CmxSampler { c: p.c, eps }))
    }
}

// ---------------------------------------------------------------------------

#[derive(Clone, Default)]
pub struct ProcessRegistry {
    models: BTreeMap<String, Arc<dyn ProcessModel>>,
}

impl std::fmt::Debug for ProcessRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.models.keys()).finish()
    }
}

impl ProcessRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(BesqSum));
        r.register(Arc::new(Cmx));
        r
    }

    /// Adds or replaces the model under its own name.
    pub fn register(&mut self, model: Arc<dyn ProcessModel>) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ProcessModel>> {
        self.models.get(name).cloned().ok_or_else(|| {
            Error::Domain(format!(
                "unknown process model `{name}` (known: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.keys().map(String::as_str).collect()
    }
}

// ---------------------------------------------------------------------------
// Rejection sampling

/// Limits on a rejection run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBudget {
    /// Hard cap on simulated skeletons.
    pub max_draws: u64,
    /// Give up once this many draws are done and the acceptance rate is below `min_acceptance`.
    pub probe_draws: u64,
    pub min_acceptance: f64,
}

impl Default for SamplingBudget {
    fn default() -> Self {
        Self {
            max_draws: 2_000_000_000,
            probe_draws: 10_000_000,
            min_acceptance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSample {
    pub values: Vec<f64>,
    /// Skeletons simulated for the whole run (shared by all arms).
    pub simulated: u64,
}

impl ConditionalSample {
    pub fn acceptance_rate(&self) -> f64 {
        if self.simulated == 0 {
            0.0
        } else {
            self.values.len() as f64 / self.simulated as f64
        }
    }
}

/// Values at time 2 conditioned on the value at 1 in `w2` and the value at
/// `eps` in each of `arms`, all drawn from one skeleton stream.
///
/// Stops when every arm holds `n_target` values. A skeleton whose value at
/// `eps` falls in a full arm is discarded.
pub fn conditional_sample_arms(
    rng: &mut SimRng,
    model: &dyn ProcessModel,
    p: &ModelParams,
    eps: f64,
    w2: &ConditioningWindow,
    arms: &[ConditioningWindow],
    n_target: usize,
    budget: &SamplingBudget,
) -> Result<Vec<ConditionalSample>> {
    w2.validate()?;
    if arms.is_empty() {
        return domain("need at least one conditioning window at eps");
    }
    for w in arms {
        w.validate()?;
    }
    if n_target == 0 {
        return domain("n_target must be positive");
    }
    let sampler = model.skeleton_sampler(p, eps)?;
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(n_target); arms.len()];
    let mut open = arms.len();
    let mut simulated: u64 = 0;
    let mut accepted: u64 = 0;
    while open > 0 {
        if simulated >= budget.max_draws
            || (simulated >= budget.probe_draws
                && (accepted as f64) < budget.min_acceptance * simulated as f64)
        {
            return Err(Error::BudgetExhausted {
                accepted: accepted as usize,
                simulated: simulated as usize,
            });
        }
        simulated += 1;
        if let Some((k, v)) = sampler.draw(rng, w2, arms) {
            let bucket = &mut out[k];
            if bucket.len() < n_target {
                bucket.push(v);
                accepted += 1;
                if bucket.len() == n_target {
                    open -= 1;
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|values| ConditionalSample { values, simulated })
        .collect())
}

/// Single-window form of [`conditional_sample_arms`].
pub fn conditional_sample(
    rng: &mut SimRng,
    model: &dyn ProcessModel,
    p: &ModelParams,
    eps: f64,
    w1: &ConditioningWindow,
    w2: &ConditioningWindow,
    n_target: usize,
    budget: &SamplingBudget,
) -> Result<ConditionalSample> {
    let mut v = conditional_sample_arms(rng, model, p, eps, w2, std::slice::from_ref(w1), n_target, budget)?;
    Ok(v.remove(0))
}
