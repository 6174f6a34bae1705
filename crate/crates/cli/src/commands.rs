//! One function per command; each returns the artifact to emit.

use besqlab::besq::{sample_path, transition_density, BesqParams};
use besqlab::dyson::{EigenSamplerRegistry, MatrixProcessConfig};
use besqlab::nonmarkov::{
    conditional_ratio, default_quadrature, double_ratio_residual, hypothesis_constant, laplace_asymptotic,
    laplace_numeric, laplace_ratio, LaplaceProblem, ScenarioParams, Support,
};
use besqlab::quadrature::QuadratureSpec;
use besqlab::rng::{mix, stream};
use besqlab::stattest::{
    cmx_path, markov_discrepancy_report, run_cell, CellReport, CellSpec, ConditioningWindow, MarkovReport,
    MarkovTestConfig, ModelParams, ProcessRegistry, RunningMax, Verdict,
};
use serde_json::Value;

use crate::args::{
    DensityArgs, EigenArgs, LaplaceArgs, Lemma3Args, MarkovArgs, NumList, ProcessKind, RatioArgs, SimulateArgs,
};
use crate::config::require;
use crate::error::{config_err, CliError};
use crate::output::{Artifact, Cell, Table};

pub struct Outcome {
    pub artifact: Artifact,
    /// Set when a statistical result could not be decided.
    pub inconclusive: Option<String>,
}

impl From<Artifact> for Outcome {
    fn from(artifact: Artifact) -> Self {
        Self {
            artifact,
            inconclusive: None,
        }
    }
}

type Res<T> = Result<T, CliError>;

fn list(v: &Option<NumList>, key: &str) -> Res<Vec<f64>> {
    match v {
        Some(NumList(xs)) if !xs.is_empty() => Ok(xs.clone()),
        _ => config_err(format!("missing required `{key}`")),
    }
}

fn list_or(v: &Option<NumList>, default: &[f64]) -> Vec<f64> {
    v.as_ref().map_or_else(|| default.to_vec(), |l| l.0.clone())
}

fn spec_with(rel_tol: Option<f64>) -> Res<QuadratureSpec> {
    let s = default_quadrature();
    match rel_tol {
        // below ~1e-14 the nested rules refine without ever converging
        Some(r) if !(1e-14..=0.1).contains(&r) => config_err(format!("rel-tol must lie in [1e-14, 0.1], got {r}")),
        Some(r) => Ok(s.with_tolerance(r, s.abs_tol)),
        None => Ok(s),
    }
}

fn grid(t_max: f64, steps: usize) -> Res<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || steps == 0 {
        return config_err("need t-max > 0 and steps >= 1");
    }
    Ok((0..=steps).map(|i| t_max * i as f64 / steps as f64).collect())
}

pub fn density(a: &DensityArgs) -> Res<Outcome> {
    let delta = require(a.delta, "delta")?;
    let t = require(a.t, "t")?;
    let x = a.x.unwrap_or(0.0);
    let p = BesqParams::new(delta)?;
    let mut table = Table::new(&["delta", "t", "x", "y", "density"]).with_primary("density");
    for y in list(&a.y, "y")? {
        let v = transition_density(&p, t, x, y)?;
        table.push(vec![delta.into(), t.into(), x.into(), y.into(), v.into()]);
    }
    Ok(Artifact::Table(table).into())
}

pub fn simulate(a: &SimulateArgs, seed: u64) -> Res<Outcome> {
    let times = grid(a.t_max.unwrap_or(1.0), a.steps.unwrap_or(100))?;
    let paths = a.paths.unwrap_or(1);
    let mut table = Table::new(&["path", "t", "value"]);
    for k in 0..paths {
        let mut rng = stream(seed, k as u64);
        let path = match a.process.unwrap_or_default() {
            ProcessKind::Besq => {
                let p = BesqParams::new(require(a.delta, "delta")?)?;
                sample_path(&mut rng, &p, a.x0.unwrap_or(0.0), &times)?
            }
            ProcessKind::BesqSum => {
                let c = require(a.c, "c")?;
                let (d1, d2) = (require(a.delta1, "delta1")?, require(a.delta2, "delta2")?);
                let model = ProcessRegistry::builtin().get("besq-sum")?;
                if c > 1.0 {
                    // c X + Y = c (X + Y/c)
                    let mut p = model.path(&mut rng, &ModelParams { c: 1.0 / c, delta1: d2, delta2: d1 }, &times)?;
                    p.values.iter_mut().for_each(|v| *v *= c);
                    p
                } else {
                    model.path(&mut rng, &ModelParams { c, delta1: d1, delta2: d2 }, &times)?
                }
            }
            ProcessKind::Cmx => {
                let method: RunningMax = a.running_max.map(Into::into).unwrap_or_default();
                cmx_path(&mut rng, require(a.c, "c")?, &times, a.refinement.unwrap_or(1), method)?
            }
        };
        for (t, v) in path.times.iter().zip(&path.values) {
            table.push(vec![k.into(), (*t).into(), (*v).into()]);
        }
    }
    Ok(Artifact::Table(table).into())
}

pub fn eigen(a: &EigenArgs, seed: u64) -> Res<Outcome> {
    let registry = EigenSamplerRegistry::builtin();
    let name = a.sampler.as_deref().unwrap_or("matrix");
    let Some(sampler) = registry.get(name) else {
        let known: Vec<_> = registry.names().collect();
        return config_err(format!("unknown sampler `{name}` (known: {})", known.join(", ")));
    };
    let cfg = MatrixProcessConfig::new(
        require(a.c, "c")?,
        require(a.delta, "delta")?,
        grid(a.t_max.unwrap_or(1.0), a.steps.unwrap_or(100))?,
    )?;
    let mut table = Table::new(&["path", "t", "lambda1", "lambda2"]);
    for k in 0..a.paths.unwrap_or(1) {
        let e = sampler.sample(&mut stream(seed, k as u64), &cfg)?;
        for (i, &t) in e.times().iter().enumerate() {
            let pair = e.at(i);
            table.push(vec![k.into(), t.into(), pair.lambda1.into(), pair.lambda2.into()]);
        }
    }
    Ok(Artifact::Table(table).into())
}

/// Conditional density for any `c >= 0`.
///
/// `c = 0` is Markov with the BESQ(δ₂) kernel. `c > 1` uses `Z/c = X + Y/c`:
/// `c' = 1/c`, the two dimensions swapped and all levels divided by `c`.
pub fn ratio_any_c(s: ScenarioParams, use_eps: bool, spec: &QuadratureSpec) -> Res<(f64, f64)> {
    if s.c == 0.0 {
        let v = transition_density(&BesqParams::new(s.delta2)?, 1.0, s.z2, s.z3)?;
        return Ok((v, 0.0));
    }
    if s.c > 1.0 {
        let c = s.c;
        let scaled = ScenarioParams {
            c: 1.0 / c,
            delta1: s.delta2,
            delta2: s.delta1,
            z1: s.z1 / c,
            z2: s.z2 / c,
            z3: s.z3 / c,
            ..s
        };
        scaled.validate()?;
        let e = conditional_ratio(&scaled, use_eps, spec)?;
        return Ok((e.value / c, e.error_estimate / c));
    }
    s.validate()?;
    let e = conditional_ratio(&s, use_eps, spec)?;
    Ok((e.value, e.error_estimate))
}

pub fn ratio(a: &RatioArgs) -> Res<Outcome> {
    let c = require(a.c, "c")?;
    if !(c >= 0.0 && c.is_finite()) {
        return config_err(format!("c must be >= 0, got {c}"));
    }
    let (d1, d2) = (require(a.delta1, "delta1")?, require(a.delta2, "delta2")?);
    let use_eps = !a.limit_eps.unwrap_or(false);
    let eps_list = if use_eps { list_or(&a.eps, &[0.5]) } else { vec![a.eps.as_ref().and_then(|l| l.0.first().copied()).unwrap_or(0.5)] };
    let support: Support = a.support.map(Into::into).unwrap_or_default();
    let spec = spec_with(a.rel_tol)?;
    let mut table = Table::new(&[
        "c", "delta1", "delta2", "eps", "z1", "z2", "z3", "limit_eps", "ratio", "error_estimate",
    ])
    .with_primary("ratio");
    for &eps in &eps_list {
        for &z1 in &list(&a.z1, "z1")? {
            for &z2 in &list(&a.z2, "z2")? {
                for &z3 in &list(&a.z3, "z3")? {
                    let s = ScenarioParams {
                        c,
                        delta1: d1,
                        delta2: d2,
                        eps,
                        z1,
                        z2,
                        z3,
                        support,
                    };
                    let (v, e) = ratio_any_c(s, use_eps, &spec)?;
                    table.push(vec![
                        c.into(),
                        d1.into(),
                        d2.into(),
                        eps.into(),
                        z1.into(),
                        z2.into(),
                        z3.into(),
                        (!use_eps).into(),
                        v.into(),
                        e.into(),
                    ]);
                }
            }
        }
    }
    Ok(Artifact::Table(table).into())
}

pub fn laplace(a: &LaplaceArgs) -> Res<Outcome> {
    let (a0, b) = (a.a.unwrap_or(0.0), a.b.unwrap_or(1.0));
    let (p2, p3) = (a.p2.unwrap_or(0.0), a.p3.unwrap_or(0.0));
    let p = LaplaceProblem::unit_amplitude(a0, b, a.nu.unwrap_or(1.0), move |x| a0 + x * (b + x * (p2 + x * p3)))?;
    let k = hypothesis_constant(&p, 400)?;
    let spec = spec_with(a.rel_tol)?;
    let mut table = Table::new(&["lambda", "numeric", "asymptotic", "ratio", "hypothesis_k"]).with_primary("ratio");
    for lambda in list_or(&a.lambda, &[20.0, 50.0, 100.0, 200.0]) {
        let num = laplace_numeric(&p, lambda, &spec)?;
        let asy = laplace_asymptotic(&p, lambda);
        let r = laplace_ratio(&p, lambda, &spec)?;
        table.push(vec![lambda.into(), num.into(), asy.into(), r.into(), k.into()]);
    }
    Ok(Artifact::Table(table).into())
}

pub fn lemma3(a: &Lemma3Args) -> Res<Outcome> {
    let c = require(a.c, "c")?;
    let (mut d1, mut d2) = (require(a.delta1, "delta1")?, require(a.delta2, "delta2")?);
    let (r1, r2) = (a.r1.unwrap_or(1.0), a.r2.unwrap_or(4.0));
    let support: Support = a.support.map(Into::into).unwrap_or_default();
    let spec = spec_with(a.rel_tol)?;
    // z₁ = r·z₂ scales with z₂, so only c, the dimensions and z₂ change under Z/c
    let (c_eff, z_scale) = if c > 1.0 {
        std::mem::swap(&mut d1, &mut d2);
        (1.0 / c, 1.0 / c)
    } else {
        (c, 1.0)
    };
    let mut table = Table::new(&["z2", "observed", "predicted", "residual", "error_estimate"]).with_primary("residual");
    for z2 in list_or(&a.z2, &[10.0, 20.0, 40.0]) {
        let d = double_ratio_residual(r1, r2, z2 * z_scale, c_eff, d1, d2, support, &spec)?;
        table.push(vec![
            z2.into(),
            d.observed.into(),
            d.predicted.into(),
            d.residual.into(),
            d.error_estimate.into(),
        ]);
    }
    Ok(Artifact::Table(table).into())
}

fn scale_window(w: ConditioningWindow, k: f64) -> ConditioningWindow {
    ConditioningWindow {
        center: w.center * k,
        halfwidth: w.halfwidth * k,
    }
}

fn build_markov_config(a: &MarkovArgs, default_model: &str, seed: u64) -> Res<MarkovTestConfig> {
    let model = a.model.clone().unwrap_or_else(|| default_model.to_string());
    let mut cfg = match model.as_str() {
        "besq-sum" => MarkovTestConfig::z_witness(seed),
        "cmx" => MarkovTestConfig::cmx_witness(seed),
        other => {
            ProcessRegistry::builtin().get(other)?;
            if a.cells.is_none() {
                return config_err(format!("model `{other}` has no frozen witness; give `cells` in a config file"));
            }
            MarkovTestConfig {
                model: other.to_string(),
                ..MarkovTestConfig::z_witness(seed)
            }
        }
    };
    cfg.seed = seed;
    if let Some(v) = a.delta1 {
        cfg.delta1 = v;
    }
    if let Some(v) = a.delta2 {
        cfg.delta2 = v;
    }
    if let Some(v) = a.n_per_arm {
        cfg.n_per_arm = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(b) = a.budget {
        cfg.budget = b;
    }
    if let Some(cells) = &a.cells {
        cfg.cells = cells.clone();
    } else if let Some(cs) = &a.c {
        let template = cfg.cells.clone();
        cfg.cells = cs
            .0
            .iter()
            .map(|&c| {
                if model == "besq-sum" {
                    // the witness shares its windows across c
                    Ok(CellSpec { c, ..template[1] })
                } else {
                    template
                        .iter()
                        .find(|t| t.c == c)
                        .copied()
                        .ok_or_else(|| CliError::Config(format!("no frozen {model} windows for c = {c}; give `cells` in a config file")))
                }
            })
            .collect::<Res<Vec<_>>>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs cells one by one, mapping `c > 1` cells of `Z = cX + Y` to `Z/c`.
fn rescaled_report(cfg: &MarkovTestConfig, registry: &ProcessRegistry) -> Res<MarkovReport> {
    let model = registry.get(&cfg.model)?;
    let mut cells: Vec<CellReport> = Vec::with_capacity(cfg.cells.len());
    for (i, cell) in cfg.cells.iter().enumerate() {
        let seed = mix(cfg.seed, i as u64);
        let r = if cell.c > 1.0 {
            let k = 1.0 / cell.c;
            let sub = MarkovTestConfig {
                delta1: cfg.delta2,
                delta2: cfg.delta1,
                cells: vec![CellSpec {
                    c: k,
                    eps: cell.eps,
                    w2: scale_window(cell.w2, k),
                    arms: [scale_window(cell.arms[0], k), scale_window(cell.arms[1], k)],
                }],
                ..cfg.clone()
            };
            model.validate(&sub.params(k))?;
            let mut r = run_cell(model.as_ref(), &sub, 0, seed)?;
            r.index = i;
            r.c = cell.c;
            r.w2 = cell.w2;
            r.arms = cell.arms;
            r
        } else {
            model.validate(&cfg.params(cell.c))?;
            run_cell(model.as_ref(), cfg, i, seed)?
        };
        cells.push(r);
    }
    Ok(MarkovReport::from_cells(cfg.clone(), cells))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Consistent => "consistent",
        Verdict::Rejected => "rejected",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn markov(a: &MarkovArgs, default_model: &str, seed: u64) -> Res<Outcome> {
    let cfg = build_markov_config(a, default_model, seed)?;
    let registry = ProcessRegistry::builtin();
    let report = if cfg.model == "besq-sum" && cfg.cells.iter().any(|c| c.c > 1.0) {
        rescaled_report(&cfg, &registry)?
    } else {
        markov_discrepancy_report(&registry, &cfg)?
    };
    let mut table = Table::new(&[
        "index", "c", "eps", "w2_center", "w2_halfwidth", "low_center", "low_halfwidth", "high_center",
        "high_halfwidth", "statistic", "threshold", "p_value", "n_samples", "verdict", "seed", "simulated",
    ]);
    for c in &report.cells {
        table.push(vec![
            c.index.into(),
            c.c.into(),
            c.eps.into(),
            c.w2.center.into(),
            c.w2.halfwidth.into(),
            c.arms[0].center.into(),
            c.arms[0].halfwidth.into(),
            c.arms[1].center.into(),
            c.arms[1].halfwidth.into(),
            c.report.statistic.into(),
            c.report.threshold.into(),
            c.report.p_value.into(),
            c.report.n_samples.into(),
            Cell::from(verdict_name(c.report.verdict)),
            c.seed.into(),
            c.simulated.into(),
        ]);
    }
    for s in &report.summary {
        eprintln!("c = {}: {}", s.c, verdict_name(s.verdict));
    }
    let inconclusive = report.any_inconclusive().then(|| {
        let cs: Vec<String> = report
            .summary
            .iter()
            .filter(|s| s.verdict == Verdict::Inconclusive)
            .map(|s| s.c.to_string())
            .collect();
        format!("budget exhausted for c = {}", cs.join(", "))
    });
    let json: Value = serde_json::to_value(&report).map_err(std::io::Error::other)?;
    Ok(Outcome {
        artifact: Artifact::Report { json, table },
        inconclusive,
    })
}
