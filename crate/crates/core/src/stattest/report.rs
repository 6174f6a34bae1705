//! Grid orchestration of the conditional two-sample tests.
//!
//! Every cell runs on its own generator, seeded by `mix(seed, index)`, so a
//! report depends only on the configuration and never on scheduling.

use std::thread;

use serde::{Deserialize, Serialize};

use super::ks::{ks_two_sample, TestReport, Verdict};
use super::process::{
    conditional_sample_arms, ConditioningWindow, ModelParams, ProcessModel, ProcessRegistry, SamplingBudget,
};
use crate::error::{domain, Error, Result};
use crate::rng::{mix, stream};

/// One grid cell: two windows at `eps` compared under a shared window at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub c: f64,
    pub eps: f64,
    pub w2: ConditioningWindow,
    pub arms: [ConditioningWindow; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTestConfig {
    pub model: String,
    #[serde(default)]
    pub delta1: f64,
    #[serde(default)]
    pub delta2: f64,
    pub alpha: f64,
    pub n_per_arm: usize,
    pub seed: u64,
    #[serde(default)]
    pub budget: SamplingBudget,
    pub cells: Vec<CellSpec>,
}

fn window(lo: f64, hi: f64) -> ConditioningWindow {
    ConditioningWindow {
        center: 0.5 * (lo + hi),
        halfwidth: 0.5 * (hi - lo),
    }
}

fn window_around(center: f64, rel: f64) -> ConditioningWindow {
    ConditioningWindow {
        center,
        halfwidth: rel * center,
    }
}

impl MarkovTestConfig {
    /// Frozen witness for `Z = cX + Y` on the grid `c ∈ {0, 0.5, 1}`.
    ///
    /// `δ = (0.5, 0.2)`, `ε = 0.5`, `Z(1) ∈ 1.274 ± 5%`, and the value at `ε`
    /// split into a low band `[0, 0.09]` and a high band `[0.53, 2.53]`
    /// (roughly the conditional 30% and 70% quantiles at `c = 0.5`).
    pub fn z_witness(seed: u64) -> Self {
        let w2 = window_around(1.274, 0.05);
        let arms = [window(0.0, 0.09), window(0.53, 2.53)];
        Self {
            model: "besq-sum".into(),
            delta1: 0.5,
            delta2: 0.2,
            alpha: 1e-3,
            n_per_arm: 100_000,
            seed,
            budget: SamplingBudget::default(),
            cells: [0.0, 0.5, 1.0]
                .into_iter()
                .map(|c| CellSpec { c, eps: 0.5, w2, arms })
                .collect(),
        }
    }

    /// Frozen witness for `cM - X` on the grid `c ∈ {0, 0.5, 1, 2}`.
    ///
    /// `ε = 0.5`; windows sit near a central quantile of the value at 1 with
    /// bands near the conditional 30% and 70% quantiles at `ε`.
    pub fn cmx_witness(seed: u64) -> Self {
        let cell = |c: f64, center: f64, low: (f64, f64), high: (f64, f64)| CellSpec {
            c,
            eps: 0.5,
            w2: window_around(center, 0.05),
            arms: [window(low.0, low.1), window(high.0, high.1)],
        };
        Self {
            model: "cmx".into(),
            delta1: 0.0,
            delta2: 0.0,
            alpha: 1e-3,
            n_per_arm: 20_000,
            seed,
            budget: SamplingBudget::default(),
            cells: vec![
                cell(0.0, 0.84, (-0.84, 0.16), (0.68, 1.68)),
                cell(0.5, 0.32, (-1.0, 0.0), (0.45, 1.45)),
                cell(1.0, 0.67, (0.0, 0.24), (0.64, 1.64)),
                cell(2.0, 1.54, (0.0, 0.84), (1.29, 2.29)),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.n_per_arm == 0 {
            return domain("n_per_arm must be positive");
        }
        if self.cells.is_empty() {
            return domain("no grid cells");
        }
        for cell in &self.cells {
            cell.w2.validate()?;
            for w in &cell.arms {
                w.validate()?;
            }
        }
        Ok(())
    }

    pub fn params(&self, c: f64) -> ModelParams {
        ModelParams {
            c,
            delta1: self.delta1,
            delta2: self.delta2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub c: f64,
    pub eps: f64,
    pub w2: ConditioningWindow,
    pub arms: [ConditioningWindow; 2],
    pub seed: u64,
    pub simulated: u64,
    pub acceptance: [f64; 2],
    pub report: TestReport,
    /// Set when the cell is inconclusive.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSummary {
    pub c: f64,
    pub verdict: Verdict,
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub config: MarkovTestConfig,
    pub cells: Vec<CellReport>,
    pub summary: Vec<CSummary>,
}

impl MarkovReport {
    /// Assembles a report from cells run elsewhere, ordered by index.
    pub fn from_cells(config: MarkovTestConfig, mut cells: Vec<CellReport>) -> Self {
        cells.sort_by_key(|c| c.index);
        let summary = summarize(&cells);
        Self {
            config,
            cells,
            summary,
        }
    }

    pub fn verdict_for(&self, c: f64) -> Option<Verdict> {
        self.summary.iter().find(|s| s.c == c).map(|s| s.verdict)
    }

    pub fn any_inconclusive(&self) -> bool {
        self.summary.iter().any(|s| s.verdict == Verdict::Inconclusive)
    }
}

/// Runs one cell with an explicit seed. Budget exhaustion yields an inconclusive cell.
pub fn run_cell(
    model: &dyn ProcessModel,
    config: &MarkovTestConfig,
    index: usize,
    seed: u64,
) -> Result<CellReport> {
    let cell = config
        .cells
        .get(index)
        .ok_or_else(|| Error::Domain(format!("no cell {index}")))?;
    let mut rng = stream(seed, 0);
    let run = conditional_sample_arms(
        &mut rng,
        model,
        &config.params(cell.c),
        cell.eps,
        &cell.w2,
        &cell.arms,
        config.n_per_arm,
        &config.budget,
    );
    let base = CellReport {
        index,
        c: cell.c,
        eps: cell.eps,
        w2: cell.w2,
        arms: cell.arms,
        seed,
        simulated: 0,
        acceptance: [0.0; 2],
        report: TestReport::inconclusive(Some(seed)),
        note: None,
    };
    match run {
        Ok(samples) => {
            let report = ks_two_sample(&samples[0].values, &samples[1].values, config.alpha)?.with_seed(seed);
            Ok(CellReport {
                simulated: samples[0].simulated,
                acceptance: [samples[0].acceptance_rate(), samples[1].acceptance_rate()],
                report,
                ..base
            })
        }
        Err(e @ Error::BudgetExhausted { simulated, .. }) => Ok(CellReport {
            simulated: simulated as u64,
            note: Some(e.to_string()),
            ..base
        }),
        Err(e) => Err(e),
    }
}

fn summarize(cells: &[CellReport]) -> Vec<CSummary> {
    let mut out: Vec<CSummary> = Vec::new();
    for cell in cells {
        let v = cell.report.verdict;
        match out.iter_mut().find(|s| s.c == cell.c) {
            Some(s) => {
                s.cells += 1;
                s.verdict = match (s.verdict, v) {
                    (Verdict::Rejected, _) | (_, Verdict::Rejected) => Verdict::Rejected,
                    (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
                    _ => Verdict::Consistent,
                };
            }
            None => out.push(CSummary {
                c: cell.c,
                verdict: v,
                cells: 1,
            }),
        }
    }
    out
}

/// Runs every cell and summarizes per `c`: rejected if any cell rejects,
/// otherwise inconclusive if any cell is, otherwise consistent.
pub fn markov_discrepancy_report(registry: &ProcessRegistry, config: &MarkovTestConfig) -> Result<MarkovReport> {
    config.validate()?;
    let model = registry.get(&config.model)?;
    for cell in &config.cells {
        model.validate(&config.params(cell.c))?;
    }
    let n = config.cells.len();
    let workers = thread::available_parallelism().map_or(1, |w| w.get()).min(n);
    let results: Vec<Result<CellReport>> = if workers <= 1 {
        (0..n)
            .map(|i| run_cell(model.as_ref(), config, i, mix(config.seed, i as u64)))
            .collect()
    } else {
        thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let model = model.clone();
                    s.spawn(move || {
                        (w..n)
                            .step_by(workers)
                            .map(|i| run_cell(model.as_ref(), config, i, mix(config.seed, i as u64)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("report worker panicked"))
                .collect()
        })
    };
    let cells = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MarkovReport::from_cells(config.clone(), cells))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionSummary {
    pub reps: usize,
    pub rejected: usize,
    pub inconclusive: usize,
}

impl RepetitionSummary {
    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / self.reps as f64
    }
}

/// Repeats one cell under seeds `mix(base_seed, rep)`.
pub fn repeat_cell(
    registry: &ProcessRegistry,
    config: &MarkovTestConfig,
    index: usize,
    reps: usize,
    base_seed: u64,
) -> Result<RepetitionSummary> {
    config.validate()?;
    let model = registry.get(&config.model)?;
    let mut out = RepetitionSummary {
        reps,
        rejected: 0,
        inconclusive: 0,
    };
    for rep in 0..reps {
        let cell = run_cell(model.as_ref(), config, index, mix(base_seed, rep as u64))?;
        match cell.report.verdict {
            Verdict::Rejected => out.rejected += 1,
            Verdict::Inconclusive => out.inconclusive += 1,
            Verdict::Consistent => {}
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn witnesses_validate() {
        let r = ProcessRegistry::builtin();
        for cfg in [MarkovTestConfig::z_witness(1), MarkovTestConfig::cmx_witness(1)] {
            cfg.validate().unwrap();
            let m = r.get(&cfg.model).unwrap();
            for cell in &cfg.cells {
                m.validate(&cfg.params(cell.c)).unwrap();
            }
        }
    }

    #[test]
    fn summary_precedence() {
        let mk = |c: f64, v: Verdict| CellReport {
            index: 0,
            c,
            eps: 0.5,
            w2: window(0.0, 1.0),
            arms: [window(0.0, 1.0); 2],
            seed: 0,
            simulated: 0,
            acceptance: [0.0; 2],
            report: TestReport { verdict: v, ..TestReport::inconclusive(None) },
            note: None,
        };
        let s = summarize(&[
            mk(0.0, Verdict::Consistent),
            mk(0.0, Verdict::Inconclusive),
            mk(1.0, Verdict::Inconclusive),
            mk(1.0, Verdict::Rejected),
            mk(2.0, Verdict::Consistent),
        ]);
        let v: Vec<_> = s.iter().map(|s| s.verdict).collect();
        assert_eq!(v, [Verdict::Inconclusive, Verdict::Rejected, Verdict::Consistent]);
        assert_eq!(s[0].cells, 2);
    }

    #[test]
    fn small_cmx_report_is_deterministic_and_serializes() {
        let mut cfg = MarkovTestConfig::cmx_witness(42);
        cfg.n_per_arm = 300;
        let r = ProcessRegistry::builtin();
        let a = markov_discrepancy_report(&r, &cfg).unwrap();
        let b = markov_discrepancy_report(&r, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 4);
        assert!(a.cells.iter().all(|c| c.report.seed == Some(c.seed)));
        let json = serde_json::to_string(&a).unwrap();
        let back: MarkovReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.summary, a.summary);
    }

    #[test]
    fn inconclusive_cells_round_trip() {
        let mut cfg = MarkovTestConfig::cmx_witness(3);
        cfg.n_per_arm = 50;
        cfg.budget = SamplingBudget {
            probe_draws: 10_000,
            ..SamplingBudget::default()
        };
        // cM - X >= 0 at c = 2: a negative band is never entered
        cfg.cells = vec![CellSpec {
            arms: [window(-2.0, -1.0), window(0.0, 1.0)],
            ..cfg.cells[3]
        }];
        let r = markov_discrepancy_report(&ProcessRegistry::builtin(), &cfg).unwrap();
        assert!(r.any_inconclusive());
        assert!(r.cells[0].note.is_some());
        let json = serde_json::to_string(&r).unwrap();
        let back: MarkovReport = serde_json::from_str(&json).unwrap();
        assert!(back.cells[0].report.statistic.is_nan());
        assert_eq!(back.cells[0].report.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn unknown_model_is_an_error() {
        let mut cfg = MarkovTestConfig::cmx_witness(1);
        cfg.model = "nope".into();
        assert!(markov_discrepancy_report(&ProcessRegistry::builtin(), &cfg).is_err());
    }
}
