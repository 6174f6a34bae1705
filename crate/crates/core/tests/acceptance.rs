//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use besqlab::besq::{far_field_density, transition_density, weighted_zero_limit, BesqParams};
use besqlab::dyson::{
    decompose, eigen_paths_from, eigenvalues, eigenvalues_from_vector_offdiag, simulate_drivers,
    DriverState, EigenSamplerRegistry, MatrixProcessConfig,
};
use besqlab::nonmarkov::{
    conditional_ratio, default_quadrature, double_ratio_residual, joint_density_triple, laplace_ratio,
    ratio_spread, zero_limit_weighted_triple, LaplaceProblem, ScenarioParams, Support,
};
use besqlab::quadrature::{integrate_to_infinity, QuadratureSpec};
use besqlab::rng::{seeded, stream};
use besqlab::specfun::{bessel_i_scaled, ln_gamma, BesselIndex};
use besqlab::stattest::{
    cmx_path, ks_one_sample, ks_two_sample, markov_discrepancy_report, repeat_cell, MarkovTestConfig,
    ProcessRegistry, RunningMax, Verdict,
};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn besq(delta: f64) -> BesqParams {
    BesqParams::new(delta).unwrap()
}

fn spec_for(delta: f64) -> QuadratureSpec {
    QuadratureSpec::default()
        .with_tolerance(1e-11, 1e-15)
        .with_exponents((delta / 2.0).min(1.0), 1.0)
}

const DELTAS: [f64; 5] = [0.7, 1.0, 2.0, 3.0, 4.5];
const TIMES: [f64; 2] = [0.3, 1.0];
const STARTS: [f64; 3] = [0.0, 0.5, 3.0];

fn normalization_and_chapman_kolmogorov() -> Check {
    let (mut worst_mass, mut worst_ck) = (0.0f64, 0.0f64);
    for d in DELTAS {
        let p = besq(d);
        for t in TIMES {
            for x in STARTS {
                let r = integrate_to_infinity(|y| transition_density(&p, t, x, y).unwrap(), 0.0, &spec_for(d))
                    .map_err(|e| e.to_string())?;
                worst_mass = worst_mass.max((r.value - 1.0).abs());
                for s in TIMES {
                    for y in [0.2, 1.5, 4.0] {
                        let r = integrate_to_infinity(
                            |z| transition_density(&p, s, x, z).unwrap() * transition_density(&p, t, z, y).unwrap(),
                            0.0,
                            &spec_for(d),
                        )
                        .map_err(|e| e.to_string())?;
                        worst_ck = worst_ck.max(rel(r.value, transition_density(&p, s + t, x, y).unwrap()));
                    }
                }
            }
        }
    }
    ensure(worst_mass < 1e-7, || format!("mass error {worst_mass:e}"))?;
    ensure(worst_ck < 1e-5, || format!("Chapman-Kolmogorov error {worst_ck:e}"))?;
    Ok(format!("max |mass-1| {worst_mass:.1e}, max CK rel {worst_ck:.1e}"))
}

fn asymptotic_regimes() -> Check {
    let nus = [-0.5, 0.0, 0.5, 1.0, 2.0];
    let mut small = 0.0f64;
    let mut large = 0.0f64;
    for nu in nus {
        let i = BesselIndex::new(nu).unwrap();
        let x: f64 = 1e-6;
        let lead = (nu * (0.5 * x).ln() - ln_gamma(nu + 1.0).unwrap()).exp();
        small = small.max((bessel_i_scaled(i, x).unwrap() * x.exp() / lead - 1.0).abs());
        let x: f64 = 1e4;
        large = large.max((bessel_i_scaled(i, x).unwrap() * (2.0 * PI * x).sqrt() - 1.0).abs());
    }
    let mut to0 = 0.0f64;
    let y: f64 = 1e-8;
    for d in DELTAS {
        for t in TIMES {
            for x in [0.5, 3.0] {
                let lhs = y.powf(1.0 - d / 2.0) * transition_density(&besq(d), t, x, y).unwrap();
                to0 = to0.max(rel(lhs, weighted_zero_limit(&besq(d), t, x).unwrap()));
            }
        }
    }
    let mut far = 0.0f64;
    for (d, x, y) in [(3.0, 1e4, 1e4), (2.0, 1e6, 1e6), (0.7, 2e4, 3e4), (4.5, 5e4, 4e4)] {
        let p = besq(d);
        far = far.max((far_field_density(&p, 1.0, x, y).unwrap() / transition_density(&p, 1.0, x, y).unwrap() - 1.0).abs());
    }
    ensure(small < 1e-6, || format!("small-argument {small:e}"))?;
    ensure(large < 1e-3, || format!("large-argument {large:e}"))?;
    ensure(to0 < 1e-4, || format!("y -> 0 limit {to0:e}"))?;
    ensure(far < 1e-2, || format!("far field {far:e}"))?;
    Ok(format!("small {small:.1e}, large {large:.1e}, to0 {to0:.1e}, far {far:.1e}"))
}

fn pathwise_eigen_identities() -> Check {
    let times: Vec<f64> = (1..=10_000).map(|k| k as f64 * 1e-3).collect();
    let mut worst = 0.0f64;
    for c in [0.0, 0.5, 1.0] {
        let cfg = MatrixProcessConfig::new(c, 1.3, times.clone()).map_err(|e| e.to_string())?;
        let drivers = simulate_drivers(&mut seeded(31), &cfg).map_err(|e| e.to_string())?;
        let paths = eigen_paths_from(&drivers, c);
        for i in 0..times.len() {
            let s = drivers.state(i);
            let (sum, gap) = decompose(paths.at(i));
            let scale = 1.0 + s.b1.abs() + s.b2.abs() + s.xi;
            let e1 = (sum - (s.b1 + s.b2)).abs() / scale;
            let e2 = (gap * gap - ((s.b1 - s.b2).powi(2) + 2.0 * c * s.xi * s.xi)).abs() / (scale * scale);
            worst = worst.max(e1).max(e2);
        }
    }
    ensure(worst <= 1e-12, || format!("scaled identity error {worst:e}"))?;
    Ok(format!("3 x 10^4 time points, max scaled error {worst:.1e}"))
}

fn dyson_sde_matches_matrix_model() -> Check {
    let n = 100_000;
    let reg = EigenSamplerRegistry::builtin();
    let (matrix, sde) = (reg.get("matrix").unwrap(), reg.get("dyson-sde").unwrap());
    let mut min_p = 1.0f64;
    for delta in [1.0, 2.0] {
        let cfg = MatrixProcessConfig::new(1.0, delta, vec![1.0]).unwrap();
        for seed in 1..=5u64 {
            let (mut ra, mut rb) = (stream(seed, 1), stream(seed, 2));
            let mut a = (Vec::with_capacity(n), Vec::with_capacity(n));
            let mut b = (Vec::with_capacity(n), Vec::with_capacity(n));
            for _ in 0..n {
                let e = matrix.sample(&mut ra, &cfg).map_err(|e| e.to_string())?.at(0);
                a.0.push(e.lambda1);
                a.1.push(e.lambda2);
                let e = sde.sample(&mut rb, &cfg).map_err(|e| e.to_string())?.at(0);
                b.0.push(e.lambda1);
                b.1.push(e.lambda2);
            }
            for (x, y) in [(&a.0, &b.0), (&a.1, &b.1)] {
                let r = ks_two_sample(x, y, 1e-3).map_err(|e| e.to_string())?;
                min_p = min_p.min(r.p_value);
            }
        }
    }
    ensure(min_p > 1e-3, || format!("min KS p-value {min_p:.2e}"))?;
    Ok(format!("delta 1,2 x 5 seeds, n=1e5, min p {min_p:.3}"))
}

fn ulps(a: f64, b: f64) -> u64 {
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    key(a).abs_diff(key(b))
}

fn vector_offdiagonal_reduction() -> Check {
    let mut rng = seeded(22);
    let mut worst = 0u64;
    for dim in [1usize, 2, 4] {
        for _ in 0..10_000 {
            let b1: f64 = rng.sample(StandardNormal);
            let b2: f64 = rng.sample(StandardNormal);
            let c = 3.0 * rng.random::<f64>();
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let a = eigenvalues_from_vector_offdiag(b1, b2, &v, c).map_err(|e| e.to_string())?;
            let b = eigenvalues(DriverState { b1, b2, xi: norm }, c);
            worst = worst.max(ulps(a.lambda1, b.lambda1)).max(ulps(a.lambda2, b.lambda2));
        }
    }
    ensure(worst <= 2, || format!("{worst} ulp"))?;
    Ok(format!("3 x 10^4 draws, max {worst} ulp"))
}

fn laplace_endpoint_asymptotics() -> Check {
    let spec = QuadratureSpec::default().with_tolerance(1e-12, 1e-300);
    let problems = [
        LaplaceProblem::unit_amplitude(0.0, 1.0, 0.5, |x| x + x * x).unwrap(),
        LaplaceProblem::unit_amplitude(3.0, 2.0, 1.0, |x| 3.0 + 2.0 * x + x * x).unwrap(),
        LaplaceProblem::new(-1.0, 0.5, 2.0, |x| -1.0 + 0.5 * x + x.powi(3), |_, x| 1.0 / (1.0 + x), 1.0).unwrap(),
    ];
    let mut last = Vec::new();
    for (k, p) in problems.iter().enumerate() {
        let dev = [20.0, 50.0, 100.0, 200.0]
            .iter()
            .map(|&l| laplace_ratio(p, l, &spec).map(|r| (r - 1.0).abs()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?;
        ensure(dev.windows(2).all(|w| w[1] < w[0]), || format!("problem {k} not improving: {dev:?}"))?;
        ensure(dev[3] < 0.05, || format!("problem {k} at lambda 200: {:.3}", dev[3]))?;
        last.push(format!("{:.1e}", dev[3]));
    }
    Ok(format!("|ratio-1| at lambda 200: {}", last.join(", ")))
}

fn small_z3_limit() -> Check {
    let spec = default_quadrature();
    let z3: f64 = 1e-5;
    let mut worst = 0.0f64;
    for (c, d1, d2) in [(0.5, 1.0, 1.0), (0.3, 2.0, 3.0)] {
        let s = ScenarioParams::new(c, d1, d2, 0.5, 1.0, 4.0, z3).unwrap();
        let q = joint_density_triple(&s, false, &spec).map_err(|e| e.to_string())?;
        let weighted = z3.powf(1.0 - 0.5 * (d1 + d2)) * q.value;
        let limit = zero_limit_weighted_triple(&s, &spec).map_err(|e| e.to_string())?;
        worst = worst.max(rel(weighted, limit.value));
    }
    ensure(worst < 1e-3, || format!("relative gap {worst:e}"))?;
    Ok(format!("max relative gap {worst:.1e}"))
}

fn double_ratio_limit() -> Check {
    let spec = default_quadrature();
    let res = [10.0, 20.0, 40.0]
        .iter()
        .map(|&z2| double_ratio_residual(1.0, 4.0, z2, 0.5, 1.0, 1.0, Support::Exact, &spec).map(|r| r.residual))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    ensure(res[0].abs() > res[1].abs() && res[1].abs() > res[2].abs(), || format!("not shrinking: {res:?}"))?;
    ensure(res[2].abs() < 0.05, || format!("final residual {:.3}", res[2]))?;
    Ok(format!("residuals {:.4} {:.4} {:.4}", res[0], res[1], res[2]))
}

fn markov_dichotomy_by_quadrature() -> Check {
    let spec = default_quadrature();
    let mut worst = 0.0f64;
    for (eps, z1) in [(0.5, 1.0), (0.1, 3.0), (0.02, 0.4)] {
        let s = ScenarioParams::new(1.0, 1.0, 1.0, eps, z1, 4.0, 1.0).unwrap();
        let r = conditional_ratio(&s, true, &spec).map_err(|e| e.to_string())?;
        worst = worst.max(rel(r.value, transition_density(&besq(2.0), 1.0, 4.0, 1.0).unwrap()));
    }
    ensure(worst < 1e-5, || format!("c = 1 deviation {worst:e}"))?;

    let base = ScenarioParams::new(0.5, 1.0, 1.0, 0.5, 1.0, 4.0, 1.0).unwrap();
    let settings = [(0.5, 1.0), (0.5, 8.0), (0.1, 1.0), (0.1, 8.0)];
    let spread = ratio_spread(&base, &settings, true, &spec).map_err(|e| e.to_string())?;
    ensure(spread.resolved(10.0), || format!("c = 0.5 spread unresolved: {spread:?}"))?;
    // frozen from the first converged run
    let a = conditional_ratio(&base, true, &spec).map_err(|e| e.to_string())?.value;
    ensure(rel(a, 0.097_465_715_820_786) < 1e-8, || format!("witness ratio moved: {a}"))?;
    Ok(format!(
        "c=1 max rel {worst:.1e}; c=0.5 spread {:.3} vs error {:.1e}",
        spread.relative_spread, spread.relative_error
    ))
}

fn markov_dichotomy_by_monte_carlo() -> Check {
    let reg = ProcessRegistry::builtin();
    let cfg = MarkovTestConfig::z_witness(2024);
    let report = markov_discrepancy_report(&reg, &cfg).map_err(|e| e.to_string())?;
    let want = [(0.0, Verdict::Consistent), (0.5, Verdict::Rejected), (1.0, Verdict::Consistent)];
    for (c, v) in want {
        ensure(report.verdict_for(c) == Some(v), || format!("c = {c}: {:?}", report.verdict_for(c)))?;
    }
    let idx = cfg.cells.iter().position(|cell| cell.c == 1.0).ok_or("no c = 1 cell")?;
    let reps = 200;
    let cal = repeat_cell(&reg, &cfg, idx, reps, 7).map_err(|e| e.to_string())?;
    ensure(cal.inconclusive == 0, || format!("{} inconclusive calibration runs", cal.inconclusive))?;
    ensure(cal.rejection_rate() <= 0.01, || format!("calibration rejection rate {}", cal.rejection_rate()))?;
    let stats: Vec<String> = report.cells.iter().map(|c| format!("{:.4}", c.report.statistic)).collect();
    Ok(format!(
        "verdicts consistent/rejected/consistent (D = {}); c=1 rejections {}/{reps}",
        stats.join(", "),
        cal.rejected
    ))
}

fn cmx_at_one(seed: u64, c: f64, n: usize) -> Vec<f64> {
    let mut rng = stream(seed, 1);
    (0..n)
        .map(|_| cmx_path(&mut rng, c, &[0.5, 1.0], 1, RunningMax::Bridge).unwrap().values[1])
        .collect()
}

fn cmx_control() -> Check {
    let n = 20_000;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let chi3 = ChiSquared::new(3.0).unwrap();
    // -B(1) is standard normal; M - B is |N|; 2M - B is the norm of a 3-vector
    let oracles: [(f64, Box<dyn Fn(f64) -> f64>); 3] = [
        (0.0, Box::new(move |x| normal.cdf(x))),
        (1.0, Box::new(move |x| if x <= 0.0 { 0.0 } else { 2.0 * normal.cdf(x) - 1.0 })),
        (2.0, Box::new(move |x| if x <= 0.0 { 0.0 } else { chi3.cdf(x * x) })),
    ];
    let mut ps = Vec::new();
    for (k, (c, cdf)) in oracles.iter().enumerate() {
        let xs = cmx_at_one(40 + k as u64, *c, n);
        let r = ks_one_sample(&xs, cdf, 1e-3).map_err(|e| e.to_string())?;
        ensure(r.p_value > 1e-3, || format!("oracle at c = {c}: p {:.2e}", r.p_value))?;
        ps.push(format!("{:.3}", r.p_value));
    }
    let report = markov_discrepancy_report(&ProcessRegistry::builtin(), &MarkovTestConfig::cmx_witness(2024))
        .map_err(|e| e.to_string())?;
    let want = [
        (0.0, Verdict::Consistent),
        (0.5, Verdict::Rejected),
        (1.0, Verdict::Consistent),
        (2.0, Verdict::Consistent),
    ];
    for (c, v) in want {
        ensure(report.verdict_for(c) == Some(v), || format!("c = {c}: {:?}", report.verdict_for(c)))?;
    }
    Ok(format!("oracle p-values {}; verdicts c=0,1,2 consistent, c=0.5 rejected", ps.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("density normalization and Chapman-Kolmogorov", normalization_and_chapman_kolmogorov),
        ("asymptotic regimes", asymptotic_regimes),
        ("pathwise eigenvalue identities", pathwise_eigen_identities),
        ("Dyson SDE against the matrix model", dyson_sde_matches_matrix_model),
        ("vector off-diagonal reduction", vector_offdiagonal_reduction),
        ("endpoint Laplace asymptotics", laplace_endpoint_asymptotics),
        ("small-z3 limit", small_z3_limit),
        ("double-ratio limit", double_ratio_limit),
        ("Markov dichotomy by quadrature", markov_dichotomy_by_quadrature),
        ("Markov dichotomy by Monte Carlo", markov_dichotomy_by_monte_carlo),
        ("cM - X control", cmx_control),
    ];
    let only: Vec<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|k| k.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
