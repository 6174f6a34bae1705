//! Kolmogorov–Smirnov statistics with the asymptotic Kolmogorov p-value.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Rejected,
    Inconclusive,
}

/// Outcome of one test. `verdict == Rejected` exactly when `statistic > threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    #[serde(with = "nan_as_null")]
    pub statistic: f64,
    #[serde(with = "nan_as_null")]
    pub threshold: f64,
    #[serde(with = "nan_as_null")]
    pub p_value: f64,
    pub n_samples: usize,
    pub verdict: Verdict,
    pub seed: Option<u64>,
}

/// Inconclusive reports carry NaN, which JSON cannot hold.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl TestReport {
    pub fn inconclusive(seed: Option<u64>) -> Self {
        Self {
            statistic: f64::NAN,
            threshold: f64::NAN,
            p_value: f64::NAN,
            n_samples: 0,
            verdict: Verdict::Inconclusive,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

/// Kolmogorov survival function `Q(λ) = P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, fast for small λ
        let mut s = 0.0;
        for k in 1..=8 {
            let j = (2 * k - 1) as f64;
            s += (-(j * j) * PI * PI / (8.0 * lambda * lambda)).exp();
        }
        (1.0 - (2.0 * PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let k = k as f64;
            let term = (-2.0 * k * k * lambda * lambda).exp();
            s += sign * term;
            if term < 1e-18 {
                break;
            }
            sign = -sign;
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn stephens_scale(n_eff: f64) -> f64 {
    let r = n_eff.sqrt();
    r + 0.12 + 0.11 / r
}

/// Asymptotic p-value of a KS distance `d` at effective sample size `n_eff`.
pub fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    kolmogorov_survival(stephens_scale(n_eff) * d)
}

/// Critical KS distance at level `alpha`.
pub fn ks_critical_value(alpha: f64, n_eff: f64) -> f64 {
    // Q is decreasing; bisect on λ
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_survival(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / stephens_scale(n_eff)
}

/// Dvoretzky–Kiefer–Wolfowitz band half-width `√(ln(2/α) / 2n)`.
pub fn dkw_bound(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| x.is_nan()) {
        return domain("samples contain NaN");
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return domain(format!("significance level must lie in (0, 1), got {alpha}"));
    }
    Ok(())
}

/// Two-sample KS distance `sup |F_a - F_b|`, handling ties.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let d = ks_statistic(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n_eff = na * nb / (na + nb);
    let threshold = ks_critical_value(alpha, n_eff);
    Ok(TestReport {
        statistic: d,
        threshold,
        p_value: ks_p_value(d, n_eff),
        n_samples: a.len() + b.len(),
        verdict: if d > threshold {
            Verdict::Rejected
        } else {
            Verdict::Consistent
        },
        seed: None,
    })
}

/// One-sample KS distance between the empirical CDF of `xs` and `cdf`.
pub fn ks_distance_to<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let xs = sorted(xs)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(d)
}

pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let d = ks_distance_to(xs, cdf)?;
    let n = xs.len() as f64;
    let threshold = ks_critical_value(alpha, n);
    Ok(TestReport {
        statistic: d,
        threshold,
        p_value: ks_p_value(d, n),
        n_samples: xs.len(),
        verdict: if d > threshold {
            Verdict::Rejected
        } else {
            Verdict::Consistent
        },
        seed: None,
    })
}
