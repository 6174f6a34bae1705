//! The 2×2 matrix process with Brownian diagonal and Bessel off-diagonal,
//! its eigenvalues, and the two interchangeable ways of sampling them.
//!
//! With diagonal `B₁, B₂` and off-diagonal `√(c/2)·ξ` the eigenvalues are
//!
//! ```text
//! λ₁,₂ = ½ [ B₁ + B₂ ± √((B₁ - B₂)² + 2c ξ²) ]
//! ```
//!
//! so `λ₁ + λ₂ = B₁ + B₂` and `(λ₁ - λ₂)² = (B₁ - B₂)² + 2c ξ²`. For `c = 1`
//! the gap `(λ₁ - λ₂)/√2` is a Bessel process of dimension `1 + δ`, which is
//! what [`integrate_dyson_sde`] samples exactly.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::io::{self, Write};

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::besq::{bessel_path, check_times, sample_path, BesqParams, PathSample};
use crate::error::{domain, Error, Result};
use crate::rng::{stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixProcessConfig {
    pub c: f64,
    pub delta: f64,
    pub times: Vec<f64>,
}

impl MatrixProcessConfig {
    pub fn new(c: f64, delta: f64, times: Vec<f64>) -> Result<Self> {
        let cfg = Self { c, delta, times };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return domain(format!("c must be >= 0, got {}", self.c));
        }
        BesqParams::new(self.delta)?;
        check_times(&self.times)
    }
}

/// Ordered eigenvalues, `lambda1 >= lambda2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl EigenPair {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 >= lambda2) {
            return domain(format!("eigenvalues must be ordered, got ({lambda1}, {lambda2})"));
        }
        Ok(Self { lambda1, lambda2 })
    }
}

/// Current values of `B₁`, `B₂` and `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriverState {
    pub b1: f64,
    pub b2: f64,
    pub xi: f64,
}

pub fn eigenvalues(s: DriverState, c: f64) -> EigenPair {
    if c * s.xi == 0.0 {
        // diagonal matrix: return the entries themselves, not a rounded copy
        return EigenPair {
            lambda1: s.b1.max(s.b2),
            lambda2: s.b1.min(s.b2),
        };
    }
    let d = s.b1 - s.b2;
    let disc = (d * d + 2.0 * c * s.xi * s.xi).sqrt();
    let sum = s.b1 + s.b2;
    EigenPair {
        lambda1: 0.5 * (sum + disc),
        lambda2: 0.5 * (sum - disc),
    }
}

/// `(λ₁ + λ₂, λ₁ - λ₂)`.
pub fn decompose(e: EigenPair) -> (f64, f64) {
    (e.lambda1 + e.lambda2, e.lambda1 - e.lambda2)
}

/// Eigenvalues of the Hermitian matrix whose off-diagonal entry is
/// `√(c/2)·v`, with `v` the coordinates of a real (1), complex (2) or
/// quaternion (4) number.
///
/// Conjugating by `diag(1, v/|v|)` makes the off-diagonal entry the real
/// number `√(c/2)·|v|`, so the spectrum is that of the real case with `ξ = |v|`.
pub fn eigenvalues_from_vector_offdiag(b1: f64, b2: f64, v: &[f64], c: f64) -> Result<EigenPair> {
    if !matches!(v.len(), 1 | 2 | 4) {
        return Err(Error::Dimension(v.len()));
    }
    let modulus = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(eigenvalues(
        DriverState {
            b1,
            b2,
            xi: modulus,
        },
        c,
    ))
}

/// Sampled paths of `B₁`, `B₂` and `ξ` on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Drivers {
    pub b1: PathSample,
    pub b2: PathSample,
    pub xi: PathSample,
}

impl Drivers {
    pub fn state(&self, i: usize) -> DriverState {
        DriverState {
            b1: self.b1.values[i],
            b2: self.b2.values[i],
            xi: self.xi.values[i],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPaths {
    pub lambda1: PathSample,
    pub lambda2: PathSample,
}

impl EigenPaths {
    fn from_pairs(times: &[f64], pairs: impl Iterator<Item = EigenPair>) -> Self {
        let (l1, l2): (Vec<f64>, Vec<f64>) = pairs.map(|e| (e.lambda1, e.lambda2)).unzip();
        Self {
            lambda1: PathSample {
                times: times.to_vec(),
                values: l1,
            },
            lambda2: PathSample {
                times: times.to_vec(),
                values: l2,
            },
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.lambda1.times
    }

    pub fn at(&self, i: usize) -> EigenPair {
        EigenPair {
            lambda1: self.lambda1.values[i],
            lambda2: self.lambda2.values[i],
        }
    }

    /// CSV with header `t,lambda1,lambda2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,lambda1,lambda2")?;
        for i in 0..self.lambda1.len() {
            writeln!(
                out,
                "{},{},{}",
                self.lambda1.times[i], self.lambda1.values[i], self.lambda2.values[i]
            )?;
        }
        Ok(())
    }
}

/// Standard Brownian motion from 0 observed at `times`.
pub fn brownian_path<R: Rng + ?Sized>(rng: &mut R, times: &[f64]) -> Result<PathSample> {
    check_times(times)?;
    let mut now = 0.0;
    let mut b = 0.0;
    let values = times
        .iter()
        .map(|&t| {
            if t > now {
                let z: f64 = rng.sample(StandardNormal);
                b += (t - now).sqrt() * z;
                now = t;
            }
            b
        })
        .collect();
    Ok(PathSample {
        times: times.to_vec(),
        values,
    })
}

/// `B₁`, `B₂` and `ξ` (Bessel of dimension δ from 0), each from its own
/// generator stream seeded off `rng`.
pub fn simulate_drivers(rng: &mut SimRng, cfg: &MatrixProcessConfig) -> Result<Drivers> {
    cfg.validate()?;
    let seed = rng.next_u64();
    let p = BesqParams::new(cfg.delta)?;
    Ok(Drivers {
        b1: brownian_path(&mut stream(seed, 1), &cfg.times)?,
        b2: brownian_path(&mut stream(seed, 2), &cfg.times)?,
        xi: bessel_path(&mut stream(seed, 3), &p, 0.0, &cfg.times)?,
    })
}

/// Eigenvalue paths of the matrix model, one closed-form evaluation per time.
pub fn eigen_paths(rng: &mut SimRng, cfg: &MatrixProcessConfig) -> Result<EigenPaths> {
    let drivers = simulate_drivers(rng, cfg)?;
    Ok(eigen_paths_from(&drivers, cfg.c))
}

pub fn eigen_paths_from(drivers: &Drivers, c: f64) -> EigenPaths {
    EigenPaths::from_pairs(
        &drivers.b1.times,
        (0..drivers.b1.len()).map(|i| eigenvalues(drivers.state(i), c)),
    )
}

/// Solves `dλ₁ = dβ₁ + δ/(2(λ₁-λ₂)) dt`, `dλ₂ = dβ₂ + δ/(2(λ₂-λ₁)) dt`.
///
/// Works in rotated coordinates: `λ₁ + λ₂` is `√2` times a Brownian motion
/// and `(λ₁ - λ₂)/√2` is a Bessel process of dimension `1 + δ`, both sampled
/// exactly, so the collision singularity of the drift never enters. Starting
/// on the diagonal uses the Bessel entrance law from 0.
pub fn integrate_dyson_sde(
    rng: &mut SimRng,
    delta: f64,
    times: &[f64],
    initial: EigenPair,
) -> Result<EigenPaths> {
    if !(initial.lambda1 >= initial.lambda2) {
        return domain("initial eigenvalues must satisfy lambda1 >= lambda2");
    }
    check_times(times)?;
    let gap_law = BesqParams::new(1.0 + delta)?;
    let seed = rng.next_u64();
    let (sum0, gap0) = decompose(initial);
    let w = brownian_path(&mut stream(seed, 1), times)?;
    let r0 = 0.5 * gap0 * gap0;
    let r = sample_path(&mut stream(seed, 2), &gap_law, r0, times)?;
    Ok(EigenPaths::from_pairs(
        times,
        w.values.iter().zip(&r.values).map(|(&b, &rsq)| {
            let sum = sum0 + SQRT_2 * b;
            let gap = (2.0 * rsq).sqrt();
            EigenPair {
                lambda1: 0.5 * (sum + gap),
                lambda2: 0.5 * (sum - gap),
            }
        }),
    ))
}

/// A way of producing eigenvalue paths for a [`MatrixProcessConfig`].
pub trait EigenSampler: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn sample(&self, rng: &mut SimRng, cfg: &MatrixProcessConfig) -> Result<EigenPaths>;
}

/// Closed-form eigenvalues of simulated driver paths; any `c >= 0`.
#[derive(Debug, Default, Clone, Copy)]
pub struct MatrixModel;

impl EigenSampler for MatrixModel {
    fn name(&self) -> &'static str {
        "matrix"
    }

    fn description(&self) -> &'static str {
        "eigenvalues of the simulated 2x2 matrix process (any c >= 0)"
    }

    fn sample(&self, rng: &mut SimRng, cfg: &MatrixProcessConfig) -> Result<EigenPaths> {
        eigen_paths(rng, cfg)
    }
}

/// Exact solution of the two-particle Dyson SDE from the origin; only `c = 1`.
#[derive(Debug, Default, Clone, Copy)]
pub struct DysonSde;

impl EigenSampler for DysonSde {
    fn name(&self) -> &'static str {
        "dyson-sde"
    }

    fn description(&self) -> &'static str {
        "Dyson SDE with beta = delta started on the diagonal (c = 1 only)"
    }

    fn sample(&self, rng: &mut SimRng, cfg: &MatrixProcessConfig) -> Result<EigenPaths> {
        cfg.validate()?;
        if cfg.c != 1.0 {
            return domain(format!(
                "the Dyson SDE describes the eigenvalues only for c = 1, got c = {}",
                cfg.c
            ));
        }
        integrate_dyson_sde(
            rng,
            cfg.delta,
            &cfg.times,
            EigenPair {
                lambda1: 0.0,
                lambda2: 0.0,
            },
        )
    }
}

/// Name-indexed collection of [`EigenSampler`]s.
pub struct EigenSamplerRegistry {
    entries: BTreeMap<&'static str, Box<dyn EigenSampler>>,
}

impl EigenSamplerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// `matrix` and `dyson-sde`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(MatrixModel));
        r.register(Box::new(DysonSde));
        r
    }

    pub fn register(&mut self, sampler: Box<dyn EigenSampler>) {
        self.entries.insert(sampler.name(), sampler);
    }

    pub fn get(&self, name: &str) -> Option<&dyn EigenSampler> {
        self.entries.get(name).map(|b| b.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for EigenSamplerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
