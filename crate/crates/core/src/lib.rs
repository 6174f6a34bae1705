//! Numerical laboratory for squared Bessel processes and the eigenvalues of
//! the 2×2 matrix process
//!
//! ```text
//!   ⎡ B₁(t)          √(c/2) ξ(t) ⎤
//!   ⎣ √(c/2) ξ(t)    B₂(t)       ⎦
//! ```
//!
//! where `ξ` is a Bessel process of dimension δ. The eigenvalue process is
//! Markov exactly when `c ∈ {0, 1}`; equivalently `Z = c·X + Y` with
//! independent squared Bessel processes `X`, `Y` is Markov exactly when
//! `c ∈ {0, 1}`. The crate provides the densities, exact samplers, the joint
//! density integrals of `Z`, their asymptotic limits, and Monte-Carlo probes.

pub mod besq;
pub mod dyson;
pub mod error;
pub mod nonmarkov;
pub mod quadrature;
pub mod rng;
pub mod specfun;
pub mod stattest;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
