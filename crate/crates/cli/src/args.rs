//! Command-line schema. Every long flag is also a config-file key.

use std::fmt;
use std::str::FromStr;

use besqlab::nonmarkov::Support;
use besqlab::stattest::{CellSpec, RunningMax, SamplingBudget};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Parser)]
#[command(name = "besqlab", version, about = "Squared Bessel densities, eigenvalue processes and Markov probes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BESQ transition density p_t(x, y).
    Density(DensityArgs),
    /// Exact sample paths of a BESQ, Z = cX + Y or cM - X process.
    Simulate(SimulateArgs),
    /// Eigenvalue paths of the 2x2 matrix process.
    Eigen(EigenArgs),
    /// Conditional density of Z(2) at z3 given Z(eps) = z1 and Z(1) = z2.
    Ratio(RatioArgs),
    /// Laplace integral against its endpoint asymptotics.
    Laplace(LaplaceArgs),
    /// Constant-free double ratio of the large-z2 limit.
    Lemma3(Lemma3Args),
    /// Monte-Carlo Markov test for Z = cX + Y.
    MarkovTest(MarkovArgs),
    /// Monte-Carlo Markov test for cM - X.
    CmxTest(MarkovArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Density(_) => "density",
            Command::Simulate(_) => "simulate",
            Command::Eigen(_) => "eigen",
            Command::Ratio(_) => "ratio",
            Command::Laplace(_) => "laplace",
            Command::Lemma3(_) => "lemma3",
            Command::MarkovTest(_) => "markov-test",
            Command::CmxTest(_) => "cmx-test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Options shared by every command.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// JSON or TOML file with the same keys as the long flags; flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<String>,
    /// Seed; required by stochastic commands.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Data file; a `<output>.meta.json` sidecar is written next to it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

/// Comma-separated numbers on the command line; a number, array or string in a config file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(NumList)
    }
}

impl fmt::Display for NumList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

impl Serialize for NumList {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for NumList {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(f64),
            Many(Vec<f64>),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::One(v) => Ok(NumList(vec![v])),
            Raw::Many(v) => Ok(NumList(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct DensityArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Start point (default 0).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// End point(s), comma separated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<NumList>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessKind {
    #[default]
    Besq,
    BesqSum,
    Cmx,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// besq (default), besq-sum or cmx.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub process: Option<ProcessKind>,
    /// Dimension for `besq`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Start point for `besq` (default 0).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    /// Horizon (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    /// Observation steps (default 100).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// Number of paths (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    /// Internal steps per output step for `cmx` (default 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<usize>,
    /// Running maximum for `cmx`: bridge (exact, default) or grid.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub running_max: Option<RunningMaxArg>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunningMaxArg {
    Bridge,
    Grid,
}

impl From<RunningMaxArg> for RunningMax {
    fn from(v: RunningMaxArg) -> Self {
        match v {
            RunningMaxArg::Bridge => RunningMax::Bridge,
            RunningMaxArg::Grid => RunningMax::Grid,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct EigenArgs {
    /// Eigenvalue sampler: matrix (default) or dyson-sde.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampler: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportArg {
    Exact,
    Truncated,
}

impl From<SupportArg> for Support {
    fn from(v: SupportArg) -> Self {
        match v {
            SupportArg::Exact => Support::Exact,
            SupportArg::Truncated => Support::Truncated,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct RatioArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    /// Conditioning time(s) in (0, 1); ignored with --limit-eps.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<NumList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z1: Option<NumList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2: Option<NumList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z3: Option<NumList>,
    /// Use the eps -> 0 limit objects.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit_eps: Option<bool>,
    /// Integration range for x: exact (default) or truncated.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportArg>,
    /// Relative quadrature tolerance (default 1e-9).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct LaplaceArgs {
    /// phi(x) = a + b x + p2 x^2 + p3 x^3 on (0, 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p3: Option<f64>,
    /// Weight exponent: the integrand carries x^(nu - 1).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// Default 20,50,100,200.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<NumList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct Lemma3Args {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    /// Default 10,20,40.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z2: Option<NumList>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<SupportArg>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[command(allow_negative_numbers = true)]
#[serde(rename_all = "kebab-case")]
pub struct MarkovArgs {
    /// Process model from the registry (besq-sum or cmx).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Grid of c values; each reuses the witness windows.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<NumList>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_per_arm: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Explicit grid cells (config file only).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<CellSpec>>,
    /// Sampling limits (config file only).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<SamplingBudget>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}
