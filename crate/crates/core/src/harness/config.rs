//! Experiment configuration: a flat `key = value` file (TOML syntax) merged
//! with command-line overrides, resolved into a typed [`ExperimentConfig`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::distributions::{Family, SymmetricDistribution};
use crate::error::{Error, Result};
use crate::graph::SensorGraph;
use crate::protocols::{QuantileParams, Scheme, SchemeConfig, SubgradientTiming};
use crate::threshold::{ThresholdProblem, DEFAULT_TOLERANCE};

/// Flat string settings. Keys are normalized to `snake_case`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config file: {}", e.message())))?;
        let mut settings = Self::new();
        for (key, value) in table {
            let text = match value {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => Ok(s.clone()),
                        toml::Value::Integer(i) => Ok(i.to_string()),
                        toml::Value::Float(f) => Ok(f.to_string()),
                        other => Err(Error::Config(format!("unsupported list item `{other}` for `{key}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                other => {
                    return Err(Error::Config(format!(
                        "config must be flat; `{key}` holds `{}`",
                        other.type_str()
                    )))
                }
            };
            settings.set(&key, text);
        }
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(normalize_key(key), value.into());
    }

    /// Applies `overrides` on top of `self` (overrides win).
    pub fn merged(mut self, overrides: &Settings) -> Self {
        for (k, v) in &overrides.values {
            self.values.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize_key(key)).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|raw| {
                raw.trim()
                    .parse::<T>()
                    .map_err(|e| Error::Config(format!("`{key}` = `{raw}`: {e}")))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Config(format!("`{key}` entry `{s}`: {e}")))
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    CostCurve,
    CapacitySweep,
    ConsensusPaths,
    QuantilePaths,
    HybridPaths,
    HybridVsQuantile,
    SwitchingTable,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::CostCurve => "cost-curve",
            ExperimentKind::CapacitySweep => "capacity-sweep",
            ExperimentKind::ConsensusPaths => "consensus-paths",
            ExperimentKind::QuantilePaths => "quantile-paths",
            ExperimentKind::HybridPaths => "hybrid-paths",
            ExperimentKind::HybridVsQuantile => "hybrid-vs-quantile",
            ExperimentKind::SwitchingTable => "switching-table",
        }
    }

    pub fn for_scheme(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Consensus => ExperimentKind::ConsensusPaths,
            Scheme::Quantile => ExperimentKind::QuantilePaths,
            Scheme::Hybrid => ExperimentKind::HybridPaths,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cost-curve" => ExperimentKind::CostCurve,
            "capacity-sweep" => ExperimentKind::CapacitySweep,
            "consensus-paths" => ExperimentKind::ConsensusPaths,
            "quantile-paths" => ExperimentKind::QuantilePaths,
            "hybrid-paths" => ExperimentKind::HybridPaths,
            "hybrid-vs-quantile" | "mismatch" => ExperimentKind::HybridVsQuantile,
            "switching-table" => ExperimentKind::SwitchingTable,
            other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
        })
    }
}

/// Where the communication graph comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    EdgeList(PathBuf),
    ErdosRenyi { p_edge: f64, seed: u64 },
}

impl GraphSource {
    /// `gen:<p_edge>` or a path to an edge-list file.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        match spec.strip_prefix("gen:") {
            Some(p) => Ok(GraphSource::ErdosRenyi {
                p_edge: p.parse().map_err(|e| Error::Config(format!("graph `{spec}`: {e}")))?,
                seed,
            }),
            None => Ok(GraphSource::EdgeList(PathBuf::from(spec))),
        }
    }

    pub fn build(&self, n: usize) -> Result<SensorGraph> {
        match self {
            GraphSource::ErdosRenyi { p_edge, seed } => SensorGraph::erdos_renyi(n, *p_edge, *seed),
            GraphSource::EdgeList(path) => SensorGraph::read_edge_list(path),
        }
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::EdgeList(p) => write!(f, "{}", p.display()),
            GraphSource::ErdosRenyi { p_edge, seed } => write!(f, "gen:{p_edge}@{seed}"),
        }
    }
}

/// Fully resolved experiment parameters. Not every field is used by every
/// experiment; all of them enter the config hash.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub k: usize,
    pub family: Family,
    pub scale: f64,
    pub tol: f64,
    pub scales: Vec<f64>,
    pub points: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub graph: GraphSource,
    pub rounds: u64,
    pub paths: usize,
    pub master_seed: u64,
    pub assumed_family: Family,
    pub alpha: f64,
    pub tau: f64,
    pub p: Option<f64>,
    pub timing: SubgradientTiming,
    pub delta: f64,
    pub switch_round: Option<u64>,
    pub deltas: Vec<f64>,
    pub d_max: f64,
    pub lambda2: f64,
    pub output: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

pub const TABLE_DELTAS: [f64; 6] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

impl ExperimentConfig {
    pub fn from_settings(kind: ExperimentKind, s: &Settings) -> Result<Self> {
        use ExperimentKind::*;
        let (n_default, k_default, family_default, paths_default, rounds_default) = match kind {
            CapacitySweep => (100, 10, Family::Gaussian, 0, 0),
            ConsensusPaths => (1000, 100, Family::Gaussian, 100, 100),
            QuantilePaths => (1000, 100, Family::Gaussian, 500, 10_000),
            HybridPaths => (1000, 100, Family::Gaussian, 100, 10_000),
            HybridVsQuantile => (1000, 100, Family::Laplace, 100, 10_000),
            CostCurve | SwitchingTable => (1000, 100, Family::Gaussian, 0, 0),
        };
        let n = s.or("n", n_default)?;
        let master_seed = s.or("seed", 2020u64)?;
        let graph_seed = s.or("graph_seed", master_seed)?;
        let timing = match s.get("timing").unwrap_or("lagged") {
            "lagged" => SubgradientTiming::Lagged,
            "synchronous" => SubgradientTiming::Synchronous,
            other => return Err(Error::Config(format!("unknown subgradient timing `{other}`"))),
        };
        let config = Self {
            kind,
            n,
            k: s.or("k", k_default.min(n))?,
            family: s.or("family", family_default)?,
            scale: s.or("scale", 1.0)?,
            tol: s.or("tol", DEFAULT_TOLERANCE)?,
            scales: s.list("scales", &[0.5, 1.0, 1.5, 2.0])?,
            points: s.or("points", 400)?,
            k_min: s.or("k_min", 1)?,
            k_max: s.or("k_max", n)?,
            graph: GraphSource::parse(s.get("graph").unwrap_or("gen:0.05"), graph_seed)?,
            rounds: s.or("rounds", rounds_default)?,
            paths: s.or("paths", paths_default)?,
            master_seed,
            assumed_family: s.or("assumed_family", Family::Gaussian)?,
            alpha: s.or("alpha", crate::protocols::DEFAULT_ALPHA)?,
            tau: s.or("tau", crate::protocols::DEFAULT_TAU)?,
            p: s.parsed("p")?,
            timing,
            delta: s.or("delta", 1e-4)?,
            switch_round: s.parsed("switch_round")?,
            deltas: s.list("deltas", &TABLE_DELTAS)?,
            d_max: s.or("d_max", 81.0)?,
            lambda2: s.or("lambda2", 27.35)?,
            output: s.get("output").map(PathBuf::from),
            svg: s.get("svg").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn defaults(kind: ExperimentKind) -> Self {
        Self::from_settings(kind, &Settings::new()).expect("defaults are valid")
    }

    fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        match self.kind {
            CostCurve | CapacitySweep => {
                self.distribution()?;
                if self.kind == CapacitySweep && !(1 <= self.k_min && self.k_min <= self.k_max && self.k_max <= self.n)
                {
                    return Err(Error::Config(format!(
                        "capacity range must satisfy 1 <= k_min <= k_max <= n (got {}..={}, n = {})",
                        self.k_min, self.k_max, self.n
                    )));
                }
                if self.kind == CostCurve {
                    if self.scales.is_empty() || self.points < 2 {
                        return Err(Error::Config("cost curve needs scales and at least 2 points".into()));
                    }
                    self.problem()?;
                }
            }
            ConsensusPaths | QuantilePaths | HybridPaths | HybridVsQuantile => {
                self.problem()?;
                self.quantile_params()?;
                if self.paths == 0 {
                    return Err(Error::Config("need at least one sample path".into()));
                }
            }
            SwitchingTable => {
                if self.deltas.is_empty() {
                    return Err(Error::Config("switching table needs at least one delta".into()));
                }
            }
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<SymmetricDistribution> {
        SymmetricDistribution::new(self.family, self.scale)
    }

    pub fn problem(&self) -> Result<ThresholdProblem> {
        ThresholdProblem::new(self.n, self.k, self.distribution()?)
    }

    pub fn quantile_params(&self) -> Result<QuantileParams> {
        let p = self.p.unwrap_or_else(|| QuantileParams::midpoint_level(self.n, self.k));
        QuantileParams::new(self.n, self.k, p, self.alpha, self.tau)
    }

    pub fn scheme_config(&self, scheme: Scheme) -> Result<SchemeConfig> {
        Ok(SchemeConfig {
            scheme,
            assumed_family: self.assumed_family,
            quantile: self.quantile_params()?,
            timing: self.timing,
            delta: self.delta,
            switch_round: self.switch_round,
        })
    }

    /// Canonical `key=value` listing of every resolved field.
    pub fn canonical(&self) -> String {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        [
            format!("experiment={}", self.kind),
            format!("n={}", self.n),
            format!("k={}", self.k),
            format!("family={}", self.family),
            format!("scale={}", self.scale),
            format!("tol={}", self.tol),
            format!("scales={}", list(&self.scales)),
            format!("points={}", self.points),
            format!("k_min={}", self.k_min),
            format!("k_max={}", self.k_max),
            format!("graph={}", self.graph),
            format!("rounds={}", self.rounds),
            format!("paths={}", self.paths),
            format!("seed={}", self.master_seed),
            format!("assumed_family={}", self.assumed_family),
            format!("alpha={}", self.alpha),
            format!("tau={}", self.tau),
            format!("p={}", opt(self.p.map(|v| v.to_string()))),
            format!("timing={:?}", self.timing),
            format!("delta={}", self.delta),
            format!("switch_round={}", opt(self.switch_round.map(|v| v.to_string()))),
            format!("deltas={}", list(&self.deltas)),
            format!("d_max={}", self.d_max),
            format!("lambda2={}", self.lambda2),
        ]
        .join("\n")
    }

    /// First 16 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }
}

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}
