//! Round-by-round simulation of the three local-communication schemes.
//!
//! * **Consensus**: sensors average `x_i^2` with `W = I - L/d_max`, treat the
//!   running average as the variance of an assumed law and apply that law's
//!   optimal threshold.
//! * **Quantile**: sensors run a distributed subgradient iteration (Metropolis
//!   mixing) that drives every local threshold to the `k`-th largest
//!   magnitude.
//! * **Hybrid**: consensus until round `R`, then quantile iterations seeded
//!   with the consensus thresholds.
//!
//! Every path draws one realization `x` and keeps it fixed while the sensors
//! iterate; each round is scored as if the sensors transmitted with their
//! current thresholds.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::{Family, SymmetricDistribution};
use crate::error::{invalid, Error, Result};
use crate::graph::{switching_time, MetropolisWeights, SensorGraph};
use crate::threshold::{ThresholdProblem, DEFAULT_TOLERANCE};

/// Variance floor applied before computing a consensus threshold.
pub const VARIANCE_FLOOR: f64 = 1e-300;
pub const DEFAULT_ALPHA: f64 = 1000.0;
pub const DEFAULT_TAU: f64 = 0.51;

/// Per-path simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    /// `y_i(t)` (consensus, units of X^2) or `w_i(t)` (quantile, units of X).
    pub learned: Vec<f64>,
    /// `w_i(t-1)`; only meaningful for quantile rounds.
    pub lagged: Vec<f64>,
    pub round: u64,
    /// Set once any variance estimate hit [`VARIANCE_FLOOR`].
    pub variance_clamped: bool,
}

impl NetworkState {
    /// `y_i(0) = x_i^2`.
    pub fn for_consensus(x: Vec<f64>) -> Self {
        let learned: Vec<f64> = x.iter().map(|v| v * v).collect();
        Self::with_learned(x, learned)
    }

    /// `w_i(0) = |x_i|`.
    pub fn for_quantile(x: Vec<f64>) -> Self {
        let learned: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        Self::with_learned(x, learned)
    }

    fn with_learned(x: Vec<f64>, learned: Vec<f64>) -> Self {
        let z = x.iter().map(|v| v.abs()).collect();
        Self {
            x,
            z,
            lagged: learned.clone(),
            learned,
            round: 0,
            variance_clamped: false,
        }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Magnitudes in descending order, `z_(1) >= ... >= z_(n)`.
    pub fn sorted_magnitudes(&self) -> Vec<f64> {
        let mut z = self.z.clone();
        z.sort_unstable_by(|a, b| b.total_cmp(a));
        z
    }
}

/// Outcome of one round's (hypothetical) transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub round: u64,
    pub cost: f64,
    pub transmitters: usize,
    pub collided: bool,
}

/// Transmit iff `|x_i| >= T_i`; score the slot against a capacity-`k` channel.
pub fn decide_and_score(x: &[f64], thresholds: &[f64], k: usize) -> TraceRecord {
    assert_eq!(x.len(), thresholds.len(), "one threshold per sensor");
    let mut transmitters = 0;
    let mut total = 0.0;
    let mut missed = 0.0;
    for (&xi, &ti) in x.iter().zip(thresholds) {
        let energy = xi * xi;
        total += energy;
        if xi.abs() >= ti {
            transmitters += 1;
        } else {
            missed += energy;
        }
    }
    let n = x.len() as f64;
    let collided = transmitters > k;
    TraceRecord {
        round: 0,
        cost: if collided { total / n } else { missed / n },
        transmitters,
        collided,
    }
}

/// The interval `[(1/n) sum_{i>k} z_(i)^2, (1/n) sum_{i>=k} z_(i)^2]` that the
/// quantile scheme's cost settles into once every threshold separates the
/// `k`-th largest magnitude from its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBand {
    pub lower: f64,
    pub upper: f64,
}

impl SandwichBand {
    pub fn from_magnitudes(z: &[f64], k: usize) -> Self {
        let mut sorted = z.to_vec();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let n = sorted.len() as f64;
        let k = k.clamp(1, sorted.len());
        let lower: f64 = sorted[k..].iter().map(|v| v * v).sum();
        let upper = lower + sorted[k - 1] * sorted[k - 1];
        Self {
            lower: lower / n,
            upper: upper / n,
        }
    }

    /// Membership up to a relative `1e-12` rounding allowance.
    pub fn contains(&self, cost: f64) -> bool {
        let slack = 1e-12 * self.upper.max(f64::MIN_POSITIVE);
        cost >= self.lower - slack && cost <= self.upper + slack
    }
}

pub fn consensus_round(state: &mut NetworkState, graph: &SensorGraph) {
    let mut next = vec![0.0; state.n()];
    graph.consensus_step(&state.learned, &mut next);
    state.lagged = std::mem::replace(&mut state.learned, next);
    state.round += 1;
}

/// Per-sensor thresholds from variance estimates, by scale equivariance of
/// the optimal threshold: `T_i = scale(y_i) * T_unit`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdDesigner {
    family: Family,
    unit_threshold: f64,
}

impl ThresholdDesigner {
    /// Solves the scale-1 problem once for `(n, k, family)`.
    pub fn new(n: usize, k: usize, family: Family) -> Result<Self> {
        let unit = SymmetricDistribution::new(family, 1.0)?;
        let sol = ThresholdProblem::new(n, k, unit)?.optimal_threshold(DEFAULT_TOLERANCE)?;
        Ok(Self {
            family,
            unit_threshold: sol.t_star,
        })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn unit_threshold(&self) -> f64 {
        self.unit_threshold
    }

    pub fn threshold(&self, variance: f64) -> f64 {
        self.family.scale_for_second_moment(variance.max(VARIANCE_FLOOR)) * self.unit_threshold
    }
}

/// Thresholds `T_i*(t)` for the current consensus estimates.
pub fn consensus_threshold_update(state: &mut NetworkState, designer: &ThresholdDesigner) -> Vec<f64> {
    if state.learned.iter().any(|&y| !(y >= VARIANCE_FLOOR)) {
        state.variance_clamped = true;
    }
    state.learned.iter().map(|&y| designer.threshold(y)).collect()
}

/// Step-size and quantile-level settings of the subgradient iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileParams {
    pub p: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl QuantileParams {
    /// `p` at the midpoint `(n - k + 1/2) / n` of its admissible interval.
    pub fn midpoint_level(n: usize, k: usize) -> f64 {
        (n as f64 - k as f64 + 0.5) / n as f64
    }

    pub fn new(n: usize, k: usize, p: f64, alpha: f64, tau: f64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(invalid(format!("need 1 <= k <= n (n = {n}, k = {k})")));
        }
        let (nf, kf) = (n as f64, k as f64);
        let (lo, hi) = ((nf - kf) / nf, (nf - kf + 1.0) / nf);
        if !(p > lo && p < hi) {
            return Err(invalid(format!("quantile level p = {p} outside ({lo}, {hi})")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("step constant alpha must be positive, got {alpha}")));
        }
        if !(tau > 0.5 && tau <= 1.0) {
            return Err(invalid(format!("step exponent tau must lie in (0.5, 1], got {tau}")));
        }
        Ok(Self { p, alpha, tau })
    }

    pub fn with_defaults(n: usize, k: usize) -> Result<Self> {
        Self::new(n, k, Self::midpoint_level(n, k), DEFAULT_ALPHA, DEFAULT_TAU)
    }

    pub fn step(&self, t: u64) -> f64 {
        self.alpha / (t as f64).powf(self.tau)
    }
}

/// Which estimate the subgradient of round `t` is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubgradientTiming {
    /// `psi_i = w_i(t) - eta s_i(z_i, w_i(t-1))`: current estimate in the
    /// linear term, previous one in the subgradient.
    #[default]
    Lagged,
    /// `psi_i = w_i(t) - eta s_i(z_i, w_i(t))`.
    Synchronous,
}

fn subgradient(z: f64, w: f64, p: f64, n: f64) -> f64 {
    if z > w {
        -p / n
    } else if z < w {
        (1.0 - p) / n
    } else {
        0.0
    }
}

pub fn quantile_round(
    state: &mut NetworkState,
    weights: &MetropolisWeights,
    params: &QuantileParams,
    timing: SubgradientTiming,
) {
    let t = state.round + 1;
    let eta = params.step(t);
    let n = state.n() as f64;
    let reference = match timing {
        SubgradientTiming::Lagged => &state.lagged,
        SubgradientTiming::Synchronous => &state.learned,
    };
    let psi: Vec<f64> = state
        .learned
        .iter()
        .zip(&state.z)
        .zip(reference)
        .map(|((&w, &z), &w_ref)| w - eta * subgradient(z, w_ref, params.p, n))
        .collect();
    let mut next = vec![0.0; psi.len()];
    weights.apply(&psi, &mut next);
    state.lagged = std::mem::replace(&mut state.learned, next);
    state.round = t;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Consensus,
    Quantile,
    Hybrid,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Consensus => "consensus",
            Scheme::Quantile => "quantile",
            Scheme::Hybrid => "hybrid",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consensus" => Ok(Scheme::Consensus),
            "quantile" => Ok(Scheme::Quantile),
            "hybrid" => Ok(Scheme::Hybrid),
            other => Err(invalid(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Everything a scheme needs besides the problem and the graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// Law assumed by the consensus threshold design (may differ from the data).
    pub assumed_family: Family,
    pub quantile: QuantileParams,
    pub timing: SubgradientTiming,
    /// Hybrid switching tolerance on `||W^t - 11^T/n||_2`.
    pub delta: f64,
    /// Explicit hybrid switching round; overrides `delta`.
    pub switch_round: Option<u64>,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, n: usize, k: usize) -> Result<Self> {
        Ok(Self {
            scheme,
            assumed_family: Family::Gaussian,
            quantile: QuantileParams::with_defaults(n, k)?,
            timing: SubgradientTiming::default(),
            delta: 1e-4,
            switch_round: None,
        })
    }

    /// The hybrid switching round `R` on `graph`.
    pub fn resolve_switch_round(&self, graph: &SensorGraph) -> Result<u64> {
        match self.switch_round {
            Some(0) => Err(Error::Config("switching round must be at least 1".into())),
            Some(r) => Ok(r),
            None => switching_time(graph.slem()?, self.delta).map_err(|e| match e {
                Error::NoConvergence(msg) => Error::Config(format!("cannot derive hybrid switching round: {msg}")),
                other => other,
            }),
        }
    }
}

/// One simulated sample path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrace {
    /// Records for rounds `0..=rounds`.
    pub records: Vec<TraceRecord>,
    pub band: SandwichBand,
    /// `z_(k)`, the target of the quantile iteration.
    pub kth_magnitude: f64,
    pub switch_round: Option<u64>,
    pub variance_clamped: bool,
    /// Final per-sensor thresholds.
    pub final_thresholds: Vec<f64>,
}

impl PathTrace {
    /// Earliest round from which every later record lies in the band.
    pub fn settling_round(&self) -> Option<u64> {
        let mut settled = None;
        for r in self.records.iter().rev() {
            if self.band.contains(r.cost) {
                settled = Some(r.round);
            } else {
                break;
            }
        }
        settled
    }
}

/// Everything fixed across the sample paths of one run.
pub struct Simulation<'a> {
    config: SchemeConfig,
    problem: ThresholdProblem,
    graph: &'a SensorGraph,
    designer: Option<ThresholdDesigner>,
    weights: Option<MetropolisWeights>,
    switch_round: Option<u64>,
}

impl<'a> Simulation<'a> {
    pub fn new(config: SchemeConfig, problem: ThresholdProblem, graph: &'a SensorGraph) -> Result<Self> {
        if graph.n() != problem.n() {
            return Err(Error::Config(format!(
                "graph has {} nodes but the problem has {} sensors",
                graph.n(),
                problem.n()
            )));
        }
        let needs_consensus = matches!(config.scheme, Scheme::Consensus | Scheme::Hybrid);
        let needs_quantile = matches!(config.scheme, Scheme::Quantile | Scheme::Hybrid);
        let designer = needs_consensus
            .then(|| ThresholdDesigner::new(problem.n(), problem.k(), config.assumed_family))
            .transpose()?;
        let weights = needs_quantile.then(|| graph.metropolis_weights());
        let switch_round = (config.scheme == Scheme::Hybrid)
            .then(|| config.resolve_switch_round(graph))
            .transpose()?;
        Ok(Self {
            config,
            problem,
            graph,
            designer,
            weights,
            switch_round,
        })
    }

    pub fn switch_round(&self) -> Option<u64> {
        self.switch_round
    }

    pub fn problem(&self) -> &ThresholdProblem {
        &self.problem
    }

    /// Draws `x` from the problem's law and runs `rounds` rounds.
    pub fn run_path<R: Rng + ?Sized>(&self, rounds: u64, rng: &mut R) -> PathTrace {
        let x = self.problem.dist().sample_n(rng, self.problem.n());
        self.run_on(x, rounds)
    }

    /// Runs `rounds` rounds on a fixed realization.
    pub fn run_on(&self, x: Vec<f64>, rounds: u64) -> PathTrace {
        let k = self.problem.k();
        let z: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let band = SandwichBand::from_magnitudes(&z, k);
        let mut sorted = z.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let kth_magnitude = sorted[k - 1];
        let mut records = Vec::with_capacity(rounds as usize + 1);

        let score = |x: &[f64], thresholds: &[f64], t: u64| TraceRecord {
            round: t,
            ..decide_and_score(x, thresholds, k)
        };

        let (state, thresholds) = match self.config.scheme {
            Scheme::Consensus => {
                let designer = self.designer.as_ref().expect("consensus designer");
                let mut state = NetworkState::for_consensus(x);
                let mut thresholds = consensus_threshold_update(&mut state, designer);
                records.push(score(&state.x, &thresholds, 0));
                for t in 1..=rounds {
                    consensus_round(&mut state, self.graph);
                    thresholds = consensus_threshold_update(&mut state, designer);
                    records.push(score(&state.x, &thresholds, t));
                }
                (state, thresholds)
            }
            Scheme::Quantile => {
                let weights = self.weights.as_ref().expect("metropolis weights");
                let mut state = NetworkState::for_quantile(x);
                records.push(score(&state.x, &state.learned, 0));
                for t in 1..=rounds {
                    quantile_round(&mut state, weights, &self.config.quantile, self.config.timing);
                    records.push(score(&state.x, &state.learned, t));
                }
                let thresholds = state.learned.clone();
                (state, thresholds)
            }
            Scheme::Hybrid => {
                let designer = self.designer.as_ref().expect("consensus designer");
                let weights = self.weights.as_ref().expect("metropolis weights");
                let switch = self.switch_round.expect("hybrid switching round");
                let mut state = NetworkState::for_consensus(x);
                let mut thresholds = consensus_threshold_update(&mut state, designer);
                records.push(score(&state.x, &thresholds, 0));
                for t in 1..=rounds.min(switch) {
                    consensus_round(&mut state, self.graph);
                    thresholds = consensus_threshold_update(&mut state, designer);
                    records.push(score(&state.x, &thresholds, t));
                }
                if rounds > switch {
                    // w_i(R) = T_i*(R)
                    state.learned = thresholds.clone();
                    state.lagged = thresholds;
                    for t in (switch + 1)..=rounds {
                        quantile_round(&mut state, weights, &self.config.quantile, self.config.timing);
                        records.push(score(&state.x, &state.learned, t));
                    }
                    thresholds = state.learned.clone();
                }
                (state, thresholds)
            }
        };

        PathTrace {
            records,
            band,
            kth_magnitude,
            switch_round: self.switch_round,
            variance_clamped: state.variance_clamped,
            final_thresholds: thresholds,
        }
    }

    /// Runs `paths` independent paths. Path `i` draws from stream `i` of the
    /// master seed, so results do not depend on thread scheduling.
    pub fn run_paths(&self, rounds: u64, paths: usize, master_seed: u64) -> Vec<PathTrace> {
        (0..paths)
            .into_par_iter()
            .map(|i| self.run_path(rounds, &mut path_rng(master_seed, i as u64)))
            .collect()
    }
}

/// Random stream of sample path `index` under `master_seed`.
pub fn path_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Convenience wrapper: one path of `scheme` with default parameters.
pub fn run_scheme<R: Rng + ?Sized>(
    config: &SchemeConfig,
    problem: &ThresholdProblem,
    graph: &SensorGraph,
    rounds: u64,
    rng: &mut R,
) -> Result<PathTrace> {
    Ok(Simulation::new(*config, *problem, graph)?.run_path(rounds, rng))
}
