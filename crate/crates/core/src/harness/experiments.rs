//! Experiment drivers. Each returns a [`Table`] whose first comment line
//! carries the experiment id, config hash and master seed.

use crate::distributions::SymmetricDistribution;
use crate::error::{Error, Result};
use crate::graph::{switching_time, SensorGraph};
use crate::harness::config::{config_hash, ExperimentConfig, ExperimentKind};
use crate::harness::plot::{LineChart, Series};
use crate::harness::table::Table;
use crate::lower_bound::{centralized_lower_bound, lower_bound_profile, monte_carlo_lower_bound};
use crate::protocols::{path_rng, PathTrace, Scheme, Simulation};
use crate::row;
use crate::stats::nearest_rank;
use crate::threshold::{ThresholdProblem, DEFAULT_S_BAR};

pub const PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: Table,
    pub chart: Option<LineChart>,
}

fn stamp(table: &mut Table, cfg: &ExperimentConfig) {
    table.comments.insert(
        0,
        format!(
            "experiment={} config_hash={} master_seed={} percentiles=nearest-rank",
            cfg.kind,
            cfg.hash(),
            cfg.master_seed
        ),
    );
}

fn stamp_plain(table: &mut Table, what: &str, canonical: &str) {
    table.comments.insert(
        0,
        format!(
            "experiment={what} config_hash={} master_seed=none",
            config_hash(canonical)
        ),
    );
}

/// One CSV row `n,k,family,scale,T_star,J_star,lo,hi`.
pub fn threshold_table(prob: &ThresholdProblem, tol: f64) -> Result<Table> {
    let sol = prob.optimal_threshold(tol)?;
    let (lo, hi) = sol.bracket.map_or((0.0, 0.0), |b| (b.lo, b.hi));
    let d = prob.dist();
    let mut t = Table::new(&["n", "k", "family", "scale", "T_star", "J_star", "lo", "hi"]);
    t.push(row![
        prob.n(),
        prob.k(),
        d.family().as_str(),
        d.scale(),
        sol.t_star,
        sol.j_star,
        lo,
        hi
    ]);
    stamp_plain(
        &mut t,
        "threshold",
        &format!(
            "n={} k={} family={} scale={} tol={tol}",
            prob.n(),
            prob.k(),
            d.family(),
            d.scale()
        ),
    );
    Ok(t)
}

/// One CSV row `n,k,J_L`.
pub fn lower_bound_table(n: usize, k: usize, dist: &SymmetricDistribution) -> Result<Table> {
    let value = crate::lower_bound::centralized_lower_bound_for(n, k, dist)?;
    let mut t = Table::new(&["n", "k", "J_L"]);
    t.push(row![n, k, value]);
    stamp_plain(
        &mut t,
        "lower-bound",
        &format!("n={n} k={k} family={} scale={}", dist.family(), dist.scale()),
    );
    Ok(t)
}

/// Sort-based Monte Carlo variant: `n,k,J_L,std_error,trials`.
pub fn lower_bound_monte_carlo_table(
    n: usize,
    k: usize,
    dist: &SymmetricDistribution,
    trials: usize,
    seed: u64,
) -> Result<Table> {
    let est = monte_carlo_lower_bound(n, k, dist, trials, &mut path_rng(seed, 0))?;
    let mut t = Table::new(&["n", "k", "J_L", "std_error", "trials"]);
    t.push(row![n, k, est.mean, est.std_error, trials]);
    t.comments.push(format!(
        "experiment=lower-bound-monte-carlo config_hash={} master_seed={seed}",
        config_hash(&format!(
            "n={n} k={k} family={} scale={} trials={trials} seed={seed}",
            dist.family(),
            dist.scale()
        ))
    ));
    Ok(t)
}

/// `J(T)` on `[0, 2 hi]` for each scale, plus each curve's optimum and
/// centralized bound. Columns `scale,T,J,J_L,kind` with `kind` in
/// `{grid, optimum}`.
pub fn cost_curve(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut table = Table::new(&["scale", "T", "J", "J_L", "kind"]);
    let mut chart = LineChart::new(
        &format!("cost vs threshold (n = {}, k = {})", cfg.n, cfg.k),
        "threshold T",
        "normalized MSE",
    );
    for &scale in &cfg.scales {
        let dist = SymmetricDistribution::new(cfg.family, scale)?;
        let prob = ThresholdProblem::new(cfg.n, cfg.k, dist)?;
        let sol = prob.optimal_threshold(cfg.tol)?;
        let j_l = centralized_lower_bound(&prob)?;
        let t_max = match sol.bracket {
            Some(b) => 2.0 * b.hi,
            None => 4.0 * dist.second_moment().sqrt(),
        };
        let mut points = Vec::with_capacity(cfg.points);
        for j in 0..cfg.points {
            let t = t_max * j as f64 / (cfg.points - 1) as f64;
            let cost = prob.cost(t)?;
            points.push((t, cost));
            table.push(row![scale, t, cost, j_l, "grid"]);
        }
        table.push(row![scale, sol.t_star, sol.j_star, j_l, "optimum"]);
        chart.add(Series::new(format!("scale {scale}"), points));
        chart.add(Series::new(format!("bound {scale}"), vec![(0.0, j_l), (t_max, j_l)]).dashed());
    }
    stamp(&mut table, cfg);
    Ok(ExperimentOutput {
        table,
        chart: Some(chart),
    })
}

/// Optimal decentralized cost and centralized bound for each capacity.
/// Columns `k,T_star,J_star,J_L,gap`.
pub fn capacity_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dist = cfg.distribution()?;
    let profile = lower_bound_profile(cfg.n, &dist)?;
    let mut table = Table::new(&["k", "T_star", "J_star", "J_L", "gap"]);
    let (mut decentralized, mut centralized) = (Vec::new(), Vec::new());
    for (k, &j_l) in profile.iter().enumerate().take(cfg.k_max + 1).skip(cfg.k_min) {
        let sol = ThresholdProblem::new(cfg.n, k, dist)?.optimal_threshold(cfg.tol)?;
        table.push(row![k, sol.t_star, sol.j_star, j_l, sol.j_star - j_l]);
        decentralized.push((k as f64, sol.j_star));
        centralized.push((k as f64, j_l));
    }
    stamp(&mut table, cfg);
    let mut chart = LineChart::new(
        &format!("capacity sweep (n = {})", cfg.n),
        "capacity k",
        "normalized MSE",
    );
    chart.add(Series::new("optimal threshold", decentralized));
    chart.add(Series::new("centralized bound", centralized).dashed());
    Ok(ExperimentOutput {
        table,
        chart: Some(chart),
    })
}

/// `delta,R` rows for a given second-largest eigenvalue modulus.
pub fn switching_rows(rho: f64, deltas: &[f64]) -> Result<Table> {
    let mut table = Table::new(&["delta", "R"]);
    for &delta in deltas {
        table.push(row![delta, switching_time(rho, delta)?]);
    }
    Ok(table)
}

/// Switching-time table from `(d_max, lambda2)` with `rho = 1 - lambda2 / d_max`.
pub fn switching_table(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let rho = 1.0 - cfg.lambda2 / cfg.d_max;
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::Config(format!("1 - lambda2/d_max = {rho} must lie in [0, 1)")));
    }
    let mut table = switching_rows(rho, &cfg.deltas)?;
    table.comment(format!("d_max={} lambda2={} rho={rho}", cfg.d_max, cfg.lambda2));
    stamp(&mut table, cfg);
    Ok(ExperimentOutput { table, chart: None })
}

/// Graph summary `n,edges,d_max,lambda2,rho` followed by the switching table
/// as `# R(delta)` comment rows.
pub fn graph_stats(graph: &SensorGraph, deltas: &[f64]) -> Result<Table> {
    let rho = graph.slem()?;
    let mut table = Table::new(&["n", "edges", "d_max", "lambda2", "rho"]);
    table.push(row![
        graph.n(),
        graph.edge_count(),
        graph.d_max(),
        graph.algebraic_connectivity(),
        rho
    ]);
    for &delta in deltas {
        match switching_time(rho, delta) {
            Ok(r) => table.comment(format!("R(delta={delta})={r}")),
            Err(e) => table.comment(format!("R(delta={delta})=undefined ({})", e.category())),
        };
    }
    Ok(table)
}

/// Cross-path statistics of one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundSummary {
    pub round: u64,
    pub mean_cost: f64,
    /// Nearest-rank percentiles at [`PERCENTILES`].
    pub percentiles: [f64; 5],
    pub mean_transmitters: f64,
    pub collision_rate: f64,
    /// Fraction of paths whose cost lies in their sandwich band.
    pub band_fraction: f64,
}

/// Reduces equally long path traces round by round, in path order.
pub fn aggregate(traces: &[PathTrace]) -> Vec<RoundSummary> {
    let Some(first) = traces.first() else {
        return Vec::new();
    };
    let m = traces.len() as f64;
    let mut costs = vec![0.0; traces.len()];
    (0..first.records.len())
        .map(|r| {
            let (mut sum, mut tx, mut collisions, mut in_band) = (0.0, 0.0, 0usize, 0usize);
            for (slot, trace) in costs.iter_mut().zip(traces) {
                let rec = &trace.records[r];
                *slot = rec.cost;
                sum += rec.cost;
                tx += rec.transmitters as f64;
                collisions += rec.collided as usize;
                in_band += trace.band.contains(rec.cost) as usize;
            }
            costs.sort_by(f64::total_cmp);
            RoundSummary {
                round: first.records[r].round,
                mean_cost: sum / m,
                percentiles: PERCENTILES.map(|p| nearest_rank(&costs, p)),
                mean_transmitters: tx / m,
                collision_rate: collisions as f64 / m,
                band_fraction: in_band as f64 / m,
            }
        })
        .collect()
}

/// Mean over paths of the sandwich band endpoints.
pub fn mean_band(traces: &[PathTrace]) -> (f64, f64) {
    let m = traces.len() as f64;
    let lower = traces.iter().map(|t| t.band.lower).sum::<f64>() / m;
    let upper = traces.iter().map(|t| t.band.upper).sum::<f64>() / m;
    (lower, upper)
}

/// First round at which the path-averaged cost lies in the path-averaged
/// sandwich band. Only the upper end needs checking: no round can recover
/// more than the `k` largest magnitudes.
pub fn entry_round(summaries: &[RoundSummary], mean_upper: f64) -> Option<u64> {
    let limit = mean_upper * (1.0 + 1e-12);
    summaries.iter().find(|s| s.mean_cost <= limit).map(|s| s.round)
}

/// First round from which the path-averaged cost stays in the band through
/// the horizon.
pub fn settled_round(summaries: &[RoundSummary], mean_upper: f64) -> Option<u64> {
    let limit = mean_upper * (1.0 + 1e-12);
    let mut settled = None;
    for s in summaries.iter().rev() {
        if s.mean_cost > limit {
            break;
        }
        settled = Some(s.round);
    }
    settled
}

/// Per-round statistics of one scheme: columns
/// `t,mean_cost,p5,p25,p50,p75,p95,mean_transmitters,collision_rate`.
pub fn simulate(cfg: &ExperimentConfig, scheme: Scheme, graph: &SensorGraph) -> Result<ExperimentOutput> {
    let sim = Simulation::new(cfg.scheme_config(scheme)?, cfg.problem()?, graph)?;
    let traces = sim.run_paths(cfg.rounds, cfg.paths, cfg.master_seed);
    let summaries = aggregate(&traces);
    let (lower, upper) = mean_band(&traces);

    let mut table = Table::new(&[
        "t",
        "mean_cost",
        "p5",
        "p25",
        "p50",
        "p75",
        "p95",
        "mean_transmitters",
        "collision_rate",
    ]);
    table.comment(format!(
        "scheme={} paths={} rounds={} switch_round={} band_lower_mean={lower} band_upper_mean={upper} clamped_paths={}",
        scheme.as_str(),
        cfg.paths,
        cfg.rounds,
        sim.switch_round().map_or("none".into(), |r| r.to_string()),
        traces.iter().filter(|t| t.variance_clamped).count()
    ));
    for s in &summaries {
        let [p5, p25, p50, p75, p95] = s.percentiles;
        table.push(row![
            s.round,
            s.mean_cost,
            p5,
            p25,
            p50,
            p75,
            p95,
            s.mean_transmitters,
            s.collision_rate
        ]);
    }
    stamp(&mut table, cfg);

    let mut chart = LineChart::new(
        &format!("{} scheme (n = {}, k = {})", scheme.as_str(), cfg.n, cfg.k),
        "round t",
        "instantaneous cost",
    )
    .log_x();
    let series = |f: &dyn Fn(&RoundSummary) -> f64| summaries.iter().map(|s| (s.round as f64 + 1.0, f(s))).collect();
    chart.add(Series::new("mean", series(&|s| s.mean_cost)));
    chart.add(Series::new("p5", series(&|s| s.percentiles[0])).dashed());
    chart.add(Series::new("p95", series(&|s| s.percentiles[4])).dashed());
    Ok(ExperimentOutput {
        table,
        chart: Some(chart),
    })
}

/// Paired quantile and hybrid runs on the same realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchReport {
    pub switch_round: u64,
    pub quantile: Vec<RoundSummary>,
    pub hybrid: Vec<RoundSummary>,
    pub band_lower_mean: f64,
    pub band_upper_mean: f64,
    pub quantile_entry: Option<u64>,
    pub hybrid_entry: Option<u64>,
    pub quantile_settled: Option<u64>,
    pub hybrid_settled: Option<u64>,
    pub quantile_traces: Vec<PathTrace>,
    pub hybrid_traces: Vec<PathTrace>,
}

impl MismatchReport {
    /// `quantile_entry / hybrid_entry`, rounds counted from 1.
    pub fn speedup(&self) -> Option<f64> {
        Some((self.quantile_entry? + 1) as f64 / (self.hybrid_entry? + 1) as f64)
    }
}

pub fn mismatch_experiment(cfg: &ExperimentConfig, graph: &SensorGraph) -> Result<MismatchReport> {
    let problem = cfg.problem()?;
    let hybrid = Simulation::new(cfg.scheme_config(Scheme::Hybrid)?, problem, graph)?;
    let quantile = Simulation::new(cfg.scheme_config(Scheme::Quantile)?, problem, graph)?;
    let quantile_traces = quantile.run_paths(cfg.rounds, cfg.paths, cfg.master_seed);
    let hybrid_traces = hybrid.run_paths(cfg.rounds, cfg.paths, cfg.master_seed);
    let q = aggregate(&quantile_traces);
    let h = aggregate(&hybrid_traces);
    let (lower, upper) = mean_band(&quantile_traces);
    Ok(MismatchReport {
        switch_round: hybrid.switch_round().expect("hybrid has a switching round"),
        quantile_entry: entry_round(&q, upper),
        hybrid_entry: entry_round(&h, upper),
        quantile_settled: settled_round(&q, upper),
        hybrid_settled: settled_round(&h, upper),
        quantile: q,
        hybrid: h,
        band_lower_mean: lower,
        band_upper_mean: upper,
        quantile_traces,
        hybrid_traces,
    })
}

/// Mismatch experiment as CSV: columns
/// `t,quantile_mean_cost,hybrid_mean_cost,quantile_band_fraction,hybrid_band_fraction`.
pub fn mismatch(cfg: &ExperimentConfig, graph: &SensorGraph) -> Result<ExperimentOutput> {
    let report = mismatch_experiment(cfg, graph)?;
    let mut table = Table::new(&[
        "t",
        "quantile_mean_cost",
        "hybrid_mean_cost",
        "quantile_band_fraction",
        "hybrid_band_fraction",
    ]);
    let fmt = |v: Option<u64>| v.map_or("none".to_string(), |r| r.to_string());
    table.comment(format!(
        "true_family={} assumed_family={} switch_round={} band_lower_mean={} band_upper_mean={}",
        cfg.family, cfg.assumed_family, report.switch_round, report.band_lower_mean, report.band_upper_mean
    ));
    table.comment(format!(
        "quantile_entry_round={} hybrid_entry_round={} speedup={} quantile_settled_round={} hybrid_settled_round={}",
        fmt(report.quantile_entry),
        fmt(report.hybrid_entry),
        report.speedup().map_or("none".into(), |s| s.to_string()),
        fmt(report.quantile_settled),
        fmt(report.hybrid_settled),
    ));
    for (q, h) in report.quantile.iter().zip(&report.hybrid) {
        table.push(row![
            q.round,
            q.mean_cost,
            h.mean_cost,
            q.band_fraction,
            h.band_fraction
        ]);
    }
    stamp(&mut table, cfg);

    let mut chart = LineChart::new("quantile vs hybrid (mismatched design)", "round t", "mean cost").log_x();
    chart.add(Series::new(
        "quantile",
        report
            .quantile
            .iter()
            .map(|s| (s.round as f64 + 1.0, s.mean_cost))
            .collect(),
    ));
    chart.add(Series::new(
        "hybrid",
        report
            .hybrid
            .iter()
            .map(|s| (s.round as f64 + 1.0, s.mean_cost))
            .collect(),
    ));
    let horizon = cfg.rounds as f64 + 1.0;
    chart.add(
        Series::new(
            "band upper",
            vec![(1.0, report.band_upper_mean), (horizon, report.band_upper_mean)],
        )
        .dashed(),
    );
    Ok(ExperimentOutput {
        table,
        chart: Some(chart),
    })
}

/// Runs any configured experiment, building its graph when needed.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::CostCurve => cost_curve(cfg),
        ExperimentKind::CapacitySweep => capacity_sweep(cfg),
        ExperimentKind::SwitchingTable => switching_table(cfg),
        ExperimentKind::ConsensusPaths => simulate(cfg, Scheme::Consensus, &cfg.graph.build(cfg.n)?),
        ExperimentKind::QuantilePaths => simulate(cfg, Scheme::Quantile, &cfg.graph.build(cfg.n)?),
        ExperimentKind::HybridPaths => simulate(cfg, Scheme::Hybrid, &cfg.graph.build(cfg.n)?),
        ExperimentKind::HybridVsQuantile => mismatch(cfg, &cfg.graph.build(cfg.n)?),
    }
}

/// Default bracket parameter, re-exported for front ends.
pub const S_BAR: f64 = DEFAULT_S_BAR;
