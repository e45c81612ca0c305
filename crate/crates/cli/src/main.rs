use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sensorcast::harness::config::{ExperimentConfig, ExperimentKind, GraphSource, Settings, TABLE_DELTAS};
use sensorcast::harness::experiments::{self, ExperimentOutput};
use sensorcast::harness::Table;
use sensorcast::{Error, Family, Result, SensorGraph, SymmetricDistribution, ThresholdProblem};

#[derive(Parser)]
#[command(
    name = "sensorcast",
    version,
    about = "Threshold transmission policies over collision channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal symmetric threshold and its cost.
    Threshold(ProblemArgs),
    /// Centralized lower bound on the normalized MSE.
    LowerBound(LowerBoundArgs),
    /// Cost as a function of the threshold for several scales.
    CostCurve(CostCurveArgs),
    /// Optimal cost and lower bound across channel capacities.
    CapacitySweep(CapacitySweepArgs),
    /// Generate or inspect communication graphs.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Monte Carlo paths of a distributed threshold scheme.
    Simulate(SimulateArgs),
    /// Switching rounds for a list of consensus accuracies.
    SwitchingTable(SwitchingArgs),
    /// Quantile vs hybrid scheme under a mismatched design law.
    Mismatch(MismatchArgs),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Sample a connected Erdos-Renyi graph and write its edge list.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        p_edge: f64,
        #[arg(long, default_value_t = 2020)]
        seed: u64,
        #[arg(long, short, alias = "out")]
        output: Option<PathBuf>,
    },
    /// Degree and spectral summary plus switching times.
    Stats {
        /// Edge-list file or `gen:<p_edge>`.
        #[arg(long, alias = "in")]
        graph: String,
        /// Node count for generated graphs.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2020)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "gaussian")]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, default_value_t = sensorcast::threshold::DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct LowerBoundArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "gaussian")]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Estimate by sorting this many samples instead of quadrature.
    #[arg(long)]
    monte_carlo: Option<usize>,
    #[arg(long, default_value_t = 2020)]
    seed: u64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

/// Options shared by config-driven experiments.
#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; command-line flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, short)]
    output: Option<String>,
    /// Also render an SVG chart here.
    #[arg(long)]
    svg: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

macro_rules! flags {
    ($name:ident { $($field:ident),* $(,)? }) => {
        #[derive(Args)]
        struct $name {
            #[command(flatten)]
            common: Common,
            $(
                #[arg(long)]
                $field: Option<String>,
            )*
        }

        impl $name {
            fn settings(&self) -> Result<Settings> {
                let mut s = self.common.settings()?;
                $(
                    if let Some(v) = &self.$field {
                        s.set(stringify!($field), v.clone());
                    }
                )*
                Ok(s)
            }
        }
    };
}

flags!(CostCurveArgs {
    n,
    k,
    family,
    scales,
    points,
    tol
});
flags!(CapacitySweepArgs {
    n,
    family,
    scale,
    k_min,
    k_max,
    tol
});
flags!(SwitchingArgs { d_max, lambda2, deltas });
flags!(SimulateArgs {
    scheme,
    n,
    k,
    family,
    scale,
    graph,
    graph_seed,
    rounds,
    paths,
    alpha,
    tau,
    delta,
    p,
    assumed_family,
    timing,
    switch_round,
});
flags!(MismatchArgs {
    n,
    k,
    family,
    scale,
    assumed_family,
    graph,
    graph_seed,
    rounds,
    paths,
    alpha,
    tau,
    delta,
    p,
    timing,
    switch_round,
});

impl Common {
    fn settings(&self) -> Result<Settings> {
        let mut overrides = Settings::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            overrides.set(k, v);
        }
        for (key, value) in [("output", &self.output), ("svg", &self.svg), ("seed", &self.seed)] {
            if let Some(v) = value {
                overrides.set(key, v.clone());
            }
        }
        let base = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::new(),
        };
        Ok(base.merged(&overrides))
    }
}

fn emit(table: &Table, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => table.write(path),
        None => {
            print!("{}", table.render());
            Ok(())
        }
    }
}

fn emit_experiment(cfg: &ExperimentConfig, out: ExperimentOutput) -> Result<()> {
    emit(&out.table, cfg.output.as_deref())?;
    if let (Some(path), Some(chart)) = (&cfg.svg, &out.chart) {
        std::fs::write(path, chart.render())?;
    }
    Ok(())
}

fn run_config(kind: ExperimentKind, settings: &Settings) -> Result<()> {
    let cfg = ExperimentConfig::from_settings(kind, settings)?;
    let out = experiments::run(&cfg)?;
    emit_experiment(&cfg, out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Threshold(a) => {
            let prob = ThresholdProblem::new(a.n, a.k, SymmetricDistribution::new(a.family, a.scale)?)?;
            emit(&experiments::threshold_table(&prob, a.tol)?, a.output.as_deref())
        }
        Command::LowerBound(a) => {
            let dist = SymmetricDistribution::new(a.family, a.scale)?;
            let table = match a.monte_carlo {
                Some(trials) => experiments::lower_bound_monte_carlo_table(a.n, a.k, &dist, trials, a.seed)?,
                None => experiments::lower_bound_table(a.n, a.k, &dist)?,
            };
            emit(&table, a.output.as_deref())
        }
        Command::CostCurve(a) => run_config(ExperimentKind::CostCurve, &a.settings()?),
        Command::CapacitySweep(a) => run_config(ExperimentKind::CapacitySweep, &a.settings()?),
        Command::SwitchingTable(a) => run_config(ExperimentKind::SwitchingTable, &a.settings()?),
        Command::Mismatch(a) => run_config(ExperimentKind::HybridVsQuantile, &a.settings()?),
        Command::Simulate(a) => {
            let settings = a.settings()?;
            let scheme: sensorcast::Scheme = settings
                .get("scheme")
                .ok_or_else(|| Error::Config("simulate needs --scheme {consensus,quantile,hybrid}".into()))?
                .parse()?;
            run_config(ExperimentKind::for_scheme(scheme), &settings)
        }
        Command::Graph(GraphCommand::Gen {
            n,
            p_edge,
            seed,
            output,
        }) => {
            let graph = SensorGraph::erdos_renyi(n, p_edge, seed)?;
            match output {
                Some(path) => graph.write_edge_list(&path),
                None => {
                    print!("{}", graph.to_edge_list());
                    Ok(())
                }
            }
        }
        Command::Graph(GraphCommand::Stats {
            graph,
            n,
            seed,
            deltas,
            output,
        }) => {
            let source = GraphSource::parse(&graph, seed)?;
            let graph = match (&source, n) {
                (GraphSource::ErdosRenyi { .. }, None) => {
                    return Err(Error::Config("generated graphs need --n".into()));
                }
                (_, n) => source.build(n.unwrap_or(0))?,
            };
            let deltas = deltas.unwrap_or_else(|| TABLE_DELTAS.to_vec());
            let mut table = experiments::graph_stats(&graph, &deltas)?;
            table
                .comments
                .insert(0, format!("experiment=graph-stats graph={source} master_seed={seed}"));
            emit(&table, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error[usage]: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::FAILURE
        }
    }
}
