//! Threshold design for sensors sharing a capacity-`k` collision channel,
//! and simulation of schemes in which sensors learn their thresholds by
//! talking to graph neighbours.
//!
//! The modules build on each other bottom-up:
//!
//! * [`distributions`] – symmetric measurement laws and folded quantities.
//! * [`threshold`] – closed-form cost of a common threshold and its unique optimum.
//! * [`lower_bound`] – the centralized top-`k` benchmark.
//! * [`channel`] – Monte Carlo model of the channel and fusion-center estimator.
//! * [`graph`] – communication graphs, mixing matrices, switching time.
//! * [`protocols`] – consensus, quantile and hybrid schemes.
//! * [`harness`] – experiment drivers producing deterministic CSV.

// Parameter guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod distributions;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lower_bound;
pub mod numerics;
pub mod protocols;
pub mod stats;
pub mod threshold;

pub use distributions::{Family, SymmetricDistribution};
pub use error::{Error, Result};
pub use graph::{switching_time, MetropolisWeights, SensorGraph};
pub use lower_bound::{centralized_lower_bound, centralized_lower_bound_for, FoldedLaw};
pub use protocols::{
    NetworkState, PathTrace, QuantileParams, SandwichBand, Scheme, SchemeConfig, Simulation, SubgradientTiming,
    TraceRecord,
};
pub use threshold::{Bracket, ThresholdProblem, ThresholdSolution};
