//! The capacity-`k` collision channel and the fusion center's estimator.
//!
//! Used directly as a Monte Carlo model of the no-communication system: it
//! never touches the closed-form cost, so it serves as an independent check
//! of it.

use rand::Rng;

use crate::stats::{Accumulator, Estimate};
use crate::threshold::ThresholdProblem;

/// What the fusion center observes in one slot.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelOutput {
    Idle,
    /// `(sensor index, measurement)` for every packet, at most `k` of them.
    Delivered(Vec<(usize, f64)>),
    /// More than `k` transmitters; only their indices are decoded.
    Collision(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollisionChannel {
    capacity: usize,
}

impl CollisionChannel {
    pub fn new(capacity: usize) -> Self {
        Self { capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn transmit(&self, packets: Vec<(usize, f64)>) -> ChannelOutput {
        match packets.len() {
            0 => ChannelOutput::Idle,
            m if m <= self.capacity => ChannelOutput::Delivered(packets),
            _ => ChannelOutput::Collision(packets.into_iter().map(|(i, _)| i).collect()),
        }
    }
}

/// Conditional-mean estimates of all `n` measurements under a symmetric
/// law: delivered values are exact, everything else is 0.
pub fn estimate(output: &ChannelOutput, n: usize) -> Vec<f64> {
    let mut est = vec![0.0; n];
    if let ChannelOutput::Delivered(packets) = output {
        for &(i, x) in packets {
            est[i] = x;
        }
    }
    est
}

/// Per-sensor squared error of one slot in which every sensor applies the
/// common threshold `t`.
pub fn slot_error(channel: &CollisionChannel, x: &[f64], t: f64) -> f64 {
    let packets = x
        .iter()
        .enumerate()
        .filter(|(_, xi)| xi.abs() >= t)
        .map(|(i, &xi)| (i, xi))
        .collect();
    let est = estimate(&channel.transmit(packets), x.len());
    x.iter().zip(&est).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64
}

/// Monte Carlo estimate of the normalized MSE of threshold `t`.
pub fn monte_carlo_cost<R: Rng + ?Sized>(prob: &ThresholdProblem, t: f64, trials: usize, rng: &mut R) -> Estimate {
    let channel = CollisionChannel::new(prob.k());
    let mut acc = Accumulator::default();
    let mut x = vec![0.0; prob.n()];
    for _ in 0..trials {
        x.iter_mut().for_each(|v| *v = prob.dist().sample(rng));
        acc.push(slot_error(&channel, &x, t));
    }
    acc.estimate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_outputs() {
        let ch = CollisionChannel::new(2);
        assert_eq!(ch.transmit(vec![]), ChannelOutput::Idle);
        assert_eq!(
            ch.transmit(vec![(0, 1.0), (3, -2.0)]),
            ChannelOutput::Delivered(vec![(0, 1.0), (3, -2.0)])
        );
        assert_eq!(
            ch.transmit(vec![(0, 1.0), (1, 1.0), (2, 1.0)]),
            ChannelOutput::Collision(vec![0, 1, 2])
        );
    }

    #[test]
    fn estimator_semantics() {
        let out = ChannelOutput::Delivered(vec![(1, 4.0)]);
        assert_eq!(estimate(&out, 3), vec![0.0, 4.0, 0.0]);
        assert_eq!(estimate(&ChannelOutput::Collision(vec![0, 1]), 2), vec![0.0, 0.0]);
    }

    #[test]
    fn slot_error_hand_case() {
        let ch = CollisionChannel::new(1);
        let x = [3.0, -1.0, 0.5];
        assert!((slot_error(&ch, &x, 2.0) - 1.25 / 3.0).abs() < 1e-15);
        // everyone transmits -> collision -> nothing recovered
        assert!((slot_error(&ch, &x, 0.0) - 10.25 / 3.0).abs() < 1e-15);
    }
}
