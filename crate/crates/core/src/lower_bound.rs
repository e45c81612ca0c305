//! Centralized "top-k" benchmark: the MSE of a genie scheduler that always
//! delivers the `k` largest magnitudes.
//!
//! With `Z = |X|` and `Z_(1) >= ... >= Z_(n)`,
//! `J_L = (1/n) sum_{i=k+1}^{n} E[Z_(i)^2]`, where each moment is the beta
//! weighted integral
//!
//! ```text
//! E[Z_(i)^r] = int_0^inf z^r F_Z^(n-i) (1 - F_Z)^(i-1) f_Z dz / B(n-i+1, i)
//! ```
//!
//! The integrand is evaluated in log space so that `n` in the thousands does
//! not underflow the beta weights.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::factorial::ln_factorial;

use crate::distributions::SymmetricDistribution;
use crate::error::{invalid, Result};
use crate::numerics::{integrate, xlogy};
use crate::stats::{Accumulator, Estimate};
use crate::threshold::ThresholdProblem;

const REL_TOL: f64 = 1e-10;
/// Beta-distribution standard deviations at which the integration range is
/// pre-split, so the narrow peak of each order statistic is never skipped.
const SPLITS: [f64; 11] = [-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0];

/// Law of `Z = |X|`: `f_Z = 2 f_X`, `F_Z = 2 F_X - 1` on `z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedLaw {
    base: SymmetricDistribution,
}

impl FoldedLaw {
    pub fn new(base: SymmetricDistribution) -> Self {
        Self { base }
    }

    pub fn base(&self) -> &SymmetricDistribution {
        &self.base
    }

    pub fn pdf(&self, z: f64) -> f64 {
        if z < 0.0 {
            0.0
        } else {
            2.0 * self.base.pdf(z)
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            0.0
        } else {
            self.base.folded_cdf_unchecked(z)
        }
    }

    pub fn sf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            1.0
        } else {
            self.base.folded_sf_unchecked(z)
        }
    }

    /// Point beyond which `1 - F_Z < 1e-16 / n`. The neglected tail of every
    /// order-statistic moment is at most `n * E[X^2 1(|X| >= z)]` there.
    pub fn truncation_point(&self, n: usize) -> f64 {
        self.base
            .inverse_folded_sf(1e-16 / n as f64)
            .expect("tail probability in (0, 1)")
    }
}

/// `E[Z_(i)^power]` for the `i`-th largest of `n` magnitudes.
///
/// `power = 0` integrates the order-statistic density itself (result 1).
pub fn order_stat_moment(n: usize, i: usize, power: u32, law: &FoldedLaw) -> Result<f64> {
    if n == 0 || i == 0 || i > n {
        return Err(invalid(format!(
            "order statistic index must satisfy 1 <= i <= n (n = {n}, i = {i})"
        )));
    }
    let (n64, i64_) = (n as u64, i as u64);
    let ln_beta = ln_factorial(n64 - i64_) + ln_factorial(i64_ - 1) - ln_factorial(n64);
    let lower_exp = (n - i) as f64;
    let upper_exp = (i - 1) as f64;
    let power_f = power as f64;
    let integrand = |z: f64| {
        if z <= 0.0 && power > 0 {
            return 0.0;
        }
        let ln = xlogy(power_f, z.ln())
            + xlogy(lower_exp, law.cdf(z).ln())
            + xlogy(upper_exp, law.sf(z).ln())
            + law.pdf(z).ln()
            - ln_beta;
        ln.exp()
    };

    let z_max = law.truncation_point(n);
    let breakpoints = breakpoints(n, i, law, z_max);
    let scale = law.base().second_moment().powf(power_f / 2.0);
    let q = integrate(integrand, &breakpoints, 1e-14 * scale, REL_TOL)?;
    Ok(q.value)
}

fn breakpoints(n: usize, i: usize, law: &FoldedLaw, z_max: f64) -> Vec<f64> {
    // F_Z(Z_(i)) ~ Beta(n - i + 1, i); work with the upper tail 1 - F_Z.
    let (a, b) = ((n - i + 1) as f64, i as f64);
    let tail_mean = b / (a + b);
    let sd = (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
    let mut points = vec![0.0, z_max];
    for c in SPLITS {
        let tail = tail_mean - c * sd;
        if tail > 0.0 && tail < 1.0 {
            let z = law.base().inverse_folded_sf(tail).expect("tail in (0, 1)");
            if z > 0.0 && z < z_max {
                points.push(z);
            }
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// `E[Z_(i)^2]` for `i = 1..=n` (index `i - 1`), computed in parallel.
pub fn order_stat_second_moments(n: usize, law: &FoldedLaw) -> Result<Vec<f64>> {
    (1..=n)
        .into_par_iter()
        .map(|i| order_stat_moment(n, i, 2, law))
        .collect()
}

pub fn order_stat_second_moment(n: usize, i: usize, law: &FoldedLaw) -> Result<f64> {
    order_stat_moment(n, i, 2, law)
}

/// Top-`k` benchmark for `0 <= k <= n`.
pub fn centralized_lower_bound_for(n: usize, k: usize, dist: &SymmetricDistribution) -> Result<f64> {
    if n == 0 || k > n {
        return Err(invalid(format!(
            "lower bound needs n >= 1 and 0 <= k <= n (n = {n}, k = {k})"
        )));
    }
    if k == n {
        return Ok(0.0);
    }
    if k == 0 {
        return Ok(dist.second_moment());
    }
    let law = FoldedLaw::new(*dist);
    let moments: Result<Vec<f64>> = ((k + 1)..=n)
        .into_par_iter()
        .map(|i| order_stat_moment(n, i, 2, &law))
        .collect();
    Ok(moments?.iter().sum::<f64>() / n as f64)
}

pub fn centralized_lower_bound(prob: &ThresholdProblem) -> Result<f64> {
    centralized_lower_bound_for(prob.n(), prob.k(), prob.dist())
}

/// Lower bounds for every capacity `k = 0..=n` from one pass of moments.
pub fn lower_bound_profile(n: usize, dist: &SymmetricDistribution) -> Result<Vec<f64>> {
    let moments = order_stat_second_moments(n, &FoldedLaw::new(*dist))?;
    let mut profile = vec![0.0; n + 1];
    let mut tail = 0.0;
    for k in (0..n).rev() {
        tail += moments[k];
        profile[k] = tail / n as f64;
    }
    profile[0] = dist.second_moment();
    Ok(profile)
}

/// Sort-based Monte Carlo estimate of the top-`k` benchmark; the fallback
/// for very large `n` where `n - k` quadratures become the bottleneck.
pub fn monte_carlo_lower_bound<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    dist: &SymmetricDistribution,
    trials: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if n == 0 || k > n || trials == 0 {
        return Err(invalid("Monte Carlo lower bound needs n >= 1, k <= n, trials >= 1"));
    }
    let mut acc = Accumulator::default();
    let mut z = vec![0.0; n];
    for _ in 0..trials {
        z.iter_mut().for_each(|v| *v = dist.sample(rng).abs());
        z.sort_unstable_by(|a, b| b.total_cmp(a));
        acc.push(z[k..].iter().map(|v| v * v).sum::<f64>() / n as f64);
    }
    Ok(acc.estimate())
}
