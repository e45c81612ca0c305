//! Closed-form decentralized cost of a common threshold policy and its
//! unique minimizer.
//!
//! Every sensor transmits iff `|x| >= T`. The fusion center recovers a
//! measurement exactly when it was sent and at most `k` packets were on the
//! channel; every other estimate is the prior mean 0. The resulting
//! normalized MSE is
//!
//! ```text
//! J(T) = E[X^2] - E[X^2 1(|X| >= T)] * F(T)
//! F(T) = P(Bin(n - 1, 1 - p(T)) <= k - 1),   p(T) = P(|X| < T)
//! ```
//!
//! `J` is strictly quasi-convex. Its derivative has the sign of an
//! increasing root function `h`, so the minimizer is found by bisecting on
//! the sign of `h` inside a certified bracket.

use statrs::function::factorial::ln_factorial;

use crate::distributions::SymmetricDistribution;
use crate::error::{domain, invalid, Error, Result};
use crate::numerics::{bisect_increasing, ln_binomial, log_sum_exp, xlogy};

pub const DEFAULT_S_BAR: f64 = 3.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;
const MAX_EXPANSIONS: u32 = 60;

/// Sensor count, channel capacity and measurement law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdProblem {
    n: usize,
    k: usize,
    dist: SymmetricDistribution,
}

/// Search interval guaranteed to contain the optimal threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub s_bar: f64,
    /// Number of width doublings needed to obtain a sign change at `hi`.
    pub expansions: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    pub t_star: f64,
    pub j_star: f64,
    /// `None` for the degenerate `k == n` problem.
    pub bracket: Option<Bracket>,
    pub iterations: usize,
}

/// `P(Bin(trials, success_prob) <= max_successes)`, accumulated in log space.
pub fn binomial_lower_tail(trials: usize, max_successes: usize, success_prob: f64) -> f64 {
    let ln_q = success_prob.ln();
    let ln_p = (-success_prob).ln_1p();
    binomial_lower_tail_ln(trials, max_successes, ln_q, ln_p)
}

fn binomial_lower_tail_ln(trials: usize, max_successes: usize, ln_q: f64, ln_p: f64) -> f64 {
    if max_successes >= trials {
        return 1.0;
    }
    let terms: Vec<f64> = (0..=max_successes)
        .map(|l| ln_binomial(trials as u64, l as u64) + xlogy(l as f64, ln_q) + xlogy((trials - l) as f64, ln_p))
        .collect();
    log_sum_exp(&terms).exp().clamp(0.0, 1.0)
}

impl ThresholdProblem {
    pub fn new(n: usize, k: usize, dist: SymmetricDistribution) -> Result<Self> {
        if n == 0 {
            return Err(invalid("sensor count n must be at least 1"));
        }
        if k == 0 || k > n {
            return Err(invalid(format!(
                "channel capacity k must satisfy 1 <= k <= n (n = {n}, k = {k})"
            )));
        }
        Ok(Self { n, k, dist })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dist(&self) -> &SymmetricDistribution {
        &self.dist
    }

    /// Capacity suffices for every sensor; the optimum is to always transmit.
    pub fn is_degenerate(&self) -> bool {
        self.k == self.n
    }

    /// Same `(n, k)` with a different measurement law.
    pub fn with_dist(&self, dist: SymmetricDistribution) -> Self {
        Self { dist, ..*self }
    }

    /// Probability that at most `k - 1` of the other `n - 1` sensors transmit.
    pub fn binomial_tail_f(&self, t: f64) -> Result<f64> {
        let p = self.dist.folded_cdf(t)?;
        let q = self.dist.folded_sf_unchecked(t);
        Ok(binomial_lower_tail_ln(self.n - 1, self.k - 1, q.ln(), p.ln()))
    }

    /// Normalized MSE of the common threshold `t`.
    pub fn cost(&self, t: f64) -> Result<f64> {
        let tail = self.dist.truncated_second_moment(t)?;
        let f = self.binomial_tail_f(t)?;
        let second = self.dist.second_moment();
        Ok((second - tail * f).clamp(0.0, second))
    }

    /// Root function whose sign is the sign of `J'(t)`; strictly increasing.
    pub fn root_function_h(&self, t: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(invalid("root function is undefined when k == n"));
        }
        if !(t > 0.0) {
            return Err(domain(format!("root function needs t > 0, got {t}")));
        }
        Ok(RootFunction::new(self).eval(t))
    }

    /// `ln(lead) - ln(tail)` where `h = lead - tail`. Same sign as
    /// [`root_function_h`](Self::root_function_h) and strictly increasing
    /// (the lead term grows, the tail shrinks), but finite where `h`
    /// overflows for large `k`.
    pub fn root_function_log_ratio(&self, t: f64) -> Result<f64> {
        if self.is_degenerate() {
            return Err(invalid("root function is undefined when k == n"));
        }
        if !(t > 0.0) {
            return Err(domain(format!("root function needs t > 0, got {t}")));
        }
        Ok(RootFunction::new(self).eval_log_ratio(t))
    }

    pub fn bracket(&self, s_bar: f64) -> Result<Bracket> {
        if self.is_degenerate() {
            return Err(invalid("no bracket for the degenerate problem k == n"));
        }
        if !(s_bar > 0.0 && s_bar.is_finite()) {
            return Err(invalid(format!("s_bar must be positive, got {s_bar}")));
        }
        self.bracket_with(&RootFunction::new(self), s_bar)
    }

    fn bracket_with(&self, h: &RootFunction<'_>, s_bar: f64) -> Result<Bracket> {
        let (n, k) = (self.n as f64, self.k as f64);
        // lo = p^{-1}(1 - k/n), written through the tail for precision.
        let lo = self.dist.inverse_folded_sf(k / n)?;
        let h_lo = h.eval(lo);
        if h_lo > 0.0 {
            return Err(Error::NumericalFailure(format!(
                "root function positive at the lower bracket end (h({lo}) = {h_lo:e})"
            )));
        }
        let tail = (k - s_bar * (2.0 * k).sqrt()) / (n - 1.0);
        let mut hi = if tail > 0.0 && tail <= 1.0 {
            self.dist.inverse_folded_sf(tail)?.max(lo)
        } else {
            lo
        };
        let mut width = if hi > lo { hi - lo } else { lo.max(f64::MIN_POSITIVE) };
        if hi <= lo {
            hi = lo + width;
        }
        let mut expansions = 0;
        while h.eval(hi) < 0.0 {
            if expansions == MAX_EXPANSIONS {
                return Err(Error::NumericalFailure(format!(
                    "no sign change of the root function on [{lo}, {hi}] after {MAX_EXPANSIONS} expansions"
                )));
            }
            width *= 2.0;
            hi = lo + width;
            expansions += 1;
        }
        Ok(Bracket {
            lo,
            hi,
            s_bar,
            expansions,
        })
    }

    /// The unique minimizer of [`cost`](Self::cost), to relative width `tol`.
    pub fn optimal_threshold(&self, tol: f64) -> Result<ThresholdSolution> {
        if !(tol > 0.0) {
            return Err(invalid(format!("tolerance must be positive, got {tol}")));
        }
        if self.is_degenerate() {
            return Ok(ThresholdSolution {
                t_star: 0.0,
                j_star: 0.0,
                bracket: None,
                iterations: 0,
            });
        }
        let h = RootFunction::new(self);
        let bracket = self.bracket_with(&h, DEFAULT_S_BAR)?;
        let root = bisect_increasing(|t| h.eval(t), bracket.lo, bracket.hi, tol);
        let t_star = root.midpoint();
        Ok(ThresholdSolution {
            t_star,
            j_star: self.cost(t_star)?,
            bracket: Some(bracket),
            iterations: root.iterations,
        })
    }
}

/// `h(t) = t^2 p sum_j c_j (p / (1 - p))^(k-1-j) - E[X^2 1(|X| >= t)]`, with
/// `c_j = (k-1)! (n-1-k)! / (j! (n-1-j)!)` kept as logarithms.
struct RootFunction<'a> {
    problem: &'a ThresholdProblem,
    ln_coeffs: Vec<f64>,
}

impl<'a> RootFunction<'a> {
    fn new(problem: &'a ThresholdProblem) -> Self {
        let (n, k) = (problem.n as u64, problem.k as u64);
        let base = ln_factorial(k - 1) + ln_factorial(n - 1 - k);
        let ln_coeffs = (0..k)
            .map(|j| base - ln_factorial(j) - ln_factorial(n - 1 - j))
            .collect();
        Self { problem, ln_coeffs }
    }

    /// `(ln lead, tail)` with `h = lead - tail`; the lead term overflows
    /// long before its logarithm does.
    fn parts(&self, t: f64) -> (f64, f64) {
        let dist = &self.problem.dist;
        let p = dist.folded_cdf_unchecked(t);
        let ln_odds = p.ln() - dist.folded_sf_unchecked(t).ln();
        let k = self.ln_coeffs.len();
        let terms: Vec<f64> = self
            .ln_coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c + xlogy((k - 1 - j) as f64, ln_odds))
            .collect();
        let ln_lead = if p == 0.0 {
            f64::NEG_INFINITY
        } else {
            2.0 * t.ln() + p.ln() + log_sum_exp(&terms)
        };
        (ln_lead, dist.truncated_second_moment_unchecked(t))
    }

    fn eval(&self, t: f64) -> f64 {
        let (ln_lead, tail) = self.parts(t);
        ln_lead.exp() - tail
    }

    fn eval_log_ratio(&self, t: f64) -> f64 {
        let (ln_lead, tail) = self.parts(t);
        ln_lead - tail.ln()
    }
}
