//! Zero-mean symmetric measurement laws and their folded-magnitude quantities.
//!
//! All closed forms live here; numerical quadrature over these laws is kept
//! out of the hot paths (the threshold optimizer evaluates them thousands of
//! times per solve).

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use libm::{erf, erfc};
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::error::{domain, invalid, Error, Result};

/// Absolute tolerance (probability scale) of the bisection inverse.
pub const INVERSE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Laplace,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
        }
    }

    /// Scale parameter whose law has the given second moment.
    pub fn scale_for_second_moment(self, second_moment: f64) -> f64 {
        match self {
            Family::Gaussian => second_moment.sqrt(),
            Family::Laplace => (0.5 * second_moment).sqrt(),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "laplace" | "laplacian" => Ok(Family::Laplace),
            other => Err(invalid(format!("unknown distribution family `{other}`"))),
        }
    }
}

/// A zero-mean law with an everywhere-positive symmetric density.
///
/// `scale` is the standard deviation for [`Family::Gaussian`] and the
/// diversity `b` for [`Family::Laplace`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricDistribution {
    family: Family,
    scale: f64,
}

impl SymmetricDistribution {
    pub fn new(family: Family, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!(
                "distribution scale must be a finite positive number, got {scale}"
            )));
        }
        Ok(Self { family, scale })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(Family::Gaussian, sigma)
    }

    pub fn laplace(b: f64) -> Result<Self> {
        Self::new(Family::Laplace, b)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// The same family rescaled to have second moment `second_moment`.
    pub fn with_second_moment(&self, second_moment: f64) -> Result<Self> {
        Self::new(self.family, self.family.scale_for_second_moment(second_moment))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.family {
            Family::Gaussian => {
                let u = x / s;
                (-0.5 * u * u).exp() / (s * (2.0 * PI).sqrt())
            }
            Family::Laplace => (-x.abs() / s).exp() / (2.0 * s),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.family {
            Family::Gaussian => 0.5 * erfc(-x / s * FRAC_1_SQRT_2),
            Family::Laplace => {
                if x < 0.0 {
                    0.5 * (x / s).exp()
                } else {
                    1.0 - 0.5 * (-x / s).exp()
                }
            }
        }
    }

    pub fn second_moment(&self) -> f64 {
        let s = self.scale;
        match self.family {
            Family::Gaussian => s * s,
            Family::Laplace => 2.0 * s * s,
        }
    }

    /// `P(|X| < t)`.
    pub fn folded_cdf(&self, t: f64) -> Result<f64> {
        check_threshold(t)?;
        Ok(self.folded_cdf_unchecked(t))
    }

    /// `P(|X| >= t)`, accurate deep into the tail.
    pub fn folded_sf(&self, t: f64) -> Result<f64> {
        check_threshold(t)?;
        Ok(self.folded_sf_unchecked(t))
    }

    pub(crate) fn folded_cdf_unchecked(&self, t: f64) -> f64 {
        let u = t / self.scale;
        match self.family {
            Family::Gaussian => erf(u * FRAC_1_SQRT_2),
            Family::Laplace => -(-u).exp_m1(),
        }
    }

    pub(crate) fn folded_sf_unchecked(&self, t: f64) -> f64 {
        let u = t / self.scale;
        match self.family {
            Family::Gaussian => erfc(u * FRAC_1_SQRT_2),
            Family::Laplace => (-u).exp(),
        }
    }

    /// `E[X^2 1(|X| >= t)]`.
    pub fn truncated_second_moment(&self, t: f64) -> Result<f64> {
        check_threshold(t)?;
        Ok(self.truncated_second_moment_unchecked(t))
    }

    pub(crate) fn truncated_second_moment_unchecked(&self, t: f64) -> f64 {
        let s = self.scale;
        let u = t / s;
        match self.family {
            // 2 s^2 [u phi(u) + 1 - Phi(u)]
            Family::Gaussian => {
                let phi = (-0.5 * u * u).exp() / (2.0 * PI).sqrt();
                s * s * (2.0 * u * phi + erfc(u * FRAC_1_SQRT_2))
            }
            Family::Laplace => (-u).exp() * (t * t + 2.0 * s * t + 2.0 * s * s),
        }
    }

    /// The threshold `t` with `P(|X| < t) = q`.
    pub fn inverse_folded_cdf(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(domain(format!("probability {q} outside [0, 1)")));
        }
        if q == 0.0 {
            return Ok(0.0);
        }
        match self.family {
            Family::Laplace => Ok(-self.scale * (-q).ln_1p()),
            Family::Gaussian => {
                if q <= 0.5 {
                    Ok(self.bisect_threshold(|t| self.folded_cdf_unchecked(t) - q))
                } else {
                    let tail = 1.0 - q;
                    Ok(self.bisect_threshold(|t| tail - self.folded_sf_unchecked(t)))
                }
            }
        }
    }

    /// The threshold `t` with `P(|X| >= t) = tail`.
    pub fn inverse_folded_sf(&self, tail: f64) -> Result<f64> {
        if !(tail > 0.0 && tail <= 1.0) {
            return Err(domain(format!("tail probability {tail} outside (0, 1]")));
        }
        if tail == 1.0 {
            return Ok(0.0);
        }
        match self.family {
            Family::Laplace => Ok(-self.scale * tail.ln()),
            Family::Gaussian => {
                if tail >= 0.5 {
                    let q = 1.0 - tail;
                    Ok(self.bisect_threshold(|t| self.folded_cdf_unchecked(t) - q))
                } else {
                    Ok(self.bisect_threshold(|t| tail - self.folded_sf_unchecked(t)))
                }
            }
        }
    }

    // `g` must be increasing in t with a root on (0, inf).
    fn bisect_threshold<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let mut hi = self.scale;
        let mut expansions = 0;
        while g(hi) < 0.0 && expansions < 64 {
            hi *= 2.0;
            expansions += 1;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Gaussian => Normal::new(0.0, self.scale).expect("validated scale").sample(rng),
            Family::Laplace => {
                let magnitude = Exp::new(1.0 / self.scale).expect("validated scale").sample(rng);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

impl fmt::Display for SymmetricDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(scale={})", self.family, self.scale)
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("threshold must be nonnegative, got {t}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gauss(s: f64) -> SymmetricDistribution {
        SymmetricDistribution::gaussian(s).unwrap()
    }
    fn lap(b: f64) -> SymmetricDistribution {
        SymmetricDistribution::laplace(b).unwrap()
    }

    #[test]
    fn rejects_bad_scales() {
        for s in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            let err = SymmetricDistribution::gaussian(s).unwrap_err();
            assert_eq!(err.category(), "invalid-parameter");
        }
    }

    #[test]
    fn density_at_mode() {
        assert!((gauss(1.0).pdf(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(lap(1.0).pdf(0.0), 0.5);
    }

    #[test]
    fn cdf_is_half_at_zero() {
        assert_eq!(gauss(3.0).cdf(0.0), 0.5);
        assert_eq!(lap(0.2).cdf(0.0), 0.5);
    }

    #[test]
    fn folded_quantities_reject_negative_thresholds() {
        let d = gauss(1.0);
        assert_eq!(d.folded_cdf(-0.1).unwrap_err().category(), "domain");
        assert_eq!(d.truncated_second_moment(-1.0).unwrap_err().category(), "domain");
        assert_eq!(d.inverse_folded_cdf(1.0).unwrap_err().category(), "domain");
        assert_eq!(d.inverse_folded_cdf(-0.1).unwrap_err().category(), "domain");
    }

    #[test]
    fn folded_cdf_endpoints() {
        for d in [gauss(2.0), lap(0.5)] {
            assert_eq!(d.folded_cdf(0.0).unwrap(), 0.0);
            assert_eq!(d.inverse_folded_cdf(0.0).unwrap(), 0.0);
            assert_eq!(d.truncated_second_moment(0.0).unwrap(), d.second_moment());
        }
        assert!((lap(1.0).folded_cdf(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!((lap(2.0).inverse_folded_cdf(0.5).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn laplace_truncated_moment_closed_form() {
        let v = lap(1.0).truncated_second_moment(1.0).unwrap();
        assert!((v - 5.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn sf_inverse_deep_tail() {
        let d = gauss(1.0);
        let t = d.inverse_folded_sf(1e-19).unwrap();
        let back = d.folded_sf(t).unwrap();
        assert!((back / 1e-19 - 1.0).abs() < 1e-9, "{back:e}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        for d in [gauss(1.0), lap(1.0)] {
            let a = d.sample_n(&mut ChaCha8Rng::seed_from_u64(7), 100);
            let b = d.sample_n(&mut ChaCha8Rng::seed_from_u64(7), 100);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn with_second_moment_round_trips() {
        let d = lap(1.0).with_second_moment(8.0).unwrap();
        assert_eq!(d.scale(), 2.0);
        assert_eq!(gauss(1.0).with_second_moment(4.0).unwrap().scale(), 2.0);
    }
}
