//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density, written out by hand.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

pub fn gaussian_pdf(sigma: f64, x: f64) -> f64 {
    phi(x / sigma) / sigma
}

pub fn laplace_pdf(b: f64, x: f64) -> f64 {
    (-x.abs() / b).exp() / (2.0 * b)
}

/// Recursive adaptive Simpson quadrature with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, eps, 50)
}

/// Integral over `[a, inf)` split into unit panels until the panel mass is
/// negligible.
pub fn simpson_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, eps: f64) -> f64 {
    let mut total = 0.0;
    let mut lo = a;
    loop {
        let piece = simpson(f, lo, lo + 1.0, eps);
        total += piece;
        lo += 1.0;
        if piece.abs() < 1e-18 && lo > a + 5.0 {
            return total;
        }
    }
}

/// Exact `P(Bin(trials, q) <= m)` in rational arithmetic; `q` is taken as
/// the exact binary value of the float.
pub fn exact_binomial_lower_tail(trials: u64, m: u64, q: f64) -> f64 {
    let q = BigRational::from_float(q).expect("finite");
    let one = BigRational::one();
    let r = &one - &q;
    let mut total = BigRational::zero();
    let mut coeff = BigInt::one();
    for l in 0..=m.min(trials) {
        if l > 0 {
            coeff = coeff * BigInt::from(trials - l + 1) / BigInt::from(l);
        }
        let term = BigRational::from_integer(coeff.clone()) * pow(&q, l) * pow(&r, trials - l);
        total += term;
    }
    total.to_f64().expect("representable")
}

fn pow(x: &BigRational, e: u64) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// `argmin` of `f` over `points` equispaced nodes on `[a, b]`; returns the
/// minimizer and the grid spacing.
pub fn grid_argmin<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, points: usize) -> (f64, f64) {
    let h = (b - a) / (points - 1) as f64;
    let mut best = (a, f64::INFINITY);
    for j in 0..points {
        let t = a + h * j as f64;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    (best.0, h)
}

/// Plain bisection for the root of an increasing function.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tiny deterministic generator for choosing test instances (SplitMix64).
pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() % (hi - lo + 1) as u64) as usize
    }
}
