mod common;

use common::*;
use sensorcast::threshold::{binomial_lower_tail, DEFAULT_S_BAR};
use sensorcast::{Error, SymmetricDistribution, ThresholdProblem};

fn gauss_problem(n: usize, k: usize, sigma: f64) -> ThresholdProblem {
    ThresholdProblem::new(n, k, SymmetricDistribution::gaussian(sigma).unwrap()).unwrap()
}

#[test]
fn binomial_tail_matches_exact_rational_oracle() {
    let mut rng = SplitMix(7);
    for _ in 0..300 {
        let trials = rng.range(1, 30) as u64;
        let m = rng.range(0, trials as usize) as u64;
        let q = rng.uniform();
        let got = binomial_lower_tail(trials as usize, m as usize, q);
        let want = exact_binomial_lower_tail(trials, m, q);
        assert!((got - want).abs() < 1e-12, "n={trials} m={m} q={q}: {got} vs {want}");
    }
    for q in [0.0, 1.0, 1e-300, 1.0 - 1e-16] {
        for m in 0..5u64 {
            let got = binomial_lower_tail(12, m as usize, q);
            assert!((got - exact_binomial_lower_tail(12, m, q)).abs() < 1e-12);
        }
    }
}

#[test]
fn binomial_tail_examples() {
    let lap = SymmetricDistribution::laplace(1.0).unwrap();
    // T = 0: nobody stays silent, so at most k-1 transmitters is impossible
    let prob = ThresholdProblem::new(10, 3, lap).unwrap();
    assert_eq!(prob.binomial_tail_f(0.0).unwrap(), 0.0);
    // p(ln 2) = 1/2 under Laplace(1)
    let t = 2f64.ln();
    let f = ThresholdProblem::new(3, 1, lap).unwrap().binomial_tail_f(t).unwrap();
    assert!((f - 0.25).abs() < 1e-15);
    // p(T) = 0.7 for the two-sensor case
    let t = lap.inverse_folded_cdf(0.7).unwrap();
    let f = ThresholdProblem::new(2, 1, lap).unwrap().binomial_tail_f(t).unwrap();
    assert!((f - 0.7).abs() < 1e-14);
}

#[test]
fn cost_limits_and_hand_value() {
    for d in [
        SymmetricDistribution::gaussian(2.0).unwrap(),
        SymmetricDistribution::laplace(0.5).unwrap(),
    ] {
        let prob = ThresholdProblem::new(20, 4, d).unwrap();
        assert!((prob.cost(0.0).unwrap() - d.second_moment()).abs() < 1e-14);
        assert!((prob.cost(1e3).unwrap() - d.second_moment()).abs() < 1e-12);
    }
    let j = gauss_problem(2, 1, 1.0).cost(1.0).unwrap();
    let oracle = 1.0 - 0.801_251_956_901_2 * 0.682_689_492_137_1;
    assert!((j - oracle).abs() < 1e-6, "{j}");
    assert!((j - 0.45300).abs() < 1e-4);
}

/// The closed form assembled from independent oracles: quadrature for the
/// folded cdf and tail moment, exact rationals for the binomial tail.
#[test]
fn cost_matches_oracle_composition() {
    let cases: [(usize, usize, f64, bool); 6] = [
        (2, 1, 1.0, false),
        (5, 2, 0.5, false),
        (10, 3, 2.0, false),
        (30, 7, 1.0, true),
        (17, 16, 1.5, true),
        (25, 1, 3.0, false),
    ];
    for (n, k, scale, lap) in cases {
        let (d, pdf): (SymmetricDistribution, Box<dyn Fn(f64) -> f64>) = if lap {
            (
                SymmetricDistribution::laplace(scale).unwrap(),
                Box::new(move |x| laplace_pdf(scale, x)),
            )
        } else {
            (
                SymmetricDistribution::gaussian(scale).unwrap(),
                Box::new(move |x| gaussian_pdf(scale, x)),
            )
        };
        let prob = ThresholdProblem::new(n, k, d).unwrap();
        for t in [0.2, 0.7, 1.3, 2.5].map(|u| u * scale) {
            let p = 2.0 * simpson(&pdf, 0.0, t, 1e-15);
            let tail = 2.0 * simpson_to_infinity(&|x| x * x * pdf(x), t, 1e-15);
            let f = exact_binomial_lower_tail((n - 1) as u64, (k - 1) as u64, 1.0 - p);
            let oracle = d.second_moment() - tail * f;
            let got = prob.cost(t).unwrap();
            assert!(
                (got - oracle).abs() < 1e-9 * d.second_moment(),
                "n={n} k={k} t={t}: {got} vs {oracle}"
            );
        }
    }
}

#[test]
fn root_function_signs() {
    for (n, k, s) in [(1000, 100, 1.0), (50, 5, 2.0), (2, 1, 1.0), (300, 299, 0.3)] {
        let prob = gauss_problem(n, k, s);
        let b = prob.bracket(DEFAULT_S_BAR).unwrap();
        assert!(prob.root_function_h(b.lo).unwrap() < 0.0, "n={n} k={k}");
        assert!(prob.root_function_h(b.hi).unwrap() >= 0.0, "n={n} k={k}");
        assert!(b.lo <= b.hi);
        let sol = prob.optimal_threshold(1e-12).unwrap();
        // the sign change of h sits within the solver tolerance of T*
        let below = prob.root_function_h(sol.t_star * (1.0 - 1e-9)).unwrap();
        let above = prob.root_function_h(sol.t_star * (1.0 + 1e-9)).unwrap();
        assert!(below < 0.0 && above > 0.0, "n={n} k={k}: h = {below}, {above}");
    }
    let prob = gauss_problem(2, 1, 1.0);
    assert!(prob.root_function_h(1.0).unwrap() < 0.0);
    assert!(prob.root_function_h(2.0).unwrap() > 0.0);
    let (grid_min, _) = grid_argmin(|t| prob.cost(t).unwrap(), 0.0, 6.0, 10_001);
    assert!(grid_min > 1.0 && grid_min < 2.0);
}

#[test]
fn root_function_domain() {
    let prob = gauss_problem(10, 3, 1.0);
    assert!(matches!(prob.root_function_h(0.0), Err(Error::Domain(_))));
    assert!(gauss_problem(4, 4, 1.0).root_function_h(1.0).is_err());
}

/// Folded-cdf inverse computed by bisection on a quadrature of the density.
fn oracle_inverse_folded_cdf(sigma: f64, q: f64) -> f64 {
    bisect(
        |t| 2.0 * simpson(&|x| gaussian_pdf(sigma, x), 0.0, t, 1e-15) - q,
        0.0,
        40.0 * sigma,
    )
}

#[test]
fn bracket_for_reference_instance() {
    let prob = gauss_problem(1000, 100, 1.0);
    let b = prob.bracket(3.0).unwrap();
    assert!((b.lo - 1.6449).abs() < 1e-3);
    assert!((b.lo - oracle_inverse_folded_cdf(1.0, 0.9)).abs() < 1e-9);
    let q = 1.0 - (100.0 - 3.0 * 200f64.sqrt()) / 999.0;
    assert!((b.hi - oracle_inverse_folded_cdf(1.0, q)).abs() < 1e-9);
    assert_eq!(b.expansions, 0);
}

#[test]
fn bracket_expands_when_the_formula_leaves_the_unit_interval() {
    // k - s sqrt(2k) < 0: the upper formula is unusable
    let prob = gauss_problem(10, 2, 1.0);
    let b = prob.bracket(3.0).unwrap();
    assert!(b.lo < b.hi);
    assert!(prob.root_function_h(b.hi).unwrap() >= 0.0);
}

#[test]
fn degenerate_capacity() {
    let sol = gauss_problem(7, 7, 2.0).optimal_threshold(1e-9).unwrap();
    assert_eq!((sol.t_star, sol.j_star), (0.0, 0.0));
    assert!(sol.bracket.is_none());
}

#[test]
fn optimum_matches_grid_search() {
    let prob = gauss_problem(2, 1, 1.0);
    let sol = prob.optimal_threshold(1e-12).unwrap();
    let (t_grid, h) = grid_argmin(|t| prob.cost(t).unwrap(), 0.0, 6.0, 100_000);
    assert!((sol.t_star - t_grid).abs() <= h, "{} vs {t_grid}", sol.t_star);
    assert!((sol.j_star - prob.cost(sol.t_star).unwrap()).abs() < 1e-15);

    let prob = gauss_problem(1000, 100, 1.0);
    let sol = prob.optimal_threshold(1e-10).unwrap();
    let b = sol.bracket.unwrap();
    assert!(sol.t_star > 1.6449 && sol.t_star < b.hi);
    let (t_grid, h) = grid_argmin(|t| prob.cost(t).unwrap(), b.lo, b.hi, 20_000);
    assert!((sol.t_star - t_grid).abs() <= h);
}

#[test]
fn cost_is_unimodal_around_the_optimum() {
    let mut rng = SplitMix(99);
    for _ in 0..25 {
        let n = rng.range(2, 400);
        let k = rng.range(1, n - 1);
        let sigma = 0.1 + 9.9 * rng.uniform();
        let prob = gauss_problem(n, k, sigma);
        let sol = prob.optimal_threshold(1e-10).unwrap();
        let hi = sol.bracket.unwrap().hi;
        let mut prev = f64::INFINITY;
        for j in 0..=200 {
            let t = sol.t_star * j as f64 / 200.0;
            let c = prob.cost(t).unwrap();
            assert!(c <= prev + 1e-13, "n={n} k={k}: not decreasing before T*");
            prev = c;
        }
        let mut prev = sol.j_star;
        for j in 1..=200 {
            let t = sol.t_star + 2.0 * (hi - sol.t_star + sigma) * j as f64 / 200.0;
            let c = prob.cost(t).unwrap();
            assert!(c >= prev - 1e-13, "n={n} k={k}: not increasing after T*");
            prev = c;
        }
    }
}

#[test]
fn invalid_problems_are_rejected() {
    let d = SymmetricDistribution::gaussian(1.0).unwrap();
    assert!(ThresholdProblem::new(0, 0, d).is_err());
    assert!(ThresholdProblem::new(5, 0, d).is_err());
    assert!(ThresholdProblem::new(5, 6, d).is_err());
    let prob = ThresholdProblem::new(5, 2, d).unwrap();
    assert!(prob.cost(-1.0).is_err());
    assert!(prob.optimal_threshold(0.0).is_err());
}

#[test]
fn log_ratio_tracks_the_root_function_beyond_overflow() {
    let prob = ThresholdProblem::new(1280, 313, SymmetricDistribution::gaussian(1.0).unwrap()).unwrap();
    let t_star = prob.optimal_threshold(1e-12).unwrap().t_star;
    let mut last = f64::NEG_INFINITY;
    let mut overflowed = false;
    for j in 1..=400 {
        let t = 0.01 * j as f64;
        let h = prob.root_function_h(t).unwrap();
        let r = prob.root_function_log_ratio(t).unwrap();
        assert!(r.is_finite() && r > last, "t={t}");
        assert_eq!(h < 0.0, r < 0.0, "t={t}");
        assert_eq!(r < 0.0, t < t_star, "t={t}");
        overflowed |= h == f64::INFINITY;
        last = r;
    }
    assert!(overflowed, "the example should exercise the overflow regime");
}
