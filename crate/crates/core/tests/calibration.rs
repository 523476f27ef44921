mod common;

use common::{random_distribution, rng};
use msdro_core::calibration::{
    bayesian_beta, bayesian_beta_with_grid, eps_prior_only, fit_concentration, prior_exceedance, scenario_radii,
    DEFAULT_GRID_POINTS,
};
use msdro_core::{beta, eps_bayesian, eps_for_beta, ConcentrationParams, Error, Norm, Prior, Scenario};
use rand::Rng;

fn params() -> ConcentrationParams {
    ConcentrationParams::new(5.0, 1.0, 1.0, 5.0, 2.0).unwrap()
}

#[test]
fn round_trip_over_random_levels() {
    let mut r = rng(1);
    for _ in 0..100 {
        let p = ConcentrationParams::new(r.random_range(3.0..8.0), r.random_range(0.5..3.0), r.random_range(0.1..2.0), 3.0, 1.0)
            .unwrap();
        let target = r.random_range(1e-4..0.5f64).min(p.c1 * 0.999);
        let n = r.random_range(1..500) as f64;
        let eps = eps_for_beta(target, n, &p).unwrap();
        assert!((beta(eps, n, &p).unwrap() - target).abs() < 1e-10, "{p:?} beta {target} N {n} eps {eps}");
    }
}

#[test]
fn beta_examples() {
    let p = params();
    assert_eq!(beta(0.0, 10.0, &p).unwrap(), 1.0);
    // eps <= 1 uses exponent max(d / p, 2) = 2.5, eps > 1 uses a / p = 2.5
    assert!((beta(0.5, 4.0, &p).unwrap() - (-4.0 * 0.5f64.powf(2.5)).exp()).abs() < 1e-15);
    let q = ConcentrationParams::new(6.0, 2.0, 0.5, 3.0, 1.0).unwrap();
    assert!((beta(0.5, 40.0, &q).unwrap() - 2.0 * (-0.5 * 40.0 * 0.125f64).exp()).abs() < 1e-15);
    assert!((beta(2.0, 10.0, &q).unwrap() - 2.0 * (-0.5 * 10.0 * 64.0f64).exp()).abs() < 1e-300);
    let low = ConcentrationParams::new(6.0, 0.5, 0.5, 3.0, 1.0).unwrap();
    assert_eq!(eps_for_beta(0.9, 10.0, &low).unwrap(), 0.0);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(matches!(ConcentrationParams::new(1.0, 1.0, 1.0, 2.0, 2.0), Err(Error::InvalidParams(_))));
    assert!(matches!(ConcentrationParams::new(5.0, 1.0, 1.0, 4.0, 2.0), Err(Error::InvalidParams(_))));
    assert!(matches!(eps_for_beta(0.0, 5.0, &params()), Err(Error::PreconditionViolated(_))));
    assert!(matches!(beta(-1.0, 5.0, &params()), Err(Error::PreconditionViolated(_))));
    assert!(matches!(bayesian_beta(0.1, 0.5, 5.0, 5.0, &Prior::None, 1.0, &params()), Err(Error::PreconditionViolated(_))));
}

fn priors() -> Vec<Prior> {
    vec![
        Prior::Dirac { r: 0.4 },
        Prior::Gaussian { mean: 0.5, sd: 0.3 },
        Prior::Table { r: vec![0.0, 0.3, 0.8, 1.5], f: vec![0.0, 0.2, 0.7, 1.0] },
        Prior::None,
    ]
}

#[test]
fn bayesian_level_is_nonincreasing() {
    let p = params();
    let r_hat = 0.3;
    for prior in priors() {
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let eps = r_hat + 3.0 * i as f64 / 49.0;
            let b = bayesian_beta(eps, r_hat, 5.0, 50.0, &prior, 1.0, &p).unwrap();
            assert!(b <= last + 1e-12, "{prior:?} eps {eps}: {b} > {last}");
            assert!((0.0..=1.0).contains(&b));
            last = b;
        }
    }
}

#[test]
fn dirac_prior_collapses_to_point_evaluation() {
    let p = params();
    for eps in [0.5, 0.8, 1.3, 2.0] {
        let got = prior_exceedance(eps, 50.0, &Prior::Dirac { r: 0.4 }, &p, DEFAULT_GRID_POINTS).unwrap();
        assert!((got - beta(eps - 0.4, 50.0, &p).unwrap()).abs() < 1e-15);
    }
    assert_eq!(prior_exceedance(0.3, 50.0, &Prior::Dirac { r: 0.4 }, &p, DEFAULT_GRID_POINTS).unwrap(), 1.0);
}

#[test]
fn quadrature_converges_under_refinement() {
    let p = params();
    let prior = Prior::Gaussian { mean: 0.5, sd: 0.3 };
    let fine = bayesian_beta_with_grid(1.4, 0.3, 5.0, 50.0, &prior, 1.0, &p, 20001).unwrap();
    let mut last_err = f64::INFINITY;
    for n in [51, 201, 801, 2001] {
        let err = (bayesian_beta_with_grid(1.4, 0.3, 5.0, 50.0, &prior, 1.0, &p, n).unwrap() - fine).abs();
        assert!(err <= last_err + 1e-15);
        last_err = err;
    }
    assert!(last_err < 1e-6);
}

#[test]
fn table_prior_against_exact_uniform() {
    // F uniform on [0, 1]: the integral is (1/1) int_0^eps beta(eps - r) dr
    let p = params();
    let prior = Prior::Table { r: vec![0.0, 1.0], f: vec![0.0, 1.0] };
    let eps = 0.8;
    let steps = 200_000;
    let exact: f64 = (0..steps)
        .map(|i| {
            let r = (i as f64 + 0.5) * eps / steps as f64;
            beta(eps - r, 50.0, &p).unwrap()
        })
        .sum::<f64>()
        * eps
        / steps as f64
        + (1.0 - eps);
    let got = prior_exceedance(eps, 50.0, &prior, &p, DEFAULT_GRID_POINTS).unwrap();
    assert!((got - exact).abs() < 1e-6, "{got} vs {exact}");
}

#[test]
fn stronger_prior_gives_smaller_normalized_level() {
    let p = params();
    let r_hat = 3.0;
    let curve = |prior: &Prior| -> Vec<f64> {
        let at = |eps: f64| bayesian_beta(eps, r_hat, 5.0, 50.0, prior, 1.0, &p).unwrap();
        let base = at(r_hat);
        (0..60).map(|i| at(r_hat + 2.0 * i as f64 / 59.0) / base).collect()
    };
    let strong = curve(&Prior::Gaussian { mean: r_hat, sd: 0.2f64.sqrt() });
    let weak = curve(&Prior::Gaussian { mean: r_hat, sd: 0.5f64.sqrt() });
    let none = curve(&Prior::None);
    for i in 0..strong.len() {
        assert!(strong[i] <= weak[i] + 1e-12 && weak[i] <= none[i] + 1e-12, "{i}: {} {} {}", strong[i], weak[i], none[i]);
    }
    assert!(strong[30] < none[30]);
}

#[test]
fn bayesian_radius_hits_target() {
    let p = params();
    for prior in priors() {
        let eps = eps_bayesian(0.05, 0.3, 5.0, 50.0, &prior, 1.0, &p).unwrap();
        let b = bayesian_beta(eps, 0.3, 5.0, 50.0, &prior, 1.0, &p).unwrap();
        assert!(b <= 0.05 + 1e-12 && b > 0.05 - 1e-6, "{prior:?}: {b}");
    }
    assert_eq!(eps_bayesian(1.0, 0.3, 5.0, 50.0, &Prior::None, 1.0, &p).unwrap(), 0.3);
}

#[test]
fn scenario_radii_examples() {
    let p = params();
    let r = scenario_radii(&Scenario::KnownDistances { r: vec![0.1, 0.2] }, &p).unwrap();
    assert_eq!(r, vec![0.1, 0.2]);
    let r =
        scenario_radii(&Scenario::KnownShifts { r: vec![0.0, 0.5], betas: vec![0.05, 0.05], n: vec![10.0, 100.0] }, &p).unwrap();
    assert!((r[0] - eps_for_beta(0.05, 10.0, &p).unwrap()).abs() < 1e-15);
    assert!((r[1] - 0.5 - eps_for_beta(0.05, 100.0, &p).unwrap()).abs() < 1e-15);

    let mut g = rng(3);
    let samples = vec![random_distribution(&mut g, 5, 2), random_distribution(&mut g, 8, 2)];
    let r = scenario_radii(&Scenario::Empirical { samples: samples.clone(), beta1: 0.1, norm: Norm::L1, order: 1 }, &p).unwrap();
    let w = msdro_core::wasserstein_distance(&samples[0], &samples[1], Norm::L1, 1).unwrap();
    assert!((r[1] - r[0] - w).abs() < 1e-12);

    let prior = Prior::Gaussian { mean: 0.4, sd: 0.2 };
    let r = scenario_radii(
        &Scenario::Bayesian {
            r_hat: vec![0.0, 0.4],
            betas: vec![0.1, 0.1],
            n: vec![5.0, 50.0],
            priors: vec![Prior::None, prior.clone()],
            evidence: vec![1.0, 1.0],
        },
        &p,
    )
    .unwrap();
    assert!((r[1] - eps_bayesian(0.1, 0.4, 5.0, 50.0, &prior, 1.0, &p).unwrap()).abs() < 1e-15);

    let r = scenario_radii(&Scenario::PriorOnly { betas: vec![0.1], n: vec![50.0], priors: vec![prior.clone()] }, &p).unwrap();
    let level = prior_exceedance(r[0], 50.0, &prior, &p, DEFAULT_GRID_POINTS).unwrap();
    assert!(level <= 0.1 + 1e-12 && level > 0.1 - 1e-6);
    assert_eq!(r[0], eps_prior_only(0.1, 50.0, &prior, &p).unwrap());
}

#[test]
fn union_bound_covers_monte_carlo_exceedance() {
    // one-dimensional uniform data: the empirical W1 distance to the truth
    // concentrates; a fitted bound must dominate the observed frequencies
    let base = ConcentrationParams::new(4.0, 1.0, 1.0, 1.0, 1.0).unwrap();
    let mut g = rng(5);
    let mut obs = Vec::new();
    for &n in &[10usize, 40] {
        for &eps in &[0.05, 0.1, 0.15] {
            let runs = 400;
            let mut hits = 0;
            for _ in 0..runs {
                let mut xs: Vec<f64> = (0..n).map(|_| g.random::<f64>()).collect();
                xs.sort_by(|a, b| a.total_cmp(b));
                // W1 to U[0,1] is the integral of |F_n - F|
                let mut w = 0.0;
                let mut prev = 0.0;
                for (i, &x) in xs.iter().chain(std::iter::once(&1.0)).enumerate() {
                    let f = i as f64 / n as f64;
                    let (a, b) = (prev, x);
                    // int_a^b |f - t| dt
                    let part = |lo: f64, hi: f64| if hi <= lo { 0.0 } else { (hi - lo) * (0.5 * (lo + hi) - f).abs() };
                    w += if f <= a || f >= b { part(a, b) } else { part(a, f) + part(f, b) };
                    prev = x;
                }
                if w > eps {
                    hits += 1;
                }
            }
            obs.push((eps, n as f64, hits as f64 / runs as f64));
        }
    }
    let (c1, c2) = fit_concentration(&obs, &base).unwrap();
    let fitted = ConcentrationParams { c1, c2, ..base };
    for &(eps, n, freq) in &obs {
        assert!(beta(eps, n, &fitted).unwrap() >= freq - 1e-12, "eps {eps} N {n}: {freq}");
    }
}
