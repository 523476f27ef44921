mod common;

use common::{random_distribution, random_loss, rng};
use msdro_core::oracle::{default_radius, dual_dimension, ellipsoid_solve, moreau_envelope, separation_oracle, Separation};
use msdro_core::{worst_case_value, AmbiguitySpec, DiscreteDistribution, GroundCost, PiecewiseAffineLoss, Polyhedron};
use rand::Rng;

fn ellipsoid_instance(seed: u64) -> (AmbiguitySpec, PiecewiseAffineLoss, Polyhedron) {
    let mut r = rng(seed);
    let d = r.random_range(1..=2);
    let (n1, n2) = (r.random_range(1..=3), r.random_range(1..=3));
    let p1 = random_distribution(&mut r, n1, d);
    let p2 = random_distribution(&mut r, n2, d);
    let w = msdro_core::wasserstein_distance(&p1, &p2, msdro_core::Norm::L1, 1).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p1, 0.6 * w + 0.1), (p2, 0.6 * w + 0.1)]).unwrap();
    let pieces = r.random_range(1..=3);
    let loss = random_loss(&mut r, pieces, d);
    (amb, loss, Polyhedron::unit_box(d))
}

#[test]
fn envelope_of_linear_loss_over_box() {
    // max_{xi in [0,1]} 2 xi - lambda |xi - 0.25| is attained at 1 when lambda < 2
    let loss = PiecewiseAffineLoss::affine(vec![2.0], 0.0);
    let anchor: [&[f64]; 1] = [&[0.25]];
    let support = Polyhedron::unit_box(1);
    let env = moreau_envelope(&[1.0], &anchor, &loss, &support, &GroundCost::L1).unwrap();
    assert!((env.value - (2.0 - 0.75)).abs() < 1e-12);
    let env = moreau_envelope(&[3.0], &anchor, &loss, &support, &GroundCost::L1).unwrap();
    assert!((env.value - 0.5).abs() < 1e-12);
    let free = Polyhedron::free();
    let env = moreau_envelope(&[1.0], &anchor, &loss, &free, &GroundCost::L1).unwrap();
    assert!(!env.is_finite());
    assert!(env.halfspace.is_some());
}

#[test]
fn envelope_matches_brute_force_grid() {
    let mut r = rng(21);
    for _ in 0..20 {
        let loss = random_loss(&mut r, 2, 2);
        let a1 = [r.random::<f64>(), r.random::<f64>()];
        let a2 = [r.random::<f64>(), r.random::<f64>()];
        let lambda = [r.random_range(0.0..3.0), r.random_range(0.0..3.0)];
        let anchors: [&[f64]; 2] = [&a1, &a2];
        let support = Polyhedron::unit_box(2);
        let env = moreau_envelope(&lambda, &anchors, &loss, &support, &GroundCost::L1).unwrap();
        let objective =
            |x: &[f64]| loss.eval(x) - lambda[0] * GroundCost::L1.eval(x, &a1) - lambda[1] * GroundCost::L1.eval(x, &a2);
        let mut best = f64::NEG_INFINITY;
        // maximizers sit at breakpoints: box ends or anchor coordinates
        let cands: Vec<Vec<f64>> = (0..2).map(|i| vec![0.0, 1.0, a1[i], a2[i]]).collect();
        for &x in &cands[0] {
            for &y in &cands[1] {
                best = best.max(objective(&[x, y]));
            }
        }
        assert!((env.value - best).abs() < 1e-10, "{} vs {best}", env.value);
        let xm = env.maximizer.unwrap();
        assert!((objective(&xm) - env.value).abs() < 1e-10);
    }
}

#[test]
fn linf_envelope_against_grid() {
    let mut r = rng(22);
    let cost = GroundCost::NormPower { norm: msdro_core::Norm::Linf, p: 1 };
    for _ in 0..10 {
        let loss = random_loss(&mut r, 2, 2);
        let a = [r.random::<f64>(), r.random::<f64>()];
        let lambda = [r.random_range(0.0..3.0)];
        let anchors: [&[f64]; 1] = [&a];
        let support = Polyhedron::unit_box(2);
        let env = moreau_envelope(&lambda, &anchors, &loss, &support, &cost).unwrap();
        let mut best = f64::NEG_INFINITY;
        let steps = 200;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = [i as f64 / steps as f64, j as f64 / steps as f64];
                best = best.max(loss.eval(&x) - lambda[0] * cost.eval(&x, &a));
            }
        }
        assert!(env.value >= best - 1e-10);
        assert!(env.value <= best + 0.05, "{} vs {best}", env.value);
    }
}

#[test]
fn separation_cut_excludes_the_query() {
    let (amb, loss, support) = ellipsoid_instance(3);
    let dim = dual_dimension(&amb);
    let point = vec![0.0; dim];
    match separation_oracle(&point, &amb, &loss, &support).unwrap() {
        Separation::Inside => {}
        Separation::Cut(h) => {
            assert!(!h.contains(&point, 1e-12));
            // the optimal dual point is on the feasible side
            let opt = worst_case_value(&amb, &loss, &support).unwrap();
            assert!(h.contains(&opt.flatten(), 1e-7));
        }
    }
    let mut neg = vec![1.0; dim];
    neg[0] = -1.0;
    assert!(matches!(separation_oracle(&neg, &amb, &loss, &support).unwrap(), Separation::Cut(_)));
}

#[test]
fn ellipsoid_agrees_with_lp() {
    for seed in 0..4 {
        let (amb, loss, support) = ellipsoid_instance(50 + seed);
        assert!(dual_dimension(&amb) <= 8);
        let lp = worst_case_value(&amb, &loss, &support).unwrap();
        let radius = default_radius(&lp.flatten());
        let out = ellipsoid_solve(&amb, &loss, &support, radius, 1e-3).unwrap();
        assert!((out.value - lp.value).abs() <= 1e-3, "seed {seed}: {} vs {}", out.value, lp.value);
        assert!(out.lower_bound <= lp.value + 1e-9);
        assert!(out.log_det_history.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn ellipsoid_reports_unbounded_objective_when_sets_are_disjoint() {
    let p = DiscreteDistribution::dirac(vec![0.0]).unwrap();
    let q = DiscreteDistribution::dirac(vec![1.0]).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p, 0.2), (q, 0.2)]).unwrap();
    let loss = PiecewiseAffineLoss::affine(vec![1.0], 0.0);
    let err = ellipsoid_solve(&amb, &loss, &Polyhedron::unit_box(1), 20.0, 1e-3).unwrap_err();
    assert!(matches!(err, msdro_core::Error::UnboundedObjective(_) | msdro_core::Error::IterationBudgetExceeded(_)), "{err:?}");
}
