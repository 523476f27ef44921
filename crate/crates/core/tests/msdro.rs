mod common;

use common::{close, random_instance};
use msdro_core::msdro::{build_dual_lp, feasible_dual_point, grid_primal_value, worst_case_distribution_with};
use msdro_core::oracle::{separation_oracle, Separation};
use msdro_core::{
    worst_case_value, worst_case_value_with, AmbiguitySpec, DecisionLoss, DecisionPiece, DiscreteDistribution, Error, GroundCost,
    Method, MsdroOptions, PiecewiseAffineLoss, Polyhedron,
};

fn dirac(x: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::dirac(x.to_vec()).unwrap()
}

#[test]
fn zero_radius_gives_sample_average() {
    let p = DiscreteDistribution::new(vec![vec![0.2, 0.4], vec![0.9, 0.1], vec![0.5, 0.5]], vec![0.2, 0.5, 0.3]).unwrap();
    let loss = PiecewiseAffineLoss::new(vec![(vec![1.0, -1.0], 0.0), (vec![-0.5, 2.0], 0.1)]).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p.clone(), 0.0)]).unwrap();
    let saa = p.expectation(|x| loss.eval(x));
    for method in [Method::Direct, Method::ColumnGeneration] {
        let v = worst_case_value_with(&amb, &loss, &Polyhedron::free(), &MsdroOptions::with_method(method)).unwrap();
        assert!((v.value - saa).abs() < 1e-8, "{method:?}: {} vs {saa}", v.value);
    }
}

#[test]
fn single_ball_linear_loss_closed_form() {
    // sup over an l1 ball of <a, xi> adds eps * ||a||_inf
    let p = DiscreteDistribution::uniform(vec![vec![0.0, 1.0], vec![2.0, -1.0]]).unwrap();
    let a = vec![0.7, -1.3];
    let loss = PiecewiseAffineLoss::affine(a.clone(), 0.25);
    for eps in [0.0, 0.1, 1.0, 3.5] {
        let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p.clone(), eps)]).unwrap();
        let expected = p.expectation(|x| loss.eval(x)) + eps * 1.3;
        for method in [Method::Direct, Method::ColumnGeneration] {
            let v = worst_case_value_with(&amb, &loss, &Polyhedron::free(), &MsdroOptions::with_method(method)).unwrap();
            assert!((v.value - expected).abs() < 1e-8, "{method:?} eps {eps}: {} vs {expected}", v.value);
        }
    }
}

#[test]
fn linf_cost_uses_l1_dual_norm() {
    let p = DiscreteDistribution::dirac(vec![0.0, 0.0]).unwrap();
    let loss = PiecewiseAffineLoss::affine(vec![0.7, -1.3], 0.0);
    let cost = GroundCost::NormPower { norm: msdro_core::Norm::Linf, p: 1 };
    let amb = AmbiguitySpec::new(cost, vec![(p, 0.5)]).unwrap();
    for method in [Method::Direct, Method::ColumnGeneration] {
        let v = worst_case_value_with(&amb, &loss, &Polyhedron::free(), &MsdroOptions::with_method(method)).unwrap();
        assert!((v.value - 0.5 * 2.0).abs() < 1e-8, "{method:?}: {}", v.value);
    }
}

#[test]
fn identical_centers_reduce_to_smallest_ball() {
    let p = DiscreteDistribution::uniform(vec![vec![0.1], vec![0.8]]).unwrap();
    let loss = PiecewiseAffineLoss::new(vec![(vec![1.0], 0.0), (vec![-2.0], 0.5)]).unwrap();
    let support = Polyhedron::unit_box(1);
    let both = AmbiguitySpec::new(GroundCost::L1, vec![(p.clone(), 0.3), (p.clone(), 0.1)]).unwrap();
    let single = AmbiguitySpec::new(GroundCost::L1, vec![(p, 0.1)]).unwrap();
    let a = worst_case_value(&both, &loss, &support).unwrap().value;
    let b = worst_case_value(&single, &loss, &support).unwrap().value;
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
}

#[test]
fn two_diracs_meet_in_the_middle() {
    // balls of radius 1/2 around 0 and 1 intersect only at the Dirac at 1/2
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(dirac(&[0.0]), 0.5), (dirac(&[1.0]), 0.5)]).unwrap();
    let loss = PiecewiseAffineLoss::affine(vec![1.0], 0.0);
    for method in [Method::Direct, Method::ColumnGeneration] {
        let opts = MsdroOptions::with_method(method);
        let v = worst_case_value_with(&amb, &loss, &Polyhedron::free(), &opts).unwrap();
        assert!((v.value - 0.5).abs() < 1e-8, "{method:?}: {}", v.value);
        let wc = worst_case_distribution_with(&amb, &loss, &Polyhedron::free(), &opts).unwrap();
        assert!((wc.distribution.mean()[0] - 0.5).abs() < 1e-6);
    }
}

#[test]
fn disjoint_balls_yield_certificate() {
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(dirac(&[0.0]), 0.3), (dirac(&[1.0]), 0.3)]).unwrap();
    let loss = PiecewiseAffineLoss::affine(vec![1.0], 0.0);
    for method in [Method::Direct, Method::ColumnGeneration] {
        let err = worst_case_value_with(&amb, &loss, &Polyhedron::free(), &MsdroOptions::with_method(method)).unwrap_err();
        match err {
            Error::IntersectionEmpty(cert) => {
                assert!(cert.slope < 0.0);
                assert!(cert.validate(&amb, &loss, &Polyhedron::free()).unwrap(), "{method:?}: {cert:?}");
            }
            other => panic!("{method:?}: unexpected {other:?}"),
        }
    }
}

#[test]
fn value_nondecreasing_in_radius() {
    for seed in 0..8 {
        let inst = random_instance(seed);
        let support = Polyhedron::unit_box(inst.d);
        let mut last = f64::NEG_INFINITY;
        for scale in [1.0, 1.5, 2.0, 4.0] {
            let radii: Vec<f64> = inst.amb.radii().iter().map(|r| r * scale).collect();
            let v = worst_case_value(&inst.amb.with_radii(&radii), &inst.loss, &support).unwrap().value;
            assert!(v >= last - 1e-8, "seed {seed}: {v} < {last}");
            last = v;
        }
    }
}

#[test]
fn invariant_under_source_permutation_and_loss_scaling() {
    for seed in 0..8 {
        let inst = random_instance(100 + seed);
        let support = Polyhedron::unit_box(inst.d);
        let base = worst_case_value(&inst.amb, &inst.loss, &support).unwrap().value;
        let mut reversed = inst.amb.clone();
        reversed.sources.reverse();
        let v = worst_case_value(&reversed, &inst.loss, &support).unwrap().value;
        assert!(close(base, v, 1e-8), "seed {seed}: {base} vs {v}");
        let scaled = worst_case_value(&inst.amb, &inst.loss.scaled(3.0), &support).unwrap().value;
        assert!(close(3.0 * base, scaled, 1e-8), "seed {seed}: {scaled} vs 3 x {base}");
    }
}

#[test]
fn direct_and_column_generation_agree() {
    for seed in 0..20 {
        let inst = random_instance(200 + seed);
        let support = Polyhedron::unit_box(inst.d);
        let direct = worst_case_value_with(&inst.amb, &inst.loss, &support, &MsdroOptions::with_method(Method::Direct)).unwrap();
        let cg =
            worst_case_value_with(&inst.amb, &inst.loss, &support, &MsdroOptions::with_method(Method::ColumnGeneration)).unwrap();
        assert!(close(direct.value, cg.value, 1e-7), "seed {seed}: {} vs {}", direct.value, cg.value);
        // both dual points are feasible and attain their value
        for dual in [&direct, &cg] {
            assert!(close(dual.objective(&inst.amb), dual.value, 1e-7));
            let sep =
                msdro_core::oracle::separation_oracle_with_tol(&dual.flatten(), &inst.amb, &inst.loss, &support, 1e-6).unwrap();
            assert_eq!(sep, Separation::Inside, "seed {seed}");
        }
    }
}

#[test]
fn grid_value_bounded_by_dual() {
    for seed in 0..6 {
        let inst = random_instance(300 + seed);
        let support = Polyhedron::unit_box(inst.d);
        let dual = worst_case_value(&inst.amb, &inst.loss, &support).unwrap().value;
        let lo = vec![0.0; inst.d];
        let hi = vec![1.0; inst.d];
        let primal = grid_primal_value(&inst.amb, &inst.loss, &lo, &hi, 1.0 / 16.0).unwrap().unwrap();
        assert!(primal <= dual + 1e-8, "seed {seed}: {primal} > {dual}");
    }
}

#[test]
fn worst_case_distribution_is_feasible_and_sparse() {
    for seed in 0..20 {
        let inst = random_instance(400 + seed);
        let support = Polyhedron::unit_box(inst.d);
        for method in [Method::Direct, Method::ColumnGeneration] {
            let wc = worst_case_distribution_with(&inst.amb, &inst.loss, &support, &MsdroOptions::with_method(method)).unwrap();
            assert!(wc.distribution.len() <= wc.support_bound, "seed {seed}");
            for (used, s) in wc.budgets_used.iter().zip(&inst.amb.sources) {
                assert!(*used <= s.radius + 1e-6, "seed {seed}: budget {used} > {}", s.radius);
            }
            assert!(
                (wc.expected_loss - wc.dual_value).abs() <= 1e-6,
                "seed {seed} {method:?}: {} vs {}",
                wc.expected_loss,
                wc.dual_value
            );
            assert!(wc.distribution.atoms().iter().all(|x| support.contains(x, 1e-9)));
        }
    }
}

#[test]
fn unbounded_support_worst_case_uses_far_atoms() {
    // without a support bound the worst case pushes a sliver of mass far out
    let p = DiscreteDistribution::uniform(vec![vec![0.0], vec![1.0]]).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p, 0.4)]).unwrap();
    let loss = PiecewiseAffineLoss::affine(vec![2.0], 1.0);
    let wc = worst_case_distribution_with(&amb, &loss, &Polyhedron::free(), &MsdroOptions::default()).unwrap();
    assert!((wc.dual_value - (2.0 + 0.8)).abs() < 1e-8);
    assert!((wc.expected_loss - wc.dual_value).abs() < 1e-6);
    assert!(wc.budgets_used[0] <= 0.4 + 1e-6);
}

#[test]
fn feasible_point_passes_oracle() {
    for seed in 0..5 {
        let inst = random_instance(500 + seed);
        let support = Polyhedron::unit_box(inst.d);
        let point = feasible_dual_point(&inst.amb, &inst.loss, &support).unwrap();
        assert_eq!(separation_oracle(&point, &inst.amb, &inst.loss, &support).unwrap(), Separation::Inside);
    }
}

#[test]
fn dual_lp_layout_is_consistent() {
    let inst = random_instance(7);
    let (model, layout) = build_dual_lp(&inst.amb, &inst.loss, &Polyhedron::unit_box(inst.d)).unwrap();
    assert_eq!(model.num_rows(), layout.num_rows());
    assert_eq!(model.num_vars(), layout.num_cols());
}

#[test]
fn decision_problem_with_singleton_set_matches_fixed_loss() {
    // theta is pinned to (0.3) by the decision set
    let p = DiscreteDistribution::uniform(vec![vec![0.2], vec![0.6]]).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p, 0.2)]).unwrap();
    let loss = DecisionLoss {
        num_decisions: 1,
        pieces: vec![
            DecisionPiece { a_theta: vec![vec![1.0]], a0: vec![0.5], beta: vec![0.0], b0: 0.0 },
            DecisionPiece { a_theta: vec![vec![0.0]], a0: vec![-1.0], beta: vec![2.0], b0: 0.1 },
        ],
    };
    let decisions = Polyhedron::bounds(&[0.3], &[0.3]);
    let support = Polyhedron::unit_box(1);
    let fixed = loss.at(&[0.3]);
    let expected = worst_case_value(&amb, &fixed, &support).unwrap().value;
    for method in [Method::Direct, Method::ColumnGeneration] {
        let sol =
            msdro_core::msdro::solve_msdro_with(&amb, &loss, &decisions, &support, &MsdroOptions::with_method(method)).unwrap();
        assert!((sol.theta[0] - 0.3).abs() < 1e-9);
        assert!((sol.value - expected).abs() < 1e-8, "{method:?}: {} vs {expected}", sol.value);
    }
}

#[test]
fn decision_problem_methods_agree() {
    // newsvendor-like loss max(theta - xi, 2 (xi - theta)) over theta in [0, 1]
    let p = DiscreteDistribution::uniform(vec![vec![0.1], vec![0.4], vec![0.9]]).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p, 0.1)]).unwrap();
    let loss = DecisionLoss {
        num_decisions: 1,
        pieces: vec![
            DecisionPiece { a_theta: vec![vec![0.0]], a0: vec![-1.0], beta: vec![1.0], b0: 0.0 },
            DecisionPiece { a_theta: vec![vec![0.0]], a0: vec![2.0], beta: vec![-2.0], b0: 0.0 },
        ],
    };
    let decisions = Polyhedron::unit_box(1);
    let support = Polyhedron::unit_box(1);
    let direct =
        msdro_core::msdro::solve_msdro_with(&amb, &loss, &decisions, &support, &MsdroOptions::with_method(Method::Direct))
            .unwrap();
    let cg = msdro_core::msdro::solve_msdro_with(
        &amb,
        &loss,
        &decisions,
        &support,
        &MsdroOptions::with_method(Method::ColumnGeneration),
    )
    .unwrap();
    assert!((direct.value - cg.value).abs() < 1e-7, "{} vs {}", direct.value, cg.value);
    // the decision attains the value when re-evaluated as a fixed loss
    for sol in [&direct, &cg] {
        let v = worst_case_value(&amb, &loss.at(&sol.theta), &support).unwrap().value;
        assert!((v - sol.value).abs() < 1e-7, "{v} vs {}", sol.value);
    }
}

#[test]
fn decision_problem_free_support_large_radii_methods_agree() {
    // mean-CVaR style portfolio over the simplex in three assets with an
    // unbounded support, where pricing must keep finding fresh rays
    let d = 3;
    let (rho, eta) = (10.0, 0.2);
    let p1 =
        DiscreteDistribution::uniform(vec![vec![0.02, 0.01, -0.03], vec![-0.01, 0.04, 0.0], vec![0.03, -0.02, 0.01]]).unwrap();
    let p2 = DiscreteDistribution::uniform(vec![vec![0.01, 0.0, 0.02], vec![0.05, -0.01, -0.02]]).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p1, 0.5), (p2, 0.6)]).unwrap();
    let mut pieces = Vec::new();
    for (a, b) in [(-1.0, rho), (-1.0 - rho / eta, rho * (1.0 - 1.0 / eta))] {
        let mut a_theta = vec![vec![0.0; d + 1]; d];
        for (i, row) in a_theta.iter_mut().enumerate() {
            row[i] = a;
        }
        let mut beta = vec![0.0; d + 1];
        beta[d] = b;
        pieces.push(DecisionPiece { a_theta, a0: vec![0.0; d], beta, b0: 0.0 });
    }
    let loss = DecisionLoss { num_decisions: d + 1, pieces };
    let mut c = Vec::new();
    let mut g = Vec::new();
    for i in 0..d {
        let mut row = vec![0.0; d + 1];
        row[i] = -1.0;
        c.push(row);
        g.push(0.0);
    }
    c.push((0..=d).map(|j| if j < d { 1.0 } else { 0.0 }).collect());
    g.push(1.0);
    c.push((0..=d).map(|j| if j < d { -1.0 } else { 0.0 }).collect());
    g.push(-1.0);
    let decisions = Polyhedron::new(c, g).unwrap();
    let support = Polyhedron::free();
    let direct =
        msdro_core::msdro::solve_msdro_with(&amb, &loss, &decisions, &support, &MsdroOptions::with_method(Method::Direct))
            .unwrap();
    let cg = msdro_core::msdro::solve_msdro_with(
        &amb,
        &loss,
        &decisions,
        &support,
        &MsdroOptions::with_method(Method::ColumnGeneration),
    )
    .unwrap();
    assert!((direct.value - cg.value).abs() < 1e-6 * (1.0 + direct.value.abs()), "{} vs {}", direct.value, cg.value);
    // with large radii every asset carries the same weight
    for sol in [&direct, &cg] {
        for i in 0..d {
            assert!((sol.theta[i] - 1.0 / 3.0).abs() < 1e-6, "{:?}", sol.theta);
        }
    }
}
