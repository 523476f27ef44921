use msdro_apps::assortment::{assortment_solve, enumerate_supports, AssortmentSpec};
use msdro_core::{
    worst_case_value, AmbiguitySpec, DiscreteDistribution, GroundCost, MsdroOptions, PiecewiseAffineLoss, Polyhedron,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_spec(rng: &mut ChaCha8Rng, d: usize, capacity: usize) -> AssortmentSpec {
    let mut sources = Vec::new();
    for _ in 0..2 {
        let n = rng.random_range(1..=2);
        let atoms: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        sources.push(atoms);
    }
    let a = DiscreteDistribution::uniform(sources[0].clone()).unwrap();
    let b = DiscreteDistribution::uniform(sources[1].clone()).unwrap();
    let w = msdro_core::wasserstein_distance(&a, &b, msdro_core::Norm::L1, 1).unwrap();
    let share = rng.random_range(0.3..0.7);
    let slack = rng.random_range(0.0..3.0);
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(a, share * w + slack), (b, (1.0 - share) * w + slack)]).unwrap();
    let prices = (0..d).map(|_| rng.random_range(0.5..3.0)).collect();
    AssortmentSpec { prices, capacity, ambiguity: amb }
}

/// Worst-case revenue of one selection, computed from scratch.
fn revenue(spec: &AssortmentSpec, sel: &[usize]) -> f64 {
    let d = spec.prices.len();
    let a: Vec<f64> = (0..d).map(|i| if sel.contains(&i) { -spec.prices[i] } else { 0.0 }).collect();
    -worst_case_value(&spec.ambiguity, &PiecewiseAffineLoss::affine(a, 0.0), &Polyhedron::nonnegative(d)).unwrap().value
}

fn brute_force(spec: &AssortmentSpec) -> (Vec<Vec<usize>>, f64, usize) {
    let d = spec.prices.len();
    let mut all = vec![vec![]];
    for i in 0..d {
        all.push(vec![i]);
        for j in i + 1..d {
            all.push(vec![i, j]);
        }
    }
    let vals: Vec<f64> = all.iter().map(|s| revenue(spec, s)).collect();
    let best = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let winners = all.iter().zip(&vals).filter(|(_, v)| **v >= best - 1e-9).map(|(s, _)| s.clone()).collect();
    (winners, best, all.len())
}

#[test]
fn enumeration_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10 {
        let spec = random_spec(&mut rng, 6, 2);
        let (winners, best, count) = brute_force(&spec);
        assert_eq!(count, 22);
        let sol = assortment_solve(&spec).unwrap();
        assert_eq!(sol.supports_evaluated, 22);
        assert!(winners.contains(&sol.selection), "{:?} not in {winners:?}", sol.selection);
        assert!((sol.revenue - best).abs() < 1e-7 * (1.0 + best.abs()), "{} vs {best}", sol.revenue);
        let per_support = enumerate_supports(&spec, &MsdroOptions::default()).unwrap();
        assert!(winners.contains(&per_support.selection));
    }
}

#[test]
fn zero_radius_picks_top_products() {
    let xi = vec![4.0, 1.0, 3.0, 2.0, 5.0];
    let prices = vec![1.0, 6.0, 1.0, 1.0, 1.5];
    // p * xi = 4, 6, 3, 2, 7.5
    let p = DiscreteDistribution::dirac(xi).unwrap();
    let amb = AmbiguitySpec::new(GroundCost::L1, vec![(p.clone(), 0.0), (p, 0.0)]).unwrap();
    let sol = assortment_solve(&AssortmentSpec { prices, capacity: 2, ambiguity: amb }).unwrap();
    assert_eq!(sol.selection, vec![1, 4]);
    assert!((sol.revenue - 13.5).abs() < 1e-9);
}

#[test]
fn full_capacity_selects_everything() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut spec = random_spec(&mut rng, 4, 4);
    spec.prices = vec![1.0, 2.0, 0.5, 1.5];
    let sol = assortment_solve(&spec).unwrap();
    assert_eq!(sol.selection, vec![0, 1, 2, 3]);
}

#[test]
fn rejects_capacity_above_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut spec = random_spec(&mut rng, 3, 2);
    spec.capacity = 4;
    assert!(assortment_solve(&spec).is_err());
}
