mod common;

use common::{random_distribution, rng};
use msdro_core::{ot_cost, wasserstein_distance, DiscreteDistribution, GroundCost, Norm};

#[test]
fn dirac_to_dirac() {
    let p = DiscreteDistribution::dirac(vec![0.0, 0.0]).unwrap();
    let q = DiscreteDistribution::dirac(vec![1.0, -2.0]).unwrap();
    assert!((wasserstein_distance(&p, &q, Norm::L1, 1).unwrap() - 3.0).abs() < 1e-12);
    assert!((wasserstein_distance(&p, &q, Norm::Linf, 1).unwrap() - 2.0).abs() < 1e-12);
    assert!((wasserstein_distance(&p, &q, Norm::L2, 2).unwrap() - 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn one_dimensional_matches_sorted_coupling() {
    let mut r = rng(1);
    for _ in 0..10 {
        let n = 5;
        let p = random_distribution(&mut r, n, 1);
        let q = random_distribution(&mut r, n, 1);
        let p = DiscreteDistribution::uniform(p.atoms().to_vec()).unwrap();
        let q = DiscreteDistribution::uniform(q.atoms().to_vec()).unwrap();
        let mut a: Vec<f64> = p.atoms().iter().map(|x| x[0]).collect();
        let mut b: Vec<f64> = q.atoms().iter().map(|x| x[0]).collect();
        a.sort_by(|x, y| x.total_cmp(y));
        b.sort_by(|x, y| x.total_cmp(y));
        let expected: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        assert!((wasserstein_distance(&p, &q, Norm::L1, 1).unwrap() - expected).abs() < 1e-10);
    }
}

#[test]
fn metric_properties() {
    let mut r = rng(2);
    for _ in 0..10 {
        let p = random_distribution(&mut r, 3, 2);
        let q = random_distribution(&mut r, 4, 2);
        let s = random_distribution(&mut r, 2, 2);
        let pq = wasserstein_distance(&p, &q, Norm::L1, 1).unwrap();
        let qp = wasserstein_distance(&q, &p, Norm::L1, 1).unwrap();
        let qs = wasserstein_distance(&q, &s, Norm::L1, 1).unwrap();
        let ps = wasserstein_distance(&p, &s, Norm::L1, 1).unwrap();
        assert!((pq - qp).abs() < 1e-10);
        assert!(ps <= pq + qs + 1e-10);
        assert!(wasserstein_distance(&p, &p, Norm::L1, 1).unwrap().abs() < 1e-12);
    }
}

#[test]
fn plan_is_a_coupling() {
    let mut r = rng(4);
    let p = random_distribution(&mut r, 4, 3);
    let q = random_distribution(&mut r, 3, 3);
    let res = ot_cost(&p, &q, &GroundCost::SqEuclidean).unwrap();
    for (a, b) in res.plan.row_sums().iter().zip(p.probs()) {
        assert!((a - b).abs() < 1e-10);
    }
    for (a, b) in res.plan.col_sums().iter().zip(q.probs()) {
        assert!((a - b).abs() < 1e-10);
    }
    let cost: f64 = res.plan.entries.iter().map(|&(i, j, m)| m * GroundCost::SqEuclidean.eval(p.atom(i), q.atom(j))).sum();
    assert!((cost - res.value).abs() < 1e-10);
    // a basic optimal plan has at most n + m - 1 positive entries
    assert!(res.plan.entries.len() < p.len() + q.len());
}

#[test]
fn translation_shifts_by_the_offset() {
    let mut r = rng(6);
    let p = random_distribution(&mut r, 4, 2);
    let shifted =
        DiscreteDistribution::new(p.atoms().iter().map(|x| vec![x[0] + 0.5, x[1] - 0.25]).collect(), p.probs().to_vec()).unwrap();
    assert!((wasserstein_distance(&p, &shifted, Norm::L1, 1).unwrap() - 0.75).abs() < 1e-10);
}
