//! Divergence properties over random distribution pairs, checked against
//! the entropy form `JSD = H(m) - (H(p) + H(q)) / 2`.

use std::f64::consts::LN_2;

use dgids_core::theory::{
    best_response_value, js_divergence, kl_divergence, optimal_discriminator, standalone_optimal_value,
    standalone_tp_bound, value_function, DiscreteDistribution, MeasureChoice, LN_4,
};
use proptest::prelude::*;

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

fn jsd_entropy_form(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    entropy(&m) - 0.5 * (entropy(p) + entropy(q))
}

/// Pairs of normalised weight vectors on a shared support, some entries
/// forced to zero so disjoint and partially overlapping supports appear.
fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..12).prop_flat_map(|k| {
        let weights = prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], k);
        (weights.clone(), weights)
    })
    .prop_filter("non-zero mass", |(a, b)| a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0)
}

fn dist(w: &[f64]) -> DiscreteDistribution {
    DiscreteDistribution::from_weights((0..w.len()).map(|i| i as f64).collect(), w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn jsd_symmetry_bounds_identity((a, b) in pair()) {
        let (p, q) = (dist(&a), dist(&b));
        let pq = js_divergence(&p, &q).unwrap();
        let qp = js_divergence(&q, &p).unwrap();
        prop_assert!((pq - qp).abs() <= 1e-12);
        prop_assert!((0.0..=LN_2 + 1e-12).contains(&pq));
        prop_assert!(js_divergence(&p, &p).unwrap().abs() <= 1e-12);
        let oracle = jsd_entropy_form(p.probabilities(), q.probabilities());
        prop_assert!((pq - oracle).abs() <= 1e-12, "{} vs {}", pq, oracle);
    }

    #[test]
    fn best_response_value_is_minus_ln4_plus_twice_jsd((a, b) in pair()) {
        let (p, q) = (dist(&a), dist(&b));
        let jsd = js_divergence(&p, &q).unwrap();
        prop_assert!((best_response_value(&p, &q).unwrap() - (-LN_4 + 2.0 * jsd)).abs() < 1e-12);
        // the optimal discriminator attains that value
        let d_star = optimal_discriminator(&p, &q).unwrap();
        let mut outputs = vec![0.5; p.len()];
        for (i, v) in d_star {
            outputs[i] = v;
        }
        let v = value_function(&p, &q, &outputs).unwrap();
        prop_assert!((v - best_response_value(&p, &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tp_bound_in_unit_interval((a, b) in pair()) {
        let (pi, p) = (dist(&a), dist(&b));
        for measure in [MeasureChoice::UnderPopulation, MeasureChoice::UnderDevice] {
            let tp = standalone_tp_bound(&pi, &p, measure).unwrap();
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&tp));
        }
        prop_assert!((standalone_tp_bound(&p, &p, MeasureChoice::UnderPopulation).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn bernoulli_examples() {
    let half = DiscreteDistribution::from_probabilities(vec![0.5, 0.5]).unwrap();
    let one = DiscreteDistribution::from_probabilities(vec![0.0, 1.0]).unwrap();
    let jsd = js_divergence(&half, &one).unwrap();
    // four-term hand summation
    let m = [0.25, 0.75];
    let hand = 0.5 * (0.5 * (0.5f64 / m[0]).ln() + 0.5 * (0.5f64 / m[1]).ln()) + 0.5 * (1.0f64 / m[1]).ln();
    assert!((jsd - hand).abs() < 1e-15);
    assert!((jsd - 0.2157616).abs() < 1e-7);
    assert!((standalone_optimal_value(&half, &one).unwrap() - (-1.1705328)).abs() < 1e-7);

    let p = DiscreteDistribution::from_probabilities(vec![1.0, 0.0]).unwrap();
    assert!((kl_divergence(&p, &half).unwrap() - LN_2).abs() < 1e-12);
    assert!(kl_divergence(&half, &p).is_err());
    assert!((js_divergence(&p, &one).unwrap() - LN_2).abs() < 1e-15);

    let pi = DiscreteDistribution::from_probabilities(vec![0.8, 0.2]).unwrap();
    let tp = standalone_tp_bound(&pi, &half, MeasureChoice::UnderPopulation).unwrap();
    assert!((tp - 0.6703).abs() < 1e-4);
}
