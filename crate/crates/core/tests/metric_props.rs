use forestview_core::metric::{interval_distance, rule_distance, tree_distance, tree_distance_directed};
use forestview_core::synth::{random_forest, split_order_pair, unit_features};
use forestview_core::{distance_matrix, extract_rules, forest_rules, DistanceMatrix, Forest, Interval};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn interval() -> impl Strategy<Value = Interval> {
    (0.0f64..10.0, 0.0f64..10.0).prop_map(|(a, b)| Interval::new(a.min(b), a.max(b)))
}

fn naive_matrix(rules: &[Vec<forestview_core::Rule>]) -> DistanceMatrix {
    let n = rules.len();
    let mut m = DistanceMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = (tree_distance_directed(&rules[i], &rules[j]).unwrap()
                    + tree_distance_directed(&rules[j], &rules[i]).unwrap())
                    / 2.0;
                m.set(i, j, v);
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_order_does_not_matter(seed in any::<u64>(), n_features in 2usize..5, depth in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = unit_features(n_features);
        let (a, b) = split_order_pair(&mut rng, &f, 3, depth);
        let (ra, rb) = (extract_rules(&a, &f), extract_rules(&b, &f));
        prop_assert_eq!(tree_distance_directed(&ra, &rb).unwrap(), 0.0);
        prop_assert_eq!(tree_distance_directed(&rb, &ra).unwrap(), 0.0);
    }

    #[test]
    fn interval_distance_bounds(a in interval(), b in interval()) {
        let d = interval_distance(&a, &b);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, interval_distance(&b, &a));
        prop_assert_eq!(interval_distance(&a, &a), 0.0);
    }

    #[test]
    fn shrinking_overlap_never_decreases_distance(
        a in prop::collection::vec(interval(), 3),
        b in prop::collection::vec(interval(), 3),
        feature in 0usize..3,
        shift in 0.0f64..5.0,
    ) {
        let before = rule_distance(&a, &b).unwrap();
        // slide b's interval away from a's, keeping both lengths fixed
        let mut moved = b.clone();
        let dir = if moved[feature].lo + moved[feature].hi >= a[feature].lo + a[feature].hi { 1.0 } else { -1.0 };
        moved[feature] = Interval::new(moved[feature].lo + dir * shift, moved[feature].hi + dir * shift);
        prop_assume!(moved[feature].overlap(&a[feature]) <= b[feature].overlap(&a[feature]));
        prop_assert!(rule_distance(&a, &moved).unwrap() >= before - 1e-15);
    }
}

#[test]
fn metric_axioms_on_random_forests() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let f = unit_features(2 + case % 4);
        let forest = random_forest(&mut rng, &f, 2 + case % 3, 4 + case % 5, 1 + case % 5);
        let rules = forest_rules(&forest, &f);
        let m = distance_matrix(&rules, forest.n_classes);
        for i in 0..m.len() {
            assert_eq!(m.get(i, i), 0.0);
            assert_eq!(tree_distance(&rules[i], &rules[i]).unwrap(), 0.0);
            for j in 0..m.len() {
                assert!((0.0..=1.0).contains(&m.get(i, j)));
                assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
            }
        }
        let naive = naive_matrix(&rules);
        let bits = |m: &DistanceMatrix| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&m), bits(&naive), "case {case}");
    }
}

#[test]
fn identical_trees_give_zero_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = unit_features(3);
    let one = random_forest(&mut rng, &f, 2, 1, 4);
    let mut trees = vec![one.trees[0].clone(); 4];
    for (i, t) in trees.iter_mut().enumerate() {
        t.tree_index = i;
    }
    let forest = Forest::new(trees, 3, 2, None).unwrap();
    assert_eq!(distance_matrix(&forest_rules(&forest, &f), 2), DistanceMatrix::zeros(4));
    assert_eq!(distance_matrix(&forest_rules(&one, &f), 2), DistanceMatrix::zeros(1));
}
