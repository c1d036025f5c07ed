use forestview_core::clustering::{cluster_curve, complete_linkage, dynamic_hybrid_cut, Merge};
use forestview_core::synth::{random_forest, unit_features};
use forestview_core::{forest_distance_matrix, DistanceMatrix};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn points_matrix(seed: u64, n: usize) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = rng.gen_range(1..5);
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let c = (i % centers) as f64 * 3.0;
            (c + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
        .collect();
    // quantize so equal distances (ties) actually happen
    DistanceMatrix::from_fn(n, |i, j| {
        let d = ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt();
        (d * 4.0).round() / 4.0
    })
}

fn forest_matrix(seed: u64, n: usize) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = unit_features(3);
    forest_distance_matrix(&random_forest(&mut rng, &f, 3, n, 3), &f)
}

/// Complete linkage recomputing every inter-cluster distance from scratch.
fn naive_linkage(m: &DistanceMatrix) -> Vec<Merge> {
    let n = m.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in 0..clusters.len() {
                let (ka, kb) = (clusters[a].1[0], clusters[b].1[0]);
                if ka >= kb {
                    continue;
                }
                let mut d = f64::NEG_INFINITY;
                for &x in &clusters[a].1 {
                    for &y in &clusters[b].1 {
                        d = d.max(m.get(x, y));
                    }
                }
                let better = match best {
                    None => true,
                    Some((bd, bka, bkb, _, _)) => d < bd || (d == bd && (ka, kb) < (bka, bkb)),
                };
                if better {
                    best = Some((d, ka, kb, a, b));
                }
            }
        }
        let (h, _, _, a, b) = best.unwrap();
        let (na, mut ma) = clusters[a].clone();
        let (nb, mb) = clusters[b].clone();
        ma.extend(mb);
        ma.sort_unstable();
        merges.push(Merge {
            left: na,
            right: nb,
            height: h,
            size: ma.len(),
        });
        let id = n + merges.len() - 1;
        let (lo, hi) = (a.min(b), a.max(b));
        clusters.remove(hi);
        clusters[lo] = (id, ma);
    }
    merges
}

fn brute_medoid(members: &[usize], m: &DistanceMatrix) -> usize {
    let sums: Vec<(f64, usize)> = members
        .iter()
        .map(|&i| (members.iter().map(|&j| m.get(i, j)).sum::<f64>(), i))
        .collect();
    let min = sums.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    sums.iter().filter(|s| s.0 == min).map(|s| s.1).min().unwrap()
}

fn check_clustering(m: &DistanceMatrix, min_size: usize) -> Result<(), TestCaseError> {
    let n = m.len();
    let d = complete_linkage(m).unwrap();
    let c = dynamic_hybrid_cut(&d, m, min_size).unwrap();
    prop_assert_eq!(&c, &dynamic_hybrid_cut(&d, m, min_size).unwrap());
    let mut seen = vec![0; n];
    for (k, cl) in c.clusters.iter().enumerate() {
        prop_assert_eq!(cl.id, k);
        prop_assert!(cl.members.len() >= min_size.min(n));
        prop_assert_eq!(cl.medoid, brute_medoid(&cl.members, m));
        prop_assert!(cl.members.contains(&cl.medoid));
        for &t in &cl.members {
            seen[t] += 1;
            prop_assert_eq!(c.labels[t], k);
        }
        if k > 0 {
            prop_assert!(c.clusters[k - 1].members.len() >= cl.members.len());
        }
    }
    prop_assert!(seen.iter().all(|&s| s == 1));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linkage_matches_naive(seed in any::<u64>(), n in 1usize..25) {
        let m = points_matrix(seed, n);
        let d = complete_linkage(&m).unwrap();
        prop_assert_eq!(d.merges.len(), n - 1);
        prop_assert!(d.merges.windows(2).all(|w| w[0].height <= w[1].height));
        prop_assert_eq!(d.merges, naive_linkage(&m));
    }

    #[test]
    fn cut_is_a_valid_partition(seed in any::<u64>(), n in 1usize..40, min_size in 1usize..12) {
        check_clustering(&points_matrix(seed, n), min_size)?;
        check_clustering(&forest_matrix(seed, n), min_size)?;
    }

    #[test]
    fn curve_default_is_sampled(seed in any::<u64>(), n in 1usize..30) {
        let m = forest_matrix(seed, n);
        let d = complete_linkage(&m).unwrap();
        let curve = cluster_curve(&d, &m).unwrap();
        prop_assert!(curve.samples.windows(2).all(|w| w[0].min_size < w[1].min_size));
        prop_assert!(curve.samples.iter().any(|p| p.min_size == curve.default_min_size));
        prop_assert_eq!(dynamic_hybrid_cut(&d, &m, n).unwrap().len(), 1);
    }
}
