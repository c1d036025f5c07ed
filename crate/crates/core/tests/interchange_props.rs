use forestview_core::interchange::{export_forest, import_forest, ForestDoc};
use forestview_core::synth::{random_dataset, random_forest};
use forestview_core::{datasets, train_forest, TrainParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn random_forests_round_trip_byte_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n_features = rng.gen_range(1..6);
        let n_classes = rng.gen_range(2..5);
        let (n_rows, n_trees) = (rng.gen_range(10..60), rng.gen_range(1..8));
        let d = random_dataset(&mut rng, n_rows, n_features, n_classes);
        let mut forest = random_forest(&mut rng, &d.features, n_classes, n_trees, 6);
        for t in &mut forest.trees {
            t.recompute_counts(&d);
        }
        let bytes = export_forest(&forest, &d, true).unwrap();
        let back = import_forest(&bytes).unwrap();
        assert!(back.warnings.is_empty());
        assert_eq!(back.dataset, d);
        assert_eq!(back.forest, forest);
        assert_eq!(export_forest(&back.forest, &back.dataset, true).unwrap(), bytes);
    }
}

#[test]
fn node_order_and_ids_in_the_document_do_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let d = random_dataset(&mut rng, 50, 3, 3);
    let mut forest = random_forest(&mut rng, &d.features, 3, 5, 6);
    for t in &mut forest.trees {
        t.recompute_counts(&d);
    }
    let bytes = export_forest(&forest, &d, true).unwrap();
    let mut doc: ForestDoc = serde_json::from_slice(&bytes).unwrap();
    for tree in &mut doc.trees {
        // relabel ids with a random injective map, then shuffle
        let remap = |id: u64| id * 7 + 1000;
        tree.root = remap(tree.root);
        for n in &mut tree.nodes {
            n.id = remap(n.id);
            n.left = n.left.map(remap);
            n.right = n.right.map(remap);
        }
        tree.nodes.shuffle(&mut rng);
    }
    let back = import_forest(&serde_json::to_vec(&doc).unwrap()).unwrap();
    assert_eq!(back.forest, forest);
}

#[test]
fn trained_forest_round_trips_with_counts_rebuilt() {
    let d = datasets::penguin(0.3, 0).unwrap();
    let forest = train_forest(&d, &TrainParams { n_trees: 20, ..TrainParams::default() }).unwrap();
    let bytes = export_forest(&forest, &d, true).unwrap();
    let back = import_forest(&bytes).unwrap();
    assert_eq!(back.forest, forest);
    assert_eq!(export_forest(&back.forest, &back.dataset, true).unwrap(), bytes);

    // counts are never written, only rebuilt
    let text = String::from_utf8(bytes).unwrap();
    assert!(!text.contains("train_by_class"));
    let schema_only = import_forest(&export_forest(&forest, &d, false).unwrap()).unwrap();
    assert_eq!(schema_only.dataset.n_rows(), 0);
    for (a, b) in schema_only.forest.trees.iter().zip(&forest.trees) {
        assert_eq!(a.to_shape(), b.to_shape());
        assert!(a.nodes.iter().all(|n| n.total_count() == 0));
    }
}
