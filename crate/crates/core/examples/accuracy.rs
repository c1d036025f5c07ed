use forestview_core::{datasets, stats, train_forest, Split, TrainParams};

fn main() {
    for (name, depth) in [("glass", None), ("penguin", Some(4))] {
        let d = datasets::builtin(name, 0.3, 0).unwrap();
        let params = TrainParams { max_depth: depth, ..TrainParams::default() };
        let t = std::time::Instant::now();
        let f = train_forest(&d, &params).unwrap();
        let cm = stats::forest_confusion(&f, &d, Split::Test).unwrap();
        println!("{name}: acc {:.4} in {:?}", cm.accuracy(), t.elapsed());
        if name == "glass" {
            let b = d.class_index("Building").unwrap();
            let bf = d.class_index("Building-float").unwrap();
            println!("  Building->Building-float {:.4} ({:?})", cm.rate(b, bf), cm.counts[b]);
        }
    }
}
