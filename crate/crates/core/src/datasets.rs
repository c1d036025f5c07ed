//! Bundled example datasets.

use crate::dataset::{ingest_csv, Dataset, IngestOptions};
use crate::error::{Error, Result};

const GLASS_CSV: &str = include_str!("../data/glass.csv");
const PENGUINS_CSV: &str = include_str!("../data/penguins.csv");

pub const BUILTIN_NAMES: [&str; 2] = ["glass", "penguin"];

/// Glass identification: 214 rows, 9 oxide/refractive-index features, 6 classes.
pub fn glass(test_fraction: f64, seed: u64) -> Result<Dataset> {
    let opts = IngestOptions {
        name: "glass".into(),
        label: Some("type".into()),
        test_fraction,
        seed,
        ..IngestOptions::default()
    };
    ingest_csv(GLASS_CSV.as_bytes(), &opts)
}

/// Palmer penguins with incomplete rows removed: 333 rows, 6 features, 3 species.
pub fn penguin(test_fraction: f64, seed: u64) -> Result<Dataset> {
    let opts = IngestOptions {
        name: "penguin".into(),
        label: Some("species".into()),
        test_fraction,
        seed,
        ..IngestOptions::default()
    };
    ingest_csv(PENGUINS_CSV.as_bytes(), &opts)
}

pub fn builtin(name: &str, test_fraction: f64, seed: u64) -> Result<Dataset> {
    match name.to_ascii_lowercase().as_str() {
        "glass" => glass(test_fraction, seed),
        "penguin" | "penguins" => penguin(test_fraction, seed),
        other => Err(Error::InvalidArgument(format!("unknown built-in dataset {other:?}"))),
    }
}

pub fn builtin_csv(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "glass" => Some(GLASS_CSV),
        "penguin" | "penguins" => Some(PENGUINS_CSV),
        _ => None,
    }
}
