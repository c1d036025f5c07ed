//! Densities, histograms and confusion matrices for the overview panels.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::forest::Forest;

/// Fewest grid points a density is evaluated on.
pub const GRID_POINTS: usize = 256;
/// Most grid points a density is evaluated on.
pub const MAX_GRID_POINTS: usize = 8192;
/// Grid steps per bandwidth, so each kernel spans at least 64 steps.
const STEPS_PER_BANDWIDTH: f64 = 32.0;

/// Type-7 (linear interpolation) quantile of ascending `sorted`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Silverman's rule of thumb, `0.9 * min(s, IQR / 1.34) * n^(-1/5)`.
///
/// When the spread estimate is zero but the sample standard deviation is
/// not (IQR collapsed by a dominant value), `s` alone is used. Constant
/// samples get `1e-9`.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth needs at least 2 values, got {n}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[n - 1] - sorted[0];
    if range <= 0.0 {
        return Ok(1e-9);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let s = var.sqrt();
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let mut spread = s.min(iqr / 1.34);
    if spread <= 0.0 {
        spread = s;
    }
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    Ok(h.max(1e-9))
}

#[inline]
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub feature: Option<usize>,
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }
}

/// Epanechnikov KDE on evenly spaced points over `[min - h, max + h]`: at
/// least 256 of them, more when needed to keep the step at `h / 32` (up to
/// 8192).
pub fn kde(values: &[f64], h: f64) -> Result<DensityCurve> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    if values.is_empty() {
        return Err(Error::Empty("kde input"));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (start, end) = (lo - h, hi + h);
    let wanted = ((end - start) / (h / STEPS_PER_BANDWIDTH)).ceil() + 1.0;
    let points = if wanted.is_finite() {
        (wanted as usize).clamp(GRID_POINTS, MAX_GRID_POINTS)
    } else {
        MAX_GRID_POINTS
    };
    let step = (end - start) / (points - 1) as f64;
    let grid: Vec<f64> = (0..points).map(|i| start + step * i as f64).collect();
    let norm = 1.0 / (values.len() as f64 * h);
    let density = grid
        .iter()
        .map(|&x| norm * values.iter().map(|&xi| epanechnikov((x - xi) / h)).sum::<f64>())
        .collect();
    Ok(DensityCurve {
        feature: None,
        bandwidth: h,
        grid,
        density,
    })
}

/// Counts per category code; codes must be integers in `[0, categories)`.
pub fn histogram(values: &[f64], categories: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0; categories];
    for &v in values {
        if v < 0.0 || v.fract() != 0.0 || v >= categories as f64 {
            return Err(Error::InvalidArgument(format!(
                "category code {v} outside [0, {categories})"
            )));
        }
        counts[v as usize] += 1;
    }
    Ok(counts)
}

/// Distribution of one feature over all rows: a density for quantitative
/// features, category counts for categorical ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureSummary {
    Density { feature: usize, curve: DensityCurve },
    Histogram { feature: usize, categories: Vec<String>, counts: Vec<usize> },
}

impl FeatureSummary {
    pub fn feature(&self) -> usize {
        match self {
            FeatureSummary::Density { feature, .. } | FeatureSummary::Histogram { feature, .. } => *feature,
        }
    }
}

pub fn feature_summary(dataset: &Dataset, feature: usize) -> Result<FeatureSummary> {
    let meta = &dataset.features[feature];
    let values = dataset.column(feature);
    if let Some(names) = meta.category_names.as_ref().filter(|_| meta.is_categorical()) {
        return Ok(FeatureSummary::Histogram {
            feature,
            categories: names.clone(),
            counts: histogram(&values, names.len())?,
        });
    }
    let h = silverman_bandwidth(&values)?;
    let mut curve = kde(&values, h)?;
    curve.feature = Some(feature);
    Ok(FeatureSummary::Density { feature, curve })
}

pub fn feature_summaries(dataset: &Dataset) -> Result<Vec<FeatureSummary>> {
    (0..dataset.n_features()).map(|f| feature_summary(dataset, f)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        Self {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn add(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    /// Fraction of rows of class `truth` predicted as `predicted`.
    pub fn rate(&self, truth: usize, predicted: usize) -> f64 {
        let row: usize = self.counts[truth].iter().sum();
        if row == 0 {
            0.0
        } else {
            self.counts[truth][predicted] as f64 / row as f64
        }
    }
}

/// Scores every row of `split` with the forest's majority vote.
pub fn forest_confusion(forest: &Forest, dataset: &Dataset, split: Split) -> Result<ConfusionMatrix> {
    let idx = dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::Empty("split has no rows"));
    }
    let mut cm = ConfusionMatrix::new(dataset.n_classes());
    for i in idx {
        cm.add(dataset.label(i), forest.predict(dataset.row(i)));
    }
    Ok(cm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::testutil::*;

    #[test]
    fn silverman_hand_value() {
        // s = sqrt(2.5), IQR = 2 -> 0.9 * (2 / 1.34) * 5^-0.2
        let h = silverman_bandwidth(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((h - 0.97356).abs() < 1e-4, "{h}");
        assert!((h - 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2)).abs() < 1e-12);
    }

    #[test]
    fn silverman_degenerate_and_homogeneous() {
        assert_eq!(silverman_bandwidth(&[3.0; 10]).unwrap(), 1e-9);
        assert!(silverman_bandwidth(&[1.0]).is_err());
        let v = [0.3, 1.7, 2.2, 5.0, 9.1, 4.4];
        let h = silverman_bandwidth(&v).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * 3.5).collect();
        assert!((silverman_bandwidth(&scaled).unwrap() - 3.5 * h).abs() < 1e-12);
        // IQR of zero with nonzero spread falls back to s
        let mut spiky = vec![0.0; 20];
        spiky.push(10.0);
        assert!(silverman_bandwidth(&spiky).unwrap() > 0.5);
    }

    #[test]
    fn kde_single_point_peak_and_support() {
        let h = 0.5;
        let c = kde(&[2.0], h).unwrap();
        assert_eq!(c.grid.len(), GRID_POINTS);
        assert_eq!(c.grid[0], 1.5);
        assert!((c.grid[GRID_POINTS - 1] - 2.5).abs() < 1e-12);
        let peak = c.density.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.75 / h).abs() < 1e-4);
        assert!((c.integral() - 1.0).abs() < 1e-3);
        assert!(kde(&[1.0], 0.0).is_err());
    }

    #[test]
    fn kde_two_bumps_each_half() {
        let c = kde(&[0.0, 10.0], 1.0).unwrap();
        let mid = 5.0;
        let half = |keep: &dyn Fn(f64) -> bool| -> f64 {
            c.grid
                .windows(2)
                .zip(c.density.windows(2))
                .filter(|(x, _)| keep(x[0]) && keep(x[1]))
                .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
                .sum()
        };
        assert!((half(&|x| x <= mid) - 0.5).abs() < 1e-3);
        assert!((half(&|x| x >= mid) - 0.5).abs() < 1e-3);
        assert!(c.density.iter().all(|&y| y >= 0.0));
    }

    #[test]
    fn histogram_examples() {
        assert_eq!(histogram(&[0.0, 0.0, 1.0], 2).unwrap(), vec![2, 1]);
        assert_eq!(histogram(&[], 3).unwrap(), vec![0, 0, 0]);
        assert_eq!(histogram(&[2.0; 4], 3).unwrap(), vec![0, 0, 4]);
        assert!(histogram(&[3.0], 3).is_err());
        assert!(histogram(&[0.5], 3).is_err());
    }

    #[test]
    fn quantile_type7() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.99) - 3.97).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0], 0.3), 7.0);
    }

    #[test]
    fn perfect_classifier_confusion() {
        use crate::dataset::{FeatureKind, FeatureMeta};
        let d = Dataset::new(
            "t",
            vec![FeatureMeta {
                name: "x".into(),
                kind: FeatureKind::Quantitative,
                range: [0.0, 0.0],
                category_names: None,
            }],
            vec!["a".into(), "b".into()],
            vec![vec![1.0], vec![2.0], vec![8.0], vec![9.0]],
            vec![0, 0, 1, 1],
            vec![Split::Test; 4],
        )
        .unwrap();
        let f = Forest::new(vec![build(&split(0, 5.0, leaf(0), leaf(1)), 2, 0)], 1, 2, None).unwrap();
        let cm = forest_confusion(&f, &d, Split::Test).unwrap();
        assert_eq!(cm.counts, vec![vec![2, 0], vec![0, 2]]);
        assert_eq!(cm.accuracy(), 1.0);
        assert!(forest_confusion(&f, &d, Split::Train).is_err());
    }
}
