//! Random forest training (bootstrap + per-split feature subsets + Gini CART)
//! and majority-vote prediction.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::tree::{plurality, DecisionTree, Node, NodeId, NodeKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub n_trees: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features drawn at each split; `ceil(sqrt(F))` when `None`.
    #[serde(default)]
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub test_fraction: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_split: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
            test_fraction: 0.3,
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParams("n_trees must be at least 1".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidParams(format!(
                "test_fraction {} must lie in (0, 1)",
                self.test_fraction
            )));
        }
        if self.features_per_split == Some(0) {
            return Err(Error::InvalidParams("features_per_split must be at least 1".into()));
        }
        Ok(())
    }

    pub fn features_for(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub n_classes: usize,
    pub params: Option<TrainParams>,
}

impl Forest {
    pub fn new(trees: Vec<DecisionTree>, n_features: usize, n_classes: usize, params: Option<TrainParams>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidParams("n_trees must be at least 1".into()));
        }
        Ok(Self {
            trees,
            n_features,
            n_classes,
            params,
        })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    /// Plurality vote over trees; ties go to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> usize {
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(row)] += 1;
        }
        plurality(&votes)
    }

    pub fn recompute_counts(&mut self, dataset: &Dataset) {
        for tree in &mut self.trees {
            tree.recompute_counts(dataset);
        }
    }
}

/// A candidate split; `score` is `sum_c l_c^2 / n_l + sum_c r_c^2 / n_r`,
/// which is larger exactly when the weighted child Gini impurity is smaller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    score_num: u128,
    score_den: u128,
}

impl SplitChoice {
    /// Gini gain of the split over a node holding `n` samples with
    /// `parent_sq = sum_c count_c^2`.
    pub fn gini_gain(&self, n: usize, parent_sq: u128) -> f64 {
        let n = n as f64;
        let child = self.score_num as f64 / self.score_den as f64;
        (child - parent_sq as f64 / n) / n
    }
}

/// Best Gini split of `samples` (row indices, repeats allowed) over
/// `features`, which must be ascending. Ties keep the lowest feature, then
/// the lowest threshold. Returns `None` unless some split has positive gain.
pub fn best_split(dataset: &Dataset, samples: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let n_classes = dataset.n_classes();
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let mut total = vec![0u64; n_classes];
    for &s in samples {
        total[dataset.label(s)] += 1;
    }
    let parent_sq: u128 = total.iter().map(|&c| (c as u128) * (c as u128)).sum();
    // Positive gain means score > parent_sq / n.
    let mut best: Option<SplitChoice> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0u64; n_classes];
    for &feature in features {
        sorted.clear();
        sorted.extend(samples.iter().map(|&s| (dataset.row(s)[feature], dataset.label(s))));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        let mut left_sq: u128 = 0;
        let mut right_sq: u128 = parent_sq;
        for i in 0..n - 1 {
            let (value, label) = sorted[i];
            let l = left[label] as u128;
            let r = (total[label] - left[label]) as u128;
            left_sq += 2 * l + 1;
            right_sq -= 2 * r - 1;
            left[label] += 1;
            let next = sorted[i + 1].0;
            if next <= value {
                continue;
            }
            let nl = (i + 1) as u128;
            let nr = (n - i - 1) as u128;
            let num = left_sq * nr + right_sq * nl;
            let den = nl * nr;
            // gain > 0  <=>  num / den > parent_sq / n
            if num * (n as u128) <= parent_sq * den {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => num * b.score_den > b.score_num * den,
            };
            if better {
                let mut threshold = value + (next - value) / 2.0;
                if threshold >= next {
                    threshold = value;
                }
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    score_num: num,
                    score_den: den,
                });
            }
        }
    }
    best
}

struct Grower<'a> {
    dataset: &'a Dataset,
    params: &'a TrainParams,
    n_try: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn grow(&mut self, samples: &[usize], depth: usize) -> NodeId {
        let n_classes = self.dataset.n_classes();
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            kind: NodeKind::Leaf { class: 0 },
            depth,
            train_by_class: vec![0; n_classes],
            test_by_class: vec![0; n_classes],
        });
        let mut counts = vec![0usize; n_classes];
        for &s in samples {
            counts[self.dataset.label(s)] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let too_small = samples.len() < self.params.min_samples_split.max(2);
        let leaf = NodeKind::Leaf {
            class: plurality(&counts),
        };
        if pure || depth_capped || too_small {
            self.nodes[id.0].kind = leaf;
            return id;
        }
        let mut features = sample(&mut self.rng, self.dataset.n_features(), self.n_try).into_vec();
        features.sort_unstable();
        let Some(choice) = best_split(self.dataset, samples, &features) else {
            self.nodes[id.0].kind = leaf;
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.dataset.row(s)[choice.feature] <= choice.threshold);
        let left = self.grow(&l, depth + 1);
        let right = self.grow(&r, depth + 1);
        self.nodes[id.0].kind = NodeKind::Internal {
            feature: choice.feature,
            threshold: choice.threshold,
            left,
            right,
        };
        id
    }
}

/// Per-tree RNG seed.
pub fn tree_seed(seed: u64, tree_index: usize) -> u64 {
    seed ^ tree_index as u64
}

pub fn train_tree(dataset: &Dataset, params: &TrainParams, tree_index: usize) -> DecisionTree {
    let train = dataset.indices(Split::Train);
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(params.seed, tree_index));
    let samples: Vec<usize> = if params.bootstrap {
        (0..train.len()).map(|_| train[rng.gen_range(0..train.len())]).collect()
    } else {
        train
    };
    let mut grower = Grower {
        dataset,
        params,
        n_try: params.features_for(dataset.n_features()),
        rng,
        nodes: Vec::new(),
    };
    let root = grower.grow(&samples, 0);
    let mut tree = DecisionTree {
        nodes: grower.nodes,
        root,
        tree_index,
    };
    tree.recompute_counts(dataset);
    tree
}

/// Trains `params.n_trees` trees in parallel; the result depends only on
/// the dataset and the parameters.
pub fn train_forest(dataset: &Dataset, params: &TrainParams) -> Result<Forest> {
    params.validate()?;
    let train = dataset.indices(Split::Train);
    let mut seen = vec![false; dataset.n_classes()];
    for &i in &train {
        seen[dataset.label(i)] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(Error::DegenerateTrainingSplit);
    }
    let trees: Vec<DecisionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|i| train_tree(dataset, params, i))
        .collect();
    Forest::new(trees, dataset.n_features(), dataset.n_classes(), Some(params.clone()))
}
