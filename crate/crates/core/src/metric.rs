//! Rule-based distances between decision trees.
//!
//! Two trees are close when, for each rule of one, the other has a
//! same-class rule covering nearly the same feature box. Split order does not
//! matter, only the induced rule set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureMeta;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::rules::{extract_rules, Interval, Rule};

/// `1 - |I1 ∩ I2| / max(|I1|, |I2|)`. Two points are at distance 0 when they
/// coincide and 1 otherwise.
pub fn interval_distance(a: &Interval, b: &Interval) -> f64 {
    let longest = a.len().max(b.len());
    if longest <= 0.0 {
        return if a.lo == b.lo { 0.0 } else { 1.0 };
    }
    (1.0 - a.overlap(b) / longest).clamp(0.0, 1.0)
}

/// Mean interval distance over all features. Class-agnostic.
pub fn rule_distance(a: &[Interval], b: &[Interval]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::FeatureMismatch(a.len(), b.len()));
    }
    Ok(rule_distance_unchecked(a, b))
}

#[inline]
pub(crate) fn rule_distance_unchecked(a: &[Interval], b: &[Interval]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| interval_distance(x, y)).sum();
    sum / a.len() as f64
}

/// Average over the rules of `from` of the distance to the nearest same-class
/// rule of `to`; a rule without a same-class partner contributes 1.
pub fn tree_distance_directed(from: &[Rule], to: &[Rule]) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::Empty("tree has no rules"));
    }
    let mut total = 0.0;
    for r in from {
        let mut best = 1.0f64;
        for s in to.iter().filter(|s| s.predicted_class == r.predicted_class) {
            best = best.min(rule_distance(&r.intervals, &s.intervals)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

/// Mean of the two directed distances.
pub fn tree_distance(a: &[Rule], b: &[Rule]) -> Result<f64> {
    Ok((tree_distance_directed(a, b)? + tree_distance_directed(b, a)?) / 2.0)
}

/// Dense symmetric dissimilarity matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "{} values for a {n}x{n} matrix",
                values.len()
            )));
        }
        Ok(Self { n, values })
    }

    /// Fills the upper triangle from `f(i, j)` with `i < j` and mirrors it.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        for i in 0..self.n {
            for j in i + 1..self.n {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return Err(Error::NotSymmetric(i, j));
                }
            }
        }
        Ok(())
    }

    /// Restriction to `members`, in the given order.
    pub fn submatrix(&self, members: &[usize]) -> DistanceMatrix {
        let k = members.len();
        let mut values = Vec::with_capacity(k * k);
        for &i in members {
            for &j in members {
                values.push(self.get(i, j));
            }
        }
        DistanceMatrix { n: k, values }
    }

    /// Tab-separated table with a `tree` header row and a leading row-index
    /// column. Values use the shortest decimal form that parses back to the
    /// same bits.
    pub fn to_table(&self) -> String {
        let mut out = String::from("tree");
        for j in 0..self.n {
            out.push_str(&format!("\t{j}"));
        }
        out.push('\n');
        for i in 0..self.n {
            out.push_str(&i.to_string());
            for v in self.row(i) {
                out.push_str(&format!("\t{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Inverse of [`DistanceMatrix::to_table`]; errors name the 1-based line.
    pub fn from_table(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::InvalidArgument(format!("line {line}: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Empty("matrix table"))?;
        let mut cols = header.split('\t');
        if cols.next() != Some("tree") {
            return Err(bad(1, "header must start with `tree`".into()));
        }
        let n = cols.count();
        let mut values = Vec::with_capacity(n * n);
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            if i >= n {
                return Err(bad(line_no, format!("more than {n} rows")));
            }
            let mut fields = line.split('\t');
            if fields.next() != Some(i.to_string().as_str()) {
                return Err(bad(line_no, format!("expected row index {i}")));
            }
            let start = values.len();
            for f in fields {
                values.push(f.parse::<f64>().map_err(|_| bad(line_no, format!("bad value `{f}`")))?);
            }
            if values.len() - start != n {
                return Err(bad(line_no, format!("expected {n} values, found {}", values.len() - start)));
            }
            rows += 1;
        }
        if rows != n {
            return Err(Error::InvalidArgument(format!("expected {n} rows, found {rows}")));
        }
        Self::from_values(n, values)
    }
}

/// Rules of one tree grouped by predicted class.
struct ClassedRules<'a> {
    rules: &'a [Rule],
    by_class: Vec<Vec<&'a Rule>>,
}

impl<'a> ClassedRules<'a> {
    fn new(rules: &'a [Rule], n_classes: usize) -> Self {
        let mut by_class = vec![Vec::new(); n_classes];
        for r in rules {
            by_class[r.predicted_class].push(r);
        }
        Self { rules, by_class }
    }

    /// Same arithmetic, in the same order, as [`tree_distance_directed`].
    fn directed(&self, to: &ClassedRules<'_>) -> f64 {
        let mut total = 0.0;
        for r in self.rules {
            let mut best = 1.0f64;
            for s in &to.by_class[r.predicted_class] {
                best = best.min(rule_distance_unchecked(&r.intervals, &s.intervals));
            }
            total += best;
        }
        total / self.rules.len() as f64
    }
}

/// Rules for every tree, in tree order.
pub fn forest_rules(forest: &Forest, features: &[FeatureMeta]) -> Vec<Vec<Rule>> {
    forest.trees.par_iter().map(|t| extract_rules(t, features)).collect()
}

/// Symmetrized pairwise tree distances. Pairs are computed in parallel; each
/// entry depends only on its pair, so the result matches a sequential fill.
pub fn distance_matrix(rules: &[Vec<Rule>], n_classes: usize) -> DistanceMatrix {
    let n = rules.len();
    let classed: Vec<ClassedRules<'_>> = rules.iter().map(|r| ClassedRules::new(r, n_classes)).collect();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| (classed[i].directed(&classed[j]) + classed[j].directed(&classed[i])) / 2.0)
        .collect();
    let mut m = DistanceMatrix::zeros(n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        m.set(i, j, v);
        m.set(j, i, v);
    }
    m
}

pub fn forest_distance_matrix(forest: &Forest, features: &[FeatureMeta]) -> DistanceMatrix {
    distance_matrix(&forest_rules(forest, features), forest.n_classes)
}
