//! Gini random-forest classifier with mean-decrease-in-impurity importances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::numerics::RngStream;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 10,
            max_depth: 8,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict_row(&self, x: &DMatrix<f64>, r: usize) -> usize {
        let mut n = 0;
        loop {
            match self.nodes[n] {
                Node::Leaf(c) => return c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => n = if x[(r, feature)] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomForest {
    trees: Vec<Tree>,
    n_classes: usize,
    importances: Vec<f64>,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / nf).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [usize],
    n_classes: usize,
    cfg: &'a ForestConfig,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &i in idx {
            c[self.y[i]] += 1;
        }
        c
    }

    /// Best `(decrease, feature, threshold)` over all features, where
    /// decrease is `n·gini − n_l·gini_l − n_r·gini_r`.
    fn best_split(&self, idx: &[usize], parent: &[usize]) -> Option<(f64, usize, f64)> {
        let n = idx.len();
        let parent_imp = n as f64 * gini(parent, n);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = idx.to_vec();
        for f in 0..self.x.ncols() {
            order.sort_by(|&a, &b| self.x[(a, f)].total_cmp(&self.x[(b, f)]).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            for s in 0..n - 1 {
                left[self.y[order[s]]] += 1;
                let (v, next) = (self.x[(order[s], f)], self.x[(order[s + 1], f)]);
                if v == next {
                    continue;
                }
                let nl = s + 1;
                let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                let dec = parent_imp - nl as f64 * gini(&left, nl) - (n - nl) as f64 * gini(&right, n - nl);
                if best.is_none_or(|b| dec > b.0 + 1e-12) {
                    best = Some((dec, f, 0.5 * (v + next)));
                }
            }
        }
        best.filter(|b| b.0 > 1e-12)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let counts = self.counts(&idx);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(majority(&counts)));
        if depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split || gini(&counts, idx.len()) == 0.0 {
            return id;
        }
        let Some((dec, feature, threshold)) = self.best_split(&idx, &counts) else {
            return id;
        };
        self.importance[feature] += dec;
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[(i, feature)] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl RandomForest {
    /// `y` must hold dense class ids `0..n_classes`. Every split considers
    /// all features.
    pub fn fit(x: &DMatrix<f64>, y: &[usize], n_classes: usize, cfg: &ForestConfig, rng: &mut RngStream) -> Result<Self> {
        if x.nrows() != y.len() || x.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "forest rows",
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if cfg.trees == 0 {
            return Err(Error::invalid("forest needs at least one tree"));
        }
        if let Some(c) = y.iter().find(|&&c| c >= n_classes) {
            return Err(Error::invalid(format!("class {c} outside 0..{n_classes}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forest features".into()));
        }
        let n = x.nrows();
        let mut trees = Vec::with_capacity(cfg.trees);
        let mut importances = vec![0.0; x.ncols()];
        for t in 0..cfg.trees {
            let mut tree_rng = rng.child_indexed("tree", t as u64);
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| tree_rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                x,
                y,
                n_classes,
                cfg,
                nodes: Vec::new(),
                importance: vec![0.0; x.ncols()],
            };
            b.grow(idx, 0);
            let total: f64 = b.importance.iter().sum();
            if total > 0.0 {
                for (acc, v) in importances.iter_mut().zip(&b.importance) {
                    *acc += v / total;
                }
            }
            trees.push(Tree { nodes: b.nodes });
        }
        for v in &mut importances {
            *v /= cfg.trees as f64;
        }
        Ok(RandomForest {
            trees,
            n_classes,
            importances,
        })
    }

    /// Mean over trees of per-tree normalised impurity decrease.
    pub fn feature_importances(&self) -> &[f64] {
        &self.importances
    }

    /// Majority vote over trees (lowest class id on ties).
    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<usize> {
        (0..x.nrows())
            .map(|r| {
                let mut votes = vec![0usize; self.n_classes];
                for t in &self.trees {
                    votes[t.predict_row(x, r)] += 1;
                }
                majority(&votes)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn informative_feature_dominates() {
        let mut rng = RngStream::new(1);
        let n = 400;
        let y: Vec<usize> = (0..n).map(|i| i % 4).collect();
        let x = DMatrix::from_fn(n, 3, |r, c| if c == 1 { y[r] as f64 + 0.1 * rng.normal() } else { rng.normal() });
        let rf = RandomForest::fit(&x, &y, 4, &ForestConfig::default(), &mut rng).unwrap();
        let imp = rf.feature_importances();
        assert!(imp[1] > 0.9, "{imp:?}");
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let acc = rf.predict(&x).iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / n as f64;
        assert!(acc > 0.99);
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let x = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let rf = RandomForest::fit(&x, &[1, 1, 1], 2, &ForestConfig::default(), &mut RngStream::new(0)).unwrap();
        assert_eq!(rf.predict(&x), vec![1, 1, 1]);
        assert!(rf.feature_importances().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_given_stream() {
        let mut rng = RngStream::new(5);
        let x = DMatrix::from_fn(100, 4, |_, _| rng.normal());
        let y: Vec<usize> = (0..100).map(|r| usize::from(x[(r, 0)] + x[(r, 2)] > 0.0)).collect();
        let a = RandomForest::fit(&x, &y, 2, &ForestConfig::default(), &mut RngStream::new(9)).unwrap();
        let b = RandomForest::fit(&x, &y, 2, &ForestConfig::default(), &mut RngStream::new(9)).unwrap();
        assert_eq!(a.feature_importances(), b.feature_importances());
    }
}
