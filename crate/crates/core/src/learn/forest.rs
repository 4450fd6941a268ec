//! Random forest: bootstrap-sampled, Gini-greedy decision trees with
//! axis-aligned threshold splits and majority-class leaves. Each tree's RNG
//! is seeded from (seed, tree_index) so training is schedule-independent.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Decision;
use crate::error::{Error, Result};
use crate::geometry::derive_seed_index;
use crate::mesh_io::Gender;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        label: Gender,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Arena indices of the children; `left` takes values ≤ threshold.
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    /// Training-sample indices not drawn into this tree's bootstrap.
    pub oob_indices: Vec<usize>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> Gender {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { label } => return *label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub seed: u64,
}

/// Train `n_trees` trees. `max_features` defaults to floor(sqrt(d)).
pub fn train_random_forest(
    x: &[Vec<f64>],
    y: &[Gender],
    n_trees: usize,
    seed: u64,
    max_features: Option<usize>,
    min_leaf: usize,
) -> Result<ForestModel> {
    let d = check_input(x, y)?;
    let m = max_features
        .unwrap_or_else(|| (d as f64).sqrt().floor() as usize)
        .clamp(1, d);
    let min_leaf = min_leaf.max(1);
    let trees: Vec<Tree> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed_index(seed, t as u64));
            grow_tree(x, y, m, min_leaf, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        trees,
        n_features: d,
        seed,
    })
}

fn check_input(x: &[Vec<f64>], y: &[Gender]) -> Result<usize> {
    if x.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: x.len() });
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
    }
    if y.iter().all(|&g| g == y[0]) {
        return Err(Error::SingleClass);
    }
    Ok(d)
}

fn grow_tree(
    x: &[Vec<f64>],
    y: &[Gender],
    max_features: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let n = x.len();
    let mut in_bag = vec![false; n];
    let mut sample: Vec<usize> = Vec::with_capacity(n);
    for _ in 0..n {
        let i = rng.gen_range(0..n);
        in_bag[i] = true;
        sample.push(i);
    }
    let oob_indices: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
    let mut nodes = Vec::new();
    build_node(x, y, sample, max_features, min_leaf, rng, &mut nodes);
    Tree { nodes, oob_indices }
}

fn majority(y: &[Gender], idx: &[usize]) -> Gender {
    let females = idx.iter().filter(|&&i| y[i] == Gender::Female).count();
    // tie → Female, matching the decision-value tie-break
    if females * 2 >= idx.len() {
        Gender::Female
    } else {
        Gender::Male
    }
}

fn gini(f: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = f as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

/// Builds the subtree for `idx`, returns its arena index.
fn build_node(
    x: &[Vec<f64>],
    y: &[Gender],
    idx: Vec<usize>,
    max_features: usize,
    min_leaf: usize,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let females = idx.iter().filter(|&&i| y[i] == Gender::Female).count();
    let pure = females == 0 || females == idx.len();
    if pure || idx.len() <= min_leaf {
        let node = nodes.len();
        nodes.push(TreeNode::Leaf {
            label: majority(y, &idx),
        });
        return node;
    }

    let d = x[0].len();
    let candidates = rand::seq::index::sample(rng, d, max_features.min(d));
    let mut best: Option<(f64, usize, f64)> = None; // (impurity, feature, threshold)
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(idx.len());
    for feature in candidates.iter() {
        sorted.clear();
        sorted.extend(
            idx.iter()
                .map(|&i| (x[i][feature], y[i] == Gender::Female)),
        );
        sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total = sorted.len();
        let total_f = sorted.iter().filter(|s| s.1).count();
        let mut left_n = 0usize;
        let mut left_f = 0usize;
        for k in 0..total - 1 {
            left_n += 1;
            if sorted[k].1 {
                left_f += 1;
            }
            if sorted[k].0 == sorted[k + 1].0 {
                continue;
            }
            if left_n < min_leaf || total - left_n < min_leaf {
                continue;
            }
            let impurity = (left_n as f64 * gini(left_f, left_n)
                + (total - left_n) as f64 * gini(total_f - left_f, total - left_n))
                / total as f64;
            let better = match best {
                None => true,
                Some((bi, _, _)) => impurity < bi - 1e-15,
            };
            if better {
                let threshold = 0.5 * (sorted[k].0 + sorted[k + 1].0);
                best = Some((impurity, feature, threshold));
            }
        }
    }

    let parent_impurity = gini(females, idx.len());
    let split = best.filter(|&(impurity, _, _)| impurity < parent_impurity - 1e-15);
    let Some((_, feature, threshold)) = split else {
        let node = nodes.len();
        nodes.push(TreeNode::Leaf {
            label: majority(y, &idx),
        });
        return node;
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
        idx.iter().partition(|&&i| x[i][feature] <= threshold);
    let node = nodes.len();
    nodes.push(TreeNode::Split {
        feature,
        threshold,
        left: 0,
        right: 0,
    });
    let left = build_node(x, y, left_idx, max_features, min_leaf, rng, nodes);
    let right = build_node(x, y, right_idx, max_features, min_leaf, rng, nodes);
    if let TreeNode::Split {
        left: l, right: r, ..
    } = &mut nodes[node]
    {
        *l = left;
        *r = right;
    }
    node
}

impl ForestModel {
    /// Female-voting ratio and the resulting label.
    pub fn decide(&self, x: &[f64]) -> Result<Decision> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let females = self
            .trees
            .iter()
            .filter(|t| t.predict(x) == Gender::Female)
            .count();
        Ok(Decision::from_forest_ratio(
            females as f64 / self.trees.len() as f64,
        ))
    }

    /// Out-of-bag accuracy on the training set used to fit this forest.
    /// Samples never out-of-bag are skipped.
    pub fn oob_accuracy(&self, x: &[Vec<f64>], y: &[Gender]) -> f64 {
        let mut correct = 0usize;
        let mut counted = 0usize;
        let mut oob_of: Vec<Vec<usize>> = vec![Vec::new(); x.len()];
        for (t, tree) in self.trees.iter().enumerate() {
            for &i in &tree.oob_indices {
                oob_of[i].push(t);
            }
        }
        for (i, trees) in oob_of.iter().enumerate() {
            if trees.is_empty() {
                continue;
            }
            let females = trees
                .iter()
                .filter(|&&t| self.trees[t].predict(&x[i]) == Gender::Female)
                .count();
            let label = if females * 2 >= trees.len() {
                Gender::Female
            } else {
                Gender::Male
            };
            counted += 1;
            if label == y[i] {
                correct += 1;
            }
        }
        if counted == 0 {
            0.0
        } else {
            correct as f64 / counted as f64
        }
    }
}
