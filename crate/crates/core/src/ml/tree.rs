//! Regression tree learner: greedy variance-reduction splits over every
//! (feature, midpoint-threshold) pair, with optional reduced-error pruning
//! against a held-out tail fraction of the rows.
//!
//! Tie-breaking is part of the contract: among splits of equal gain the
//! lowest feature index wins, then the smallest threshold. Rows with
//! `x[feature] < threshold` go left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lag::{split_indices, LagMatrix, SplitMode, SplitSpec};
use crate::ml::OneStepModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
        count: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Mean of the training targets reaching this node; used when the
        /// subtree is collapsed by pruning.
        value: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    pub min_leaf: usize,
    pub pruned: bool,
    n_features: usize,
}

fn mean(targets: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| targets[i]).sum::<f64>() / idx.len() as f64
}

fn sse(targets: &[f64], idx: &[usize]) -> f64 {
    let m = mean(targets, idx);
    idx.iter().map(|&i| (targets[i] - m) * (targets[i] - m)).sum()
}

/// Best split of `idx` by squared-error reduction, or `None` when no split
/// improves on the parent. Exposed to tests as the enumeration the oracle
/// must reproduce.
pub(crate) fn best_split(
    rows: &[Vec<f64>],
    targets: &[f64],
    idx: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let parent = sse(targets, idx);
    let n_features = rows[idx[0]].len();
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..n_features {
        let mut vals: Vec<f64> = idx.iter().map(|&i| rows[i][f]).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        vals.dedup();
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let left: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][f] < thr).collect();
            if left.len() < min_leaf || idx.len() - left.len() < min_leaf {
                continue;
            }
            let right: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][f] >= thr).collect();
            let gain = parent - sse(targets, &left) - sse(targets, &right);
            if best.as_ref().map_or(true, |(_, _, g)| gain > *g) {
                best = Some((f, thr, gain));
            }
        }
    }
    best.filter(|(_, _, g)| *g > 0.0)
}

fn grow(
    nodes: &mut Vec<Node>,
    rows: &[Vec<f64>],
    targets: &[f64],
    idx: &[usize],
    min_leaf: usize,
) -> usize {
    let value = mean(targets, idx);
    let count = idx.len();
    if count >= 2 * min_leaf {
        if let Some((feature, threshold, _)) = best_split(rows, targets, idx, min_leaf) {
            let left_idx: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] < threshold)
                .collect();
            let right_idx: Vec<usize> = idx
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] >= threshold)
                .collect();
            let left = grow(nodes, rows, targets, &left_idx, min_leaf);
            let right = grow(nodes, rows, targets, &right_idx, min_leaf);
            nodes.push(Node::Split {
                feature,
                threshold,
                left,
                right,
                value,
                count,
            });
            return nodes.len() - 1;
        }
    }
    nodes.push(Node::Leaf { value, count });
    nodes.len() - 1
}

/// Squared error of the subtree on the routed pruning rows, collapsing any
/// subtree whose leaf replacement does not worsen it.
fn prune_rec(
    nodes: &mut Vec<Node>,
    node: usize,
    rows: &[Vec<f64>],
    targets: &[f64],
    prune_rows: &[usize],
) -> f64 {
    match nodes[node].clone() {
        Node::Leaf { value, .. } => prune_rows
            .iter()
            .map(|&i| (targets[i] - value) * (targets[i] - value))
            .sum(),
        Node::Split {
            feature,
            threshold,
            left,
            right,
            value,
            count,
        } => {
            let left_rows: Vec<usize> = prune_rows
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] < threshold)
                .collect();
            let right_rows: Vec<usize> = prune_rows
                .iter()
                .copied()
                .filter(|&i| rows[i][feature] >= threshold)
                .collect();
            let err_subtree = prune_rec(nodes, left, rows, targets, &left_rows)
                + prune_rec(nodes, right, rows, targets, &right_rows);
            let err_leaf: f64 = prune_rows
                .iter()
                .map(|&i| (targets[i] - value) * (targets[i] - value))
                .sum();
            if err_leaf <= err_subtree {
                nodes[node] = Node::Leaf { value, count };
                err_leaf
            } else {
                err_subtree
            }
        }
    }
}

/// Grows a regression tree, optionally holding out the tail
/// `prune_fraction` of rows for reduced-error pruning.
pub fn tree_fit(
    matrix: &LagMatrix,
    min_leaf: usize,
    prune: bool,
    prune_fraction: f64,
) -> Result<RegressionTree> {
    if min_leaf == 0 {
        return Err(Error::InvalidParameter("min_leaf must be positive".into()));
    }
    let n = matrix.n_rows();
    if n < 2 * min_leaf {
        return Err(Error::InsufficientData {
            needed: 2 * min_leaf,
            got: n,
        });
    }
    let (grow_idx, prune_idx) = if prune {
        split_indices(
            n,
            SplitSpec {
                fraction: prune_fraction,
                mode: SplitMode::Tail,
            },
        )?
    } else {
        ((0..n).collect(), Vec::new())
    };

    let mut nodes = Vec::new();
    grow(
        &mut nodes,
        &matrix.rows,
        &matrix.targets,
        &grow_idx,
        min_leaf,
    );
    if prune {
        let root = nodes.len() - 1;
        prune_rec(&mut nodes, root, &matrix.rows, &matrix.targets, &prune_idx);
    }
    Ok(RegressionTree {
        nodes,
        min_leaf,
        pruned: prune,
        n_features: matrix.n_features(),
    })
}

impl RegressionTree {
    /// (feature, threshold) at the root, or `None` for a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.last() {
            Some(Node::Split {
                feature, threshold, ..
            }) => Some((*feature, *threshold)),
            _ => None,
        }
    }

    /// Leaves reachable from the root (pruning leaves orphaned arena nodes).
    pub fn leaf_count(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => {
                    walk(nodes, *left) + walk(nodes, *right)
                }
            }
        }
        walk(&self.nodes, self.nodes.len() - 1)
    }

    /// Squared error of the tree's predictions over the given rows.
    pub fn squared_error(&self, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
        rows.iter()
            .zip(targets)
            .map(|(r, y)| {
                let p = self.predict_one(r).expect("matching layout");
                (y - p) * (y - p)
            })
            .sum()
    }
}

impl OneStepModel for RegressionTree {
    fn predict_one(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let mut node = self.nodes.len() - 1;
        loop {
            match &self.nodes[node] {
                Node::Leaf { value, .. } => return Ok(*value),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if features[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}
