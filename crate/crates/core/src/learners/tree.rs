//! CART classification tree with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values of a
//! feature. The split with the lowest weighted child impurity wins; ties go to
//! the lowest feature index, then the lowest threshold. A node is split while
//! it is impure, below `max_depth`, and some feature still separates its
//! samples, so duplicate-free data is fit exactly when depth allows.

use std::fmt::Write as _;

use super::LearnError;
use crate::streams::LabeledPoint;

pub const DEFAULT_MAX_DEPTH: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

/// `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
    },
}

/// Nodes are stored in preorder; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

impl DecisionTree {
    pub fn fit(points: &[&LabeledPoint], params: &TreeParams) -> Result<Self, LearnError> {
        let n_features = super::check_dims(points)?;
        let n_classes = points.iter().map(|p| p.label).max().unwrap_or(0) + 1;
        let mut builder = Builder {
            points,
            n_classes,
            n_features,
            max_depth: params.max_depth,
            nodes: Vec::new(),
        };
        let all: Vec<usize> = (0..points.len()).collect();
        builder.grow(all, 0);
        Ok(Self {
            nodes: builder.nodes,
            n_features,
        })
    }

    /// Builds a tree from explicit nodes, checking that child links are in
    /// range, point strictly forward, and that every node is reachable exactly
    /// once from the root.
    pub fn from_nodes(nodes: Vec<TreeNode>, n_features: usize) -> Result<Self, LearnError> {
        if nodes.is_empty() {
            return Err(LearnError::InvalidTree("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(LearnError::InvalidTree(format!("node {i} reached twice")));
            }
            seen[i] = true;
            if let TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } = nodes[i]
            {
                if feature >= n_features {
                    return Err(LearnError::InvalidTree(format!(
                        "node {i} tests feature {feature} of {n_features}"
                    )));
                }
                if !threshold.is_finite() {
                    return Err(LearnError::InvalidTree(format!("node {i} has a non-finite threshold")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() {
                        return Err(LearnError::InvalidTree(format!(
                            "node {i} links to invalid child {child}"
                        )));
                    }
                    stack.push(child);
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(LearnError::InvalidTree(format!("node {orphan} is unreachable")));
        }
        Ok(Self { nodes, n_features })
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { label } => return label,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Indented text dump, one line per node:
    ///
    /// ```text
    /// node=0 test node: go to node 1 if X[:, 0] <= 3.881 else to node 12.
    ///     node=1 leaf node: class 4.
    /// ```
    pub fn dump(&self) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, &mut out);
        out
    }

    fn dump_node(&self, i: usize, depth: usize, out: &mut String) {
        let indent = "    ".repeat(depth);
        match self.nodes[i] {
            TreeNode::Leaf { label } => {
                let _ = writeln!(out, "{indent}node={i} leaf node: class {label}.");
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                // Thresholds are cut, not rounded, to three decimals.
                let shown = (threshold * 1000.0).trunc() / 1000.0;
                let _ = writeln!(
                    out,
                    "{indent}node={i} test node: go to node {left} if X[:, {feature}] <= {shown:.3} else to node {right}."
                );
                self.dump_node(left, depth + 1, out);
                self.dump_node(right, depth + 1, out);
            }
        }
    }
}

struct Builder<'a> {
    points: &'a [&'a LabeledPoint],
    n_classes: usize,
    n_features: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.class_counts(&samples);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || depth >= self.max_depth {
            None
        } else {
            self.best_split(&samples)
        };
        match split {
            None => {
                self.nodes.push(TreeNode::Leaf {
                    label: majority(&counts),
                });
            }
            Some(best) => {
                self.nodes.push(TreeNode::Leaf { label: 0 });
                let (l, r): (Vec<usize>, Vec<usize>) = samples
                    .into_iter()
                    .partition(|&s| self.points[s].features[best.feature] <= best.threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = TreeNode::Split {
                    feature: best.feature,
                    threshold: best.threshold,
                    left,
                    right,
                };
            }
        }
        id
    }

    fn class_counts(&self, samples: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &s in samples {
            counts[self.points[s].label] += 1;
        }
        counts
    }

    fn best_split(&self, samples: &[usize]) -> Option<BestSplit> {
        let n = samples.len();
        let total = self.class_counts(samples);
        let mut best: Option<BestSplit> = None;
        let mut order = samples.to_vec();
        for feature in 0..self.n_features {
            let value = |s: usize| self.points[s].features[feature];
            order.sort_by(|&a, &b| value(a).total_cmp(&value(b)).then(a.cmp(&b)));
            let mut left = vec![0usize; self.n_classes];
            for i in 0..n - 1 {
                left[self.points[order[i]].label] += 1;
                let (lo, hi) = (value(order[i]), value(order[i + 1]));
                if lo >= hi {
                    continue;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                let score = weighted_gini(&left, n_left, &total, n_right);
                if best.as_ref().is_none_or(|b| score < b.score) {
                    best = Some(BestSplit {
                        feature,
                        threshold: midpoint(lo, hi),
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint of two consecutive distinct values, kept strictly below `hi` so
/// that `hi` always falls on the right side.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

/// n · (weighted Gini of the two children); the 1/n factor is irrelevant for
/// comparison.
fn weighted_gini(left: &[usize], n_left: usize, total: &[usize], n_right: usize) -> f64 {
    let mut sq_left = 0.0;
    let mut sq_right = 0.0;
    for (l, t) in left.iter().zip(total) {
        let r = t - l;
        sq_left += (*l as f64) * (*l as f64);
        sq_right += (r as f64) * (r as f64);
    }
    (n_left as f64 - sq_left / n_left as f64) + (n_right as f64 - sq_right / n_right as f64)
}

fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (label, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = label;
        }
    }
    best
}
