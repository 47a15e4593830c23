//! Decision trees lowered to a small decision-program IR and emitted as a
//! single dependency-free C function.
//!
//! Every internal node sends `x[feature] <= threshold` to the left child.
//! Node ids are always a preorder numbering starting at the root (id 0);
//! the emitted source tags each `if` and each `return` with `//node = k`.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::learners::{LearnerKind, ModelSnapshot, TreeNode};

#[derive(Debug, Error, PartialEq)]
pub enum TranspileError {
    #[error("only decision trees can be lowered, got {0}")]
    NotATree(LearnerKind),
    #[error("invalid decision program: {0}")]
    InvalidProgram(String),
    #[error("node {node} reads feature {feature} but the input has {dim} features")]
    FeatureOutOfRange {
        node: usize,
        feature: usize,
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgramNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        label: usize,
    },
}

/// A validated decision program in preorder: the root is node 0 and every
/// left subtree is numbered before its right sibling.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionProgram {
    nodes: Vec<ProgramNode>,
}

impl DecisionProgram {
    /// Checks that `nodes` form a single tree rooted at `root` with finite
    /// thresholds, then renumbers it in preorder.
    pub fn new(nodes: Vec<ProgramNode>, root: usize) -> Result<Self, TranspileError> {
        let bad = |m: String| Err(TranspileError::InvalidProgram(m));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        if root >= nodes.len() {
            return bad(format!("root {root} out of range"));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            if let ProgramNode::Internal {
                threshold,
                left,
                right,
                ..
            } = *n
            {
                if !threshold.is_finite() {
                    return bad(format!("node {i} has a non-finite threshold"));
                }
                for child in [left, right] {
                    if child >= nodes.len() {
                        return bad(format!("node {i} points at missing node {child}"));
                    }
                    parents[child] += 1;
                }
            }
        }
        if parents[root] != 0 {
            return bad(format!("root {root} has a parent"));
        }
        if let Some(i) = (0..nodes.len()).find(|&i| i != root && parents[i] != 1) {
            return bad(format!("node {i} has {} parents", parents[i]));
        }

        // One parent per non-root node and a parentless root make this a
        // forest; the walk below rejects anything not reachable from root.
        let mut order = Vec::with_capacity(nodes.len());
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if order.len() == nodes.len() {
                return bad("cycle detected".into());
            }
            order.push(i);
            if let ProgramNode::Internal { left, right, .. } = nodes[i] {
                stack.push(right);
                stack.push(left);
            }
        }
        if order.len() != nodes.len() {
            return bad(format!("{} nodes unreachable from the root", nodes.len() - order.len()));
        }

        let mut new_id = vec![0usize; nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let nodes = order
            .iter()
            .map(|&old| match nodes[old] {
                ProgramNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => ProgramNode::Internal {
                    feature,
                    threshold,
                    left: new_id[left],
                    right: new_id[right],
                },
                ProgramNode::Leaf { label } => ProgramNode::Leaf { label },
            })
            .collect();
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[ProgramNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn n_internal(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, ProgramNode::Internal { .. }))
            .count()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.len() - self.n_internal()
    }
}

/// One IR node per tree node, thresholds and labels copied bit for bit.
pub fn lower_tree(model: &ModelSnapshot) -> Result<DecisionProgram, TranspileError> {
    let tree = model.as_tree().ok_or(TranspileError::NotATree(model.kind()))?;
    let nodes = tree
        .nodes()
        .iter()
        .map(|n| match *n {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => ProgramNode::Internal {
                feature,
                threshold,
                left,
                right,
            },
            TreeNode::Leaf { label } => ProgramNode::Leaf { label },
        })
        .collect();
    DecisionProgram::new(nodes, tree.root())
}

/// Walks from the root to a leaf, going left when `x[feature] <= threshold`.
pub fn interpret(program: &DecisionProgram, features: &[f64]) -> Result<usize, TranspileError> {
    let mut i = program.root();
    loop {
        match program.nodes[i] {
            ProgramNode::Leaf { label } => return Ok(label),
            ProgramNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let v = *features.get(feature).ok_or(TranspileError::FeatureOutOfRange {
                    node: i,
                    feature,
                    dim: features.len(),
                })?;
                i = if v <= threshold { left } else { right };
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedSource {
    pub text: String,
    pub language_tag: &'static str,
    pub entry_symbol: &'static str,
    pub size_bytes: usize,
}

const INDENT: &str = "    ";

/// Emits `int predict(float* x)` as nested if/else blocks. Thresholds use the
/// shortest decimal that parses back to the same `f64`.
pub fn emit_c(program: &DecisionProgram) -> EmittedSource {
    let mut text = String::from("int predict(float* x){\n");
    emit_node(program, program.root(), 1, &mut text);
    text.push_str("}\n");
    EmittedSource {
        size_bytes: text.len(),
        text,
        language_tag: "c",
        entry_symbol: "predict",
    }
}

fn emit_node(program: &DecisionProgram, i: usize, depth: usize, out: &mut String) {
    let pad = INDENT.repeat(depth);
    match program.nodes[i] {
        ProgramNode::Leaf { label } => {
            writeln!(out, "{pad}return {label}; //node = {i}").unwrap();
        }
        ProgramNode::Internal {
            feature,
            threshold,
            left,
            right,
        } => {
            writeln!(out, "{pad}if (x[{feature}] <= {threshold:?}) {{ //node = {i}").unwrap();
            emit_node(program, left, depth + 1, out);
            writeln!(out, "{pad}}} else {{").unwrap();
            emit_node(program, right, depth + 1, out);
            writeln!(out, "{pad}}}").unwrap();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SizeReport {
    pub model_bytes: usize,
    pub source_bytes: usize,
}

/// Serialized model length next to emitted source length.
pub fn report_sizes(model: &ModelSnapshot, _program: &DecisionProgram, source: &EmittedSource) -> SizeReport {
    SizeReport {
        model_bytes: model.serialize().len(),
        source_bytes: source.size_bytes,
    }
}
