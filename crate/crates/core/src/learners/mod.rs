//! Classifiers behind a fit / partial_fit / predict block interface.
//!
//! Models are retrained from scratch whenever their moving frame changes;
//! [`partial_fit`] is exactly "push into the frame, then [`fit`]".

mod codec;
mod frame;
pub mod nb;
mod score;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::streams::LabeledPoint;

pub use codec::{DecodeError, FORMAT_VERSION};
pub use frame::MovingFrame;
pub use nb::GaussianNb;
pub use score::{ScoreTracker, DEFAULT_SCORE_WINDOW};
pub use tree::{DecisionTree, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("cannot train on an empty frame")]
    EmptyFrame,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model kind {got} does not match {expected}")]
    KindMismatch { expected: LearnerKind, got: LearnerKind },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    DecisionTree,
    GaussianNb,
}

impl LearnerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::DecisionTree => "decision_tree",
            LearnerKind::GaussianNb => "gaussian_nb",
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "decision_tree" => Ok(LearnerKind::DecisionTree),
            "gaussian_nb" => Ok(LearnerKind::GaussianNb),
            other => Err(format!("unknown learner {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    DecisionTree(DecisionTree),
    GaussianNb(GaussianNb),
}

impl Model {
    pub fn kind(&self) -> LearnerKind {
        match self {
            Model::DecisionTree(_) => LearnerKind::DecisionTree,
            Model::GaussianNb(_) => LearnerKind::GaussianNb,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::DecisionTree(t) => t.n_features(),
            Model::GaussianNb(nb) => nb.n_features(),
        }
    }
}

/// A trained classifier together with the iteration of the newest training
/// point and the byte length of its serialized form.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSnapshot {
    model: Model,
    trained_at: u64,
    serialized_size: usize,
}

impl ModelSnapshot {
    pub fn new(model: Model, trained_at: u64) -> Self {
        let serialized_size = codec::encode(&model, trained_at).len();
        Self::from_parts(model, trained_at, serialized_size)
    }

    fn from_parts(model: Model, trained_at: u64, serialized_size: usize) -> Self {
        Self {
            model,
            trained_at,
            serialized_size,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn kind(&self) -> LearnerKind {
        self.model.kind()
    }

    pub fn trained_at(&self) -> u64 {
        self.trained_at
    }

    pub fn serialized_size(&self) -> usize {
        self.serialized_size
    }

    pub fn n_features(&self) -> usize {
        self.model.n_features()
    }

    pub fn as_tree(&self) -> Option<&DecisionTree> {
        match &self.model {
            Model::DecisionTree(t) => Some(t),
            _ => None,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<usize, LearnError> {
        predict(self, features)
    }

    pub fn serialize(&self) -> Vec<u8> {
        serialize(self)
    }
}

pub(crate) fn check_dims(points: &[&LabeledPoint]) -> Result<usize, LearnError> {
    let first = points.first().ok_or(LearnError::EmptyFrame)?;
    let dim = first.dim();
    if dim == 0 {
        return Err(LearnError::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    for p in points {
        if p.dim() != dim {
            return Err(LearnError::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
    }
    Ok(dim)
}

/// Trains a fresh model on the frame's contents with default parameters.
pub fn fit(kind: LearnerKind, frame: &MovingFrame) -> Result<ModelSnapshot, LearnError> {
    fit_with(kind, &TreeParams::default(), frame)
}

pub fn fit_with(
    kind: LearnerKind,
    tree_params: &TreeParams,
    frame: &MovingFrame,
) -> Result<ModelSnapshot, LearnError> {
    let points: Vec<&LabeledPoint> = frame.iter().collect();
    let trained_at = frame.newest().ok_or(LearnError::EmptyFrame)?.iteration;
    let model = match kind {
        LearnerKind::DecisionTree => Model::DecisionTree(DecisionTree::fit(&points, tree_params)?),
        LearnerKind::GaussianNb => Model::GaussianNb(GaussianNb::fit(&points)?),
    };
    Ok(ModelSnapshot::new(model, trained_at))
}

/// Pushes `point` into `frame` and retrains from scratch.
pub fn partial_fit(
    model: &ModelSnapshot,
    frame: &mut MovingFrame,
    point: LabeledPoint,
) -> Result<ModelSnapshot, LearnError> {
    if point.dim() != model.n_features() {
        return Err(LearnError::DimensionMismatch {
            expected: model.n_features(),
            got: point.dim(),
        });
    }
    frame.push(point);
    fit(model.kind(), frame)
}

pub fn predict(model: &ModelSnapshot, features: &[f64]) -> Result<usize, LearnError> {
    if features.len() != model.n_features() {
        return Err(LearnError::DimensionMismatch {
            expected: model.n_features(),
            got: features.len(),
        });
    }
    Ok(match &model.model {
        Model::DecisionTree(t) => t.predict(features),
        Model::GaussianNb(nb) => nb.predict(features),
    })
}

pub fn serialize(model: &ModelSnapshot) -> Vec<u8> {
    let bytes = codec::encode(&model.model, model.trained_at);
    assert_eq!(
        bytes.len(),
        model.serialized_size,
        "recorded model size out of sync with encoding"
    );
    bytes
}

pub fn deserialize(bytes: &[u8]) -> Result<ModelSnapshot, DecodeError> {
    codec::decode(bytes)
}
