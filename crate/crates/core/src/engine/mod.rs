//! Delta patterns: where learning and prediction happen.
//!
//! * `P0`: the cloud learns from every site's sensor data and periodically
//!   pushes the serialized model to the sites, which predict locally.
//! * `P1`: every site learns and predicts on its own stream; nothing is sent.
//! * `P2`: the cloud learns and predicts; sites send sensor data up and receive
//!   decisions back.
//!
//! Each run is a single deterministic discrete-event loop (see [`run_pattern`]).
//! Points are classified first and trained on afterwards; before any model
//! exists a step abstains and scores 0.

mod message;
mod sim;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learners::{self, LearnError, LearnerKind, ModelSnapshot, MovingFrame, ScoreTracker, TreeParams};
use crate::netsim::{ComputeCosts, MediumProfile, NetError};
use crate::streams::LabeledPoint;

pub use message::{Message, MessageKind, NodeId, Payload, WireError};
pub use sim::run_pattern;

pub const DEFAULT_FRAME_CAPACITY: usize = 150;
pub const DEFAULT_PUSH_INTERVAL: u64 = 150;
pub const DEFAULT_SAMPLE_INTERVAL_MS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pattern {
    #[serde(alias = "p0")]
    P0,
    #[serde(alias = "p1")]
    P1,
    #[serde(alias = "p2")]
    P2,
}

impl Pattern {
    pub const ALL: [Pattern; 3] = [Pattern::P0, Pattern::P1, Pattern::P2];
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::P0 => "P0",
            Pattern::P1 => "P1",
            Pattern::P2 => "P2",
        })
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "P0" | "p0" => Ok(Pattern::P0),
            "P1" | "p1" => Ok(Pattern::P1),
            "P2" | "p2" => Ok(Pattern::P2),
            other => Err(format!("unknown pattern {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid pattern config: {0}")]
    InvalidConfig(String),
    #[error("site {site}: expected {expected} features, got {got}")]
    DimensionMismatch {
        site: usize,
        expected: usize,
        got: usize,
    },
    #[error("site {site}: iteration {iteration} does not increase")]
    NonMonotonic { site: usize, iteration: u64 },
    #[error("pushed model failed to decode: {0}")]
    Decode(#[from] learners::DecodeError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternConfig {
    pub pattern: Pattern,
    pub learner: LearnerKind,
    /// Depth limit for the decision tree learner.
    pub max_depth: usize,
    /// Capacity of every moving frame, on sites and in the cloud.
    pub frame_capacity: usize,
    /// P0: global iterations between model pushes.
    pub push_interval: u64,
    /// P0: points aggregated into one S message.
    pub batch_size: usize,
    pub compute: ComputeCosts,
    /// Simulated time between consecutive global iterations.
    pub sample_interval_ms: f64,
    pub score_window: usize,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            pattern: Pattern::P1,
            learner: LearnerKind::DecisionTree,
            max_depth: learners::tree::DEFAULT_MAX_DEPTH,
            frame_capacity: DEFAULT_FRAME_CAPACITY,
            push_interval: DEFAULT_PUSH_INTERVAL,
            batch_size: 1,
            compute: ComputeCosts::default(),
            sample_interval_ms: DEFAULT_SAMPLE_INTERVAL_MS,
            score_window: learners::DEFAULT_SCORE_WINDOW,
        }
    }
}

impl PatternConfig {
    pub fn new(pattern: Pattern, learner: LearnerKind) -> Self {
        Self {
            pattern,
            learner,
            ..Self::default()
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let fail = |m: &str| Err(EngineError::InvalidConfig(m.into()));
        if self.frame_capacity == 0 {
            return fail("frame_capacity must be at least 1");
        }
        if self.push_interval == 0 {
            return fail("push_interval must be at least 1");
        }
        if self.batch_size == 0 || self.batch_size > u16::MAX as usize {
            return fail("batch_size must be in 1..=65535");
        }
        if self.score_window == 0 {
            return fail("score_window must be at least 1");
        }
        if self.max_depth == 0 {
            return fail("max_depth must be at least 1");
        }
        if !(self.sample_interval_ms.is_finite() && self.sample_interval_ms > 0.0) {
            return fail("sample_interval_ms must be finite and positive");
        }
        for (name, v) in [("edge_ms", self.compute.edge_ms), ("cloud_ms", self.compute.cloud_ms)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(EngineError::InvalidConfig(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        Ok(())
    }
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub pattern: Pattern,
    pub site: usize,
    pub iteration: u64,
    /// Simulated arrival time of the point at its site.
    pub time_ms: f64,
    /// `None` when no model existed yet (abstain).
    pub predicted: Option<usize>,
    pub actual: usize,
    /// Trailing mean of the site's outcomes, including this one.
    pub score_avg: f64,
    pub latency_ms: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    /// Serialized size of the model that made the prediction.
    pub model_size: Option<usize>,
    /// Iteration of the newest point the predicting model was trained on.
    pub model_trained_at: Option<u64>,
}

impl StepRecord {
    pub fn correct(&self) -> bool {
        self.predicted == Some(self.actual)
    }
}

#[derive(Debug, Clone)]
pub struct SiteState {
    pub site_id: usize,
    /// Only present in P1.
    pub local_frame: Option<MovingFrame>,
    pub current_model: Option<ModelSnapshot>,
    pub tracker: ScoreTracker,
    /// Arrival time of the latest point.
    pub clock: f64,
    /// Number of times `current_model` was replaced.
    pub model_updates: u64,
    stale: bool,
    pending_down: u64,
}

impl SiteState {
    pub fn new(site_id: usize, config: &PatternConfig) -> Self {
        Self {
            site_id,
            local_frame: (config.pattern == Pattern::P1).then(|| MovingFrame::new(config.frame_capacity)),
            current_model: None,
            tracker: ScoreTracker::new(config.score_window),
            clock: f64::NEG_INFINITY,
            model_updates: 0,
            stale: false,
            pending_down: 0,
        }
    }

    /// Local learning and prediction: classify with the current model, score,
    /// then insert the point (unless `trains` is false) so the next step
    /// sees a model retrained on it.
    pub fn step_p1(
        &mut self,
        point: &LabeledPoint,
        trains: bool,
        time_ms: f64,
        config: &PatternConfig,
    ) -> Result<StepRecord, EngineError> {
        let frame = self
            .local_frame
            .as_mut()
            .ok_or_else(|| EngineError::InvalidConfig("step_p1 on a site without a local frame".into()))?;
        if self.stale {
            self.current_model = Some(learners::fit_with(config.learner, &config.tree_params(), frame)?);
            self.model_updates += 1;
            self.stale = false;
        }
        self.clock = time_ms;
        let predicted = self
            .current_model
            .as_ref()
            .map(|m| m.predict(&point.features))
            .transpose()?;
        let score_avg = self.tracker.update(predicted, point.label);
        if trains {
            frame.push(point.clone());
            self.stale = true;
        }
        Ok(StepRecord {
            pattern: Pattern::P1,
            site: self.site_id,
            iteration: point.iteration,
            time_ms,
            predicted,
            actual: point.label,
            score_avg,
            latency_ms: config.compute.edge_ms,
            bytes_up: 0,
            bytes_down: 0,
            model_size: self.current_model.as_ref().map(ModelSnapshot::serialized_size),
            model_trained_at: self.current_model.as_ref().map(ModelSnapshot::trained_at),
        })
    }
}

#[derive(Debug, Clone)]
pub struct CloudState {
    pub global_frame: MovingFrame,
    pub global_model: Option<ModelSnapshot>,
    pub push_interval: u64,
    /// Number of retrainings.
    pub fits: u64,
    stale: bool,
}

impl CloudState {
    pub fn new(config: &PatternConfig) -> Self {
        Self {
            global_frame: MovingFrame::new(config.frame_capacity),
            global_model: None,
            push_interval: config.push_interval,
            fits: 0,
            stale: false,
        }
    }

    fn ingest(&mut self, point: LabeledPoint) {
        self.global_frame.push(point);
        self.stale = true;
    }

    /// Retrains if the frame changed since the last fit.
    fn model(&mut self, config: &PatternConfig) -> Result<Option<&ModelSnapshot>, EngineError> {
        if self.stale {
            self.global_model = Some(learners::fit_with(
                config.learner,
                &config.tree_params(),
                &self.global_frame,
            )?);
            self.fits += 1;
            self.stale = false;
        }
        Ok(self.global_model.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PushRecord {
    pub iteration: u64,
    pub time_ms: f64,
    pub model_size: usize,
    pub trained_at: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindCount {
    pub messages: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageStats {
    sent: [KindCount; 4],
    delivered: [KindCount; 4],
}

fn kind_index(kind: MessageKind) -> usize {
    match kind {
        MessageKind::S => 0,
        MessageKind::SD => 1,
        MessageKind::M => 2,
        MessageKind::D => 3,
    }
}

impl MessageStats {
    fn on_send(&mut self, m: &Message) {
        let c = &mut self.sent[kind_index(m.kind())];
        c.messages += 1;
        c.bytes += m.size() as u64;
    }

    fn on_deliver(&mut self, m: &Message) {
        let c = &mut self.delivered[kind_index(m.kind())];
        c.messages += 1;
        c.bytes += m.size() as u64;
    }

    pub fn sent(&self, kind: MessageKind) -> KindCount {
        self.sent[kind_index(kind)]
    }

    pub fn delivered(&self, kind: MessageKind) -> KindCount {
        self.delivered[kind_index(kind)]
    }
}

#[derive(Debug, Clone)]
pub struct PatternRun {
    pub pattern: Pattern,
    pub config: PatternConfig,
    pub medium: MediumProfile,
    pub sites: Vec<SiteState>,
    pub cloud: Option<CloudState>,
    /// Ordered by iteration, then site.
    pub log: Vec<StepRecord>,
    pub messages: MessageStats,
    pub pushes: Vec<PushRecord>,
}

impl PatternRun {
    /// Mean 0/1 outcome over every step.
    pub fn mean_score(&self) -> f64 {
        if self.log.is_empty() {
            return 0.0;
        }
        self.log.iter().filter(|r| r.correct()).count() as f64 / self.log.len() as f64
    }

    pub fn site_log(&self, site: usize) -> impl Iterator<Item = &StepRecord> + '_ {
        self.log.iter().filter(move |r| r.site == site)
    }

    pub fn write_log_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        write_log_csv(&self.log, out)
    }
}

pub const LOG_HEADER: [&str; 10] = [
    "pattern",
    "site",
    "iteration",
    "predicted",
    "actual",
    "score_avg",
    "latency_ms",
    "bytes_up",
    "bytes_down",
    "model_size",
];

/// Abstentions leave `predicted` empty; steps without a model have size 0.
pub fn write_log_csv<W: Write>(log: &[StepRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for r in log {
        w.write_record([
            r.pattern.to_string(),
            r.site.to_string(),
            r.iteration.to_string(),
            r.predicted.map(|p| p.to_string()).unwrap_or_default(),
            r.actual.to_string(),
            format!("{:?}", r.score_avg),
            format!("{:?}", r.latency_ms),
            r.bytes_up.to_string(),
            r.bytes_down.to_string(),
            r.model_size.unwrap_or(0).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
