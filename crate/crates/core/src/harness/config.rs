//! Scenario configuration and the TOML experiment file.
//!
//! ```toml
//! [[scenario]]
//! dataset = "circles"
//! division = "without_one"
//! pattern = "P2"
//! seeds = [0, 1, 2]
//!
//! [grid]                      # optional cross product over a base scenario
//! datasets = ["circles", "random_tree"]
//! divisions = ["equal", "without_one"]
//! patterns = ["P1", "P2"]
//! frame_capacities = [50, 150, 300]
//! [grid.base]
//! medium = "ethernet"
//! ```
//!
//! Explicit scenarios come first, then the grid in nesting order dataset,
//! division, pattern, learner, frame capacity, push interval, medium.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::engine::{Pattern, PatternConfig};
use crate::learners::{tree::DEFAULT_MAX_DEPTH, LearnerKind, DEFAULT_SCORE_WINDOW};
use crate::netsim::ComputeCosts;
use crate::streams::{
    default_assignment, divide_equal, divide_without_one, generate_circles, generate_random_tree_stream,
    CirclesConfig, RandomTreeConfig, SiteStreams,
};

pub const DEFAULT_SEEDS: usize = 10;

macro_rules! snake_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name { $($variant),+ }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($name::$variant => $text),+ })
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} {other:?}", stringify!($name))),
                }
            }
        }
    };
}

snake_enum!(DatasetKind { Circles => "circles", RandomTree => "random_tree" });
snake_enum!(Division { Equal => "equal", WithoutOne => "without_one" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dataset: DatasetKind,
    /// Generator settings; `seed` is replaced by each scenario seed.
    pub circles: CirclesConfig,
    /// Generator settings; both tree seeds are derived from each scenario seed.
    pub random_tree: RandomTreeConfig,
    pub n_sites: usize,
    pub division: Division,
    /// Abandoned category per site; defaults to site `i` → `i`-th category.
    pub assignment: Option<Vec<usize>>,
    pub pattern: Pattern,
    pub learner: LearnerKind,
    pub max_depth: usize,
    pub frame_capacity: usize,
    pub push_interval: u64,
    pub batch_size: usize,
    pub medium: String,
    pub compute: ComputeCosts,
    pub sample_interval_ms: f64,
    pub score_window: usize,
    pub seeds: Vec<u64>,
    /// Stream length; defaults to `n_categories × points_per_category` for
    /// circles and 3500 for random trees.
    pub n_iterations: Option<usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Circles,
            circles: CirclesConfig::default(),
            random_tree: RandomTreeConfig::default(),
            n_sites: 5,
            division: Division::Equal,
            assignment: None,
            pattern: Pattern::P1,
            learner: LearnerKind::DecisionTree,
            max_depth: DEFAULT_MAX_DEPTH,
            frame_capacity: 150,
            push_interval: 150,
            batch_size: 1,
            medium: "ethernet".into(),
            compute: ComputeCosts::default(),
            sample_interval_ms: crate::engine::DEFAULT_SAMPLE_INTERVAL_MS,
            score_window: DEFAULT_SCORE_WINDOW,
            seeds: (0..DEFAULT_SEEDS as u64).collect(),
            n_iterations: None,
        }
    }
}

const RANDOM_TREE_ITERATIONS: usize = 3500;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidScenario(m));
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.n_sites == 0 {
            return bad("n_sites must be at least 1".into());
        }
        if self.division == Division::WithoutOne && self.n_sites < 2 {
            return bad("without_one division needs at least 2 sites".into());
        }
        if self.n_iterations == Some(0) {
            return bad("n_iterations must be at least 1".into());
        }
        if let Some(a) = &self.assignment {
            if a.len() != self.n_sites {
                return bad(format!("assignment has {} entries for {} sites", a.len(), self.n_sites));
            }
        }
        match self.dataset {
            DatasetKind::Circles => self.circles.validate()?,
            DatasetKind::RandomTree => RandomTreeConfig {
                seed_a: 0,
                seed_b: 1,
                ..self.random_tree.clone()
            }
            .validate()?,
        }
        self.pattern_config().validate()?;
        Ok(())
    }

    pub fn pattern_config(&self) -> PatternConfig {
        PatternConfig {
            pattern: self.pattern,
            learner: self.learner,
            max_depth: self.max_depth,
            frame_capacity: self.frame_capacity,
            push_interval: self.push_interval,
            batch_size: self.batch_size,
            compute: self.compute,
            sample_interval_ms: self.sample_interval_ms,
            score_window: self.score_window,
        }
    }

    pub fn dimension(&self) -> usize {
        match self.dataset {
            DatasetKind::Circles => 2,
            DatasetKind::RandomTree => self.random_tree.n_features,
        }
    }

    pub fn iterations(&self) -> usize {
        self.n_iterations.unwrap_or(match self.dataset {
            DatasetKind::Circles => self.circles.default_iterations(),
            DatasetKind::RandomTree => RANDOM_TREE_ITERATIONS,
        })
    }

    /// Generator config for one seed. Random-tree seeds are derived so that
    /// the two labeling trees always differ.
    pub fn random_tree_for(&self, seed: u64) -> RandomTreeConfig {
        let seed_a = mix(seed.wrapping_mul(2));
        let mut seed_b = mix(seed.wrapping_mul(2).wrapping_add(1));
        if seed_b == seed_a {
            seed_b = seed_b.wrapping_add(1);
        }
        RandomTreeConfig {
            seed_a,
            seed_b,
            ..self.random_tree.clone()
        }
    }

    pub fn site_streams(&self, seed: u64) -> Result<SiteStreams, HarnessError> {
        let n = self.iterations();
        let stream = match self.dataset {
            DatasetKind::Circles => generate_circles(
                &CirclesConfig {
                    seed,
                    ..self.circles.clone()
                },
                n,
            )?,
            DatasetKind::RandomTree => generate_random_tree_stream(&self.random_tree_for(seed), n)?,
        };
        Ok(match self.division {
            Division::Equal => divide_equal(&stream, self.n_sites)?,
            Division::WithoutOne => {
                let assignment = self
                    .assignment
                    .clone()
                    .unwrap_or_else(|| default_assignment(&stream, self.n_sites));
                divide_without_one(&stream, self.n_sites, &assignment)?
            }
        })
    }
}

/// Cross product over a base scenario. Empty axes keep the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub base: ScenarioConfig,
    pub datasets: Vec<DatasetKind>,
    pub divisions: Vec<Division>,
    pub patterns: Vec<Pattern>,
    pub learners: Vec<LearnerKind>,
    pub frame_capacities: Vec<usize>,
    pub push_intervals: Vec<u64>,
    pub media: Vec<String>,
}

fn axis<T: Clone>(values: &[T], base: &T) -> Vec<T> {
    if values.is_empty() {
        vec![base.clone()]
    } else {
        values.to_vec()
    }
}

impl Grid {
    pub fn expand(&self) -> Vec<ScenarioConfig> {
        let b = &self.base;
        let mut out = Vec::new();
        for dataset in axis(&self.datasets, &b.dataset) {
            for division in axis(&self.divisions, &b.division) {
                for pattern in axis(&self.patterns, &b.pattern) {
                    for learner in axis(&self.learners, &b.learner) {
                        for frame_capacity in axis(&self.frame_capacities, &b.frame_capacity) {
                            for push_interval in axis(&self.push_intervals, &b.push_interval) {
                                for medium in axis(&self.media, &b.medium) {
                                    out.push(ScenarioConfig {
                                        dataset,
                                        division,
                                        pattern,
                                        learner,
                                        frame_capacity,
                                        push_interval,
                                        medium,
                                        ..b.clone()
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentFile {
    pub scenario: Vec<ScenarioConfig>,
    pub grid: Option<Grid>,
}

impl ExperimentFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn scenarios(&self) -> Vec<ScenarioConfig> {
        let mut out = self.scenario.clone();
        if let Some(g) = &self.grid {
            out.extend(g.expand());
        }
        out
    }
}
