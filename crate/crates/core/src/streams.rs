//! Labeled data streams with concept drift, and their division across edge sites.
//!
//! Two generators are provided:
//!
//! - **Circles**: category centers sit on a circle and the whole constellation
//!   rotates at a constant angular speed, one increment per emitted point.
//! - **RandomTree**: two random labeling trees built from different seeds take
//!   turns labeling uniformly drawn feature vectors.
//!
//! Streams are divided across sites with [`divide_equal`] or
//! [`divide_without_one`]. The second one marks a category per site that the
//! site observes (and must classify) but never trains on.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("at least {min} site(s) required, got {got}")]
    TooFewSites { min: usize, got: usize },
    #[error("assignment covers {got} sites, expected {expected}")]
    AssignmentLength { expected: usize, got: usize },
    #[error("site {site} is assigned category {category}, which does not occur in the stream")]
    UnknownCategory { site: usize, category: usize },
    #[error("category {0} would be excluded from every site")]
    OrphanedCategory(usize),
    #[error("malformed stream csv: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One observation: features, category and its index in the global stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub features: Vec<f64>,
    pub label: usize,
    pub iteration: u64,
}

impl LabeledPoint {
    pub fn new(features: Vec<f64>, label: usize, iteration: u64) -> Self {
        Self {
            features,
            label,
            iteration,
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CirclesConfig {
    pub n_categories: usize,
    pub points_per_category: usize,
    /// Radians the constellation turns per emitted point.
    pub angular_increment: f64,
    /// Noise displacement is clamped to this distance from the center.
    pub cluster_radius: f64,
    /// Radius of the circle the category centers sit on.
    pub cluster_center_radius: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for CirclesConfig {
    fn default() -> Self {
        Self {
            n_categories: 7,
            points_per_category: 500,
            angular_increment: PI / (720.0 * 3.0),
            cluster_radius: 0.5,
            cluster_center_radius: 1.0,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl CirclesConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        let bad = |msg: &str| Err(StreamError::InvalidConfig(msg.to_string()));
        if self.n_categories < 2 {
            return bad("n_categories must be at least 2");
        }
        if !(self.angular_increment > 0.0 && self.angular_increment.is_finite()) {
            return bad("angular_increment must be positive");
        }
        if self.cluster_radius.is_nan() || self.cluster_radius <= 0.0 {
            return bad("cluster_radius must be positive");
        }
        if !(self.cluster_center_radius > 0.0 && self.cluster_center_radius.is_finite()) {
            return bad("cluster_center_radius must be positive");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be non-negative");
        }
        Ok(())
    }

    /// Stream length that emits `points_per_category` points of every category.
    pub fn default_iterations(&self) -> usize {
        self.n_categories * self.points_per_category
    }

    /// Angle of `category`'s center before any rotation.
    pub fn initial_angle(&self, category: usize) -> f64 {
        2.0 * PI * category as f64 / self.n_categories as f64
    }

    /// Center of `category` at global iteration `k`.
    pub fn center_at(&self, category: usize, k: u64) -> [f64; 2] {
        let angle = self.initial_angle(category) + k as f64 * self.angular_increment;
        [
            self.cluster_center_radius * angle.cos(),
            self.cluster_center_radius * angle.sin(),
        ]
    }
}

/// Emits one point per iteration; categories take turns round-robin and every
/// center has rotated by `k * angular_increment` at iteration `k`.
pub fn generate_circles(
    config: &CirclesConfig,
    n_iterations: usize,
) -> Result<Vec<LabeledPoint>, StreamError> {
    config.validate()?;
    if n_iterations == 0 {
        return Err(StreamError::InvalidConfig("n_iterations must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(n_iterations);
    for k in 0..n_iterations as u64 {
        let label = (k % config.n_categories as u64) as usize;
        let [cx, cy] = config.center_at(label, k);
        let nx: f64 = rng.sample::<f64, _>(StandardNormal) * config.noise_std;
        let ny: f64 = rng.sample::<f64, _>(StandardNormal) * config.noise_std;
        let (nx, ny) = clamp_radial(nx, ny, config.cluster_radius);
        out.push(LabeledPoint::new(vec![cx + nx, cy + ny], label, k));
    }
    Ok(out)
}

fn clamp_radial(x: f64, y: f64, max: f64) -> (f64, f64) {
    let r = x.hypot(y);
    if r > max {
        (x * max / r, y * max / r)
    } else {
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomTreeConfig {
    pub n_features: usize,
    pub n_categories: usize,
    pub max_depth: usize,
    pub seed_a: u64,
    pub seed_b: u64,
    /// Points labeled by one tree before the other takes over. The default
    /// (1500) is five sites times the largest frame (300), so no training
    /// frame ever holds more than one switch.
    pub alternation_period: usize,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        Self {
            n_features: 2,
            n_categories: 7,
            max_depth: 5,
            seed_a: 1,
            seed_b: 2,
            alternation_period: 1500,
        }
    }
}

impl RandomTreeConfig {
    pub fn validate(&self) -> Result<(), StreamError> {
        let bad = |msg: &str| Err(StreamError::InvalidConfig(msg.to_string()));
        if self.n_features == 0 {
            return bad("n_features must be at least 1");
        }
        if self.n_categories < 2 {
            return bad("n_categories must be at least 2");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if self.seed_a == self.seed_b {
            return bad("seed_a and seed_b must differ");
        }
        if self.alternation_period == 0 {
            return bad("alternation_period must be at least 1");
        }
        Ok(())
    }
}

// Same structural knobs as MOA's RandomTreeGenerator defaults.
const LEAF_FRACTION: f64 = 0.15;
const FIRST_LEAF_LEVEL: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum LabelingNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<LabelingNode>,
        right: Box<LabelingNode>,
    },
    Leaf(usize),
}

/// Random concept used by the RandomTree generator. `x[feature] <= threshold`
/// goes left.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelingTree {
    pub root: LabelingNode,
}

impl LabelingTree {
    pub fn build(seed: u64, n_features: usize, n_categories: usize, max_depth: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Leaves draw from a shuffled cycle so every category owns at least one
        // leaf whenever there are enough leaves.
        let mut cycle: Vec<usize> = (0..n_categories).collect();
        shuffle(&mut cycle, &mut rng);
        let mut next_leaf = 0usize;
        let bounds = vec![(0.0, 1.0); n_features];
        let root = Self::grow(&mut rng, &bounds, 0, max_depth, &cycle, &mut next_leaf);
        Self { root }
    }

    fn grow(
        rng: &mut ChaCha8Rng,
        bounds: &[(f64, f64)],
        depth: usize,
        max_depth: usize,
        cycle: &[usize],
        next_leaf: &mut usize,
    ) -> LabelingNode {
        let leaf = depth >= max_depth
            || (depth >= FIRST_LEAF_LEVEL.min(max_depth) && rng.random::<f64>() < LEAF_FRACTION);
        if leaf {
            let label = cycle[*next_leaf % cycle.len()];
            *next_leaf += 1;
            return LabelingNode::Leaf(label);
        }
        let feature = rng.random_range(0..bounds.len());
        let (lo, hi) = bounds[feature];
        let threshold = lo + (hi - lo) * rng.random::<f64>();
        let mut left_bounds = bounds.to_vec();
        left_bounds[feature].1 = threshold;
        let mut right_bounds = bounds.to_vec();
        right_bounds[feature].0 = threshold;
        let left = Self::grow(rng, &left_bounds, depth + 1, max_depth, cycle, next_leaf);
        let right = Self::grow(rng, &right_bounds, depth + 1, max_depth, cycle, next_leaf);
        LabelingNode::Split {
            feature,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn label(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                LabelingNode::Leaf(label) => return *label,
                LabelingNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(n: &LabelingNode) -> usize {
            match n {
                LabelingNode::Leaf(_) => 0,
                LabelingNode::Split { left, right, .. } => 1 + go(left).max(go(right)),
            }
        }
        go(&self.root)
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// The two labeling trees and the feature source, in generation order.
pub fn random_tree_pair(config: &RandomTreeConfig) -> (LabelingTree, LabelingTree) {
    (
        LabelingTree::build(config.seed_a, config.n_features, config.n_categories, config.max_depth),
        LabelingTree::build(config.seed_b, config.n_features, config.n_categories, config.max_depth),
    )
}

/// Index (0 or 1) of the labeling tree in force at iteration `k`.
pub fn active_tree(config: &RandomTreeConfig, k: u64) -> usize {
    ((k / config.alternation_period as u64) % 2) as usize
}

pub fn generate_random_tree_stream(
    config: &RandomTreeConfig,
    n_iterations: usize,
) -> Result<Vec<LabeledPoint>, StreamError> {
    config.validate()?;
    if n_iterations == 0 {
        return Err(StreamError::InvalidConfig("n_iterations must be at least 1".into()));
    }
    let trees = random_tree_pair(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed_a.rotate_left(32) ^ config.seed_b);
    let mut out = Vec::with_capacity(n_iterations);
    for k in 0..n_iterations as u64 {
        let features: Vec<f64> = (0..config.n_features).map(|_| rng.random::<f64>()).collect();
        let tree = if active_tree(config, k) == 0 { &trees.0 } else { &trees.1 };
        let label = tree.label(&features);
        out.push(LabeledPoint::new(features, label, k));
    }
    Ok(out)
}

/// A stream split across edge sites.
///
/// With the without-one division every site still observes all categories, but
/// points of `missing_category[site]` are abandoned instead of entering any
/// training frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SiteStreams {
    pub per_site: Vec<Vec<LabeledPoint>>,
    pub missing_category: Option<Vec<usize>>,
}

impl SiteStreams {
    pub fn n_sites(&self) -> usize {
        self.per_site.len()
    }

    pub fn total_points(&self) -> usize {
        self.per_site.iter().map(Vec::len).sum()
    }

    /// Whether a point with `label` arriving at `site` may be used for training.
    pub fn trains_on(&self, site: usize, label: usize) -> bool {
        match &self.missing_category {
            Some(missing) => missing.get(site) != Some(&label),
            None => true,
        }
    }

    /// Points of `site` that are eligible for training, in arrival order.
    pub fn training_points(&self, site: usize) -> impl Iterator<Item = &LabeledPoint> + '_ {
        self.per_site[site]
            .iter()
            .filter(move |p| self.trains_on(site, p.label))
    }
}

/// Deals the points of each category round-robin over the sites.
pub fn divide_equal(stream: &[LabeledPoint], n_sites: usize) -> Result<SiteStreams, StreamError> {
    if n_sites == 0 {
        return Err(StreamError::TooFewSites { min: 1, got: 0 });
    }
    let mut per_site = vec![Vec::new(); n_sites];
    let mut dealt: Vec<usize> = Vec::new();
    for p in stream {
        if p.label >= dealt.len() {
            dealt.resize(p.label + 1, 0);
        }
        per_site[dealt[p.label] % n_sites].push(p.clone());
        dealt[p.label] += 1;
    }
    Ok(SiteStreams {
        per_site,
        missing_category: None,
    })
}

/// Equal dealing plus one abandoned category per site.
///
/// `assignment[i]` is the category site `i` never trains on. Every assigned
/// category must occur in the stream, and no category may be abandoned by all
/// sites at once.
pub fn divide_without_one(
    stream: &[LabeledPoint],
    n_sites: usize,
    assignment: &[usize],
) -> Result<SiteStreams, StreamError> {
    if n_sites < 2 {
        return Err(StreamError::TooFewSites { min: 2, got: n_sites });
    }
    if assignment.len() != n_sites {
        return Err(StreamError::AssignmentLength {
            expected: n_sites,
            got: assignment.len(),
        });
    }
    let present: BTreeSet<usize> = stream.iter().map(|p| p.label).collect();
    for (site, &category) in assignment.iter().enumerate() {
        if !present.contains(&category) {
            return Err(StreamError::UnknownCategory { site, category });
        }
    }
    for &category in assignment {
        if assignment.iter().all(|&c| c == category) {
            return Err(StreamError::OrphanedCategory(category));
        }
    }
    let mut streams = divide_equal(stream, n_sites)?;
    streams.missing_category = Some(assignment.to_vec());
    Ok(streams)
}

/// Picks the abandoned category for every site: site `i` gets the `i`-th
/// category present in the stream, wrapping around.
pub fn default_assignment(stream: &[LabeledPoint], n_sites: usize) -> Vec<usize> {
    let present: Vec<usize> = stream
        .iter()
        .map(|p| p.label)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if present.is_empty() {
        return vec![0; n_sites];
    }
    (0..n_sites).map(|i| present[i % present.len()]).collect()
}

/// Writes `iteration,label,f0,f1,...` rows. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_stream_csv<W: Write>(points: &[LabeledPoint], out: W) -> Result<(), StreamError> {
    let dim = points.first().map_or(0, LabeledPoint::dim);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["iteration".to_string(), "label".to_string()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for p in points {
        if p.dim() != dim {
            return Err(StreamError::Format(format!(
                "point at iteration {} has {} features, expected {dim}",
                p.iteration,
                p.dim()
            )));
        }
        let mut row = vec![p.iteration.to_string(), p.label.to_string()];
        row.extend(p.features.iter().map(|f| format!("{f:?}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_stream_csv<R: Read>(input: R) -> Result<Vec<LabeledPoint>, StreamError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.len() < 3 || &header[0] != "iteration" || &header[1] != "label" {
        return Err(StreamError::Format(
            "expected header iteration,label,f0,...".into(),
        ));
    }
    let mut out = Vec::new();
    for (row_no, rec) in r.records().enumerate() {
        let rec = rec?;
        let field_err = |what: &str| StreamError::Format(format!("row {}: bad {what}", row_no + 1));
        let iteration = rec[0].parse().map_err(|_| field_err("iteration"))?;
        let label = rec[1].parse().map_err(|_| field_err("label"))?;
        let features = rec
            .iter()
            .skip(2)
            .map(|f| f.parse::<f64>().map_err(|_| field_err("feature")))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(LabeledPoint::new(features, label, iteration));
    }
    Ok(out)
}
