//! Scenario matrices: build streams, run patterns over several seeds,
//! aggregate per scenario and write the results table.
//!
//! Every aggregate in a [`ResultRow`] is computed from the retained step logs
//! of its seeds, so rows can always be re-derived from the logs.

mod config;
mod recommend;
mod trends;

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::engine::{self, EngineError, Message, NodeId, Pattern, Payload, StepRecord};
use crate::learners::LearnerKind;
use crate::netsim::{MediumProfile, NetError};
use crate::streams::{LabeledPoint, StreamError};

pub use config::{DatasetKind, Division, ExperimentFile, Grid, ScenarioConfig, DEFAULT_SEEDS};
pub use recommend::{emit_recommendation_table, write_recommendation_csv, RecommendationRow};
pub use trends::{
    offset_windows, p0_offset_report, trend_checks, OffsetReport, TrendMargins, TrendReport, Verdict,
    VerdictStatus, OFFSET_WINDOW,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid config file: {0}")]
    Config(String),
    #[error("offset report needs a P0 run, got {0}")]
    NotP0(Pattern),
    #[error("malformed results table: {0}")]
    Results(String),
    #[error(transparent)]
    Stream(#[from] StreamError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Step log of one seed of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub log: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dataset: DatasetKind,
    pub division: Division,
    pub pattern: Pattern,
    pub learner: LearnerKind,
    pub frame_capacity: usize,
    pub push_interval: u64,
    pub medium: String,
    pub n_sites: usize,
    pub n_seeds: usize,
    pub mean_score: f64,
    /// Mean serialized size of the models that made predictions.
    pub mean_model_size: f64,
    pub mean_latency_ms: f64,
    /// Size of a single-point S message for this dataset.
    pub s_bytes: u64,
    pub d_bytes: u64,
    /// P0 only: scores in offset windows 1–50, 51–100, 101–150 after a push.
    pub offset: Option<[Option<f64>; 3]>,
    /// Set when any seed of the scenario failed; aggregates are then zero.
    pub error: Option<String>,
}

impl ResultRow {
    fn keyed(s: &ScenarioConfig) -> Self {
        Self {
            dataset: s.dataset,
            division: s.division,
            pattern: s.pattern,
            learner: s.learner,
            frame_capacity: s.frame_capacity,
            push_interval: s.push_interval,
            medium: s.medium.clone(),
            n_sites: s.n_sites,
            n_seeds: s.seeds.len(),
            mean_score: 0.0,
            mean_model_size: 0.0,
            mean_latency_ms: 0.0,
            s_bytes: 0,
            d_bytes: 0,
            offset: None,
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: ScenarioConfig,
    pub row: ResultRow,
    /// Empty when the scenario failed.
    pub runs: Vec<SeedRun>,
}

/// Runs one seed of a scenario.
pub fn run_seed(
    scenario: &ScenarioConfig,
    seed: u64,
    profiles: &[MediumProfile],
) -> Result<engine::PatternRun, HarnessError> {
    scenario.validate()?;
    let medium = crate::netsim::find_profile(profiles, &scenario.medium)?;
    let streams = scenario.site_streams(seed)?;
    Ok(engine::run_pattern(&scenario.pattern_config(), &medium, &streams)?)
}

/// Runs every (scenario, seed) cell in parallel and aggregates per scenario.
/// A failing cell marks only its own scenario's row as failed.
pub fn run_matrix(configs: &[ScenarioConfig], profiles: &[MediumProfile]) -> Vec<ScenarioResult> {
    let cells: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let outcomes: Vec<Result<SeedRun, String>> = cells
        .par_iter()
        .map(|&(i, seed)| {
            run_seed(&configs[i], seed, profiles)
                .map(|run| SeedRun { seed, log: run.log })
                .map_err(|e| format!("seed {seed}: {e}"))
        })
        .collect();

    let mut outcomes = outcomes.into_iter();
    configs
        .iter()
        .map(|scenario| {
            let mine: Vec<Result<SeedRun, String>> = outcomes.by_ref().take(scenario.seeds.len()).collect();
            let validity = scenario.validate().err().map(|e| e.to_string());
            let failure = validity.or_else(|| mine.iter().find_map(|r| r.as_ref().err().cloned()));
            match failure {
                Some(error) => ScenarioResult {
                    scenario: scenario.clone(),
                    row: ResultRow {
                        error: Some(error),
                        ..ResultRow::keyed(scenario)
                    },
                    runs: Vec::new(),
                },
                None => {
                    let runs: Vec<SeedRun> = mine.into_iter().map(Result::unwrap).collect();
                    ScenarioResult {
                        row: aggregate(scenario, &runs),
                        scenario: scenario.clone(),
                        runs,
                    }
                }
            }
        })
        .collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Per-seed means, then the mean over seeds.
pub fn aggregate(scenario: &ScenarioConfig, runs: &[SeedRun]) -> ResultRow {
    let per_seed = |f: &dyn Fn(&[StepRecord]) -> Option<f64>| {
        mean(runs.iter().filter_map(|r| f(&r.log))).unwrap_or(0.0)
    };
    let mean_score = per_seed(&|log| mean(log.iter().map(|r| f64::from(u8::from(r.correct())))));
    let mean_model_size = per_seed(&|log| mean(log.iter().filter_map(|r| r.model_size.map(|s| s as f64))));
    let mean_latency_ms = per_seed(&|log| mean(log.iter().map(|r| r.latency_ms)));

    let offset = (scenario.pattern == Pattern::P0).then(|| {
        let per_seed: Vec<[Option<f64>; 3]> = runs
            .iter()
            .map(|r| offset_windows(&r.log, scenario.push_interval).windows)
            .collect();
        std::array::from_fn(|w| mean(per_seed.iter().filter_map(|s| s[w])))
    });

    let (s_bytes, d_bytes) = single_point_sizes(scenario.dimension());
    ResultRow {
        mean_score,
        mean_model_size,
        mean_latency_ms,
        s_bytes,
        d_bytes,
        offset,
        ..ResultRow::keyed(scenario)
    }
}

/// Encoded sizes of a one-point S message and a D message.
pub fn single_point_sizes(dim: usize) -> (u64, u64) {
    let s = Message::new(
        NodeId::Site(0),
        NodeId::Cloud,
        0.0,
        Payload::Sensor(vec![LabeledPoint::new(vec![0.0; dim], 0, 0)]),
    );
    let d = Message::new(NodeId::Cloud, NodeId::Site(0), 0.0, Payload::Decision(Some(0)));
    (s.size() as u64, d.size() as u64)
}

pub const RESULTS_HEADER: [&str; 18] = [
    "dataset",
    "division",
    "pattern",
    "learner",
    "frame_capacity",
    "push_interval",
    "medium",
    "n_sites",
    "n_seeds",
    "mean_score",
    "mean_model_size",
    "mean_latency_ms",
    "s_bytes",
    "d_bytes",
    "offset_w1",
    "offset_w2",
    "offset_w3",
    "error",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

pub fn write_results_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        let off = r.offset.unwrap_or([None; 3]);
        w.write_record([
            r.dataset.to_string(),
            r.division.to_string(),
            r.pattern.to_string(),
            r.learner.to_string(),
            r.frame_capacity.to_string(),
            r.push_interval.to_string(),
            r.medium.clone(),
            r.n_sites.to_string(),
            r.n_seeds.to_string(),
            format!("{:?}", r.mean_score),
            format!("{:?}", r.mean_model_size),
            format!("{:?}", r.mean_latency_ms),
            r.s_bytes.to_string(),
            r.d_bytes.to_string(),
            fmt_opt(off[0]),
            fmt_opt(off[1]),
            fmt_opt(off[2]),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, HarnessError> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != RESULTS_HEADER {
        return Err(HarnessError::Results(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |field: &str| HarnessError::Results(format!("row {}: bad {field}", line + 1));
        let get = |i: usize| rec.get(i).unwrap_or("");
        fn parse<T: std::str::FromStr>(s: &str, err: HarnessError) -> Result<T, HarnessError> {
            s.parse().map_err(|_| err)
        }
        let opt = |i: usize| -> Result<Option<f64>, HarnessError> {
            let s = get(i);
            if s.is_empty() {
                Ok(None)
            } else {
                parse(s, bad(RESULTS_HEADER[i])).map(Some)
            }
        };
        let pattern: Pattern = parse(get(2), bad("pattern"))?;
        let windows = [opt(14)?, opt(15)?, opt(16)?];
        rows.push(ResultRow {
            dataset: parse(get(0), bad("dataset"))?,
            division: parse(get(1), bad("division"))?,
            pattern,
            learner: parse(get(3), bad("learner"))?,
            frame_capacity: parse(get(4), bad("frame_capacity"))?,
            push_interval: parse(get(5), bad("push_interval"))?,
            medium: get(6).to_string(),
            n_sites: parse(get(7), bad("n_sites"))?,
            n_seeds: parse(get(8), bad("n_seeds"))?,
            mean_score: parse(get(9), bad("mean_score"))?,
            mean_model_size: parse(get(10), bad("mean_model_size"))?,
            mean_latency_ms: parse(get(11), bad("mean_latency_ms"))?,
            s_bytes: parse(get(12), bad("s_bytes"))?,
            d_bytes: parse(get(13), bad("d_bytes"))?,
            offset: (pattern == Pattern::P0).then_some(windows),
            error: Some(get(17).to_string()).filter(|e| !e.is_empty()),
        });
    }
    Ok(rows)
}

/// File-name stem identifying a scenario within a matrix.
pub fn scenario_stem(index: usize, s: &ScenarioConfig) -> String {
    format!(
        "{index:03}_{}_{}_{}_{}_f{}_{}",
        s.dataset, s.division, s.pattern, s.learner, s.frame_capacity, s.medium
    )
}

/// Writes `results.csv` plus one step log per scenario and seed under `logs/`.
pub fn write_outputs(dir: &Path, results: &[ScenarioResult]) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir.join("logs"))?;
    let rows: Vec<ResultRow> = results.iter().map(|r| r.row.clone()).collect();
    write_results_csv(&rows, std::fs::File::create(dir.join("results.csv"))?)?;
    for (i, r) in results.iter().enumerate() {
        let stem = scenario_stem(i, &r.scenario);
        for run in &r.runs {
            let path = dir.join("logs").join(format!("{stem}_seed{}.csv", run.seed));
            engine::write_log_csv(&run.log, std::fs::File::create(path)?)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
