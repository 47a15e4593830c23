//! P0 offset windows and the qualitative trend checks over a results table.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{DatasetKind, Division, HarnessError, ResultRow};
use crate::engine::{Pattern, PatternRun, StepRecord};
use crate::learners::LearnerKind;

/// Width of each offset window, in global iterations.
pub const OFFSET_WINDOW: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OffsetReport {
    /// Mean 0/1 outcome per window; `None` for an empty window.
    pub windows: [Option<f64>; 3],
    pub counts: [usize; 3],
}

/// Buckets every step by its offset since the latest push boundary.
///
/// Iteration `g ≥ 1` has offset `((g - 1) mod push_interval) + 1`; offsets
/// 1–50, 51–100 and 101–150 form the three windows and larger offsets are
/// ignored. Iteration 0 precedes every boundary and is skipped. Steps of all
/// sites and all spans are pooled, warm-up abstentions included.
pub fn offset_windows(log: &[StepRecord], push_interval: u64) -> OffsetReport {
    let mut hits = [0usize; 3];
    let mut counts = [0usize; 3];
    for r in log.iter().filter(|r| r.iteration >= 1) {
        let offset = (r.iteration - 1) % push_interval.max(1) + 1;
        let w = ((offset - 1) / OFFSET_WINDOW) as usize;
        if w < 3 {
            counts[w] += 1;
            hits[w] += usize::from(r.correct());
        }
    }
    OffsetReport {
        windows: std::array::from_fn(|w| (counts[w] > 0).then(|| hits[w] as f64 / counts[w] as f64)),
        counts,
    }
}

pub fn p0_offset_report(run: &PatternRun) -> Result<OffsetReport, HarnessError> {
    if run.pattern != Pattern::P0 {
        return Err(HarnessError::NotP0(run.pattern));
    }
    Ok(offset_windows(&run.log, run.config.push_interval))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendMargins {
    /// P1 equal minus without-one must exceed this.
    pub division_gap: f64,
    /// P2 equal and without-one must be closer than this.
    pub division_similar: f64,
    /// One-sided slack for "at least as good as" comparisons.
    pub ordering_slack: f64,
    /// Circles P0 window 1 minus window 3 must exceed this.
    pub offset_gap: f64,
    /// RandomTree P0 window gap must stay below this in absolute value.
    pub offset_flat: f64,
}

impl Default for TrendMargins {
    fn default() -> Self {
        Self {
            division_gap: 0.05,
            division_similar: 0.05,
            ordering_slack: 0.02,
            offset_gap: 0.03,
            offset_flat: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    NotEvaluable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub id: String,
    pub claim: String,
    pub status: VerdictStatus,
    pub values: BTreeMap<String, f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub margins: TrendMargins,
    pub verdicts: Vec<Verdict>,
}

impl TrendReport {
    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }
}

#[derive(Clone, Copy)]
struct Key {
    dataset: DatasetKind,
    division: Division,
    pattern: Pattern,
    frame: usize,
}

/// First successful decision-tree row matching `key`. P0 rows must use a
/// push interval of 150.
fn lookup(rows: &[ResultRow], key: Key) -> Option<&ResultRow> {
    rows.iter().find(|r| {
        r.is_ok()
            && r.learner == LearnerKind::DecisionTree
            && r.dataset == key.dataset
            && r.division == key.division
            && r.pattern == key.pattern
            && r.frame_capacity == key.frame
            && (r.pattern != Pattern::P0 || r.push_interval == 150)
    })
}

fn describe(k: Key) -> String {
    format!("{} {} {} frame {}", k.dataset, k.division, k.pattern, k.frame)
}

struct Check {
    id: &'static str,
    claim: &'static str,
}

impl Check {
    fn missing(&self, keys: &[Key], rows: &[ResultRow]) -> Option<Verdict> {
        let absent: Vec<String> = keys
            .iter()
            .filter(|k| lookup(rows, **k).is_none())
            .map(|k| describe(*k))
            .collect();
        (!absent.is_empty()).then(|| Verdict {
            id: self.id.into(),
            claim: self.claim.into(),
            status: VerdictStatus::NotEvaluable,
            values: BTreeMap::new(),
            detail: format!("missing rows: {}", absent.join("; ")),
        })
    }

    fn verdict(&self, pass: bool, values: &[(&str, f64)], detail: String) -> Verdict {
        Verdict {
            id: self.id.into(),
            claim: self.claim.into(),
            status: if pass { VerdictStatus::Pass } else { VerdictStatus::Fail },
            values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            detail,
        }
    }
}

const C: DatasetKind = DatasetKind::Circles;
const EQ: Division = Division::Equal;
const WO: Division = Division::WithoutOne;

fn key(dataset: DatasetKind, division: Division, pattern: Pattern, frame: usize) -> Key {
    Key {
        dataset,
        division,
        pattern,
        frame,
    }
}

/// Evaluates every claim. Claims whose rows are missing or failed are
/// reported as not evaluable, never as passing.
pub fn trend_checks(rows: &[ResultRow], margins: &TrendMargins) -> TrendReport {
    let score = |k: Key| lookup(rows, k).map(|r| r.mean_score).unwrap();
    let mut verdicts = Vec::new();

    let t1 = Check {
        id: "T1",
        claim: "P1 on circles: equal division scores clearly above without-one",
    };
    let keys = [key(C, EQ, Pattern::P1, 150), key(C, WO, Pattern::P1, 150)];
    verdicts.push(t1.missing(&keys, rows).unwrap_or_else(|| {
        let (eq, wo) = (score(keys[0]), score(keys[1]));
        let gap = eq - wo;
        t1.verdict(
            gap > margins.division_gap,
            &[("equal", eq), ("without_one", wo), ("gap", gap)],
            format!("gap {gap:.4} must exceed {}", margins.division_gap),
        )
    }));

    let t2 = Check {
        id: "T2",
        claim: "P2 on circles: similar scores for both divisions",
    };
    let keys = [key(C, EQ, Pattern::P2, 150), key(C, WO, Pattern::P2, 150)];
    verdicts.push(t2.missing(&keys, rows).unwrap_or_else(|| {
        let (eq, wo) = (score(keys[0]), score(keys[1]));
        let gap = (eq - wo).abs();
        t2.verdict(
            gap < margins.division_similar,
            &[("equal", eq), ("without_one", wo), ("abs_gap", gap)],
            format!("|gap| {gap:.4} must stay below {}", margins.division_similar),
        )
    }));

    let t3 = Check {
        id: "T3",
        claim: "P1 on circles: the moderate frame (150) scores best",
    };
    let keys = [
        key(C, EQ, Pattern::P1, 50),
        key(C, EQ, Pattern::P1, 150),
        key(C, EQ, Pattern::P1, 300),
    ];
    verdicts.push(t3.missing(&keys, rows).unwrap_or_else(|| {
        let (f50, f150, f300) = (score(keys[0]), score(keys[1]), score(keys[2]));
        let s = margins.ordering_slack;
        t3.verdict(
            f150 - f50 >= -s && f150 - f300 >= -s,
            &[("frame_50", f50), ("frame_150", f150), ("frame_300", f300)],
            format!("frame 150 must be within -{s} of frames 50 and 300 or above them"),
        )
    }));

    for (id, dataset, claim) in [
        ("T4_circles", DatasetKind::Circles, "P0 on circles: first window after a push beats the third"),
        ("T4_random_tree", DatasetKind::RandomTree, "P0 on random trees: no offset effect"),
    ] {
        let check = Check { id, claim };
        let k = key(dataset, EQ, Pattern::P0, 150);
        let windows = lookup(rows, k).and_then(|r| r.offset).and_then(|w| Some((w[0]?, w[2]?)));
        verdicts.push(match windows {
            None => check.missing(&[k], rows).unwrap_or_else(|| Verdict {
                id: id.into(),
                claim: claim.into(),
                status: VerdictStatus::NotEvaluable,
                values: BTreeMap::new(),
                detail: "row has no offset windows".into(),
            }),
            Some((w1, w3)) => {
                let gap = w1 - w3;
                let (pass, detail) = match dataset {
                    DatasetKind::Circles => (
                        gap > margins.offset_gap,
                        format!("w1 - w3 = {gap:.4} must exceed {}", margins.offset_gap),
                    ),
                    DatasetKind::RandomTree => (
                        gap.abs() < margins.offset_flat,
                        format!("|w1 - w3| = {:.4} must stay below {}", gap.abs(), margins.offset_flat),
                    ),
                };
                check.verdict(pass, &[("w1", w1), ("w3", w3), ("gap", gap)], detail)
            }
        });
    }

    let t5 = Check {
        id: "T5",
        claim: "without-one on circles: P2 at least P0, P0 at least P1",
    };
    let keys = [
        key(C, WO, Pattern::P2, 150),
        key(C, WO, Pattern::P0, 150),
        key(C, WO, Pattern::P1, 150),
    ];
    verdicts.push(t5.missing(&keys, rows).unwrap_or_else(|| {
        let (p2, p0, p1) = (score(keys[0]), score(keys[1]), score(keys[2]));
        let s = margins.ordering_slack;
        t5.verdict(
            p2 - p0 >= -s && p0 - p1 >= -s,
            &[("P2", p2), ("P0", p0), ("P1", p1)],
            format!("each step of P2 >= P0 >= P1 may fall short by at most {s}"),
        )
    }));

    TrendReport {
        margins: *margins,
        verdicts,
    }
}
