//! Connection-type recommendations joined with measured latencies.

use std::io::Write;

use serde::Serialize;

use super::{single_point_sizes, HarnessError, ResultRow};
use crate::engine::Pattern;
use crate::netsim::{recommend, AppClass, ComputeCosts, MediumProfile, MessageSizes};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationRow {
    pub app_class: String,
    pub max_latency_ms: f64,
    pub pattern: Pattern,
    pub medium: String,
    /// Latency from the transaction model.
    pub latency_ms: f64,
    /// Mean latency of the matching result rows, if any were run.
    pub measured_latency_ms: Option<f64>,
    pub feasible: bool,
}

fn sizes_for(pattern: Pattern, results: &[ResultRow]) -> MessageSizes {
    let rows: Vec<&ResultRow> = results.iter().filter(|r| r.is_ok() && r.pattern == pattern).collect();
    let (s_default, d_default) = single_point_sizes(2);
    match rows.first() {
        None => MessageSizes {
            s_bytes: s_default,
            d_bytes: d_default,
            m_bytes: 0,
        },
        Some(first) => MessageSizes {
            s_bytes: first.s_bytes,
            d_bytes: first.d_bytes,
            m_bytes: (rows.iter().map(|r| r.mean_model_size).sum::<f64>() / rows.len() as f64).round() as u64,
        },
    }
}

/// One row per (app class, pattern, medium), nested in that order. Message
/// sizes come from the results of the same pattern, or from a 2-feature
/// point when the pattern was not run.
pub fn emit_recommendation_table(
    results: &[ResultRow],
    app_classes: &[AppClass],
    profiles: &[MediumProfile],
    compute: &ComputeCosts,
) -> Vec<RecommendationRow> {
    let mut out = Vec::new();
    for app in app_classes {
        for pattern in Pattern::ALL {
            let sizes = sizes_for(pattern, results);
            let feasibility = recommend(&[pattern], profiles, std::slice::from_ref(app), &sizes, compute);
            for row in feasibility {
                let measured: Vec<f64> = results
                    .iter()
                    .filter(|r| r.is_ok() && r.pattern == pattern && r.medium == row.medium)
                    .map(|r| r.mean_latency_ms)
                    .collect();
                out.push(RecommendationRow {
                    app_class: row.app_class,
                    max_latency_ms: app.max_latency_ms,
                    pattern,
                    medium: row.medium,
                    latency_ms: row.latency_ms,
                    measured_latency_ms: (!measured.is_empty())
                        .then(|| measured.iter().sum::<f64>() / measured.len() as f64),
                    feasible: row.feasible,
                });
            }
        }
    }
    out
}

pub fn write_recommendation_csv<W: Write>(rows: &[RecommendationRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "app_class",
        "max_latency_ms",
        "pattern",
        "medium",
        "latency_ms",
        "measured_latency_ms",
        "feasible",
    ])?;
    for r in rows {
        w.write_record([
            r.app_class.clone(),
            format!("{:?}", r.max_latency_ms),
            r.pattern.to_string(),
            r.medium.clone(),
            format!("{:?}", r.latency_ms),
            r.measured_latency_ms.map(|v| format!("{v:?}")).unwrap_or_default(),
            r.feasible.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
