use super::*;
use crate::netsim::{default_app_classes, default_profiles, AppClass, ComputeCosts};

fn small(pattern: Pattern, division: Division) -> ScenarioConfig {
    ScenarioConfig {
        pattern,
        division,
        n_iterations: Some(600),
        seeds: vec![3, 4],
        ..ScenarioConfig::default()
    }
}

fn row(dataset: DatasetKind, division: Division, pattern: Pattern, frame: usize, score: f64) -> ResultRow {
    let s = ScenarioConfig {
        dataset,
        division,
        pattern,
        frame_capacity: frame,
        ..ScenarioConfig::default()
    };
    ResultRow {
        mean_score: score,
        offset: (pattern == Pattern::P0).then_some([Some(0.9), Some(0.8), Some(0.7)]),
        ..ResultRow::keyed(&s)
    }
}

#[test]
fn empty_matrix_gives_no_rows() {
    assert!(run_matrix(&[], &default_profiles()).is_empty());
}

#[test]
fn rows_are_reproducible_from_logs() {
    let configs = [small(Pattern::P0, Division::Equal), small(Pattern::P2, Division::WithoutOne)];
    for result in run_matrix(&configs, &default_profiles()) {
        assert!(result.row.is_ok(), "{:?}", result.row.error);
        assert_eq!(result.runs.len(), 2);
        let per_seed: Vec<f64> = result
            .runs
            .iter()
            .map(|r| r.log.iter().filter(|s| s.predicted == Some(s.actual)).count() as f64 / r.log.len() as f64)
            .collect();
        let expected = per_seed.iter().sum::<f64>() / 2.0;
        assert!((result.row.mean_score - expected).abs() < 1e-12);
        assert_eq!(aggregate(&result.scenario, &result.runs), result.row);
        assert!(result.runs.iter().all(|r| r.log.len() == 600));
    }
}

#[test]
fn failing_scenario_does_not_touch_siblings() {
    let good = small(Pattern::P1, Division::Equal);
    let bad_medium = ScenarioConfig {
        medium: "carrier_pigeon".into(),
        ..good.clone()
    };
    let no_seeds = ScenarioConfig {
        seeds: vec![],
        ..good.clone()
    };
    let results = run_matrix(&[good.clone(), bad_medium, no_seeds, good], &default_profiles());
    assert!(results[0].row.is_ok());
    assert!(results[1].row.error.as_deref().unwrap().contains("carrier_pigeon"));
    assert!(results[2].row.error.is_some());
    assert!(results[1].runs.is_empty());
    assert_eq!(results[0].row, results[3].row);
}

#[test]
fn matrix_is_deterministic() {
    let configs = [
        small(Pattern::P0, Division::WithoutOne),
        ScenarioConfig {
            dataset: DatasetKind::RandomTree,
            ..small(Pattern::P2, Division::Equal)
        },
    ];
    let csv = |results: Vec<ScenarioResult>| {
        let rows: Vec<ResultRow> = results.into_iter().map(|r| r.row).collect();
        let mut buf = Vec::new();
        write_results_csv(&rows, &mut buf).unwrap();
        buf
    };
    let a = csv(run_matrix(&configs, &default_profiles()));
    let b = csv(run_matrix(&configs, &default_profiles()));
    assert_eq!(a, b);
}

#[test]
fn results_csv_round_trips() {
    let mut rows = vec![
        row(DatasetKind::Circles, Division::Equal, Pattern::P0, 150, 0.25),
        row(DatasetKind::RandomTree, Division::WithoutOne, Pattern::P2, 50, 0.1 + 0.2),
    ];
    rows[1].error = Some("boom, with comma".into());
    rows[0].offset = Some([Some(0.5), None, Some(1.0 / 3.0)]);
    let mut buf = Vec::new();
    write_results_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8_lossy(&buf).starts_with(&RESULTS_HEADER.join(",")));
    assert_eq!(read_results_csv(&buf[..]).unwrap(), rows);
    assert!(read_results_csv("a,b\n1,2\n".as_bytes()).is_err());
}

#[test]
fn two_dataset_grid_has_24_rows() {
    let text = r#"
        [grid]
        datasets = ["circles", "random_tree"]
        divisions = ["equal", "without_one"]
        frame_capacities = [50, 150, 300]
        patterns = ["P1", "P2"]
        [grid.base]
        medium = "wifi"
        seeds = [1]
    "#;
    let file = ExperimentFile::parse(text).unwrap();
    let scenarios = file.scenarios();
    assert_eq!(scenarios.len(), 24);
    assert!(scenarios.iter().all(|s| s.medium == "wifi" && s.seeds == [1]));
    assert_eq!(scenarios[0].dataset, DatasetKind::Circles);
    assert_eq!(scenarios[23].dataset, DatasetKind::RandomTree);
}

#[test]
fn config_file_rejects_unknown_keys() {
    assert!(ExperimentFile::parse("[[scenario]]\nframe = 3\n").is_err());
    let f = ExperimentFile::parse("[[scenario]]\npattern = \"p0\"\ndivision = \"without_one\"\n").unwrap();
    assert_eq!(f.scenarios()[0].pattern, Pattern::P0);
    assert_eq!(f.scenarios()[0].seeds.len(), DEFAULT_SEEDS);
}

#[test]
fn random_tree_seeds_are_distinct_and_stable() {
    let s = ScenarioConfig::default();
    for seed in 0..200 {
        let c = s.random_tree_for(seed);
        assert_ne!(c.seed_a, c.seed_b);
        assert_eq!(c, s.random_tree_for(seed));
    }
    assert_ne!(s.random_tree_for(0).seed_a, s.random_tree_for(1).seed_a);
}

#[test]
fn offset_windows_match_brute_force() {
    let scenario = ScenarioConfig {
        n_iterations: Some(1200),
        ..small(Pattern::P0, Division::Equal)
    };
    let run = run_seed(&scenario, 9, &default_profiles()).unwrap();
    let report = p0_offset_report(&run).unwrap();
    for (w, lo) in [(0usize, 1u64), (1, 51), (2, 101)] {
        let mut hits = 0;
        let mut n = 0;
        for r in &run.log {
            // Enumerate every push boundary b and check g - b ∈ [lo, lo + 49].
            let in_window = (0..=1200u64)
                .step_by(150)
                .any(|b| r.iteration >= b + lo && r.iteration < b + lo + 50 && r.iteration <= b + 150);
            if in_window {
                n += 1;
                hits += usize::from(r.predicted == Some(r.actual));
            }
        }
        assert_eq!(report.counts[w], n);
        assert_eq!(report.windows[w], Some(hits as f64 / n as f64));
    }
}

#[test]
fn offset_windows_without_pushes_tile_the_start() {
    let scenario = ScenarioConfig {
        push_interval: 10_000,
        ..small(Pattern::P0, Division::Equal)
    };
    let run = run_seed(&scenario, 1, &default_profiles()).unwrap();
    assert!(run.pushes.is_empty());
    let report = p0_offset_report(&run).unwrap();
    assert_eq!(report.counts, [50, 50, 50]);
    assert_eq!(report.windows, [Some(0.0); 3]);
}

#[test]
fn offset_report_rejects_other_patterns() {
    let run = run_seed(&small(Pattern::P1, Division::Equal), 1, &default_profiles()).unwrap();
    assert!(matches!(p0_offset_report(&run), Err(HarnessError::NotP0(Pattern::P1))));
}

fn full_grid(p1_equal: f64, p1_without: f64) -> Vec<ResultRow> {
    use DatasetKind::*;
    use Division::*;
    let mut rows = vec![
        row(Circles, Equal, Pattern::P1, 50, p1_equal - 0.1),
        row(Circles, Equal, Pattern::P1, 150, p1_equal),
        row(Circles, Equal, Pattern::P1, 300, p1_equal - 0.1),
        row(Circles, WithoutOne, Pattern::P1, 150, p1_without),
        row(Circles, Equal, Pattern::P2, 150, 0.95),
        row(Circles, WithoutOne, Pattern::P2, 150, 0.93),
        row(Circles, WithoutOne, Pattern::P0, 150, 0.85),
        row(Circles, Equal, Pattern::P0, 150, 0.85),
        row(RandomTree, Equal, Pattern::P0, 150, 0.7),
    ];
    rows[8].offset = Some([Some(0.7), Some(0.71), Some(0.69)]);
    rows
}

#[test]
fn trend_checks_pass_on_conforming_results() {
    let report = trend_checks(&full_grid(0.9, 0.8), &TrendMargins::default());
    assert_eq!(report.verdicts.len(), 6);
    for v in &report.verdicts {
        assert_eq!(v.status, VerdictStatus::Pass, "{v:?}");
    }
}

#[test]
fn trend_checks_fail_on_violations() {
    let mut rows = full_grid(0.82, 0.8);
    rows[5].mean_score = 0.5; // P2 divisions far apart, and P2 < P0 under without-one
    rows[8].offset = Some([Some(0.9), None, Some(0.5)]);
    let report = trend_checks(&rows, &TrendMargins::default());
    for id in ["T1", "T2", "T4_random_tree", "T5"] {
        assert_eq!(report.verdict(id).unwrap().status, VerdictStatus::Fail, "{id}");
    }
    assert_eq!(report.verdict("T3").unwrap().status, VerdictStatus::Pass);
    let json = serde_json::to_string(&report).unwrap();
    assert!(json.contains("\"status\":\"fail\""));
}

#[test]
fn trend_checks_report_missing_coverage() {
    let report = trend_checks(&[], &TrendMargins::default());
    assert!(report.verdicts.iter().all(|v| v.status == VerdictStatus::NotEvaluable));

    let mut rows = full_grid(0.9, 0.8);
    rows[1].error = Some("failed".into());
    rows[1].mean_score = 1.0;
    let report = trend_checks(&rows, &TrendMargins::default());
    assert_eq!(report.verdict("T1").unwrap().status, VerdictStatus::NotEvaluable);
    assert_eq!(report.verdict("T3").unwrap().status, VerdictStatus::NotEvaluable);
}

#[test]
fn recommendation_table_covers_cross_product() {
    let profiles = default_profiles();
    let apps = vec![AppClass::new("tight", 0.5).unwrap(), AppClass::motion_control(), AppClass::process_automation()];
    let results = vec![row(DatasetKind::Circles, Division::Equal, Pattern::P2, 150, 0.9)];
    let table = emit_recommendation_table(&results, &apps, &profiles, &ComputeCosts::default());
    assert_eq!(table.len(), apps.len() * 3 * profiles.len());

    for r in table.iter().filter(|r| r.pattern == Pattern::P1) {
        assert_eq!(r.feasible, r.max_latency_ms >= ComputeCosts::default().edge_ms);
    }
    let motion_p2: Vec<&RecommendationRow> = table
        .iter()
        .filter(|r| r.app_class == "motion_control" && r.pattern == Pattern::P2)
        .collect();
    assert!(motion_p2.iter().any(|r| r.medium == "2g" && !r.feasible));
    let mut buf = Vec::new();
    write_recommendation_csv(&table, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), table.len() + 1);
    assert_eq!(default_app_classes().len(), 2);
}

#[test]
fn outputs_are_written_with_logs() {
    let dir = tempfile::tempdir().unwrap();
    let results = run_matrix(&[small(Pattern::P1, Division::Equal)], &default_profiles());
    write_outputs(dir.path(), &results).unwrap();
    let text = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let logs = std::fs::read_dir(dir.path().join("logs")).unwrap().count();
    assert_eq!(logs, 2);
}
