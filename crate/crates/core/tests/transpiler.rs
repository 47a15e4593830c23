mod support;

use deltaml::learners::{self, LearnerKind, MovingFrame, TreeParams};
use deltaml::streams::LabeledPoint;
use deltaml::transpiler::{emit_c, interpret, lower_tree, report_sizes, DecisionProgram, ProgramNode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{parse_c, reference_tree, Cmp, CStmt};

#[test]
fn reference_tree_has_thirteen_preorder_nodes() {
    let model = reference_tree();
    let program = lower_tree(&model).unwrap();
    assert_eq!(program.nodes().len(), 13);
    assert_eq!((program.n_internal(), program.n_leaves()), (6, 7));
    // Leaf labels were chosen equal to their node ids, so preorder numbering
    // must put every leaf label at its own index.
    for (i, node) in program.nodes().iter().enumerate() {
        if let ProgramNode::Leaf { label } = node {
            assert_eq!(*label, i);
        }
    }
}

#[test]
fn reference_tree_source_parses_back() {
    let model = reference_tree();
    let program = lower_tree(&model).unwrap();
    let source = emit_c(&program);
    assert!(source.text.starts_with("int predict(float* x){\n    if (x[0] <= 3.88166737556) { //node = 0\n"));
    assert_eq!(source.text.matches("if (").count(), 6);
    assert_eq!(source.text.matches("return ").count(), 7);
    assert_eq!(source.size_bytes, source.text.len());

    let parsed = parse_c(&source.text).unwrap();
    assert_eq!((parsed.count_ifs(), parsed.count_returns()), (6, 7));
    let tags: Vec<Option<usize>> = (0..13).map(Some).collect();
    assert_eq!(parsed.tags(), tags);

    let x = [5.0, 0.0];
    let tree = model.as_tree().unwrap();
    assert_eq!(tree.predict(&x), 12);
    assert_eq!(interpret(&program, &x).unwrap(), 12);
    assert_eq!(parsed.eval(&x), 12);

    let report = report_sizes(&model, &program, &source);
    assert_eq!(report.source_bytes, source.text.len());
    assert_eq!(report.model_bytes, model.serialized_size());
}

#[test]
fn reference_tree_paths_reach_every_leaf() {
    let model = reference_tree();
    let program = lower_tree(&model).unwrap();
    let parsed = parse_c(&emit_c(&program).text).unwrap();
    let cases: [([f64; 2], usize); 7] = [
        ([-1.0, -2.0], 3),
        ([-1.0, 0.0], 5),
        ([-1.0, 1.0], 6),
        ([0.0, 0.0], 8),
        ([0.0, 2.0], 10),
        ([0.0, 5.0], 11),
        ([4.0, 0.0], 12),
    ];
    for (x, leaf) in cases {
        assert_eq!(model.as_tree().unwrap().predict(&x), leaf, "{x:?}");
        assert_eq!(interpret(&program, &x).unwrap(), leaf, "{x:?}");
        assert_eq!(parsed.eval(&x), leaf, "{x:?}");
    }
}

#[test]
fn strict_root_comparison_differs_only_on_the_threshold() {
    // A listing written with `<` at the root disagrees with `<=` exactly when
    // x[0] equals the root threshold.
    let program = lower_tree(&reference_tree()).unwrap();
    let text = emit_c(&program).text.replacen("<=", "<", 1);
    let strict = parse_c(&text).unwrap();
    assert!(matches!(strict, CStmt::If { cmp: Cmp::Lt, .. }));
    let on = [3.88166737556, 0.0];
    assert_eq!(interpret(&program, &on).unwrap(), 8);
    assert_eq!(strict.eval(&on), 12);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let x = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        assert_eq!(strict.eval(&x), interpret(&program, &x).unwrap());
    }
}

#[test]
fn shuffled_program_is_renumbered_in_preorder() {
    // root at index 3; children listed out of order
    let nodes = vec![
        ProgramNode::Leaf { label: 7 },
        ProgramNode::Leaf { label: 8 },
        ProgramNode::Internal {
            feature: 1,
            threshold: -0.5,
            left: 1,
            right: 0,
        },
        ProgramNode::Internal {
            feature: 0,
            threshold: 2.0,
            left: 2,
            right: 4,
        },
        ProgramNode::Leaf { label: 9 },
    ];
    let program = DecisionProgram::new(nodes, 3).unwrap();
    assert_eq!(program.root(), 0);
    let parsed = parse_c(&emit_c(&program).text).unwrap();
    assert_eq!(parsed.tags(), (0..5).map(Some).collect::<Vec<_>>());
    for (x, want) in [([0.0, -1.0], 8), ([0.0, 0.0], 7), ([3.0, 0.0], 9)] {
        assert_eq!(parsed.eval(&x), want);
        assert_eq!(interpret(&program, &x).unwrap(), want);
    }
}

#[test]
fn extreme_thresholds_survive_the_text_round_trip() {
    let thresholds = [1e-300, -2.5e17, 0.1 + 0.2, f64::MIN_POSITIVE, 123_456_789.123_456_79, -0.0];
    for t in thresholds {
        let program = DecisionProgram::new(
            vec![
                ProgramNode::Internal {
                    feature: 0,
                    threshold: t,
                    left: 1,
                    right: 2,
                },
                ProgramNode::Leaf { label: 1 },
                ProgramNode::Leaf { label: 2 },
            ],
            0,
        )
        .unwrap();
        let parsed = parse_c(&emit_c(&program).text).unwrap();
        match &parsed {
            CStmt::If { threshold, .. } => assert_eq!(threshold.to_bits(), t.to_bits(), "{t:?}"),
            other => panic!("{other:?}"),
        }
        for x in [t, f64::from_bits(t.to_bits() + 1), t - t.abs() * 1e-12 - 1e-300] {
            assert_eq!(parsed.eval(&[x]), interpret(&program, &[x]).unwrap(), "t={t:?} x={x:?}");
        }
    }
}

#[test]
fn trained_trees_agree_with_their_source() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.random_range(50..=300);
        let classes = rng.random_range(2..=7);
        let dim = rng.random_range(1..=4);
        let points: Vec<LabeledPoint> = (0..n)
            .map(|i| {
                let f = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
                LabeledPoint::new(f, rng.random_range(0..classes), i as u64)
            })
            .collect();
        let frame = MovingFrame::from_points(n, points.clone());
        let model = learners::fit_with(LearnerKind::DecisionTree, &TreeParams { max_depth: 8 }, &frame).unwrap();
        let program = lower_tree(&model).unwrap();
        let parsed = parse_c(&emit_c(&program).text).unwrap();
        for p in &points {
            let want = learners::predict(&model, &p.features).unwrap();
            assert_eq!(interpret(&program, &p.features).unwrap(), want);
            assert_eq!(parsed.eval(&p.features), want);
        }
    }
}

#[test]
fn naive_bayes_models_are_rejected() {
    let points: Vec<LabeledPoint> = (0..10).map(|i| LabeledPoint::new(vec![i as f64], i % 2, i as u64)).collect();
    let frame = MovingFrame::from_points(10, points);
    let model = learners::fit(LearnerKind::GaussianNb, &frame).unwrap();
    assert!(lower_tree(&model).is_err());
}
