use dramaturg_batch::{
    annotation_sheet, check_event_id, read_annotations, score_checks, to_jsonl, CheckAnnotation, Confusion,
    CorrectnessReport, MetricsError,
};
use dramaturg_core::director::{DecisionAction, DecisionRecord};
use proptest::prelude::*;

fn decision(tick: u64, action: DecisionAction, completed: Option<bool>) -> DecisionRecord {
    DecisionRecord {
        tick,
        act_id: "1-1".into(),
        objective_id: "1-1/1".into(),
        action,
        digest: String::new(),
        completed,
        reason: completed.map(|_| "because".into()),
        turns_on_objective: 5,
        post_player: false,
    }
}

/// One run whose checks and labels realize the given matrix.
fn fixture(c: Confusion) -> (Vec<DecisionRecord>, Vec<CheckAnnotation>) {
    let mut decisions = vec![decision(0, DecisionAction::Outline, None)];
    let mut labels = Vec::new();
    let cells = [
        (true, true, c.tp),
        (true, false, c.fp),
        (false, true, c.fn_),
        (false, false, c.tn),
    ];
    for (pred, label, n) in cells {
        for _ in 0..n {
            let d = decision(decisions.len() as u64, DecisionAction::Check, Some(pred));
            labels.push(CheckAnnotation {
                run_id: "run-000".into(),
                check_event_id: check_event_id(&d),
                human_label: label,
            });
            decisions.push(d);
        }
    }
    decisions.push(decision(decisions.len() as u64, DecisionAction::Force, None));
    (decisions, labels)
}

fn score(c: Confusion) -> CorrectnessReport {
    let (decisions, labels) = fixture(c);
    score_checks([("run-000", decisions.as_slice())], &labels).unwrap()
}

#[test]
fn all_correct() {
    let r = score(Confusion {
        tp: 7,
        fp: 0,
        fn_: 0,
        tn: 3,
    });
    assert_eq!((r.precision, r.recall, r.f1, r.degenerate), (1.0, 1.0, 1.0, false));
}

#[test]
fn table_fixture_rounds_to_077() {
    // 738 / 900 = 0.82, 738 / 1025 = 0.72
    let r = score(Confusion {
        tp: 738,
        fp: 162,
        fn_: 287,
        tn: 120,
    });
    assert!((r.precision - 0.82).abs() < 1e-12);
    assert!((r.recall - 0.72).abs() < 1e-12);
    assert!((r.f1 - 0.766_753_246_753_246_7).abs() < 1e-12);
    assert_eq!(format!("{:.2}", r.f1), "0.77");
    assert!(r.display().contains("f1 0.77"));
}

#[test]
fn no_positives_is_degenerate() {
    let r = score(Confusion {
        tp: 0,
        fp: 0,
        fn_: 0,
        tn: 4,
    });
    assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    assert!(r.degenerate);
    assert!(r.display().ends_with("(degenerate)"));
    assert!(
        !score(Confusion {
            tp: 1,
            fp: 1,
            fn_: 1,
            tn: 1
        })
        .degenerate
    );
}

#[test]
fn dangling_and_duplicate_annotations() {
    let (decisions, mut labels) = fixture(Confusion {
        tp: 1,
        fp: 1,
        fn_: 0,
        tn: 0,
    });
    let stray = CheckAnnotation {
        run_id: "run-000".into(),
        check_event_id: "1-1@0".into(),
        human_label: true,
    };
    let err = score_checks([("run-000", decisions.as_slice())], &[stray]).unwrap_err();
    assert!(matches!(err, MetricsError::DanglingAnnotation { .. }));
    let other_run = CheckAnnotation {
        run_id: "run-001".into(),
        ..labels[0].clone()
    };
    assert!(matches!(
        score_checks([("run-000", decisions.as_slice())], &[other_run]),
        Err(MetricsError::DanglingAnnotation { .. })
    ));
    labels.push(labels[0].clone());
    assert!(matches!(
        score_checks([("run-000", decisions.as_slice())], &labels),
        Err(MetricsError::DuplicateAnnotation { .. })
    ));
}

#[test]
fn sheet_round_trip() {
    let (decisions, labels) = fixture(Confusion {
        tp: 2,
        fp: 1,
        fn_: 1,
        tn: 1,
    });
    let sheet = annotation_sheet([("run-000", decisions.as_slice())]);
    assert_eq!(sheet.len(), 5);
    assert!(sheet.iter().all(|e| e.human_label.is_none()));
    assert!(read_annotations(&to_jsonl(&sheet)).unwrap().is_empty());

    let mut filled = sheet.clone();
    for (e, l) in filled.iter_mut().zip(&labels) {
        assert_eq!(e.check_event_id, l.check_event_id);
        e.human_label = Some(l.human_label);
    }
    filled[4].human_label = None;
    let text = to_jsonl(&filled) + "\n";
    let read = read_annotations(&text).unwrap();
    assert_eq!(read, labels[..4].to_vec());
    let r = score_checks([("run-000", decisions.as_slice())], &read).unwrap();
    assert_eq!(
        r.confusion,
        Confusion {
            tp: 2,
            fp: 1,
            fn_: 1,
            tn: 0
        }
    );

    let err = read_annotations("{\"run_id\": 1}\n").unwrap_err();
    assert!(matches!(err, MetricsError::Malformed { line: 1, .. }));
}

proptest! {
    #[test]
    fn f1_identity(tp in 0usize..300, fp in 0usize..300, fn_ in 0usize..300, tn in 0usize..300) {
        let r = CorrectnessReport::from_confusion(Confusion { tp, fp, fn_, tn });
        let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let rc = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        prop_assert_eq!(r.precision, p);
        prop_assert_eq!(r.recall, rc);
        if p + rc > 0.0 {
            prop_assert!((r.f1 - 2.0 * p * rc / (p + rc)).abs() <= 1e-12);
            // the count form of the same quantity
            prop_assert!((r.f1 - 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64).abs() <= 1e-12);
        } else {
            prop_assert_eq!(r.f1, 0.0);
        }
        prop_assert!((0.0..=1.0).contains(&r.f1));
        prop_assert!(r.f1 <= r.precision.max(r.recall) + 1e-12);
        prop_assert!(r.f1 + 1e-12 >= r.precision.min(r.recall));
        prop_assert_eq!(r.degenerate, tp + fp == 0 || tp + fn_ == 0);
    }
}
