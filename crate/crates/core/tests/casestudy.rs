use std::fmt::Write as _;

use xai_alignment::casestudy::{
    load_case_data, run_case_study, synth_case_data, CaseStudyConfig, EconGroundTruth, Range, FEATURES, INTERCEPT,
};
use xai_alignment::mitigate::PipelineConfig;
use xai_alignment::stats::{Metric, Overall};
use xai_alignment::Error;

fn header() -> String {
    let mut h: Vec<&str> = FEATURES.iter().map(|f| f.name).collect();
    h.push("label");
    h.join(",")
}

#[test]
fn coefficient_table_values() {
    let t = EconGroundTruth::default();
    assert_eq!(t.coefficient("good_credit"), Some(3.5));
    assert_eq!(t.coefficient("debt_rate"), Some(-0.03));
    assert_eq!(t.intercept, INTERCEPT);
    assert_eq!(t.beta().len(), 12);
}

#[test]
fn origin_row_is_labelled_one() {
    let t = EconGroundTruth::default();
    let z = vec![0.0; 12];
    assert_eq!(t.index(&z), 0.8);
    assert!(1.0 / (1.0 + (-t.index(&z)).exp()) > 0.5);
}

#[test]
fn out_of_range_row_is_rejected_with_its_index() {
    let mut csv = header() + "\n";
    let ok: Vec<String> = FEATURES
        .iter()
        .map(|f| match f.range {
            Range::Interval { .. } => "10".into(),
            _ => "1".into(),
        })
        .chain(["1".to_string()])
        .collect();
    writeln!(csv, "{}", ok.join(",")).unwrap();
    let mut bad = ok.clone();
    let p = FEATURES.iter().position(|f| f.name == "purchaser_type").unwrap();
    bad[p] = "12".into();
    writeln!(csv, "{}", bad.join(",")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loans.csv");
    std::fs::write(&path, csv).unwrap();
    match load_case_data(&path, 1) {
        Err(Error::Row { row, reason }) => {
            assert_eq!(row, 1);
            assert!(reason.contains("purchaser_type"), "{reason}");
        }
        other => panic!("expected row error, got {other:?}"),
    }
}

#[test]
fn missing_column_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("loans.csv");
    std::fs::write(&path, "good_credit,label\n1,1\n").unwrap();
    assert!(matches!(load_case_data(&path, 1), Err(Error::MissingColumn(_))));
}

#[test]
fn synthetic_records_respect_ranges_and_seed() {
    let (ds, truth) = synth_case_data(500, 4).unwrap();
    assert!(truth.synthetic);
    let raw = ds.unstandardize();
    for (j, f) in FEATURES.iter().enumerate() {
        for v in raw.column(j) {
            let v = (v * 1e9).round() / 1e9;
            match f.range {
                Range::Binary => assert!(v == 0.0 || v == 1.0, "{} = {v}", f.name),
                Range::Ordinal { max } => assert!(v.fract() == 0.0 && v <= f64::from(max)),
                Range::Interval { low, high } => assert!(v >= f64::from(low) && v <= f64::from(high)),
            }
        }
    }
    let (again, _) = synth_case_data(500, 4).unwrap();
    assert_eq!(ds, again);
}

#[test]
fn mitigated_lime_improves_concordance() {
    let (ds, truth) = synth_case_data(3000, 7).unwrap();
    let cfg = CaseStudyConfig {
        // Full model grid; fewer instances and LIME seeds than the default.
        pipeline: PipelineConfig {
            m: 40,
            lime_seeds: 3,
            ..Default::default()
        },
        baseline_hidden: 100,
        ..Default::default()
    };
    let res = run_case_study(&ds, &truth, &cfg, 11).unwrap();
    assert_eq!(res.instances.len(), 40);
    assert_eq!(res.baseline_lime.m, res.mitigated_lime.m);
    let conc = res
        .lime_verdicts
        .iter()
        .find(|v| v.metric == Metric::Concordance)
        .unwrap();
    assert_eq!(conc.overall, Overall::Improved, "{conc:?}");
}
