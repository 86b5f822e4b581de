use std::fs;

use ric_cmf::scenario::{
    export_csv, run, run_experiment, LabeledRun, Scenario, UeEvent, CMF_LABEL, NO_CM_LABEL,
};

fn lines(path: &std::path::Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_owned)
        .collect()
}

#[test]
fn full_experiment_summary_layout() {
    let exp = run_experiment(&Scenario::testbed_default(), 10).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = export_csv(&exp.runs, dir.path()).unwrap();
    let summary = lines(&files.summary);
    assert_eq!(summary[0], "category,run_id,run_mean,run_sd");
    assert_eq!(summary.len(), 1 + 22);
    assert!(summary[1].starts_with("No CM,1,"));
    assert!(summary[11].starts_with("No CM,Average,"));
    assert!(summary[12].starts_with("CMF,1,"));
    assert!(summary[22].starts_with("CMF,Average,"));
    let avg: Vec<&str> = summary[11].split(',').collect();
    assert_eq!(avg[2], format!("{:.3}", exp.no_cm.avg_mean));
    assert_eq!(avg[3], format!("{:.3}", exp.no_cm.avg_sd));
}

#[test]
fn empty_input_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let files = export_csv(&[], dir.path()).unwrap();
    assert_eq!(
        fs::read_to_string(&files.samples).unwrap(),
        "run_id,category,time_ms,ue_id,slice,throughput_mbps\n"
    );
    assert_eq!(lines(&files.dispositions).len(), 1);
    assert_eq!(
        lines(&files.summary),
        vec!["category,run_id,run_mean,run_sd"]
    );
}

#[test]
fn one_row_per_ue_per_second() {
    let mut s = Scenario::testbed_default();
    s.events[2] = UeEvent::attach(0, "ue-2", "A");
    let runs: Vec<LabeledRun> = (1..=2)
        .map(|k| LabeledRun {
            category: CMF_LABEL.to_owned(),
            run_id: k,
            result: run(&Scenario {
                seed: u64::from(k),
                ..s.clone()
            })
            .unwrap(),
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let files = export_csv(&runs, dir.path()).unwrap();
    let rows = lines(&files.samples);
    assert_eq!(rows.len(), 1 + 2 * 3 * 420);
    assert!(rows[1].starts_with("1,CMF,0,ue-0,A,"));
    // three decimals, plain dot
    let value = rows[1].rsplit(',').next().unwrap();
    assert_eq!(value.split('.').nth(1).unwrap().len(), 3);
}

#[test]
fn dispositions_carry_conflict_and_winner() {
    let mut s = Scenario::testbed_default();
    s.model.noise_sigma = 0.0;
    let runs = [LabeledRun {
        category: CMF_LABEL.to_owned(),
        run_id: 1,
        result: run(&s).unwrap(),
    }];
    let dir = tempfile::tempdir().unwrap();
    let files = export_csv(&runs, dir.path()).unwrap();
    let rows = lines(&files.dispositions);
    assert_eq!(
        rows[0],
        "run_id,category,time_ms,xapp_id,cell,slice,value,disposition,conflict_id,winner"
    );
    let rejected: Vec<&String> = rows.iter().filter(|r| r.contains(",rejected,")).collect();
    assert_eq!(rejected.len(), 72);
    assert!(rejected
        .iter()
        .all(|r| r.ends_with(",xapp-1") && r.contains(",xapp-2,")));
    assert!(rows.iter().any(|r| r.contains(",revoked,")));
    assert!(rows[1].ends_with(",forwarded,,"));
}

#[test]
fn runs_are_written_in_category_then_id_order() {
    let mk = |category: &str, run_id| LabeledRun {
        category: category.to_owned(),
        run_id,
        result: run(&Scenario {
            duration_ms: 130_000,
            ..Scenario::testbed_default()
        })
        .unwrap(),
    };
    let runs = [mk(NO_CM_LABEL, 2), mk(NO_CM_LABEL, 1), mk(CMF_LABEL, 1)];
    let dir = tempfile::tempdir().unwrap();
    let files = export_csv(&runs, dir.path()).unwrap();
    let summary = lines(&files.summary);
    let keys: Vec<String> = summary[1..]
        .iter()
        .map(|r| r.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(
        keys,
        [
            "No CM,1",
            "No CM,2",
            "No CM,Average",
            "CMF,1",
            "CMF,Average"
        ]
    );
}
