use std::fs;
use std::path::Path;

use roughcert::checks::{self, ProblemKind};
use roughcert::ledger::LEDGER_COLUMNS;
use roughcert::scenario::{self, Config, RunOptions};
use roughcert::Verdict;

fn bundled(name: &str) -> Config {
    scenario::load_config(&Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)).unwrap()
}

#[test]
fn every_kind_passes_with_default_checks() {
    let config = bundled("all_kinds.cfg");
    let out = scenario::execute(&config, &RunOptions::default(), None).unwrap();
    assert_eq!(out.len(), 5);
    for (o, sc) in out.iter().zip(&config.scenarios) {
        assert_eq!(o.name, sc.name);
        for name in checks::checks_for(sc.kind) {
            assert!(o.rows.iter().any(|r| r.check == name), "{}: {name} missing", o.name);
        }
        for r in &o.rows {
            assert_eq!(r.verdict, Verdict::Pass, "{}: {r}", o.name);
        }
    }
    let kinds: Vec<ProblemKind> = config.scenarios.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, ProblemKind::ALL);
}

#[test]
fn ledger_does_not_depend_on_worker_count() {
    let config = bundled("all_kinds.cfg");
    let csv = |workers| {
        let opts = RunOptions {
            workers: Some(workers),
            ..RunOptions::default()
        };
        scenario::ledger_of(&scenario::execute(&config, &opts, None).unwrap()).to_csv_string()
    };
    let one = csv(1);
    assert_eq!(one, csv(4));
    assert!(one.starts_with(&format!("{}\n", LEDGER_COLUMNS.join(","))));
}

#[test]
fn decay_plot_title_matches_ledger_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let opts = RunOptions {
        out_root: Some(tmp.path().to_path_buf()),
        ..RunOptions::default()
    };
    let summary = scenario::run_config(&bundled("rough_interval.cfg"), &opts).unwrap();
    let row = summary.ledger.rows.iter().find(|r| r.check == "decay").unwrap();
    let params: serde_json::Value = serde_json::from_str(&row.param_json).unwrap();
    let slope = params["slope"].as_f64().unwrap();
    let svg = fs::read_to_string(summary.dir.join("rough_interval/decay.svg")).unwrap();
    let title = svg.split("<title>").nth(1).unwrap().split("</title>").next().unwrap();
    let shown: f64 = title.rsplit("= ").next().unwrap().parse().unwrap();
    assert!((shown - slope).abs() <= 1e-12);
    let decay_csv = fs::read_to_string(summary.dir.join("rough_interval/decay.csv")).unwrap();
    assert_eq!(decay_csv.lines().count() as u64 - 1, params["levels"].as_u64().unwrap());
    assert!(summary.dir.join("scenarios.txt").exists());
}

#[test]
fn config_errors_are_specific() {
    let base = "[scenario s]\nkind = rough\ngrid.h = 0.0625\ntime.T = 0.01\ntime.dt = 0.001\n";
    let err = |text: &str| scenario::parse_config(text).unwrap_err().to_string();
    assert!(err(&base.replace("time.T = 0.01\n", "")).contains("time.T"));
    assert!(err(&format!("{base}coef.bogus = 1\n")).contains("coef.bogus"));
    assert!(err(&format!("{base}checks = positivity\n")).contains("positivity"));
    assert!(err(&base.replace("rough", "plasma")).contains("plasma"));
    assert!(err(&format!("{base}[scenario s]\nkind = kernel\ngrid.h = 0.1\ntime.T = 1\n")).contains('s'));
    assert!(err("[run]\nseed = 1\n").len() > 0);
}
