//! Experiment runner outputs and their reproducibility.

use std::fs;
use std::path::Path;

use rcmdp::env::EnvName;
use rcmdp::harness::{compare_wallclock, run_experiment, ExperimentConfig};
use rcmdp::optim::Algorithm;
use rcmdp::Error;

fn small_config(dir: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        algorithms: vec![Algorithm::RnpgDirect, Algorithm::Rppg],
        repeats: 2,
        output_dir: dir.to_path_buf(),
        ..Default::default()
    };
    c.env.name = EnvName::Crs;
    c.optimizer.iterations = 30;
    c
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn repeats_with_one_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&small_config(dir.path())).unwrap();
    for alg in ["rnpg_direct", "rppg"] {
        let a = read(&dir.path().join(format!("trace_{alg}_r0.csv")));
        assert_eq!(a, read(&dir.path().join(format!("trace_{alg}_r1.csv"))));
    }
    assert_eq!(read(&dir.path().join("env_r0.txt")), read(&dir.path().join("env_r1.txt")));
}

#[test]
fn seed_stride_changes_later_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.env.name = EnvName::Garnet;
    c.env.n_states = 4;
    c.env.n_actions = 3;
    c.seed_stride = 7;
    let s = run_experiment(&c).unwrap();
    assert_eq!(s.rows[2].env_seed, 7);
    assert_ne!(read(&dir.path().join("env_r0.txt")), read(&dir.path().join("env_r1.txt")));
}

#[test]
fn persisted_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    run_experiment(&small_config(first.path())).unwrap();
    let mut again = ExperimentConfig::load(&first.path().join("config.toml")).unwrap();
    let second = tempfile::tempdir().unwrap();
    again.output_dir = second.path().to_path_buf();
    run_experiment(&again).unwrap();
    for f in ["env_r0.txt", "trace_rnpg_direct_r0.csv", "trace_rppg_r1.csv"] {
        assert_eq!(read(&first.path().join(f)), read(&second.path().join(f)), "{f}");
    }
    // the summaries differ only in measured wall time
    let strip = |p: &Path| -> Vec<Vec<String>> {
        let mut rdr = csv::Reader::from_path(p).unwrap();
        let col = rdr.headers().unwrap().iter().position(|h| h == "wall_ms_total").unwrap();
        rdr.records()
            .map(|r| r.unwrap().iter().enumerate().filter(|(i, _)| *i != col).map(|(_, v)| v.to_string()).collect())
            .collect()
    };
    assert_eq!(strip(&first.path().join("summary.csv")), strip(&second.path().join("summary.csv")));
}

#[test]
fn summary_row_is_the_trace_row_of_the_returned_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let s = run_experiment(&small_config(dir.path())).unwrap();
    let mut summary = csv::Reader::from_path(&s.summary_file).unwrap();
    let headers = summary.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for rec in summary.records() {
        let rec = rec.unwrap();
        let trace_path = dir.path().join(&rec[col("trace_file")]);
        let best: usize = rec[col("best_iteration")].parse().unwrap();
        let mut trace = csv::Reader::from_path(&trace_path).unwrap();
        let th = trace.headers().unwrap().clone();
        let row = trace.records().nth(best).unwrap().unwrap();
        for name in ["active_index", "surrogate_value", "j_0", "j_1", "native_0", "native_1"] {
            let tc = th.iter().position(|h| h == name).unwrap();
            assert_eq!(&row[tc], &rec[col(name)], "{name}");
        }
    }
}

#[test]
fn empty_algorithm_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.algorithms.clear();
    let e = run_experiment(&c).unwrap_err();
    assert!(matches!(e, Error::Config(ref m) if m.starts_with("algorithms")), "{e}");
    assert!(!dir.path().join("summary.csv").exists());
}

#[test]
fn compare_requires_matched_budgets_and_the_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.algorithms = vec![Algorithm::RnpgDirect, Algorithm::Epirc];
    c.optimizer.iterations = 30;
    c.optimizer.epirc_outer = 2;
    c.optimizer.epirc_inner = 10;
    let e = compare_wallclock(&c).unwrap_err();
    assert!(e.to_string().contains("optimizer.iterations"), "{e}");
    c.optimizer.epirc_inner = 15;
    c.algorithms = vec![Algorithm::RnpgDirect, Algorithm::Rppg];
    assert!(compare_wallclock(&c).unwrap_err().to_string().contains("epirc"));
}

#[test]
fn compare_on_a_one_state_garnet() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.algorithms = vec![Algorithm::RnpgDirect, Algorithm::Epirc];
    c.env.name = EnvName::Garnet;
    c.env.n_states = 1;
    c.env.n_actions = 2;
    c.optimizer.iterations = 20;
    c.optimizer.epirc_outer = 2;
    c.optimizer.epirc_inner = 10;
    let report = compare_wallclock(&c).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.ratio(Algorithm::Epirc), Some(1.0));
    let text = fs::read_to_string(&report.compare_file).unwrap();
    assert!(text.starts_with("algorithm,wall_ms,evaluator_calls,fixed_point_sweeps,ratio_to_epirc"));
}

#[test]
fn matched_budget_means_equal_evaluator_calls() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.algorithms = vec![Algorithm::RnpgDirect, Algorithm::RnpgSoftmax, Algorithm::Rppg, Algorithm::Epirc];
    c.env.name = EnvName::Garnet;
    c.env.n_states = 6;
    c.env.n_actions = 4;
    c.optimizer.iterations = 40;
    c.optimizer.epirc_outer = 4;
    c.optimizer.epirc_inner = 10;
    let report = compare_wallclock(&c).unwrap();
    assert!(report.rows.iter().all(|r| r.evaluator_calls == 80), "{:?}", report.rows);
}
