use std::process::Command;

use gdalab::harness::{
    aggregate_rows, parse_sweep_records, run_sweep, verify_inequalities, ExperimentConfig, ModelSpec, PathKind,
    SeedList, Statistic,
};

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.sweep.t_values = vec![2, 4];
    c.sweep.n_values = vec![20];
    c.sweep.seeds = SeedList::Count(3);
    c.sweep.n_eval = 200;
    c.path.kinds = vec![PathKind::Rotation, PathKind::Geodesic];
    c.model = ModelSpec::Linear;
    c.train.epochs = 3;
    c.source_train.epochs = 20;
    c
}

#[test]
fn two_t_one_n_three_seeds() {
    let mut c = small();
    c.path.kinds = vec![PathKind::Rotation];
    let res = run_sweep(&c, 1).unwrap();
    assert_eq!(res.records.len(), 6);
    // one mean row and one std row per (T, n, kind)
    assert_eq!(res.aggregates.len(), 4);
    let order: Vec<(usize, u64)> = res.records.iter().map(|r| (r.t, r.seed)).collect();
    assert_eq!(order, vec![(2, 0), (2, 1), (2, 2), (4, 0), (4, 1), (4, 2)]);
}

#[test]
fn csv_is_deterministic_and_independent_of_workers() {
    let c = small();
    let a = run_sweep(&c, 1).unwrap().to_csv().unwrap();
    let b = run_sweep(&c, 1).unwrap().to_csv().unwrap();
    let p = run_sweep(&c, 3).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert_eq!(a, p);
}

#[test]
fn adding_sweep_points_keeps_existing_rows() {
    let c = small();
    let mut bigger = c.clone();
    bigger.sweep.seeds = SeedList::List(vec![0, 1, 2, 9]);
    bigger.sweep.t_values = vec![2, 3, 4];
    let base = run_sweep(&c, 1).unwrap();
    let more = run_sweep(&bigger, 1).unwrap();
    for r in &base.records {
        let twin = more
            .records
            .iter()
            .find(|m| m.t == r.t && m.seed == r.seed && m.path_kind == r.path_kind)
            .unwrap();
        assert_eq!(twin, r);
    }
}

#[test]
fn aggregates_recompute_from_raw_rows() {
    let res = run_sweep(&small(), 1).unwrap();
    let csv = res.to_csv().unwrap();
    let raw = parse_sweep_records(&csv).unwrap();
    assert_eq!(raw.len(), res.records.len());
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let mut checked = 0;
    for row in rdr.records() {
        let row = row.unwrap();
        let stat = match &row[2] {
            "mean" => Statistic::Mean,
            "std" => Statistic::Std,
            _ => continue,
        };
        let (t, n): (usize, usize) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let kind: PathKind = row[3].parse().unwrap();
        let group: Vec<_> = raw.iter().filter(|r| r.t == t && r.n == n && r.path_kind == kind).collect();
        // independent recomputation
        let k = group.len() as f64;
        let col = |r: &gdalab::harness::SweepRecord, c: usize| {
            [r.source_acc, r.target_acc_gradual, r.target_acc_vanilla_st, r.target_acc_source_only, r.delta_avg, r.path_length, r.runtime_seconds][c]
        };
        for c in 0..7 {
            let mean = group.iter().map(|r| col(r, c)).sum::<f64>() / k;
            let expect = match stat {
                Statistic::Mean => mean,
                Statistic::Std => (group.iter().map(|r| (col(r, c) - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt(),
            };
            let got: f64 = row[4 + c].parse().unwrap();
            assert!((got - expect).abs() <= 1e-12, "{t} {kind} {c}: {got} vs {expect}");
        }
        checked += 1;
    }
    assert_eq!(checked, 8);
    let (m, _) = aggregate_rows(&raw.iter().collect::<Vec<_>>());
    assert!(m.iter().all(|v| v.is_finite()));
}

#[test]
fn single_step_gradual_equals_vanilla() {
    let mut c = small();
    c.sweep.t_values = vec![1];
    c.path.kinds = vec![PathKind::Rotation];
    let res = run_sweep(&c, 1).unwrap();
    for r in &res.records {
        assert_eq!(r.target_acc_gradual, r.target_acc_vanilla_st);
    }
}

#[test]
fn translation_and_blobs_run() {
    let mut c = small();
    c.dataset = gdalab::harness::DatasetSpec::Blobs {
        dim: 3,
        separation: 3.0,
        sigma: 0.5,
    };
    c.path.kinds = vec![PathKind::Translation, PathKind::Geodesic, PathKind::Detour(0.3)];
    c.path.offset = Some(vec![0.0, 2.0, 0.0]);
    let res = run_sweep(&c, 1).unwrap();
    assert!(res.records.iter().all(|r| r.is_ok()), "{:?}", res.records);
}

#[test]
fn verify_report_is_reproducible() {
    let mut c = small();
    c.verify.lemma_trials = 30;
    c.verify.identical_trials = 5;
    c.verify.disc_trials = 2;
    c.verify.stability_seeds = 2;
    c.verify.stability_t = 3;
    c.verify.stability_n_eval = 100;
    let a = verify_inequalities(&c, 1).unwrap().to_csv().unwrap();
    let b = verify_inequalities(&c, 2).unwrap().to_csv().unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("battery,trials,passed,pass_rate,threshold,worst_slack,status\n"));
}

fn gdalab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gdalab"))
}

const SMALL_TOML: &str = r#"
seed = 3
[sweep]
t_values = [2, 3]
n_values = [16]
seeds = 2
n_eval = 100
[model]
kind = "linear"
[train]
epochs = 2
[source_train]
epochs = 10
"#;

#[test]
fn cli_run_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, SMALL_TOML).unwrap();
    let mut outs = Vec::new();
    for workers in ["1", "2"] {
        let out = dir.path().join(format!("run{workers}.csv"));
        let st = gdalab()
            .args(["run", "--workers", workers, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let text = String::from_utf8(outs[0].clone()).unwrap();
    assert!(text.starts_with(
        "T,n,seed,path_kind,source_acc,target_acc_gradual,target_acc_vanilla_st,target_acc_source_only,delta_avg,path_length,runtime_seconds,status\n"
    ));
    assert_eq!(text.lines().count(), 1 + 4 + 4);

    // --seed overrides the config seed
    let other = gdalab()
        .args(["run", "--seed", "4", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(other.status.success());
    assert_ne!(other.stdout, outs[0]);
}

#[test]
fn cli_generate_distance_and_optimal_t() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("path.txt");
    let cfg = dir.path().join("uncond.toml");
    std::fs::write(&cfg, "[path]\nclass_conditional = false\n").unwrap();
    let st = gdalab()
        .args(["generate", "--kind", "geodesic", "--steps", "4", "--n", "12", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&path)
        .status()
        .unwrap();
    assert!(st.success());
    let prof = gdalab().args(["distance", "--path"]).arg(&path).output().unwrap();
    assert!(prof.status.success());
    let text = String::from_utf8(prof.stdout).unwrap();
    let deltas: Vec<f64> = text
        .lines()
        .skip(1)
        .take(4)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // unconditional geodesic: every step has the same length
    assert!(deltas.iter().all(|d| (d - deltas[0]).abs() <= 1e-9 * deltas[0]));
    let opt = gdalab().args(["optimal-t", "--path"]).arg(&path).output().unwrap();
    assert!(opt.status.success());
    let opt = gdalab()
        .args(["optimal-t", "--delta-max", "0.5", "--n", "100", "--distance", "10"])
        .output()
        .unwrap();
    let line = String::from_utf8(opt.stdout).unwrap();
    assert!(line.lines().nth(1).unwrap().ends_with(",20.000000000000000,20"));
}

#[test]
fn cli_rejects_bad_config_and_reports_verify_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sweep]\nt_vals = [2]\n").unwrap();
    let out = gdalab().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_vals"));

    let quick = dir.path().join("quick.toml");
    std::fs::write(
        &quick,
        "[verify]\nlemma_trials = 20\nidentical_trials = 3\ndisc_trials = 1\nstability_seeds = 0\n",
    )
    .unwrap();
    let out = gdalab().args(["verify", "--config"]).arg(&quick).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn cli_bounds_curves() {
    let out = gdalab().arg("bounds").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 201);
    assert!(String::from_utf8_lossy(&out.stderr).contains("crossover"));
    let at = gdalab().args(["bounds", "--at", "10"]).output().unwrap();
    assert!(String::from_utf8(at.stdout).unwrap().contains("path_term,1.0000000000000000,0.50000000000000000"));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::from_toml(&std::fs::read_to_string(&path).unwrap());
            assert!(cfg.is_ok(), "{}: {:?}", path.display(), cfg.err());
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}
