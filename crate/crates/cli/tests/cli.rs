use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vmscale::traces::{parse_trace, ParseOptions};

const SMALL: &str = r#"
seed = 7

[synth]
tasks = 6
length = 20
interval_minutes = 5

[[synth.resources]]
name = "cpu"
base_min = 0.2
base_max = 0.6
amplitude = 0.3
period = 8.0
noise = 0.01

[[synth.resources]]
name = "mem"
base_min = 0.2
base_max = 0.6
amplitude = 0.3
period = 8.0
noise = 0.01

[simulation]
warmup = 8
intervals = 3

[training]
max_generations = 15

[predictor]
retrain_generations = 2

[ga]
population = 6
generations = 5
"#;

struct Run {
    dir: tempfile::TempDir,
}

impl Run {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("config.toml"), config).unwrap();
        Run { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn vmscale(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_vmscale"))
            .current_dir(self.dir.path())
            .arg("--config")
            .arg(self.path("config.toml"))
            .args(args)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.vmscale(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        out
    }

    fn trace(&self) -> String {
        self.ok(&["gen", "--out", "data"]);
        self.path("data/trace.csv").display().to_string()
    }
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_trace_is_a_config_error_naming_the_path() {
    let run = Run::new(SMALL);
    let out = run.vmscale(&["train", "--trace", "/no/such/trace.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/trace.csv"), "{}", stderr(&out));
}

#[test]
fn out_of_range_config_names_field() {
    let run = Run::new("[ga]\nmutation_rate = 2.0\n");
    let out = run.vmscale(&["gen"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ga.mutation_rate"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_one() {
    let run = Run::new(SMALL);
    assert_eq!(run.vmscale(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run.vmscale(&["gen", "--seed", "minus"]).status.code(), Some(1));
    assert_eq!(run.vmscale(&["--help"]).status.code(), Some(0));
}

#[test]
fn gen_is_reproducible_and_round_trips() {
    let run = Run::new(SMALL);
    run.ok(&["gen", "--out", "a"]);
    run.ok(&["gen", "--out", "b"]);
    let a = fs::read(run.path("a/trace.csv")).unwrap();
    assert_eq!(a, fs::read(run.path("b/trace.csv")).unwrap());
    let series = parse_trace(&a[..], &ParseOptions::default()).unwrap();
    assert_eq!(series.len(), 6);
    assert!(series.iter().all(|s| s.len() == 20 && s.interval_minutes == 5));
    let mut again = Vec::new();
    vmscale::traces::write_trace(&mut again, &series, b',').unwrap();
    assert_eq!(again, a);

    run.ok(&["gen", "--out", "c", "--seed", "8"]);
    assert_ne!(a, fs::read(run.path("c/trace.csv")).unwrap());
}

#[test]
fn zero_tasks_gives_header_only() {
    let run = Run::new(SMALL);
    run.ok(&["gen", "--tasks", "0", "--out", "z"]);
    assert_eq!(fs::read_to_string(run.path("z/trace.csv")).unwrap(), "timestamp,vm_id,cpu,mem\n");
}

#[test]
fn dry_run_writes_nothing() {
    let run = Run::new(SMALL);
    let trace = run.trace();
    for cmd in ["gen", "train", "autoscale", "place", "simulate", "report"] {
        let out = run.ok(&[cmd, "--dry-run", "--trace", &trace, "--out", "dry"][..if cmd == "gen" { 2 } else { 4 }]
            .iter()
            .chain(["--out", "dry"].iter())
            .copied()
            .collect::<Vec<_>>());
        assert!(out.stdout.is_empty());
        assert!(!run.path("dry").exists(), "{cmd} wrote output");
    }
}

#[test]
fn train_writes_model_and_short_log_reproducibly() {
    let run = Run::new(SMALL);
    let trace = run.trace();
    run.ok(&["train", "--trace", &trace, "--out", "m1"]);
    run.ok(&["train", "--trace", &trace, "--out", "m2"]);
    let model = run.path("m1/predictors/vm-0.json");
    assert!(model.is_file());
    assert_eq!(fs::read(&model).unwrap(), fs::read(run.path("m2/predictors/vm-0.json")).unwrap());
    assert_eq!(fs::read(run.path("m1/train.json")).unwrap(), fs::read(run.path("m2/train.json")).unwrap());
    let log = fs::read_to_string(run.path("m1/convergence/vm-0.csv")).unwrap();
    let rows = log.lines().count() - 1;
    assert!((1..=15).contains(&rows), "{rows} rows");

    run.ok(&["predict", "--trace", &trace, "--models", "m1", "--out", "p"]);
    let forecast = fs::read_to_string(run.path("p/forecast.csv")).unwrap();
    assert_eq!(forecast.lines().count(), 1 + 6 * 2);
    for line in forecast.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (pred, padded): (f64, f64) = (f[3].parse().unwrap(), f[4].parse().unwrap());
        assert!(pred.is_finite() && padded >= pred - 1e-12, "{line}");
    }
}

#[test]
fn predict_without_models_is_a_runtime_error() {
    let run = Run::new(SMALL);
    let trace = run.trace();
    let out = run.vmscale(&["predict", "--trace", &trace, "--models", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn autoscale_and_place_cover_every_task() {
    let run = Run::new(SMALL);
    let trace = run.trace();
    run.ok(&["place", "--trace", &trace, "--out", "p", "--at", "5"]);
    let clustering = fs::read_to_string(run.path("p/clustering.csv")).unwrap();
    let allocation = fs::read_to_string(run.path("p/allocation.csv")).unwrap();
    assert_eq!(clustering.lines().count(), 7);
    assert_eq!(allocation.lines().count(), 7);
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(run.path("p/autoscale.json")).unwrap()).unwrap();
    let total: u64 = summary["counts"].as_array().unwrap().iter().map(|c| c[1].as_u64().unwrap()).sum();
    assert_eq!(total, 6);
    assert_eq!(summary["interval"], 5);

    run.ok(&["autoscale", "--trace", &trace, "--out", "a", "--at", "5"]);
    assert_eq!(clustering, fs::read_to_string(run.path("a/clustering.csv")).unwrap());
}

#[test]
fn infeasible_placement_exits_two() {
    let config = format!(
        "{SMALL}\n[[servers]]\nkind = \"tiny\"\npe = 1\nmips_per_pe = 600.0\nram_gb = 1.0\nstorage_gb = 10.0\npw_max = 50.0\npw_min = 20.0\npw_idle = 20.0\ncount = 1\n"
    );
    let run = Run::new(&config);
    let trace = run.trace();
    let out = run.vmscale(&["place", "--trace", &trace, "--engine", "best_fit"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn simulate_single_scenario_writes_one_metrics_file() {
    let run = Run::new(SMALL);
    let trace = run.trace();
    run.ok(&["simulate", "--trace", &trace, "--scenarios", "WPWA", "--out", "w"]);
    assert_eq!(files(&run.path("w")), ["metrics-WPWA.csv", "runs.json", "summary.csv", "summary.json"]);
    let metrics = fs::read_to_string(run.path("w/metrics-WPWA.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4);
}

#[test]
fn simulate_all_scenarios_in_table_order_and_reproducibly() {
    let run = Run::new(SMALL);
    let trace = run.trace();
    run.ok(&["simulate", "--trace", &trace, "--scenarios", "WPWA,OA,PWA,PA", "--out", "s1"]);
    run.ok(&["simulate", "--trace", &trace, "--out", "s2"]);
    let summary = fs::read_to_string(run.path("s1/summary.csv")).unwrap();
    let order: Vec<&str> = summary.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(order, ["OA", "PA", "PWA", "WPWA"]);
    assert_eq!(summary, fs::read_to_string(run.path("s2/summary.csv")).unwrap());
    for k in ["OA", "PA", "PWA", "WPWA"] {
        let name = format!("metrics-{k}.csv");
        assert_eq!(fs::read(run.path("s1").join(&name)).unwrap(), fs::read(run.path("s2").join(&name)).unwrap());
    }
}

#[test]
fn report_is_reproducible_without_timing() {
    let run = Run::new(&format!("{SMALL}\n[report]\npws_set = [5, 10]\n"));
    let trace = run.trace();
    run.ok(&["simulate", "--trace", &trace, "--scenarios", "OA,WPWA", "--out", "r"]);
    fs::remove_file(run.path("r/summary.csv")).unwrap();
    run.ok(&["report", "--trace", &trace, "--out", "r"]);
    let first = fs::read(run.path("r/prediction.csv")).unwrap();
    assert!(run.path("r/summary.csv").is_file());
    run.ok(&["report", "--trace", &trace, "--out", "r"]);
    assert_eq!(first, fs::read(run.path("r/prediction.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    let families: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(families, ["OM-FNN", "SISO-FNN", "OM-FNN", "SISO-FNN"]);

    run.ok(&["report", "--trace", &trace, "--out", "t", "--timing"]);
    let timed = fs::read_to_string(run.path("t/prediction.csv")).unwrap();
    assert!(timed.lines().skip(1).all(|l| !l.split(',').nth(4).unwrap().is_empty()));
}
