use std::path::Path;
use std::process::Command;

use martensim::cli::{main_with_args, StateFile};
use martensim::render::read_ppm;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_martensim"));
    c.env_remove("MARTENSIM_THREADS");
    c
}

fn code(c: &mut Command) -> i32 {
    c.output().expect("binary runs").status.code().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(code(bin().arg("bogus")), 2);
    assert_eq!(code(bin().args(["simulate", "--delta", "abc"])), 2);
    assert_eq!(code(bin().args(["simulate", "--algorithm", "C"])), 2);
    assert_eq!(code(bin().args(["simulate", "--max-steps", "3", "--min-length", "0.1"])), 2);
    assert_eq!(code(bin().arg("--help")), 0);
    assert_eq!(code(bin().arg("--version")), 0);
}

#[test]
fn invalid_parameters_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    assert_eq!(code(bin().args(["simulate", "--algorithm", "Amod", "--p", "0.4", "--out", &o])), 2);
    assert_eq!(code(bin().args(["simulate", "--delta", "1.5", "--out", &o])), 2);
    assert_eq!(code(bin().args(["simulate", "--max-steps", "2", "--out", &o]).env("MARTENSIM_THREADS", "0")), 2);
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"delta": 0.2, "unknown": 1}"#).unwrap();
    assert_eq!(code(bin().args(["simulate", "--config", cfg.to_str().unwrap(), "--out", &o])), 2);
}

#[test]
fn simulate_writes_all_outputs_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["simulate", "--algorithm", "B", "--max-steps", "200", "--seed", "7"];
    assert_eq!(code(bin().args(args).args(["--out", &out_arg(a.path())])), 0);
    assert_eq!(code(bin().args(args).args(["--out", &out_arg(b.path())]).env("MARTENSIM_THREADS", "3")), 0);
    for f in ["events.jsonl", "series.csv", "state.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f} is empty");
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f} differs");
    }
    let series = std::fs::read_to_string(a.path().join("series.csv")).unwrap();
    assert_eq!(series.lines().next().unwrap(), "k,volume,n_components,n_events");
    assert_eq!(series.lines().count(), 202);
    let res = StateFile::load(&a.path().join("state.json")).unwrap();
    assert_eq!(res.config.seed, 7);
    assert_eq!(res.state.k, 200);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"algorithm": "B", "seed": 3, "stop": {"max_steps": 20}}"#).unwrap();
    let o = out_arg(dir.path());
    assert_eq!(code(bin().args(["simulate", "--config", cfg.to_str().unwrap(), "--seed", "4", "--out", &o])), 0);
    let res = StateFile::load(&dir.path().join("state.json")).unwrap();
    let direct = martensim::fragment::run(&martensim::fragment::SimConfig {
        algorithm: martensim::fragment::Algorithm::B,
        seed: 4,
        stop: martensim::fragment::StopRule::MaxSteps(20),
        ..Default::default()
    })
    .unwrap();
    assert_eq!(res.config, direct.config);
    assert_eq!(res.state, direct.state);
}

#[test]
fn ensemble_runs_get_seed_suffixes() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    let rc = main_with_args(["martensim", "simulate", "--max-steps", "3", "--n-seeds", "2", "--base-seed", "10", "--out", &o]);
    assert_eq!(rc, 0);
    for s in [10, 11] {
        assert!(dir.path().join(format!("state_{s}.json")).exists());
        assert!(dir.path().join(format!("events_{s}.jsonl")).exists());
    }
}

#[test]
fn stats_from_state_files_and_combination() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    let sim = ["simulate", "--algorithm", "B", "--degenerate-rule", "Change1", "--min-length", "0.02", "--out", &o];
    assert_eq!(code(bin().args(sim)), 0);
    let state = dir.path().join("state.json");
    let stats_dir = dir.path().join("stats");
    let so = out_arg(&stats_dir);
    assert_eq!(code(bin().args(["stats", "--input", state.to_str().unwrap(), "--sobolev", "--n-samples", "2000", "--out", &so])), 0);
    for f in ["histogram.csv", "fit.json", "buckets.csv", "sobolev_series.csv"] {
        assert!(stats_dir.join(f).exists(), "{f} missing");
    }
    let header = std::fs::read_to_string(stats_dir.join("sobolev_series.csv")).unwrap();
    assert_eq!(header.lines().next().unwrap(), "k,lp_term,gagliardo_estimate,stderr,cutoff_bound,bound_rhs");
    let fit = stats_dir.join("fit.json");
    let f = fit.to_str().unwrap();
    assert_eq!(code(bin().args(["stats", "--combine", f, f, "--out", &so])), 0);
    let combined: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(stats_dir.join("combined.json")).unwrap()).unwrap();
    assert!(combined["combined_exponent"].as_f64().unwrap().is_finite());
}

#[test]
fn render_writes_a_ppm_of_the_requested_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = out_arg(dir.path());
    assert_eq!(code(bin().args(["render", "--max-steps", "4", "--width", "64", "--height", "48", "--out", &o])), 0);
    let img = read_ppm(std::fs::File::open(dir.path().join("image.ppm")).unwrap()).unwrap();
    assert_eq!((img.width, img.height), (64, 48));
    assert_eq!(code(bin().args(["render", "--block", "horizontal", "--block-depth", "1", "--width", "32", "--height", "8", "--out", &o])), 0);
    assert!(dir.path().join("block_h.ppm").exists());
}

#[test]
fn verify_reports_and_catches_faults() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let r = report.to_str().unwrap();
    let ok = bin().args(["verify", "fast", "--only", "1,7", "--report", r]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() == 2, "{text}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(code(bin().args(["verify", "fast", "--only", "2", "--fault-c-tilde-a", "0.3", "--report", r])), 1);
    assert_eq!(code(bin().args(["verify", "fast", "--only", "99", "--report", r])), 2);
    assert_eq!(code(bin().args(["verify", "medium"])), 2);
}
