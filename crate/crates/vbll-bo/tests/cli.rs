//! End-to-end tests of the `vbll-bo` binary: run / sweep / export /
//! list-problems, flag overrides, the output-root environment variable, and
//! exit codes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vbll-bo"))
}

fn tiny_config_json(problem: &str, acquisition: &str, horizon: usize, seeds: &[u64]) -> String {
    format!(
        r#"{{
        "name": "exp",
        "problem": "{problem}",
        "horizon": {horizon},
        "seeds": {seeds:?},
        "surrogate": {{ "width": 8, "depth": 2, "max_epochs": 40, "patience": 10 }},
        "reinit": {{ "kind": "always" }},
        "acquisition": {{ "kind": "{acquisition}", "restarts": 2, "raw_samples": 16,
                          "nsga_population": 8, "nsga_generations": 5 }}
    }}"#
    )
}

#[test]
fn list_problems_prints_registry() {
    let out = bin().arg("list-problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["branin", "ackley2d", "ackley5d", "hartmann6", "nndraw", "branincurrin", "dtlz1", "dtlz2"] {
        assert!(text.contains(name), "missing {name} in: {text}");
    }
}

#[test]
fn run_writes_records_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branin", "ts", 1, &[0, 1])).unwrap();

    let out = bin()
        .arg("run")
        .arg(&cfg_path)
        .arg("--out")
        .arg(dir.path().join("results"))
        .arg("--jobs")
        .arg("2")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("results/exp/seed_0.csv").exists());
    assert!(dir.path().join("results/exp/seed_1.csv").exists());
    assert!(dir.path().join("results/exp/metadata.json").exists());

    let header = std::fs::read_to_string(dir.path().join("results/exp/seed_0.csv")).unwrap();
    assert!(header.starts_with(
        "seed,t,x_0,x_1,y_0,best_so_far,cumulative_fit_seconds,cumulative_acq_seconds,reinit_flag"
    ));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branin", "ts", 1, &[0, 1])).unwrap();

    let out = bin()
        .arg("run")
        .arg(&cfg_path)
        .arg("--seed")
        .arg("9")
        .arg("--out")
        .arg(dir.path().join("r"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("r/exp/seed_9.csv").exists());
    assert!(!dir.path().join("r/exp/seed_0.csv").exists());
}

#[test]
fn output_env_var_is_default_root() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branin", "ts", 1, &[3])).unwrap();

    let out = bin()
        .arg("run")
        .arg(&cfg_path)
        .env("VBLL_BO_OUT", dir.path().join("envroot"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("envroot/exp/seed_3.csv").exists());
}

#[test]
fn export_produces_curves_and_validates_metric() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branin", "ts", 2, &[0, 1])).unwrap();
    let results = dir.path().join("results");
    assert!(bin().arg("run").arg(&cfg_path).arg("--out").arg(&results).output().unwrap().status.success());

    let exp = results.join("exp");
    let out = bin().arg("export").arg(&exp).arg("--metric").arg("best").output().unwrap();
    assert!(out.status.success());
    let curves = std::fs::read_to_string(exp.join("curves_best.csv")).unwrap();
    assert!(curves.starts_with("t,mean,p10,p90"));
    assert_eq!(curves.lines().count(), 1 + 4); // header + 2 initial + 2 BO rows

    // logdiff_hv needs --max-hv.
    let out = bin().arg("export").arg(&exp).arg("--metric").arg("logdiff_hv").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn sweep_creates_per_value_directories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branin", "ts", 1, &[0])).unwrap();

    let out = bin()
        .arg("sweep")
        .arg(&cfg_path)
        .arg("--axis")
        .arg("wishart_scale")
        .arg("--values")
        .arg("0.00001,0.01,1")
        .arg("--out")
        .arg(dir.path().join("sw"))
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for v in ["0.00001", "0.01", "1"] {
        let f = dir.path().join(format!("sw/exp/wishart_scale={v}/seed_0.csv"));
        assert!(f.exists(), "{}", f.display());
    }

    let out = bin()
        .arg("sweep")
        .arg(&cfg_path)
        .arg("--axis")
        .arg("bogus")
        .arg("--values")
        .arg("1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_seed_gives_exit_code_two_and_keeps_partial_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branin", "ts", 1, &[0, 1])).unwrap();

    // Sabotage seed 0's output file with a directory of the same name; the
    // write fails for that seed only.
    let results = dir.path().join("results");
    std::fs::create_dir_all(results.join("exp/seed_0.csv")).unwrap();

    let out = bin().arg("run").arg(&cfg_path).arg("--out").arg(&results).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(results.join("exp/seed_1.csv").exists(), "partial results must be kept");

    let meta = std::fs::read_to_string(results.join("exp/metadata.json")).unwrap();
    assert!(meta.contains("failures"));
    assert!(meta.contains("\"0\"") || meta.contains("[0,") || meta.contains("[\n"), "metadata: {meta}");
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, tiny_config_json("branincurrin", "ts", 1, &[0])).unwrap();
    let out = bin().arg("run").arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single-objective"));
}

#[test]
fn checkpoints_written_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    let body = tiny_config_json("branin", "ts", 1, &[0]).replace(
        "\"name\": \"exp\",",
        "\"name\": \"exp\", \"save_checkpoints\": true,",
    );
    std::fs::write(&cfg_path, body).unwrap();
    let results = dir.path().join("results");
    let out = bin().arg("run").arg(&cfg_path).arg("--out").arg(&results).output().unwrap();
    assert!(out.status.success());
    let cp_path = results.join("exp/seed_0_model.json");
    assert!(cp_path.exists());
    let cp = vbll_bo::surrogate::load_checkpoint(Path::new(&cp_path)).unwrap();
    assert_eq!(cp.model.outputs(), 1);
}
