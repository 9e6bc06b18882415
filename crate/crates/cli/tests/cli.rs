use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

mod schema;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hsp"));
    c.env_remove("HSP_OUT_DIR");
    c
}

fn schema_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name)
}

fn load_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap())
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Small and quick, still the usual optics.
fn small_config() -> Value {
    json!({
        "schema_version": 1,
        "grid": { "x_min": -1.0, "x_max": 1.0, "n_bins": 32 },
        "reference": { "waist": 0.3, "center": 0.0 },
        "unknown": {
            "waist": 0.3,
            "center": 0.0,
            "phase": { "type": "quadratic", "k": 7853.981633974483, "radius": 34.0 }
        },
        "visibility": 0.91,
        "n_pairs": 2200,
        "n_marginal_events": 10000,
        "retrieval": { "n_screen": 256, "n_global_starts": 4, "focal_length": 75.0 },
        "mc": { "n_trials": 6 },
        "seed": 7
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_vec_pretty(cfg).unwrap()).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path, out: &Path) -> Output {
    bin()
        .args(args)
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_ok(o: &Output) {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn pipeline_is_reproducible_byte_for_byte() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&run(&["pipeline"], &cfg, &a));
    assert_ok(&run(&["pipeline"], &cfg, &b));
    let (fa, fb) = (sorted_files(&a), sorted_files(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
}

#[test]
fn seed_override_changes_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_ok(&run(&["simulate"], &cfg, &a));
    assert_ok(&run(&["simulate", "--seed", "8"], &cfg, &b));
    assert_ne!(
        fs::read(a.join("coincidences.txt")).unwrap(),
        fs::read(b.join("coincidences.txt")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("hsp_exact.txt")).unwrap(),
        fs::read(b.join("hsp_exact.txt")).unwrap()
    );
}

#[test]
fn manifest_hashes_match_files_and_outputs_match_schemas() {
    use sha2::{Digest, Sha256};

    let tmp = TempDir::new().unwrap();
    let cfg_value = small_config();
    schema::validate(&load_json(&schema_path("config.schema.json")), &cfg_value).unwrap();
    let cfg = write_config(tmp.path(), &cfg_value);
    let out = tmp.path().join("out");
    let o = run(&["pipeline"], &cfg, &out);
    assert_ok(&o);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("|R| ="), "{stdout}");

    let manifest = load_json(&out.join("pipeline.manifest.json"));
    schema::validate(&load_json(&schema_path("manifest.schema.json")), &manifest).unwrap();
    let entries = manifest["artifacts"].as_array().unwrap();
    for name in [
        "coincidences.txt",
        "marginal_u.tsv",
        "marginal_r.tsv",
        "hsp_exact.txt",
        "hsp_exact.pgm",
        "hsp_exact.pgm.json",
        "hsp_measured.pgm",
        "retrieval.json",
        "hsp_reconstructed.pgm",
        "phase.tsv",
        "uncertainty.json",
        "phase_uncertainty.tsv",
        "hsp_mc_mean.pgm",
    ] {
        assert!(
            entries.iter().any(|e| e["path"] == name),
            "{name} missing from manifest"
        );
    }
    for e in entries {
        let bytes = fs::read(out.join(e["path"].as_str().unwrap())).unwrap();
        assert_eq!(e["bytes"].as_u64().unwrap() as usize, bytes.len());
        assert_eq!(
            e["sha256"].as_str().unwrap(),
            hex::encode(Sha256::digest(&bytes))
        );
    }

    let retrieval = load_json(&out.join("retrieval.json"));
    schema::validate(
        &load_json(&schema_path("retrieval.schema.json")),
        &retrieval,
    )
    .unwrap();
    let unc = load_json(&out.join("uncertainty.json"));
    schema::validate(&load_json(&schema_path("uncertainty.schema.json")), &unc).unwrap();
    assert_eq!(unc["summary"]["n_trials"], 6);
    assert!(unc["summary"].get("trial_phases").is_none());

    // Render sidecars describe a linear scale.
    let side = load_json(&out.join("hsp_exact.pgm.json"));
    assert_eq!(side["width"], 32);
    assert_eq!(side["black"], 0.0);
    assert!(side["white"].as_f64().unwrap() > 0.0);
}

#[test]
fn split_commands_agree_with_pipeline() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let (whole, split) = (tmp.path().join("whole"), tmp.path().join("split"));
    assert_ok(&run(&["pipeline"], &cfg, &whole));
    assert_ok(&run(&["simulate"], &cfg, &split));
    assert_ok(&run(&["retrieve"], &cfg, &split));
    assert_ok(&run(&["uncertainty"], &cfg, &split));
    for name in [
        "coincidences.txt",
        "retrieval.json",
        "phase.tsv",
        "uncertainty.json",
    ] {
        assert!(
            fs::read(whole.join(name)).unwrap() == fs::read(split.join(name)).unwrap(),
            "{name} differs"
        );
    }
    for cmd in ["simulate", "retrieve", "uncertainty"] {
        assert!(split.join(format!("{cmd}.manifest.json")).exists());
    }
}

#[test]
fn noiseless_retrieval_reaches_zero_objective() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let sim = tmp.path().join("sim");
    let ret = tmp.path().join("ret");
    assert_ok(&run(&["simulate"], &cfg, &sim));
    let o = bin()
        .args(["retrieve", "--noiseless", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ret)
        .arg("--counts")
        .arg(&sim)
        .output()
        .unwrap();
    assert_ok(&o);
    let doc = load_json(&ret.join("retrieval.json"));
    assert_eq!(doc["input"], "exact");
    let objective = doc["result"]["objective"].as_f64().unwrap();
    assert!(objective < 1e-8, "objective {objective}");
    let radius = doc["result"]["radius"]["radius"].as_f64().unwrap().abs();
    assert!((radius - 34.0).abs() < 0.01, "radius {radius}");
}

#[test]
fn visibility_out_of_range_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut c = small_config();
    c["visibility"] = json!(1.2);
    let cfg = write_config(tmp.path(), &c);
    let out = tmp.path().join("out");
    let o = run(&["pipeline"], &cfg, &out);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("visibility"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn single_trial_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let mut c = small_config();
    c["mc"]["n_trials"] = json!(1);
    let cfg = write_config(tmp.path(), &c);
    let out = tmp.path().join("out");
    let o = run(&["pipeline"], &cfg, &out);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("n_trials"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let mut c = small_config();
    c["retrieval"]["n_startz"] = json!(3);
    let cfg = write_config(tmp.path(), &c);
    let o = run(&["simulate"], &cfg, &tmp.path().join("out"));
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("n_startz"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(
        &["simulate"],
        &tmp.path().join("nope.json"),
        &tmp.path().join("out"),
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nope.json"), "{}", stderr(&o));
}

#[test]
fn truncated_counts_fail_cleanly() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let sim = tmp.path().join("sim");
    assert_ok(&run(&["simulate"], &cfg, &sim));
    let path = sim.join("coincidences.txt");
    let text = fs::read_to_string(&path).unwrap();
    let keep = text.lines().count() - 5;
    let cut: Vec<&str> = text.lines().take(keep).collect();
    fs::write(&path, cut.join("\n")).unwrap();

    let ret = tmp.path().join("ret");
    let o = bin()
        .args(["retrieve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&ret)
        .arg("--counts")
        .arg(&sim)
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("coincidences.txt"), "{err}");
    assert!(!err.contains("panicked"), "{err}");
    assert!(!ret.exists());
}

#[test]
fn grid_mismatch_between_config_and_counts() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let sim = tmp.path().join("sim");
    assert_ok(&run(&["simulate"], &cfg, &sim));
    let mut other = small_config();
    other["grid"]["n_bins"] = json!(48);
    let other_dir = tmp.path().join("other");
    fs::create_dir(&other_dir).unwrap();
    let other_cfg = write_config(&other_dir, &other);
    let o = bin()
        .args(["retrieve", "--config"])
        .arg(&other_cfg)
        .arg("--out")
        .arg(tmp.path().join("ret"))
        .arg("--counts")
        .arg(&sim)
        .output()
        .unwrap();
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("out");
    let o = run(&["pipeline", "--dry-run"], &cfg, &out);
    assert_ok(&o);
    assert!(!out.exists());
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["command"], "pipeline");
    assert_eq!(doc["retrieval"]["n_screen"], 256);
    assert_eq!(doc["mc"]["n_trials"], 6);
    assert!((doc["grid_dx"].as_f64().unwrap() - 2.0 / 32.0).abs() < 1e-15);
    // Default bounds follow from the grid and focal length.
    let a2 = doc["retrieval"]["coeff_bounds"][1].as_f64().unwrap();
    assert!(a2 > 0.0);
}

#[test]
fn out_dir_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let out = tmp.path().join("from_env");
    let o = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .env("HSP_OUT_DIR", &out)
        .output()
        .unwrap();
    assert_ok(&o);
    assert!(out.join("simulate.manifest.json").exists());
}

#[test]
fn table_phase_profile_reproduces_the_analytic_phase() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &small_config());
    let sim = tmp.path().join("sim");
    assert_ok(&run(&["simulate"], &cfg, &sim));

    let mut c = small_config();
    c["unknown"]["phase"] = json!({ "type": "table", "path": "sim/truth_unknown.tsv" });
    let table_cfg = tmp.path().join("table.json");
    fs::write(&table_cfg, serde_json::to_vec(&c).unwrap()).unwrap();
    let again = tmp.path().join("again");
    assert_ok(&run(&["simulate"], &table_cfg, &again));
    let a = fs::read_to_string(sim.join("hsp_exact.txt")).unwrap();
    let b = fs::read_to_string(again.join("hsp_exact.txt")).unwrap();
    let parse = |t: &str| -> Vec<f64> {
        t.lines()
            .filter(|l| !l.starts_with('#'))
            .flat_map(|l| {
                l.split_whitespace()
                    .map(|v| v.parse::<f64>().unwrap())
                    .collect::<Vec<_>>()
            })
            .collect()
    };
    let (pa, pb) = (parse(&a), parse(&b));
    assert_eq!(pa.len(), 32 * 32);
    let worst = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "max difference {worst}");

    // A table on another grid is refused.
    let mut wrong = c.clone();
    wrong["grid"]["n_bins"] = json!(16);
    fs::write(&table_cfg, serde_json::to_vec(&wrong).unwrap()).unwrap();
    let o = run(
        &["simulate", "--dry-run"],
        &table_cfg,
        &tmp.path().join("x"),
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn bundled_config_recovers_the_radius() {
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.json");
    schema::validate(
        &load_json(&schema_path("config.schema.json")),
        &load_json(&bundled),
    )
    .unwrap();
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    assert_ok(&run(&["simulate"], &bundled, &out));
    let before = fs::read(out.join("coincidences.txt")).unwrap();
    assert_ok(&run(&["retrieve"], &bundled, &out));
    assert_eq!(before, fs::read(out.join("coincidences.txt")).unwrap());
    let doc = load_json(&out.join("retrieval.json"));
    let radius = doc["result"]["radius"]["radius"].as_f64().unwrap().abs();
    assert!((radius - 34.0).abs() <= 3.4, "|R| = {radius}");
}
