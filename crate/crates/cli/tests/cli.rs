use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn uxsim(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uxsim"))
        .arg("--store")
        .arg(store)
        .arg("--mock-dir")
        .arg(fixtures().join("mock-shop"))
        .args(args)
        .env_remove("UXSIM_LLM_ENDPOINT")
        .output()
        .unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn persona_generate_writes_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("personas");
    let spec = fixtures().join("spec.json");
    let o = uxsim(dir.path(), &["persona", "generate", "--spec", spec.to_str().unwrap(), "-n", "6", "--out", out.to_str().unwrap(), "--rng-seed", "3"]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["generated"], 6);
    assert_eq!(manifest["rng_seed"], 3);
    assert!(out.join("persona_0006.txt").is_file());
    assert!(out.join("seed_persona.txt").is_file());
}

#[tokio::test(flavor = "multi_thread")]
async fn study_run_and_export() {
    let shop = uxsim_fixture_shop::spawn().await.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("study.json")).unwrap()).unwrap();
    cfg["url"] = shop.url("/").into();
    let cfg_path = dir.path().join("study.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let store = dir.path().join("runs");

    let (store2, cfg2) = (store.clone(), cfg_path.clone());
    let o = tokio::task::spawn_blocking(move || uxsim(&store2, &["study", "run", "--config", cfg2.to_str().unwrap()])).await.unwrap();
    assert!(o.status.success(), "{}", text(&o.stderr));
    let run_id = text(&o.stdout).trim().to_string();
    assert!(store.join(&run_id).join("run.json").is_file());

    let csv_out = dir.path().join("rows.csv");
    let o = uxsim(&store, &["study", "export", &run_id, "--format", "csv", "--out", csv_out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", text(&o.stderr));
    let csv = std::fs::read_to_string(&csv_out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",7,2,75.0,4,false")), "{csv}");
    assert!(Path::new(text(&o.stdout).trim()).is_file());

    let o = uxsim(&store, &["study", "export", &run_id, "--format", "pdf"]);
    assert!(!o.status.success());
    let o = uxsim(&store, &["study", "export", "no-such-run"]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).contains("unknown run"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"url": "", "n_participants": 0}"#).unwrap();
    let o = uxsim(dir.path(), &["study", "run", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(text(&o.stderr).starts_with("error:"), "{}", text(&o.stderr));
}
