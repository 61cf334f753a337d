//! Experiment runner, records, reports and the CLI on tiny synthetic data.

use std::path::{Path, PathBuf};
use std::process::Command;

use plankton::experiment::{self, export_latents, report, ExperimentConfig, ExperimentRecord, RunStatus, RECORD_FILE};
use plankton::features::npy;

fn config_text(out: &Path, extra: &str) -> String {
    format!(
        r#"
name = "tiny"
output_dir = "{}"

[data.synthetic]
classes = 3
per_class = 10
shape = "1x8x16"
seed = 3

[embedder]
variant = "VAE"
latent_dim = 4
epochs = 15
batch_size = 8
channels = [4, 4, 4]

[protocol]
repeats = 2
folds = 3
{extra}
"#,
        out.display()
    )
}

fn tiny(out: &Path, extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&config_text(out, extra), Path::new(".")).unwrap()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_plankton"));
    c.env("RUST_LOG", "warn");
    c
}

#[test]
fn run_persists_record_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "\n[supervised]\nheads = \"both\"\nlambdas = [0.01, 1.0]\ngammas = [0.1, 1.0]\n[supervised.fc]\nepochs = 10\n");
    let rec = experiment::run(&cfg).unwrap();
    assert_eq!(rec.status, RunStatus::Complete);
    assert_eq!(rec.repeats.len(), 2);
    assert_eq!(rec.purity.as_ref().unwrap().runs.len(), 2);
    assert!(rec.ridge_accuracy.is_some() && rec.fc_accuracy.is_some());
    assert!(rec.stage_seconds.contains_key("train"));
    let path = experiment::record_dir(&cfg).join(RECORD_FILE);
    let loaded = ExperimentRecord::load(&path).unwrap();
    assert_eq!(loaded, rec);
    let base = path.parent().unwrap();
    for rep in &rec.repeats {
        for p in [&rep.artifacts.checkpoint, &rep.artifacts.labels, &rep.artifacts.latents, &rep.artifacts.clusters] {
            assert!(base.join(p.as_ref().unwrap()).is_file());
        }
    }
    let metrics: Vec<serde_json::Value> =
        serde_json::from_str(&std::fs::read_to_string(base.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics.iter().any(|m| m["metric"] == "purity" && m["config_hash"] == rec.config_hash.as_str()));
}

#[test]
fn tampered_config_is_detected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "");
    experiment::run(&cfg).unwrap();
    let path = experiment::record_dir(&cfg).join(RECORD_FILE);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["config"]["embedder"]["latent_dim"] = 5.into();
    std::fs::write(&path, v.to_string()).unwrap();
    let err = ExperimentRecord::load(&path).unwrap_err();
    assert!(err.to_string().contains("checksum"), "{err}");
}

#[test]
fn export_latents_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path(), "");
    let rec = experiment::run(&cfg).unwrap();
    let path = experiment::record_dir(&cfg).join(RECORD_FILE);
    let out = dir.path().join("latents.csv");
    assert_eq!(export_latents(&path, 1, &out).unwrap(), 30);

    let mut r = csv::Reader::from_path(&out).unwrap();
    let header = r.headers().unwrap().clone();
    assert_eq!(header.len(), 2 + 4);
    assert_eq!(&header[2], "z_1");
    let (shape, stored) = npy::read(&path.parent().unwrap().join(rec.repeats[1].artifacts.latents.as_ref().unwrap())).unwrap();
    assert_eq!(shape, vec![30, 4]);
    let mut parsed = Vec::new();
    for row in r.records() {
        let row = row.unwrap();
        assert!(row[1].starts_with("class_"));
        parsed.extend((2..6).map(|j| row[j].parse::<f32>().unwrap()));
    }
    assert_eq!(parsed, stored);

    // a record whose repeat lost its latents
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    v["repeats"][0]["artifacts"]["latents"] = serde_json::Value::Null;
    std::fs::write(&path, v.to_string()).unwrap();
    assert!(export_latents(&path, 0, &out).is_err());
    assert!(export_latents(&path, 7, &out).is_err());
}

#[test]
fn failing_stage_leaves_partial_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path(), "");
    cfg.embedder.variant = plankton::embedder::Variant::Ae;
    cfg.embedder.lr = 1e12;
    let err = experiment::run(&cfg).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("stage train (repeat 0)"), "{msg}");
    let rec: ExperimentRecord =
        serde_json::from_str(&std::fs::read_to_string(experiment::record_dir(&cfg).join(RECORD_FILE)).unwrap()).unwrap();
    assert_eq!(rec.status, RunStatus::Partial);
    assert!(rec.error.unwrap().contains("train"));
}

#[test]
fn report_tables_and_notes() {
    let dir = tempfile::tempdir().unwrap();
    let mut recs = Vec::new();
    for z in [2, 4] {
        let mut cfg = tiny(dir.path(), "");
        cfg.embedder.latent_dim = z;
        cfg.name = format!("z{z}");
        recs.push(experiment::run(&cfg).unwrap());
    }
    let rep = report(&recs).unwrap();
    assert!(rep.text.contains("Algorithm/Z"));
    assert!(rep.text.contains("Synthetic-VAE"));
    assert!(rep.text.contains("Supervised accuracy table omitted"));
    assert_eq!(rep.csv.lines().count(), 3);
    assert!(rep.warnings.is_empty());

    let single = report(&recs[..1]).unwrap();
    let table_rows: Vec<&str> = single.text.lines().filter(|l| l.starts_with("Synthetic-VAE")).collect();
    assert_eq!(table_rows.len(), 1);
    assert_eq!(table_rows[0].matches('±').count(), 2);

    let mut other = recs[0].clone();
    other.dataset_name = "elsewhere".into();
    let mixed = report(&[recs[0].clone(), other]).unwrap();
    assert_eq!(mixed.warnings.len(), 1);
    assert!(report(&[]).is_err());
}

#[test]
fn cli_full_run_report_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    std::fs::write(&cfg_path, config_text(&dir.path().join("runs"), "")).unwrap();

    let out = bin().args(["run", "--config"]).arg(&cfg_path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Synthetic-VAE Z=4:") && stdout.contains('±'), "{stdout}");

    let record: PathBuf = dir.path().join("runs/tiny/record.json");
    let csv_out = dir.path().join("table.csv");
    let out = bin().arg("report").arg(&record).arg("--csv").arg(&csv_out).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Algorithm/Z"));
    assert!(std::fs::read_to_string(&csv_out).unwrap().starts_with("dataset,algorithm"));

    let lat = dir.path().join("lat.csv");
    let out = bin().args(["export-latents", "--record"]).arg(&record).arg("--out").arg(&lat).output().unwrap();
    assert!(out.status.success());
    assert_eq!(std::fs::read_to_string(&lat).unwrap().lines().count(), 31);
}

#[test]
fn cli_stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    std::fs::write(&cfg_path, config_text(&dir.path().join("runs"), "")).unwrap();
    let ckpt = dir.path().join("emb.ckpt");
    let out = bin().args(["train", "--config"]).arg(&cfg_path).arg("--out").arg(&ckpt).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ckpt.is_file());

    let cdir = dir.path().join("clusters");
    let out = bin()
        .args(["cluster", "--config"])
        .arg(&cfg_path)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--out-dir")
        .arg(&cdir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = bin()
        .args(["evaluate", "--config"])
        .arg(&cfg_path)
        .arg("--labels")
        .arg(cdir.join("labels.csv"))
        .arg("--split")
        .arg(cdir.join("split.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["samples"], 6);
    assert!(v["purity"].as_f64().unwrap() > 0.0);

    let out = bin()
        .args(["classify", "--config"])
        .arg(&cfg_path)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["ridge"]["test_accuracy"].is_number() && v["fc"]["test_accuracy"].is_number());
}

#[test]
fn cli_errors_are_stage_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["run", "--variant", "VAE", "--latent-dim", "4", "--layout", "r2", "--manifest"])
        .arg(dir.path().join("missing.csv"))
        .arg("--feature-cache")
        .arg(dir.path().join("cache"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage extract (repeat 0)") && err.contains("missing.csv"), "{err}");

    let out = bin().args(["run", "--latent-dim", "4", "--synthetic", "3,4,1x8x8"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--variant"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(cfg.seeds().len(), cfg.protocol.repeats, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
