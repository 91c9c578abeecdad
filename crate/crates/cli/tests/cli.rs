use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fairaudit::audit::{AuditConfig, CohortSource};
use fairaudit::cohort::{ingest_cohort, FeatureEncoder, FeatureSchema, FeatureSet};
use fairaudit::learners::{train_on_cohort, FittedParams, ModelKind, ModelSpec};
use fairaudit::shap::ShapConfig;
use fairaudit::synth::{SignalPlan, SynthConfig};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairaudit"));
    cmd.env_remove("FAIRAUDIT_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_synth(dir: &Path, name: &str, cfg: &SynthConfig) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

fn small_audit(dir: &Path, n: usize) -> PathBuf {
    let cfg = AuditConfig {
        cohort: CohortSource::Synth(SynthConfig { n, seed: 3, ..Default::default() }),
        bootstrap_iterations: 50,
        permutations: 50,
        ..Default::default()
    };
    let path = dir.join("audit.toml");
    fs::write(&path, cfg.to_toml_string()).unwrap();
    path
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn synth_default_size() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cohort.csv");
    run(bin().args(["synth", "--out"]).arg(&out));
    assert_eq!(csv_rows(&out), 33_330);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cohort.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "synth");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn synth_rejects_bad_mix() {
    let dir = TempDir::new().unwrap();
    let mut cfg = SynthConfig::default();
    cfg.race_mix.black += 0.2;
    let path = write_synth(dir.path(), "bad.toml", &cfg);
    let out = bin().args(["synth", "--config"]).arg(&path).arg("--out").arg(dir.path().join("x.csv")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn synth_seed_flag_and_env() {
    let dir = TempDir::new().unwrap();
    let p = |n: &str| dir.path().join(n);
    run(bin().args(["synth", "--n", "400", "--seed", "9", "--out"]).arg(p("a.csv")));
    run(bin().args(["synth", "--n", "400", "--seed", "9", "--out"]).arg(p("b.csv")));
    run(bin().args(["synth", "--n", "400", "--out"]).arg(p("c.csv")).env("FAIRAUDIT_SEED", "9"));
    run(bin().args(["synth", "--n", "400", "--seed", "10", "--out"]).arg(p("d.csv")));
    // flag wins over the environment
    run(bin().args(["synth", "--n", "400", "--seed", "10", "--out"]).arg(p("e.csv")).env("FAIRAUDIT_SEED", "9"));
    let read = |n: &str| fs::read(p(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
    assert_ne!(read("a.csv"), read("d.csv"));
    assert_eq!(read("d.csv"), read("e.csv"));
}

#[test]
fn audit_only_table2() {
    let dir = TempDir::new().unwrap();
    let cfg = small_audit(dir.path(), 1500);
    let out = dir.path().join("out");
    run(bin().args(["audit", "--only", "table2", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert!(out.join("table2.csv").exists());
    for absent in ["table1.csv", "table3.csv", "figure2.csv"] {
        assert!(!out.join(absent).exists(), "{absent} should not be written");
    }
    assert_eq!(csv_rows(&out.join("table2.csv")), 12);
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("not_run"));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["error"].is_null());
}

#[test]
fn audit_full_run_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let cfg = small_audit(dir.path(), 5000);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(bin().args(["audit", "--config"]).arg(&cfg).arg("--out").arg(&a));
    run(bin().args(["--workers", "1", "audit", "--config"]).arg(&cfg).arg("--out").arg(&b));
    for table in ["table1.csv", "table2.csv", "table3.csv", "table3_extended.csv", "figure2.csv"] {
        let x = fs::read(a.join(table)).unwrap();
        assert_eq!(x, fs::read(b.join(table)).unwrap(), "{table} differs between runs");
    }
    assert_eq!(csv_rows(&a.join("table2.csv")), 12);
    assert_eq!(csv_rows(&a.join("table3.csv")), 44);
    assert_eq!(csv_rows(&a.join("figure2.csv")), 40);
    for kind in ["ridge", "random_forest", "grad_boost", "mlp"] {
        assert!(a.join(format!("models/{kind}.json")).exists());
    }
    roxmltree::Document::parse(&fs::read_to_string(a.join("auc_bars.svg")).unwrap()).unwrap();

    // regenerate the tables from the saved report
    fs::remove_file(a.join("table2.csv")).unwrap();
    run(bin().args(["report", "--out"]).arg(&a));
    assert_eq!(fs::read(a.join("table2.csv")).unwrap(), fs::read(b.join("table2.csv")).unwrap());
}

#[test]
fn audit_failure_writes_manifest() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["audit", "--cohort"])
        .arg(dir.path().join("missing.csv"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(!status.success());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["error"].as_str().is_some());
}

#[test]
fn unknown_table_is_rejected() {
    let out = bin().args(["audit", "--only", "table9"]).output().unwrap();
    assert!(!out.status.success());
}

struct ShapFixture {
    dir: TempDir,
    cohort: PathBuf,
}

fn shap_fixture(plan: SignalPlan, n: usize) -> ShapFixture {
    let dir = TempDir::new().unwrap();
    let cohort = dir.path().join("cohort.csv");
    let cfg = SynthConfig { n, seed: 5, signal: plan, ..Default::default() };
    let cfg_path = write_synth(dir.path(), "synth.toml", &cfg);
    run(bin().args(["synth", "--config"]).arg(&cfg_path).arg("--out").arg(&cohort));
    ShapFixture { dir, cohort }
}

fn train_gbdt(fx: &ShapFixture, set: FeatureSet) -> fairaudit::learners::TrainedModel {
    let cohort = ingest_cohort(fs::File::open(&fx.cohort).unwrap(), FeatureSchema::default_icu()).unwrap();
    let all: Vec<usize> = (0..cohort.len()).collect();
    let kind = ModelKind::GradBoost;
    let encoder = FeatureEncoder::fit(&cohort, &all, set, kind.encoding());
    train_on_cohort(&ModelSpec::new(kind, 1), &cohort, &all, encoder).unwrap()
}

fn shap_config(dir: &Path) -> PathBuf {
    let path = dir.join("shap.toml");
    fs::write(&path, "method = \"kernel\"\nbackground_size = 20\nn_explain = 25\nn_coalition_samples = 400\n").unwrap();
    path
}

fn summary(out: &Path) -> Vec<(String, f64)> {
    let text = fs::read_to_string(out.join("shap_summary.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].to_string(), f[2].parse().unwrap())
        })
        .collect()
}

#[test]
fn shap_planted_feature_leads() {
    let mut plan = SignalPlan::null();
    plan.effects.insert("sodium_max".into(), 2.0);
    let fx = shap_fixture(plan, 2000);
    let model = train_gbdt(&fx, FeatureSet::Full);
    let model_path = fx.dir.path().join("model.json");
    fs::write(&model_path, model.to_json()).unwrap();
    let out = fx.dir.path().join("shap");
    run(bin()
        .args(["shap", "--model"])
        .arg(&model_path)
        .arg("--cohort")
        .arg(&fx.cohort)
        .arg("--config")
        .arg(shap_config(fx.dir.path()))
        .arg("--out")
        .arg(&out)
        .args(["--top", "34"]));
    let s = summary(&out);
    assert_eq!(s.len(), 34);
    assert_eq!(s[0].0, "sodium_max");
    assert_eq!(csv_rows(&out.join("shap_values.csv")), 25);

    let svg = fs::read_to_string(out.join("beeswarm.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let groups: Vec<&str> = doc
        .descendants()
        .filter(|n| n.has_tag_name("g") && n.attribute("class") == Some("feature"))
        .map(|n| n.attribute("data-feature").unwrap())
        .collect();
    assert_eq!(groups.len(), 34);
    assert_eq!(groups[0], "sodium_max");
}

#[test]
fn shap_constant_model_has_zero_importance() {
    let fx = shap_fixture(SignalPlan::default_icu(), 600);
    let mut model = train_gbdt(&fx, FeatureSet::Sdoh);
    match &mut model.fitted {
        FittedParams::GradBoost(g) => g.trees.clear(),
        _ => unreachable!(),
    }
    let model_path = fx.dir.path().join("const.json");
    fs::write(&model_path, model.to_json()).unwrap();
    let out = fx.dir.path().join("shap");
    run(bin()
        .args(["shap", "--model"])
        .arg(&model_path)
        .arg("--cohort")
        .arg(&fx.cohort)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "4"]));
    let s = summary(&out);
    assert_eq!(s.len(), 4);
    assert!(s.iter().all(|(_, v)| *v == 0.0), "{s:?}");
    roxmltree::Document::parse(&fs::read_to_string(out.join("beeswarm.svg")).unwrap()).unwrap();
}

#[test]
fn shap_rejects_mismatched_cohort() {
    let fx = shap_fixture(SignalPlan::default_icu(), 300);
    let model = train_gbdt(&fx, FeatureSet::Full);
    let model_path = fx.dir.path().join("model.json");
    fs::write(&model_path, model.to_json()).unwrap();

    // drop the sodium_max column
    let text = fs::read_to_string(&fx.cohort).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let drop = header.iter().position(|h| *h == "sodium_max").unwrap();
    let trimmed: String = text
        .lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(drop);
            f.join(",") + "\n"
        })
        .collect();
    let bad = fx.dir.path().join("bad.csv");
    fs::write(&bad, trimmed).unwrap();
    let out = bin()
        .args(["shap", "--model"])
        .arg(&model_path)
        .arg("--cohort")
        .arg(&bad)
        .arg("--out")
        .arg(fx.dir.path().join("shap"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!fx.dir.path().join("shap/shap_summary.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let audit = AuditConfig::from_toml_str(&fs::read_to_string(root.join("audit.toml")).unwrap()).unwrap();
    audit.validate().unwrap();
    assert_eq!(audit, AuditConfig::default());
    let csv = AuditConfig::from_toml_str(&fs::read_to_string(root.join("audit_csv.toml")).unwrap()).unwrap();
    assert!(matches!(csv.cohort, CohortSource::Csv { .. }));
    let synth = SynthConfig::from_toml_str(&fs::read_to_string(root.join("synth_small.toml")).unwrap()).unwrap();
    synth.validate(&FeatureSchema::default_icu()).unwrap();
    assert_eq!(synth.signal.label_noise.len(), 1);
    assert_eq!(synth.signal.effects, SignalPlan::default_icu().effects);
    let shap: ShapConfig = toml::from_str(&fs::read_to_string(root.join("shap.toml")).unwrap()).unwrap();
    assert_eq!(shap.n_explain, 200);
}
