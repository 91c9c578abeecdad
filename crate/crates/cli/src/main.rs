//! `fairaudit`: synthesize cohorts, run bias audits, explain models.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use fairaudit::audit::{
    run_audit, write_atomic, write_manifest, write_outputs, AuditConfig, CohortSource, ReportBundle, RunManifest, Stages,
};
use fairaudit::cohort::{ingest_cohort, write_cohort, FeatureSchema};
use fairaudit::learners::TrainedModel;
use fairaudit::plot::{auc_bars_svg, beeswarm_svg};
use fairaudit::shap::{explain_model, shap_summary, ShapConfig};
use fairaudit::synth::{generate_cohort, SynthConfig};

#[derive(Parser)]
#[command(name = "fairaudit", version, about = "Subgroup performance-bias audits for clinical classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed. Overrides the config file.
    #[arg(long, global = true, env = "FAIRAUDIT_SEED")]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort CSV.
    Synth {
        /// Synth config (TOML). Defaults reproduce the published marginals.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV; a manifest is written next to it.
        #[arg(long, default_value = "cohort.csv")]
        out: PathBuf,
        /// Number of eligible records.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the audit experiments and write the report tables.
    Audit {
        /// Audit config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long, default_value = "audit_out")]
        out: PathBuf,
        /// Restrict to these tables: table1, table2, table3, figure2.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        /// Cohort CSV, replacing the config's cohort source.
        #[arg(long)]
        cohort: Option<PathBuf>,
        /// Schema (TOML) for --cohort.
        #[arg(long)]
        schema: Option<PathBuf>,
    },
    /// Explain a saved model on a cohort with Shapley values.
    Shap {
        /// Model artifact (JSON) written by `audit`.
        #[arg(long)]
        model: PathBuf,
        /// Cohort CSV.
        #[arg(long)]
        cohort: PathBuf,
        /// Schema (TOML) for the cohort.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// SHAP settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "shap_out")]
        out: PathBuf,
        /// Features drawn in the beeswarm.
        #[arg(long, default_value_t = 20)]
        top: usize,
    },
    /// Re-emit tables and plots from a saved `report.json`.
    Report {
        /// Directory holding `report.json`.
        #[arg(long, default_value = "audit_out")]
        out: PathBuf,
        /// Restrict to these tables.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

#[derive(Serialize)]
struct FileManifest {
    tool_version: &'static str,
    command: &'static str,
    config_hash: String,
    master_seed: u64,
    finished_unix: u64,
    outputs: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_schema(path: Option<&Path>) -> Result<FeatureSchema> {
    Ok(match path {
        Some(p) => FeatureSchema::from_toml_str(&read(p)?)?,
        None => FeatureSchema::default_icu(),
    })
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn cmd_synth(config: Option<&Path>, out: &Path, n: Option<usize>, seed: Option<u64>) -> Result<()> {
    let mut cfg = match config {
        Some(p) => SynthConfig::from_toml_str(&read(p)?)?,
        None => SynthConfig::default(),
    };
    if let Some(n) = n {
        cfg.n = n;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let cohort = generate_cohort(&cfg)?;
    let mut bytes = Vec::new();
    write_cohort(&cohort, &mut bytes)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(out, &bytes)?;
    let manifest = FileManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "synth",
        config_hash: cfg.config_hash(),
        master_seed: cfg.seed,
        finished_unix: unix_now(),
        outputs: vec![file_name(out)],
    };
    let manifest_path = out.with_extension("manifest.json");
    write_atomic(&manifest_path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    log::info!("wrote {} records to {}", cohort.len(), out.display());
    Ok(())
}

fn stages(only: &[String]) -> Result<Option<Stages>> {
    if only.is_empty() {
        return Ok(None);
    }
    let names: Vec<&str> = only.iter().map(String::as_str).collect();
    Ok(Some(Stages::only(&names)?))
}

fn write_plots(bundle: &ReportBundle, out: &Path) -> Result<Vec<String>> {
    let mut written = Vec::new();
    if let Some(rows) = bundle.ablation.done() {
        write_atomic(&out.join("auc_bars.svg"), auc_bars_svg(rows).as_bytes())?;
        written.push("auc_bars.svg".to_string());
    }
    Ok(written)
}

fn failure_manifest(config: &AuditConfig, error: String, outputs: Vec<String>) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.config_hash(),
        cohort_hash: String::new(),
        master_seed: config.seed,
        n_cohort: 0,
        n_train: 0,
        n_test: 0,
        exclusions: None,
        started_unix: unix_now(),
        finished_unix: unix_now(),
        stages: Vec::new(),
        outputs,
        error: Some(error),
    }
}

struct AuditArgs<'a> {
    config: Option<&'a Path>,
    out: &'a Path,
    only: &'a [String],
    cohort: Option<&'a Path>,
    schema: Option<&'a Path>,
    seed: Option<u64>,
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    let mut cfg = match args.config {
        Some(p) => {
            let mut cfg = AuditConfig::from_toml_str(&read(p)?)?;
            cfg.resolve_paths(p.parent().unwrap_or(Path::new(".")));
            cfg
        }
        None => AuditConfig::default(),
    };
    if let Some(path) = args.cohort {
        cfg.cohort = CohortSource::Csv { path: path.to_path_buf(), schema: args.schema.map(Path::to_path_buf) };
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = stages(args.only)? {
        cfg.stages = s;
    }
    fs::create_dir_all(args.out)?;
    let run = match run_audit(&cfg) {
        Ok(run) => run,
        Err(e) => {
            write_manifest(&failure_manifest(&cfg, e.to_string(), Vec::new()), args.out)?;
            return Err(e.into());
        }
    };
    let mut outputs = Vec::new();
    let result = (|| -> Result<()> {
        outputs.extend(write_outputs(&run.bundle, args.out)?);
        outputs.extend(write_plots(&run.bundle, args.out)?);
        if !run.full_models.is_empty() {
            fs::create_dir_all(args.out.join("models"))?;
            for m in &run.full_models {
                let name = format!("models/{}.json", m.classifier);
                write_atomic(&args.out.join(&name), m.model.to_json().as_bytes())?;
                outputs.push(name);
            }
        }
        Ok(())
    })();
    let mut manifest = run.bundle.manifest.clone();
    manifest.outputs = outputs;
    if let Err(e) = &result {
        manifest.error = Some(format!("{e:#}"));
    }
    write_manifest(&manifest, args.out)?;
    result
}

fn cmd_shap(
    model: &Path,
    cohort: &Path,
    schema: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    top: usize,
    seed: Option<u64>,
) -> Result<()> {
    let model = TrainedModel::from_json(&read(model)?)?;
    let schema = load_schema(schema)?;
    let file = fs::File::open(cohort).with_context(|| format!("cannot open {}", cohort.display()))?;
    let cohort = ingest_cohort(BufReader::new(file), schema)?;
    let Some(encoder) = &model.encoder else { bail!("model carries no feature encoder") };
    let all: Vec<usize> = (0..cohort.len()).collect();
    let x = encoder.transform_x(&cohort, &all).context("cohort does not match the model's features")?;
    if x.cols() != model.n_features {
        bail!("cohort encodes to {} columns, model expects {}", x.cols(), model.n_features);
    }
    let mut cfg = match config {
        Some(p) => toml_shap(&read(p)?)?,
        None => ShapConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let matrix = explain_model(&model, &x, &cfg)?;
    let summary = shap_summary(&matrix);
    fs::create_dir_all(out)?;
    write_atomic(&out.join("shap_summary.csv"), summary.to_csv().as_bytes())?;
    write_atomic(&out.join("shap_values.csv"), matrix.to_csv().as_bytes())?;
    write_atomic(&out.join("beeswarm.svg"), beeswarm_svg(&matrix, &summary, top).as_bytes())?;
    let manifest = FileManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        command: "shap",
        config_hash: String::new(),
        master_seed: cfg.seed,
        finished_unix: unix_now(),
        outputs: vec!["shap_summary.csv".into(), "shap_values.csv".into(), "beeswarm.svg".into()],
    };
    write_atomic(&out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(())
}

fn toml_shap(text: &str) -> Result<ShapConfig> {
    #[derive(serde::Deserialize)]
    struct File {
        #[serde(default)]
        shap: Option<ShapConfig>,
    }
    // accept either a bare table or a `[shap]` section
    if let Ok(File { shap: Some(cfg) }) = toml::from_str::<File>(text) {
        return Ok(cfg);
    }
    Ok(toml::from_str(text)?)
}

fn cmd_report(out: &Path, only: &[String]) -> Result<()> {
    let mut bundle = ReportBundle::from_json(&read(&out.join("report.json"))?)?;
    if let Some(s) = stages(only)? {
        use fairaudit::audit::Section;
        if !s.demographics {
            bundle.demographics = Section::NotRun;
        }
        if !s.ablation {
            bundle.ablation = Section::NotRun;
        }
        if !s.subgroup_audit {
            bundle.subgroup_audit = Section::NotRun;
        }
        if !s.subgroup_specific {
            bundle.subgroup_specific = Section::NotRun;
        }
    }
    let mut written = write_outputs(&bundle, out)?;
    written.extend(write_plots(&bundle, out)?);
    for w in written {
        println!("{}", out.join(w).display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Synth { config, out, n } => cmd_synth(config.as_deref(), out, *n, cli.seed),
        Command::Audit { config, out, only, cohort, schema } => cmd_audit(AuditArgs {
            config: config.as_deref(),
            out,
            only,
            cohort: cohort.as_deref(),
            schema: schema.as_deref(),
            seed: cli.seed,
        }),
        Command::Shap { model, cohort, schema, config, out, top } => {
            cmd_shap(model, cohort, schema.as_deref(), config.as_deref(), out, *top, cli.seed)
        }
        Command::Report { out, only } => cmd_report(out, only),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
