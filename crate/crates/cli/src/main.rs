use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};
use stutter_core::audio::read_wav_file;
use stutter_core::detector::{diagnose, train_detector, Detector};
use stutter_core::session::{SessionRecord, SessionStore};
use stutter_core::synth::{build_corpus, CorpusSpec};
use stutter_core::therapy::{
    generate_rule_dataset, recommend, train_recommender, PolyKernel, RuleDataset, SmoParams,
    SvmModel,
};
use stutter_core::{
    DetectorKind, DiagnosisReport, FeatureConfig, StutterProfile, TherapyCatalog, TrainConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "stutter",
    version,
    about = "Stutter detection, severity tracking and therapy recommendation"
)]
struct Cli {
    /// JSON file overriding feature and training defaults: {"features": {...}, "train": {...}}.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes a labeled synthetic corpus and its manifest.
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.25)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        clip_seconds: f64,
    },
    /// Trains one detector from a manifest and prints its metrics.
    Train {
        #[arg(long)]
        kind: DetectorKind,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scores a WAV file with both detectors and prints the report.
    Diagnose {
        #[arg(long)]
        model_prolongation: PathBuf,
        #[arg(long)]
        model_repetition: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Defaults to the WAV file stem.
        #[arg(long)]
        clip_id: Option<String>,
    },
    /// Appends a diagnosis report's severities to a patient's history.
    SessionAdd {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        patient: String,
        #[arg(long)]
        report: PathBuf,
        /// Unix seconds; defaults to now.
        #[arg(long)]
        ts: Option<i64>,
    },
    /// Recommends therapies from a patient's first and latest sessions.
    Recommend {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        patient: String,
        #[arg(long)]
        recommender: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// Average the current severities over this many recent sessions.
        #[arg(long, default_value_t = 1)]
        window: usize,
    },
    /// Writes the rule-derived therapy training table as CSV.
    GenTherapyData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
    /// Trains the therapy recommender on a CSV table.
    TrainRecommender {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out_model: PathBuf,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    features: FeatureConfig,
    train: TrainConfig,
}

/// A failure with its exit code: 1 for bad input, 2 for internal faults.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn user(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

fn core_err<E: Into<stutter_core::Error>>(e: E) -> Failure {
    let e = e.into();
    Failure {
        code: if e.is_user_error() { 1 } else { 2 },
        message: e.to_string(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::user(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::user(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::user(format!("cannot write {}: {e}", path.display())))
}

fn load_catalog(path: Option<&Path>) -> Result<TherapyCatalog, Failure> {
    match path {
        Some(p) => TherapyCatalog::load(p).map_err(core_err),
        None => Ok(TherapyCatalog::default()),
    }
}

fn emit(value: &impl serde::Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 2,
        message: e.to_string(),
    })?;
    println!("{text}");
    Ok(())
}

fn now() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config: ConfigFile = match &cli.config {
        Some(path) => read_json(path)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::GenCorpus {
            out,
            n,
            ratio,
            seed,
            clip_seconds,
        } => {
            let spec = CorpusSpec {
                n_clips: n,
                ratio_stutter: ratio,
                seed,
                clip_seconds,
            };
            spec.validate().map_err(core_err)?;
            let manifest = build_corpus(&spec, &out).map_err(core_err)?;
            emit(&json!({
                "manifest": manifest.display().to_string(),
                "n_clips": n,
                "counts": spec.class_counts(),
            }))
        }
        Command::Train {
            kind,
            manifest,
            out_model,
            epochs,
            batch_size,
            seed,
        } => {
            let mut train = config.train;
            train.epochs = epochs.unwrap_or(train.epochs);
            train.batch_size = batch_size.unwrap_or(train.batch_size);
            train.seed = seed.unwrap_or(train.seed);
            let (detector, metrics) =
                train_detector(kind, &manifest, &train, &config.features).map_err(core_err)?;
            detector.save(&out_model).map_err(core_err)?;
            log::info!("saved {kind} detector to {}", out_model.display());
            emit(&metrics)
        }
        Command::Diagnose {
            model_prolongation,
            model_repetition,
            wav,
            report_out,
            clip_id,
        } => {
            let p = Detector::load(&model_prolongation).map_err(core_err)?;
            let r = Detector::load(&model_repetition).map_err(core_err)?;
            let clip = read_wav_file(&wav).map_err(core_err)?;
            let id = clip_id.unwrap_or_else(|| {
                wav.file_stem().map_or_else(
                    || wav.display().to_string(),
                    |s| s.to_string_lossy().into_owned(),
                )
            });
            let report = diagnose(&p, &r, &clip, &id).map_err(core_err)?;
            if let Some(path) = report_out {
                let mut bytes = serde_json::to_vec_pretty(&report).expect("report is serializable");
                bytes.push(b'\n');
                write_file(&path, &bytes)?;
            }
            emit(&report)
        }
        Command::SessionAdd {
            store,
            patient,
            report,
            ts,
        } => {
            let parsed: DiagnosisReport = read_json(&report)?;
            let severity = |v: Option<f64>, what: &str| {
                v.ok_or_else(|| {
                    Failure::user(format!(
                        "{}: report has no {what} severity",
                        report.display()
                    ))
                })
            };
            let record = SessionRecord {
                patient_id: patient,
                ts: ts.unwrap_or_else(now),
                prolongation: severity(parsed.severity.prolongation, "prolongation")?,
                repetition: severity(parsed.severity.repetition, "repetition")?,
                report_path: report.display().to_string(),
            };
            SessionStore::open(&store)
                .append(&record)
                .map_err(core_err)?;
            emit(&record)
        }
        Command::Recommend {
            store,
            patient,
            recommender,
            catalog,
            window,
        } => {
            let catalog = load_catalog(catalog.as_deref())?;
            let model = SvmModel::load(&recommender).map_err(core_err)?;
            let (ip, cp, ir, cr) = SessionStore::open(&store)
                .windowed_improvement_inputs(&patient, window)
                .map_err(core_err)?;
            let profile = StutterProfile::from_severities(ip, cp, ir, cr).map_err(core_err)?;
            emit(&recommend(&model, &profile, &catalog).map_err(core_err)?)
        }
        Command::GenTherapyData { out, catalog } => {
            let catalog = load_catalog(catalog.as_deref())?;
            catalog.validate().map_err(core_err)?;
            let dataset = generate_rule_dataset(&catalog);
            dataset.write(&out).map_err(core_err)?;
            emit(&json!({
                "path": out.display().to_string(),
                "rows": dataset.rows.len(),
                "therapies": dataset.therapies,
            }))
        }
        Command::TrainRecommender { data, out_model } => {
            let dataset = RuleDataset::read(&data).map_err(core_err)?;
            let model = train_recommender(&dataset, PolyKernel::default(), SmoParams::default())
                .map_err(core_err)?;
            model.save(&out_model).map_err(core_err)?;
            let mut accuracy = serde_json::Map::new();
            for (t, name) in dataset.therapies.iter().enumerate() {
                accuracy.insert(
                    name.clone(),
                    Value::from(model.accuracy(&dataset, t).map_err(core_err)?),
                );
            }
            emit(
                &json!({ "model": out_model.display().to_string(), "training_accuracy": accuracy }),
            )
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
