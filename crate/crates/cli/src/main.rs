//! `wordspot`: generate corpora, train estimators and metaclassifiers, and
//! evaluate confidence measures into CSV bundles.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use wordspot_core::confidence::{TdMetaClassifier, TiMetaClassifier};
use wordspot_core::datagen::{generate_corpus, load_corpus, write_corpus, Corpus};
use wordspot_core::estimator::AttributeEstimator;
use wordspot_core::nnet::LrStep;
use wordspot_core::pipeline::{
    evaluate, train_estimator_stage, train_td_stage, train_ti_stage, write_new, write_report, MetaModels, RunConfig,
};
use wordspot_core::{ConfidenceMeasure, Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "wordspot", version, about = "Word spotting with confidence measures")]
struct Cli {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    Gen,
    /// Train the attribute estimator.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Train for this many iterations, rescaling the learning-rate schedule.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Train a metaclassifier.
    Meta {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum)]
        measure: MetaKind,
        /// Trained estimator; required for `td`.
        #[arg(long)]
        estimator: Option<PathBuf>,
    },
    /// Evaluate confidence measures and write the CSV bundle.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        estimator: PathBuf,
        #[arg(long)]
        ti: Option<PathBuf>,
        #[arg(long)]
        td: Option<PathBuf>,
        /// Comma-separated measures: activation, test_dropout, ti_meta, td_meta.
        #[arg(long, value_delimiter = ',')]
        measures: Option<Vec<ConfidenceMeasure>>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MetaKind {
    Ti,
    Td,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()).map(Error::kind) {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Data) => 3,
        Some(ErrorKind::Compatibility) => 4,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    match cli.command {
        Command::Gen => {
            let config = config.resolve()?;
            let out = cli.out.unwrap_or_else(|| "corpus.jsonl".into());
            let corpus = generate_corpus(&config.datagen)?;
            let mut buf = Vec::new();
            write_corpus(&corpus, &mut buf)?;
            write_new(&out, std::str::from_utf8(&buf)?, cli.force)?;
            write_config(&out, &config, cli.force)
        }
        Command::Train { corpus, iterations } => {
            if let Some(n) = iterations {
                rescale(&mut config, n);
            }
            let config = config.resolve()?;
            let out = cli.out.unwrap_or_else(|| "estimator.json".into());
            let corpus = read(&corpus, &config)?;
            let estimator = if config.estimator.train.iterations == 0 {
                AttributeEstimator::init(&config.phoc, &config.estimator)?
            } else {
                train_estimator_stage(&corpus, &config)?.0
            };
            write_new(&out, &estimator.to_json(), cli.force)?;
            write_config(&out, &config, cli.force)
        }
        Command::Meta {
            corpus,
            measure,
            estimator,
        } => {
            let config = config.resolve()?;
            let corpus = read(&corpus, &config)?;
            let (out, text) = match measure {
                MetaKind::Ti => ("ti_meta.json", train_ti_stage(&corpus, &config)?.0.to_json()),
                MetaKind::Td => {
                    let path = estimator.context("--estimator is required for td")?;
                    let estimator = load_estimator(&path)?;
                    (
                        "td_meta.json",
                        train_td_stage(&corpus, &estimator, &config)?.0.to_json(),
                    )
                }
            };
            let out = cli.out.unwrap_or_else(|| out.into());
            write_new(&out, &text, cli.force)?;
            write_config(&out, &config, cli.force)
        }
        Command::Eval {
            corpus,
            estimator,
            ti,
            td,
            measures,
        } => {
            if let Some(measures) = measures {
                config.evaluation.measures = measures;
            }
            if let Some(out) = cli.out {
                config.output = Some(out);
            }
            let config = config.resolve()?;
            let dir = config.output.clone().unwrap_or_else(|| "out".into());
            let corpus = read(&corpus, &config)?;
            let estimator = load_estimator(&estimator)?;
            let ti = ti
                .map(|p| Ok::<_, anyhow::Error>(TiMetaClassifier::from_json(&read_text(&p)?)?))
                .transpose()?;
            let td = td
                .map(|p| Ok::<_, anyhow::Error>(TdMetaClassifier::from_json(&read_text(&p)?, &estimator.digest())?))
                .transpose()?;
            let models = MetaModels {
                ti: ti.as_ref(),
                td: td.as_ref(),
            };
            let report = evaluate(&corpus, &estimator, models, &config)?;
            write_report(&dir, &report, cli.force)?;
            write_new(&dir.join("config.json"), &config.to_json(), cli.force)?;
            Ok(())
        }
    }
}

/// Sets the estimator's iteration count and moves its schedule steps to the
/// same fractions of training.
fn rescale(config: &mut RunConfig, iterations: usize) {
    let train = &mut config.estimator.train;
    let old = train.iterations.max(1);
    train.lr_schedule = train
        .lr_schedule
        .iter()
        .map(|s| LrStep {
            iteration: s.iteration * iterations / old,
            divisor: s.divisor,
        })
        .collect();
    train.lr_schedule.dedup_by_key(|s| s.iteration);
    train.iterations = iterations;
}

fn read(path: &Path, config: &RunConfig) -> Result<Corpus> {
    Ok(load_corpus(path, &config.phoc)?)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Model(format!("cannot read {}: {e}", path.display())).into())
}

fn load_estimator(path: &Path) -> Result<AttributeEstimator> {
    Ok(AttributeEstimator::from_json(&read_text(path)?)?)
}

/// Writes the resolved config as `<stem>.config.json` beside `out`.
fn write_config(out: &Path, config: &RunConfig, force: bool) -> Result<()> {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let path = out.with_file_name(format!("{stem}.config.json"));
    write_new(&path, &config.to_json(), force)?;
    Ok(())
}
