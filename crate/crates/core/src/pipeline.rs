//! End-to-end experiment driver: run configuration, stage training and the
//! evaluation report with its CSV bundle.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confidence::{
    conf_activation, conf_td, conf_test_dropout, conf_ti, train_td_meta, train_ti_meta, ConfidenceMeasure, MetaConfig,
    TdMetaClassifier, TiMetaClassifier,
};
use crate::datagen::{Corpus, CorpusConfig, Sample, Split};
use crate::error::{Error, Result};
use crate::estimator::{train_estimator, AttributeEstimate, AttributeEstimator, EstimatorConfig};
use crate::evaluation::{
    auroc, cumulative_wer, default_grid, default_portions, histogram, quality_scatter, quantile_threshold, spearman,
    threshold_sweep, word_error_rate, write_histogram_csv, write_quality_scatter_csv, write_summary_csv,
    write_threshold_csv, write_wer_csv, EvalSample, Histogram, QueryRankings, ScatterRow, SummaryRow,
    ThresholdCurveRow, WerCurvePoint,
};
use crate::phoc::{normalize_transcription, PhocConfig};
use crate::retrieval::Lexicon;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub measures: Vec<ConfidenceMeasure>,
    pub test_dropout_passes: usize,
    /// Training-set quantile used as the rejection threshold.
    pub quantile: f64,
    pub histogram_bins: usize,
    pub wer_portions: Vec<u32>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            measures: ConfidenceMeasure::ALL.to_vec(),
            test_dropout_passes: 100,
            quantile: 0.01,
            histogram_bins: 100,
            wer_portions: default_portions(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub phoc: PhocConfig,
    pub datagen: CorpusConfig,
    pub estimator: EstimatorConfig,
    pub ti_meta: MetaConfig,
    pub td_meta: MetaConfig,
    pub evaluation: EvaluationConfig,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            phoc: PhocConfig::default(),
            datagen: CorpusConfig::default(),
            estimator: EstimatorConfig::default(),
            ti_meta: MetaConfig::default(),
            td_meta: MetaConfig::default(),
            evaluation: EvaluationConfig::default(),
            output: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fans the master seed out to every stage and checks the whole tree.
    pub fn resolve(mut self) -> Result<Self> {
        self.datagen.seed = self.seed;
        self.estimator.train.seed = seed::derive(self.seed, "estimator");
        self.ti_meta.train.seed = seed::derive(self.seed, "ti_meta");
        self.td_meta.train.seed = seed::derive(self.seed, "td_meta");
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.phoc.validate()?;
        self.datagen.validate()?;
        self.estimator.validate()?;
        self.ti_meta.validate()?;
        self.td_meta.validate()?;
        if self.estimator.input_dim != self.datagen.feature_dim {
            return Err(Error::Config(format!(
                "estimator input_dim {} differs from feature_dim {}",
                self.estimator.input_dim, self.datagen.feature_dim
            )));
        }
        let eval = &self.evaluation;
        if eval.measures.is_empty() {
            return Err(Error::Config("no confidence measure requested".into()));
        }
        if eval.test_dropout_passes < 2 {
            return Err(Error::TooFewPasses(eval.test_dropout_passes));
        }
        if !(eval.quantile > 0.0 && eval.quantile <= 1.0) || eval.histogram_bins == 0 {
            return Err(Error::Config(
                "quantile must lie in (0, 1] and histogram_bins be positive".into(),
            ));
        }
        if eval.wer_portions.is_empty() || eval.wer_portions.iter().any(|&p| p == 0 || p > 100) {
            return Err(Error::Config(
                "wer_portions must be a nonempty subset of 1..=100".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Seed for the dropout passes of one sample.
    fn dropout_seed(&self, sample_id: &str) -> u64 {
        seed::derive(seed::derive(self.seed, "test_dropout"), sample_id)
    }
}

/// Writes `text` to `path`, refusing to replace an existing file unless
/// `force` is set.
pub fn write_new(path: &Path, text: &str, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn features<'a>(samples: impl Iterator<Item = &'a Sample>) -> Vec<&'a [f64]> {
    samples.map(|s| s.features.as_slice()).collect()
}

pub fn train_estimator_stage(corpus: &Corpus, config: &RunConfig) -> Result<(AttributeEstimator, Vec<f64>)> {
    train_estimator(corpus.split(Split::Train), &config.phoc, &config.estimator)
}

/// Trains on train features (label 1) against the surrogate split (label 0).
pub fn train_ti_stage(corpus: &Corpus, config: &RunConfig) -> Result<(TiMetaClassifier, Vec<f64>)> {
    train_ti_meta(
        &features(corpus.split(Split::Train)),
        &features(corpus.split(Split::MetaOd)),
        &config.ti_meta,
    )
}

pub fn train_td_stage(
    corpus: &Corpus,
    estimator: &AttributeEstimator,
    config: &RunConfig,
) -> Result<(TdMetaClassifier, Vec<f64>)> {
    if estimator.phoc_config() != &config.phoc {
        return Err(Error::Incompatible(
            "estimator was trained with a different PHOC config".into(),
        ));
    }
    train_td_meta(
        estimator,
        &features(corpus.split(Split::Train)),
        &features(corpus.split(Split::MetaOd)),
        &config.td_meta,
    )
}

/// Trained metaclassifiers available to an evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct MetaModels<'a> {
    pub ti: Option<&'a TiMetaClassifier>,
    pub td: Option<&'a TdMetaClassifier>,
}

/// Oriented confidence of each sample under `measure`.
pub fn score_samples(
    measure: ConfidenceMeasure,
    samples: &[&Sample],
    estimates: &[AttributeEstimate],
    estimator: &AttributeEstimator,
    models: MetaModels<'_>,
    config: &RunConfig,
) -> Result<Vec<f64>> {
    let missing = || Error::Incompatible(format!("measure {measure} needs a trained {measure} model"));
    samples
        .iter()
        .zip(estimates)
        .map(|(s, e)| {
            let score = match measure {
                ConfidenceMeasure::Activation => conf_activation(e),
                ConfidenceMeasure::TestDropout => {
                    let mut rng = seed::rng(config.dropout_seed(&s.id));
                    conf_test_dropout(estimator, &s.features, config.evaluation.test_dropout_passes, &mut rng)?
                }
                ConfidenceMeasure::TiMeta => conf_ti(models.ti.ok_or_else(missing)?, &s.features)?,
                ConfidenceMeasure::TdMeta => conf_td(estimator, models.td.ok_or_else(missing)?, &s.features)?,
            };
            Ok(score.oriented)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureReport {
    pub measure: ConfidenceMeasure,
    pub t_q1: f64,
    pub histogram: Histogram,
    pub threshold_curve: Vec<ThresholdCurveRow>,
    pub wer_curve: Vec<WerCurvePoint>,
    pub scatter: Vec<ScatterRow>,
    pub summary: SummaryRow,
    /// Oriented confidences on the train, ID test and OD test splits.
    pub train_scores: Vec<f64>,
    pub id_scores: Vec<f64>,
    pub od_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map_id: f64,
    pub wer_id: f64,
    /// Log-quality of every ID and OD test sample, in split order.
    pub id_quality: Vec<f64>,
    pub od_quality: Vec<f64>,
    pub measures: Vec<MeasureReport>,
}

impl EvalReport {
    pub fn measure(&self, measure: ConfidenceMeasure) -> Option<&MeasureReport> {
        self.measures.iter().find(|m| m.measure == measure)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.measures.iter().map(|m| m.summary.clone()).collect()
    }
}

fn estimates_of(estimator: &AttributeEstimator, samples: &[&Sample]) -> Result<Vec<AttributeEstimate>> {
    samples.iter().map(|s| estimator.estimate(&s.features)).collect()
}

fn eval_samples<'a>(samples: &[&'a Sample], estimates: &'a [AttributeEstimate]) -> Vec<EvalSample<'a>> {
    samples
        .iter()
        .zip(estimates)
        .map(|(s, e)| EvalSample {
            id: &s.id,
            split: s.split,
            transcription: &s.transcription,
            estimate: e,
        })
        .collect()
}

/// Runs every evaluation protocol for the measures requested in `config`.
pub fn evaluate(
    corpus: &Corpus,
    estimator: &AttributeEstimator,
    models: MetaModels<'_>,
    config: &RunConfig,
) -> Result<EvalReport> {
    if estimator.phoc_config() != &config.phoc {
        return Err(Error::Incompatible(
            "estimator was trained with a different PHOC config".into(),
        ));
    }
    if let Some(td) = models.td {
        td.check_estimator(&estimator.digest())?;
    }
    let phoc = &config.phoc;
    let train: Vec<&Sample> = corpus.split(Split::Train).collect();
    let id: Vec<&Sample> = corpus.split(Split::IdTest).collect();
    let od: Vec<&Sample> = corpus.split(Split::OdTest).collect();
    if id.is_empty() || od.is_empty() {
        return Err(Error::Empty("ID or OD test split"));
    }
    let train_est = estimates_of(estimator, &train)?;
    let id_est = estimates_of(estimator, &id)?;
    let od_est = estimates_of(estimator, &od)?;

    let id_eval = eval_samples(&id, &id_est);
    let od_eval = eval_samples(&od, &od_est);
    let composed: Vec<EvalSample> = id_eval.iter().chain(&od_eval).copied().collect();

    let queries: Vec<String> = id
        .iter()
        .map(|s| normalize_transcription(&s.transcription, phoc))
        .collect();
    let id_rankings = QueryRankings::new(&queries, &id_eval, phoc)?;
    let map_id = id_rankings
        .map_where(|_| true)
        .ok_or(Error::Empty("queries with a relevant sample"))?;
    let rankings = QueryRankings::new(&queries, &composed, phoc)?;
    let lexicon = Lexicon::new(corpus.transcriptions(), phoc)?;
    let wer_id = word_error_rate(&id_eval, &lexicon, phoc)?;

    let log_quality = |samples: &[EvalSample]| -> Result<Vec<f64>> {
        samples
            .iter()
            .map(|s| crate::retrieval::quality(s.transcription, s.estimate, phoc))
            .collect()
    };
    let id_quality = log_quality(&id_eval)?;
    let od_quality = log_quality(&od_eval)?;

    let eval = &config.evaluation;
    let mut measures = Vec::with_capacity(eval.measures.len());
    for &measure in &eval.measures {
        let score = |samples: &[&Sample], est: &[AttributeEstimate]| {
            score_samples(measure, samples, est, estimator, models, config)
        };
        let train_scores = score(&train, &train_est)?;
        let id_scores = score(&id, &id_est)?;
        let od_scores = score(&od, &od_est)?;
        let composed_scores: Vec<f64> = id_scores.iter().chain(&od_scores).copied().collect();

        let t_q1 = quantile_threshold(&train_scores, eval.quantile)?;
        let at_tq1 = threshold_sweep(&rankings, &composed_scores, &[t_q1])?[0];
        let threshold_curve = threshold_sweep(&rankings, &composed_scores, &default_grid(&composed_scores))?;
        let wer_curve = cumulative_wer(&id_eval, &id_scores, &lexicon, phoc, &eval.wer_portions)?;
        let (scatter, _) = quality_scatter(&composed, &composed_scores, phoc)?;
        let summary = SummaryRow {
            measure: measure.name().to_owned(),
            auroc: auroc(&id_scores, &od_scores)?,
            map_id,
            map_at_tq1: at_tq1.map_at_t,
            coverage_at_tq1: at_tq1.coverage,
            spearman_od: spearman(&od_scores, &od_quality)?,
        };
        measures.push(MeasureReport {
            measure,
            t_q1,
            histogram: histogram(&train_scores, &id_scores, &od_scores, eval.histogram_bins)?,
            threshold_curve,
            wer_curve,
            scatter,
            summary,
            train_scores,
            id_scores,
            od_scores,
        });
    }
    Ok(EvalReport {
        map_id,
        wer_id,
        id_quality,
        od_quality,
        measures,
    })
}

fn create(path: &Path, force: bool) -> Result<BufWriter<File>> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// Writes `<dir>/<measure>/{histogram,threshold_curve,wer_curve,quality_scatter}.csv`
/// and `<dir>/summary.csv`.
pub fn write_report(dir: &Path, report: &EvalReport, force: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    for m in &report.measures {
        let sub = dir.join(m.measure.name());
        fs::create_dir_all(&sub)?;
        let mut out = create(&sub.join("histogram.csv"), force)?;
        write_histogram_csv(&mut out, &m.histogram)?;
        out.flush()?;
        let mut out = create(&sub.join("threshold_curve.csv"), force)?;
        write_threshold_csv(&mut out, &m.threshold_curve)?;
        out.flush()?;
        let mut out = create(&sub.join("wer_curve.csv"), force)?;
        write_wer_csv(&mut out, &m.wer_curve)?;
        out.flush()?;
        let mut out = create(&sub.join("quality_scatter.csv"), force)?;
        write_quality_scatter_csv(&mut out, &m.scatter)?;
        out.flush()?;
    }
    let mut out = create(&dir.join("summary.csv"), force)?;
    write_summary_csv(&mut out, &report.summary())?;
    out.flush()?;
    Ok(())
}

/// Everything produced by a full in-memory run.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub corpus: Corpus,
    pub estimator: AttributeEstimator,
    pub estimator_trace: Vec<f64>,
    pub ti: Option<TiMetaClassifier>,
    pub td: Option<TdMetaClassifier>,
    pub report: EvalReport,
}

/// Generates the corpus, trains every model the requested measures need and
/// evaluates them.
pub fn run(config: &RunConfig) -> Result<RunOutputs> {
    let corpus = crate::datagen::generate_corpus(&config.datagen)?;
    let (estimator, estimator_trace) = train_estimator_stage(&corpus, config)?;
    let wants = |m| config.evaluation.measures.contains(&m);
    let ti = if wants(ConfidenceMeasure::TiMeta) {
        Some(train_ti_stage(&corpus, config)?.0)
    } else {
        None
    };
    let td = if wants(ConfidenceMeasure::TdMeta) {
        Some(train_td_stage(&corpus, &estimator, config)?.0)
    } else {
        None
    };
    let models = MetaModels {
        ti: ti.as_ref(),
        td: td.as_ref(),
    };
    let report = evaluate(&corpus, &estimator, models, config)?;
    Ok(RunOutputs {
        corpus,
        estimator,
        estimator_trace,
        ti,
        td,
        report,
    })
}
