use std::fs;

use tempfile::TempDir;
use wordspot_core::datagen::{read_corpus, write_corpus};
use wordspot_core::pipeline::{run, write_report, RunConfig};
use wordspot_core::{AttributeEstimator, ConfidenceMeasure, TdMetaClassifier, TiMetaClassifier};

const TINY: &str = r#"{
  "seed": 3,
  "datagen": {
    "feature_dim": 16,
    "lexicon_size": 6,
    "word_length": {"min": 2, "max": 4},
    "od_writers": 4,
    "meta_writers": 4,
    "samples": {"train": 40, "id_test": 12, "od_test": 12, "meta_od": 40}
  },
  "estimator": {
    "input_dim": 16,
    "hidden": [16, 16],
    "train": {"iterations": 200, "lr": 0.001, "lr_schedule": []}
  },
  "ti_meta": {"hidden": [8], "train": {"iterations": 100, "lr_schedule": []}},
  "td_meta": {"hidden": [8], "train": {"iterations": 100, "lr_schedule": []}},
  "evaluation": {"test_dropout_passes": 4, "histogram_bins": 10}
}"#;

fn config() -> RunConfig {
    RunConfig::from_json(TINY).unwrap().resolve().unwrap()
}

#[test]
fn in_memory_run_writes_every_file_and_models_survive_serialization() {
    let out = run(&config()).unwrap();
    assert_eq!(out.report.measures.len(), ConfidenceMeasure::ALL.len());

    let mut buf = Vec::new();
    write_corpus(&out.corpus, &mut buf).unwrap();
    let back = read_corpus(&buf[..], "mem.jsonl".as_ref(), &config().phoc).unwrap();
    assert_eq!(back.samples, out.corpus.samples);

    let est = AttributeEstimator::from_json(&out.estimator.to_json()).unwrap();
    assert_eq!(est.to_json(), out.estimator.to_json());
    let ti = out.ti.unwrap();
    assert_eq!(
        TiMetaClassifier::from_json(&ti.to_json()).unwrap().to_json(),
        ti.to_json()
    );
    let td = out.td.unwrap();
    let td_back = TdMetaClassifier::from_json(&td.to_json(), &est.digest()).unwrap();
    assert_eq!(td_back.to_json(), td.to_json());

    let dir = TempDir::new().unwrap();
    write_report(dir.path(), &out.report, false).unwrap();
    let headers = [
        ("histogram.csv", "bin_center,train_count,id_count,od_count"),
        ("threshold_curve.csv", "T,map_at_t,mr_at_t,coverage"),
        ("wer_curve.csv", "portion,wer"),
        ("quality_scatter.csv", "sample_id,split,confidence,neg_log_quality"),
    ];
    for m in ConfidenceMeasure::ALL {
        for (file, header) in headers {
            let text = fs::read_to_string(dir.path().join(m.name()).join(file)).unwrap();
            assert_eq!(text.lines().next(), Some(header), "{}/{file}", m.name());
        }
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + ConfidenceMeasure::ALL.len());
    assert!(write_report(dir.path(), &out.report, false).is_err());
}

#[test]
fn runs_repeat_exactly() {
    let a = run(&config()).unwrap();
    let b = run(&config()).unwrap();
    assert_eq!(a.estimator.to_json(), b.estimator.to_json());
    assert_eq!(a.report.summary(), b.report.summary());
}
