//! Confidence-aware attribute-based word spotting.
//!
//! Word images are represented by feature vectors and mapped by a dense
//! attribute estimator onto PHOC attribute probabilities. Retrieval ranks
//! samples by the Bernoulli posterior of a query's PHOC, and four confidence
//! measures flag samples whose attribute estimates should not be trusted so
//! retrieval lists can be pruned by a threshold.

pub mod confidence;
pub mod datagen;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod format;
pub mod nnet;
pub mod phoc;
pub mod pipeline;
pub mod retrieval;
pub mod seed;

pub use confidence::{ConfidenceMeasure, ConfidenceScore, MetaConfig, TdMetaClassifier, TiMetaClassifier};
pub use datagen::{Corpus, CorpusConfig, Sample, Split};
pub use error::{Error, ErrorKind, Result};
pub use estimator::{AttributeEstimate, AttributeEstimator, EstimatorConfig, FeatureTaps};
pub use nnet::{DenseNetwork, TrainConfig};
pub use phoc::{build_phoc, normalize_transcription, phoc_dimension, PhocConfig, PhocVector};
pub use retrieval::{log_posterior, recognize, Lexicon, RetrievalList};
