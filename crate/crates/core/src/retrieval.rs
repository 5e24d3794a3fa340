//! Probabilistic retrieval model: samples are ranked for a query by the
//! Bernoulli log-likelihood of the query's PHOC under their attribute
//! estimates.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimator::AttributeEstimate;
use crate::nnet::clamp_prob;
use crate::phoc::{build_phoc, normalize_transcription, PhocConfig, PhocVector};

/// Per-attribute `ln â` and `ln(1 − â)` of a clamped estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEstimate {
    ln_on: Vec<f64>,
    ln_off: Vec<f64>,
}

impl LogEstimate {
    pub fn new(estimate: &AttributeEstimate) -> Self {
        let (ln_on, ln_off) = estimate
            .values()
            .iter()
            .map(|&p| {
                let p = clamp_prob(p);
                (p.ln(), (1.0 - p).ln())
            })
            .unzip();
        Self { ln_on, ln_off }
    }

    pub fn score(&self, query: &PhocVector) -> Result<f64> {
        if query.len() != self.ln_on.len() {
            return Err(Error::shape(self.ln_on.len(), query.len()));
        }
        Ok(query
            .bits()
            .iter()
            .zip(self.ln_on.iter().zip(&self.ln_off))
            .map(|(&a, (&on, &off))| if a { on } else { off })
            .sum())
    }
}

/// `Σ_i a_i ln â_i + (1 − a_i) ln(1 − â_i)` with `â` clamped to
/// `[1e-7, 1 − 1e-7]`.
pub fn log_posterior(query: &PhocVector, estimate: &AttributeEstimate) -> Result<f64> {
    LogEstimate::new(estimate).score(query)
}

/// Log-posterior of the ground-truth PHOC: how well `estimate` embeds
/// `transcription`.
pub fn quality(transcription: &str, estimate: &AttributeEstimate, phoc: &PhocConfig) -> Result<f64> {
    let word = normalize_transcription(transcription, phoc);
    log_posterior(&build_phoc(&word, phoc)?, estimate)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalEntry {
    pub sample_id: String,
    pub log_score: f64,
}

/// Samples ordered by descending score, ties by ascending sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalList {
    pub query: String,
    pub entries: Vec<RetrievalEntry>,
}

impl RetrievalList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.sample_id.as_str())
    }
}

/// Precomputed log-estimates for repeated ranking over one sample set.
#[derive(Debug, Clone)]
pub struct EstimateIndex {
    ids: Vec<String>,
    logs: Vec<LogEstimate>,
}

impl EstimateIndex {
    pub fn new<'a, I>(estimates: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a AttributeEstimate)>,
    {
        let (ids, logs) = estimates
            .into_iter()
            .map(|(id, e)| (id.to_owned(), LogEstimate::new(e)))
            .unzip();
        Self { ids, logs }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Full ranking for a binary attribute query.
    pub fn rank_phoc(&self, label: &str, query: &PhocVector) -> Result<RetrievalList> {
        let mut entries = self
            .ids
            .iter()
            .zip(&self.logs)
            .map(|(id, log)| {
                Ok(RetrievalEntry {
                    sample_id: id.clone(),
                    log_score: log.score(query)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.sort_by(|a, b| {
            b.log_score
                .total_cmp(&a.log_score)
                .then_with(|| a.sample_id.cmp(&b.sample_id))
        });
        Ok(RetrievalList {
            query: label.to_owned(),
            entries,
        })
    }

    /// Query-by-string ranking.
    pub fn rank(&self, query_word: &str, phoc: &PhocConfig) -> Result<RetrievalList> {
        let word = normalize_transcription(query_word, phoc);
        let query = build_phoc(&word, phoc)?;
        self.rank_phoc(&word, &query)
    }

    /// Query-by-example ranking: the query estimate is binarized at 0.5.
    pub fn rank_example(&self, label: &str, query: &AttributeEstimate) -> Result<RetrievalList> {
        self.rank_phoc(label, &query.binarize())
    }
}

pub fn rank<'a, I>(query_word: &str, estimates: I, phoc: &PhocConfig) -> Result<RetrievalList>
where
    I: IntoIterator<Item = (&'a str, &'a AttributeEstimate)>,
{
    EstimateIndex::new(estimates).rank(query_word, phoc)
}

/// Sorted distinct words with their PHOC embeddings.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: Vec<String>,
    phocs: Vec<PhocVector>,
}

impl Lexicon {
    pub fn new<I, S>(words: I, phoc: &PhocConfig) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words: Vec<String> = words
            .into_iter()
            .map(|w| normalize_transcription(w.as_ref(), phoc))
            .filter(|w| !w.is_empty())
            .collect();
        words.sort();
        words.dedup();
        let phocs = words.iter().map(|w| build_phoc(w, phoc)).collect::<Result<_>>()?;
        Ok(Self { words, phocs })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Lexicon word with the highest log-posterior; ties go to the
/// lexicographically smallest word.
pub fn recognize(estimate: &AttributeEstimate, lexicon: &Lexicon) -> Result<String> {
    let log = LogEstimate::new(estimate);
    let mut best: Option<(usize, f64)> = None;
    for (i, phoc) in lexicon.phocs.iter().enumerate() {
        let s = log.score(phoc)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| lexicon.words[i].clone())
        .ok_or(Error::Empty("lexicon"))
}

/// Keeps the entries whose confidence is at least `threshold`, in order.
pub fn prune(list: &RetrievalList, confidences: &HashMap<String, f64>, threshold: f64) -> Result<RetrievalList> {
    let mut entries = Vec::with_capacity(list.entries.len());
    for e in &list.entries {
        let c = confidences
            .get(&e.sample_id)
            .ok_or_else(|| Error::MissingConfidence(e.sample_id.clone()))?;
        if *c >= threshold {
            entries.push(e.clone());
        }
    }
    Ok(RetrievalList {
        query: list.query.clone(),
        entries,
    })
}
