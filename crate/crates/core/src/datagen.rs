//! Seeded synthetic corpora with in-distribution, out-of-distribution and
//! surrogate splits over one shared lexicon.
//!
//! A word is rendered in feature space as
//! `S_w · Σ_k pos(k, n) ⊙ E[c_k] + b_w + ε`, where `E` is a per-process
//! character codebook, `pos` a fixed sinusoidal modulation, `S_w = I +
//! style·G_w` and `b_w` a writer's style, and `ε` Gaussian noise.
//!
//! In-distribution writers draw `G_w` and `b_w` independently. An
//! out-of-distribution writer perturbs an in-distribution writer's style by
//! a Gaussian offset whose variance grows linearly with the writer's index,
//! so the OD split ranges from near-ID to far from it. Surrogate writers draw
//! their offset variance uniformly over the same range and render with a
//! codebook that mixes the base one with fresh letter vectors.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::format::real_array;
use crate::phoc::{normalize_transcription, PhocConfig};
use crate::seed;

pub const CORPUS_FORMAT: &str = "wordspot-corpus";
pub const CORPUS_VERSION: u32 = 1;

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

/// Spread of a writer's style offset at the far end of the OD ramp.
const OD_STYLE_SPREAD: f64 = 8.0;
/// Weight of the fresh letter vectors in the surrogate codebook.
const SURROGATE_CODEBOOK_MIX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    IdTest,
    OdTest,
    MetaOd,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Train, Split::IdTest, Split::OdTest, Split::MetaOd];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::IdTest => "id_test",
            Split::OdTest => "od_test",
            Split::MetaOd => "meta_od",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LengthRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSizes {
    pub train: usize,
    pub id_test: usize,
    pub od_test: usize,
    pub meta_od: usize,
}

impl SplitSizes {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::IdTest => self.id_test,
            Split::OdTest => self.od_test,
            Split::MetaOd => self.meta_od,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub feature_dim: usize,
    pub lexicon_size: usize,
    pub word_length: LengthRange,
    pub id_writers: usize,
    pub od_writers: usize,
    /// Fresh writers rendering the surrogate split.
    pub meta_writers: usize,
    pub samples: SplitSizes,
    pub noise_sigma: f64,
    pub style_strength: f64,
    pub degradation: f64,
    /// Render the surrogate split with the base codebook instead of its own.
    pub shared_codebook: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            feature_dim: 256,
            lexicon_size: 50,
            word_length: LengthRange { min: 2, max: 8 },
            id_writers: 1,
            od_writers: 50,
            meta_writers: 100,
            samples: SplitSizes {
                train: 2000,
                id_test: 500,
                od_test: 500,
                meta_od: 2000,
            },
            noise_sigma: 0.05,
            style_strength: 0.5,
            degradation: 0.2,
            shared_codebook: false,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.feature_dim == 0 || self.lexicon_size == 0 {
            return bad("feature_dim and lexicon_size must be positive".into());
        }
        if self.id_writers == 0 || self.od_writers == 0 || self.meta_writers == 0 {
            return bad("writer counts must be positive".into());
        }
        if Split::ALL.iter().any(|&s| self.samples.get(s) == 0) {
            return bad("split sizes must be positive".into());
        }
        let LengthRange { min, max } = self.word_length;
        if min == 0 || min > max {
            return bad(format!("invalid word length range {min}..={max}"));
        }
        // Distinct words available; saturates long before overflow matters.
        let available: f64 = (min..=max).map(|n| (LETTERS.len() as f64).powi(n as i32)).sum();
        if (self.lexicon_size as f64) > available {
            return bad(format!("cannot draw {} distinct words", self.lexicon_size));
        }
        if !(self.noise_sigma >= 0.0 && self.style_strength >= 0.0) {
            return bad("noise_sigma and style_strength must be nonnegative".into());
        }
        if !(0.0..=1.0).contains(&self.degradation) {
            return bad("degradation must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub split: Split,
    pub transcription: String,
    pub writer: u32,
    pub features: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub samples: Vec<Sample>,
    /// Samples excluded at load because their transcription normalized to
    /// the empty string.
    pub dropped_empty: usize,
}

impl Corpus {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Sample> + Clone {
        self.samples.iter().filter(move |s| s.split == split)
    }

    /// Sorted distinct transcriptions of the labelled splits.
    pub fn transcriptions(&self) -> Vec<String> {
        let mut words: Vec<String> = self
            .samples
            .iter()
            .filter(|s| s.split != Split::MetaOd)
            .map(|s| s.transcription.clone())
            .collect();
        words.sort();
        words.dedup();
        words
    }
}

/// Draws `lexicon_size` distinct lowercase words with uniform lengths.
pub fn sample_lexicon(config: &CorpusConfig, rng: &mut ChaCha8Rng) -> Result<Vec<String>> {
    config.validate()?;
    let mut words = Vec::with_capacity(config.lexicon_size);
    while words.len() < config.lexicon_size {
        let n = rng.random_range(config.word_length.min..=config.word_length.max);
        let word: String = (0..n)
            .map(|_| char::from(*LETTERS.choose(rng).expect("nonempty")))
            .collect();
        if !words.contains(&word) {
            words.push(word);
        }
    }
    Ok(words)
}

/// Which character codebook renders a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    Base,
    Surrogate,
}

/// Character codebook: one feature vector per letter.
#[derive(Debug, Clone)]
pub struct Codebook {
    vectors: Vec<Vec<f64>>,
}

impl Codebook {
    pub fn new(feature_dim: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let vectors = (0..LETTERS.len())
            .map(|_| gaussian_vec(&mut rng, feature_dim, 1.0))
            .collect();
        Self { vectors }
    }

    /// `√(1-mix²)·base + mix·fresh`, letter by letter.
    pub fn mixed(base: &Codebook, mix: f64, seed: u64) -> Self {
        let fresh = Self::new(base.vectors[0].len(), seed);
        let keep = (1.0 - mix * mix).max(0.0).sqrt();
        let vectors = base
            .vectors
            .iter()
            .zip(&fresh.vectors)
            .map(|(b, f)| b.iter().zip(f).map(|(b, f)| keep * b + mix * f).collect())
            .collect();
        Self { vectors }
    }

    fn get(&self, c: char) -> Result<&[f64]> {
        LETTERS
            .iter()
            .position(|&l| char::from(l) == c)
            .map(|i| self.vectors[i].as_slice())
            .ok_or_else(|| Error::Config(format!("cannot render symbol `{c}`")))
    }
}

/// A writer's affine style `x ↦ x + style·G x + b`.
#[derive(Debug, Clone)]
pub struct WriterStyle {
    /// `G`, row-major `feature_dim × feature_dim`.
    pub matrix: Vec<f64>,
    pub bias: Vec<f64>,
}

impl WriterStyle {
    pub fn neutral(feature_dim: usize) -> Self {
        Self {
            matrix: vec![0.0; feature_dim * feature_dim],
            bias: vec![0.0; feature_dim],
        }
    }

    /// Independent style with entries of `G` drawn with variance
    /// `spread² / feature_dim` and bias entries with variance `spread²`.
    pub fn random(feature_dim: usize, spread: f64, rng: &mut ChaCha8Rng) -> Self {
        Self {
            matrix: gaussian_vec(rng, feature_dim * feature_dim, spread / (feature_dim as f64).sqrt()),
            bias: gaussian_vec(rng, feature_dim, spread),
        }
    }

    /// `self` plus an independent offset of the given spread.
    pub fn perturbed(&self, spread: f64, rng: &mut ChaCha8Rng) -> Self {
        let dim = self.bias.len();
        let offset = Self::random(dim, spread, rng);
        Self {
            matrix: self.matrix.iter().zip(&offset.matrix).map(|(a, b)| a + b).collect(),
            bias: self.bias.iter().zip(&offset.bias).map(|(a, b)| a + b).collect(),
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z * std
        })
        .collect()
}

/// Fixed positional modulation of character `k` in an `n`-character word.
fn positional(k: usize, n: usize, feature_dim: usize) -> impl Iterator<Item = f64> {
    let centre = (k as f64 + 0.5) / n as f64;
    (0..feature_dim).map(move |d| {
        let freq = 1.0 + (d % 4) as f64;
        let phase = std::f64::consts::TAU * d as f64 / feature_dim as f64;
        1.0 + 0.5 * (freq * std::f64::consts::PI * centre + phase).sin()
    })
}

/// Feature vector of `word` in the given writer style and codebook.
pub fn render(
    word: &str,
    style: &WriterStyle,
    codebook: &Codebook,
    rng: &mut ChaCha8Rng,
    config: &CorpusConfig,
) -> Result<Vec<f64>> {
    let chars: Vec<char> = word.chars().collect();
    if chars.is_empty() {
        return Err(Error::EmptyTranscription);
    }
    let dim = config.feature_dim;
    let mut content = vec![0.0; dim];
    for (k, &c) in chars.iter().enumerate() {
        let e = codebook.get(c)?;
        for ((acc, p), &v) in content.iter_mut().zip(positional(k, chars.len(), dim)).zip(e) {
            *acc += p * v;
        }
    }

    let u: f64 = rng.random();
    let sigma = config.noise_sigma * (1.0 + config.degradation * u);
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let mut out = Vec::with_capacity(dim);
    for i in 0..dim {
        let row = &style.matrix[i * dim..(i + 1) * dim];
        let styled = content[i] + config.style_strength * crate::nnet::dot(row, &content);
        let eps = noise.as_ref().map_or(0.0, |n| n.sample(rng));
        out.push(styled + config.style_strength * style.bias[i] + eps);
    }
    Ok(out)
}

/// Writer id ranges: ID writers first, then OD writers, then surrogate ones.
fn writer_range(config: &CorpusConfig, split: Split) -> (u32, u32) {
    let (id, od, meta) = (
        config.id_writers as u32,
        config.od_writers as u32,
        config.meta_writers as u32,
    );
    match split {
        Split::Train | Split::IdTest => (0, id),
        Split::OdTest => (id, od),
        Split::MetaOd => (id + od, meta),
    }
}

struct StyleBank<'a> {
    config: &'a CorpusConfig,
    styles: HashMap<u32, WriterStyle>,
}

impl StyleBank<'_> {
    fn get(&mut self, writer: u32) -> &WriterStyle {
        if !self.styles.contains_key(&writer) {
            let style = self.make(writer);
            self.styles.insert(writer, style);
        }
        &self.styles[&writer]
    }

    fn make(&mut self, writer: u32) -> WriterStyle {
        let c = self.config;
        let dim = c.feature_dim;
        let mut rng = seed::rng(seed::derive_index(seed::derive(c.seed, "writer"), u64::from(writer)));
        let (id, od) = (c.id_writers as u32, c.od_writers as u32);
        if writer < id {
            WriterStyle::random(dim, 1.0, &mut rng)
        } else {
            let j = writer - id;
            let ramp = if j < od {
                f64::from(j + 1) / f64::from(od)
            } else {
                1.0 - rng.random::<f64>()
            };
            let anchor = self.get(j % id).clone();
            anchor.perturbed(OD_STYLE_SPREAD * ramp.sqrt(), &mut rng)
        }
    }
}

/// Base and surrogate codebooks of a corpus.
pub fn codebooks(config: &CorpusConfig) -> (Codebook, Codebook) {
    let base = Codebook::new(config.feature_dim, seed::derive(config.seed, "codebook/base"));
    let surrogate = if config.shared_codebook {
        base.clone()
    } else {
        Codebook::mixed(
            &base,
            SURROGATE_CODEBOOK_MIX,
            seed::derive(config.seed, "codebook/surrogate"),
        )
    };
    (base, surrogate)
}

/// Generates every split of the corpus. Each sample draws from its own
/// stream derived from `(seed, split, index)`.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Corpus> {
    config.validate()?;
    let lexicon = sample_lexicon(config, &mut seed::rng(seed::derive(config.seed, "lexicon")))?;
    let (base, surrogate) = codebooks(config);
    let mut bank = StyleBank {
        config,
        styles: HashMap::new(),
    };

    let total: usize = Split::ALL.iter().map(|&s| config.samples.get(s)).sum();
    let mut samples = Vec::with_capacity(total);
    for split in Split::ALL {
        let split_seed = seed::derive(config.seed, split.name());
        let (first, count) = writer_range(config, split);
        let codebook = if split == Split::MetaOd { &surrogate } else { &base };
        for index in 0..config.samples.get(split) {
            let mut rng = seed::rng(seed::derive_index(split_seed, index as u64));
            let word = lexicon.choose(&mut rng).expect("nonempty lexicon").clone();
            let writer = first + rng.random_range(0..count);
            let features = render(&word, bank.get(writer), codebook, &mut rng, config)?;
            samples.push(Sample {
                id: format!("{}-{index:05}", split.name()),
                split,
                transcription: word,
                writer,
                features,
            });
        }
    }
    Ok(Corpus {
        config: config.clone(),
        samples,
        dropped_empty: 0,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    config: CorpusConfig,
}

#[derive(Serialize)]
struct SampleOut<'a> {
    id: &'a str,
    split: Split,
    transcription: &'a str,
    writer: u32,
    features: Box<RawValue>,
}

/// JSON Lines: a header object, then one sample per line.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    let header = Header {
        format: CORPUS_FORMAT.into(),
        version: CORPUS_VERSION,
        config: corpus.config.clone(),
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for s in &corpus.samples {
        let line = SampleOut {
            id: &s.id,
            split: s.split,
            transcription: &s.transcription,
            writer: s.writer,
            features: RawValue::from_string(real_array(&s.features)).expect("valid array"),
        };
        writeln!(out, "{}", serde_json::to_string(&line)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a corpus file, normalizing transcriptions with `phoc` and dropping
/// labelled samples whose transcription normalizes to nothing.
pub fn read_corpus<R: BufRead>(input: R, path: &Path, phoc: &PhocConfig) -> Result<Corpus> {
    let data_err = |line: usize, message: String| Error::Data {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = input.lines();
    let header_text = lines
        .next()
        .ok_or_else(|| data_err(1, "missing header line".into()))??;
    let header: Header = serde_json::from_str(&header_text).map_err(|e| data_err(1, format!("bad header: {e}")))?;
    if header.format != CORPUS_FORMAT || header.version != CORPUS_VERSION {
        return Err(data_err(
            1,
            format!(
                "expected {CORPUS_FORMAT} v{CORPUS_VERSION}, found {} v{}",
                header.format, header.version
            ),
        ));
    }

    let mut samples = Vec::new();
    let mut dropped_empty = 0;
    let mut seen = std::collections::HashSet::new();
    for (i, line) in lines.enumerate() {
        let number = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut sample: Sample = serde_json::from_str(&line).map_err(|e| data_err(number, e.to_string()))?;
        if sample.features.len() != header.config.feature_dim {
            return Err(data_err(
                number,
                format!(
                    "expected {} features, found {}",
                    header.config.feature_dim,
                    sample.features.len()
                ),
            ));
        }
        if !seen.insert(sample.id.clone()) {
            return Err(data_err(number, format!("duplicate sample id `{}`", sample.id)));
        }
        sample.transcription = normalize_transcription(&sample.transcription, phoc);
        if sample.transcription.is_empty() && sample.split != Split::MetaOd {
            dropped_empty += 1;
            continue;
        }
        samples.push(sample);
    }
    Ok(Corpus {
        config: header.config,
        samples,
        dropped_empty,
    })
}

pub fn load_corpus(path: &Path, phoc: &PhocConfig) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    read_corpus(std::io::BufReader::new(file), path, phoc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> CorpusConfig {
        CorpusConfig {
            feature_dim: 16,
            lexicon_size: 10,
            od_writers: 4,
            meta_writers: 3,
            samples: SplitSizes {
                train: 20,
                id_test: 10,
                od_test: 10,
                meta_od: 10,
            },
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn lexicon_is_seeded_and_distinct() {
        let c = small();
        let a = sample_lexicon(&c, &mut seed::rng(1)).unwrap();
        let b = sample_lexicon(&c, &mut seed::rng(1)).unwrap();
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
        let phoc = PhocConfig::default();
        for w in &a {
            assert_eq!(&normalize_transcription(w, &phoc), w);
            assert!((2..=8).contains(&w.len()));
        }
        let one = CorpusConfig {
            lexicon_size: 1,
            ..small()
        };
        assert_eq!(sample_lexicon(&one, &mut seed::rng(2)).unwrap().len(), 1);
    }

    #[test]
    fn impossible_lexicon_is_a_config_error() {
        let c = CorpusConfig {
            lexicon_size: 1000,
            word_length: LengthRange { min: 1, max: 1 },
            ..small()
        };
        assert!(matches!(generate_corpus(&c), Err(Error::Config(_))));
    }

    #[test]
    fn rendering_without_style_or_noise_is_pure() {
        let c = CorpusConfig {
            style_strength: 0.0,
            noise_sigma: 0.0,
            ..small()
        };
        let book = Codebook::new(16, 3);
        let mut r1 = seed::rng(1);
        let mut r2 = seed::rng(2);
        let s1 = WriterStyle::random(16, 1.0, &mut r1);
        let s2 = WriterStyle::random(16, 1.0, &mut r2);
        let a = render("word", &s1, &book, &mut r1, &c).unwrap();
        let b = render("word", &s2, &book, &mut r2, &c).unwrap();
        assert_eq!(a, b);
        assert!(render("", &s1, &book, &mut r1, &c).is_err());
    }

    #[test]
    fn writers_change_renderings() {
        let c = CorpusConfig {
            noise_sigma: 0.0,
            ..small()
        };
        let book = Codebook::new(16, 3);
        let mut rng = seed::rng(5);
        let s1 = WriterStyle::random(16, 1.0, &mut rng);
        let s2 = WriterStyle::random(16, 1.0, &mut rng);
        let a = render("word", &s1, &book, &mut rng, &c).unwrap();
        let b = render("word", &s2, &book, &mut rng, &c).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn surrogate_codebook_is_linearly_separable() {
        use crate::evaluation::auroc;
        use crate::nnet::{train, Activation, DenseNetwork, LayerSpec, TrainConfig};

        let c = CorpusConfig::default();
        let lexicon = sample_lexicon(&c, &mut seed::rng(seed::derive(c.seed, "lexicon"))).unwrap();
        let (base, surrogate) = codebooks(&c);
        let mut bank = StyleBank {
            config: &c,
            styles: HashMap::new(),
        };
        let style = bank.get(0).clone();
        let mut rng = seed::rng(11);
        let mut draw = |book: &Codebook| -> Vec<Vec<f64>> {
            (0..300)
                .map(|_| {
                    let word = lexicon.choose(&mut rng).unwrap().clone();
                    render(&word, &style, book, &mut rng, &c).unwrap()
                })
                .collect()
        };
        let (a, b) = (draw(&base), draw(&surrogate));

        let spec = LayerSpec {
            width: 1,
            activation: Activation::Sigmoid,
            dropout_after: false,
        };
        let mut probe = DenseNetwork::init(c.feature_dim, &[spec], 1).unwrap();
        let inputs: Vec<&[f64]> = a[..200].iter().chain(&b[..200]).map(Vec::as_slice).collect();
        let targets: Vec<[f64; 1]> = (0..400).map(|i| [f64::from(u8::from(i < 200))]).collect();
        let config = TrainConfig {
            iterations: 3000,
            lr: 1e-2,
            lr_schedule: vec![],
            weight_decay: 0.0,
            dropout_p: 0.0,
            ..TrainConfig::default()
        };
        train(&mut probe, &inputs, &targets, &config).unwrap();
        let score = |xs: &[Vec<f64>]| -> Vec<f64> { xs.iter().map(|x| probe.logits(x).unwrap()[0]).collect() };
        assert!(auroc(&score(&a[200..]), &score(&b[200..])).unwrap() > 0.9);

        let shared = codebooks(&CorpusConfig {
            shared_codebook: true,
            ..c.clone()
        });
        assert_eq!(shared.0.vectors, shared.1.vectors);
    }

    #[test]
    fn corpus_structure() {
        let corpus = generate_corpus(&small()).unwrap();
        for split in Split::ALL {
            assert_eq!(corpus.split(split).count(), small().samples.get(split));
        }
        let id_writers: Vec<u32> = corpus
            .split(Split::Train)
            .chain(corpus.split(Split::IdTest))
            .map(|s| s.writer)
            .collect();
        let od_writers: Vec<u32> = corpus.split(Split::OdTest).map(|s| s.writer).collect();
        assert!(id_writers.iter().all(|w| !od_writers.contains(w)));
        let lexicon = sample_lexicon(&small(), &mut seed::rng(seed::derive(42, "lexicon"))).unwrap();
        assert!(corpus.samples.iter().all(|s| lexicon.contains(&s.transcription)));
        let mut ids: Vec<&str> = corpus.samples.iter().map(|s| s.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), corpus.samples.len());
        assert!(corpus.samples.iter().all(|s| s.features.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn corpus_file_is_deterministic_and_round_trips() {
        let write = |c: &Corpus| {
            let mut buf = Vec::new();
            write_corpus(c, &mut buf).unwrap();
            buf
        };
        let a = write(&generate_corpus(&small()).unwrap());
        let b = write(&generate_corpus(&small()).unwrap());
        assert_eq!(a, b);
        let back = read_corpus(&a[..], Path::new("mem"), &PhocConfig::default()).unwrap();
        assert_eq!(back, generate_corpus(&small()).unwrap());
        assert_eq!(write(&back), a);
    }

    #[test]
    fn loader_reports_bad_lines_and_drops_empty_words() {
        let mut buf = Vec::new();
        write_corpus(&generate_corpus(&small()).unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        lines[3] = lines[3].replace("\"transcription\":\"", "\"transcription\":\"--");
        let first = &lines[1];
        let word_start = first.find("\"transcription\":\"").unwrap() + 17;
        let word_end = word_start + first[word_start..].find('"').unwrap();
        lines[1] = format!("{}?!{}", &first[..word_start], &first[word_end..]);
        let phoc = PhocConfig::default();
        let corpus = read_corpus(lines.join("\n").as_bytes(), Path::new("c"), &phoc).unwrap();
        assert_eq!(corpus.dropped_empty, 1);
        assert_eq!(corpus.samples.len(), 49);

        lines[5] = "{not json".into();
        match read_corpus(lines.join("\n").as_bytes(), Path::new("c"), &phoc) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected data error, got {other:?}"),
        }
    }
}
