//! Pyramidal Histogram of Characters embeddings.
//!
//! A word of `n` characters assigns character `k` the occupancy interval
//! `[k/n, (k+1)/n]`. At pyramid level `L`, region `r` covers
//! `[r/L, (r+1)/L]`, and the character's slot in that region is set when at
//! least `overlap_threshold` of its occupancy falls inside the region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHABET: &str = "abcdefghijklmnopqrstuvwxyz0123456789";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhocConfig {
    pub alphabet: String,
    pub levels: Vec<usize>,
    pub overlap_threshold: f64,
}

impl Default for PhocConfig {
    fn default() -> Self {
        Self {
            alphabet: DEFAULT_ALPHABET.to_owned(),
            levels: vec![1, 2, 4, 8],
            overlap_threshold: 0.5,
        }
    }
}

impl PhocConfig {
    pub fn new(alphabet: &str, levels: &[usize]) -> Result<Self> {
        let config = Self {
            alphabet: alphabet.to_owned(),
            levels: levels.to_vec(),
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let symbols: Vec<char> = self.alphabet.chars().collect();
        if symbols.is_empty() {
            return Err(Error::Config("PHOC alphabet is empty".into()));
        }
        for (i, c) in symbols.iter().enumerate() {
            if symbols[..i].contains(c) {
                return Err(Error::Config(format!("duplicate PHOC symbol `{c}`")));
            }
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return Err(Error::Config("PHOC levels must be positive".into()));
        }
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(Error::Config("overlap_threshold must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn symbols(&self) -> Vec<char> {
        self.alphabet.chars().collect()
    }

    /// Alphabet size times the number of pyramid regions.
    pub fn dimension(&self) -> usize {
        self.alphabet.chars().count() * self.levels.iter().sum::<usize>()
    }

    /// Stable fingerprint used to tie trained models to the embedding they
    /// were trained against.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        crate::format::digest(canonical.as_bytes())
    }

    fn index_of(&self, c: char) -> Option<usize> {
        self.alphabet.chars().position(|s| s == c)
    }
}

pub fn phoc_dimension(config: &PhocConfig) -> usize {
    config.dimension()
}

/// Lowercases `raw` and drops every symbol outside the alphabet.
pub fn normalize_transcription(raw: &str, config: &PhocConfig) -> String {
    raw.chars()
        .flat_map(char::to_lowercase)
        .filter(|c| config.alphabet.contains(*c))
        .collect()
}

/// Binary attribute embedding of a transcription.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhocVector {
    bits: Vec<bool>,
}

impl PhocVector {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// 0/1 values as reals, the form training targets take.
    pub fn to_targets(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Builds the PHOC of an already normalized word.
///
/// Overlaps are evaluated on the integer grid of `1/(n·L)` units, so the
/// 50% tie is decided exactly.
pub fn build_phoc(word: &str, config: &PhocConfig) -> Result<PhocVector> {
    let chars: Vec<usize> = word
        .chars()
        .map(|c| {
            config
                .index_of(c)
                .ok_or_else(|| Error::Config(format!("symbol `{c}` is not in the PHOC alphabet")))
        })
        .collect::<Result<_>>()?;
    if chars.is_empty() {
        return Err(Error::EmptyTranscription);
    }
    let n = chars.len();
    let alphabet_len = config.alphabet.chars().count();
    let mut bits = vec![false; config.dimension()];

    let mut offset = 0;
    for &level in &config.levels {
        let need = config.overlap_threshold * level as f64;
        for (k, &symbol) in chars.iter().enumerate() {
            let (lo, hi) = (k * level, (k + 1) * level);
            // Only regions whose span can intersect the occupancy.
            let first = lo / n;
            let last = ((hi - 1) / n).min(level - 1);
            for region in first..=last {
                let (rlo, rhi) = (region * n, (region + 1) * n);
                let overlap = hi.min(rhi).saturating_sub(lo.max(rlo));
                if overlap as f64 >= need {
                    bits[offset + region * alphabet_len + symbol] = true;
                }
            }
        }
        offset += level * alphabet_len;
    }
    Ok(PhocVector { bits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(alphabet: &str, levels: &[usize]) -> PhocConfig {
        PhocConfig::new(alphabet, levels).unwrap()
    }

    fn bits(v: &PhocVector) -> Vec<u8> {
        v.bits().iter().map(|&b| u8::from(b)).collect()
    }

    #[test]
    fn normalization() {
        let c = PhocConfig::default();
        assert_eq!(normalize_transcription("The", &c), "the");
        assert_eq!(normalize_transcription("a-b1", &c), "ab1");
        assert_eq!(normalize_transcription("", &c), "");
        assert_eq!(normalize_transcription("Ünïcode!", &c), "ncode");
    }

    #[test]
    fn two_character_word() {
        let v = build_phoc("ab", &cfg("ab", &[1, 2])).unwrap();
        assert_eq!(bits(&v), vec![1, 1, 1, 0, 0, 1]);
    }

    #[test]
    fn half_overlap_counts_as_active() {
        let v = build_phoc("a", &cfg("a", &[1, 2])).unwrap();
        assert_eq!(bits(&v), vec![1, 1, 1]);
        let strict = PhocConfig {
            overlap_threshold: 0.6,
            ..cfg("a", &[1, 2])
        };
        assert_eq!(bits(&build_phoc("a", &strict).unwrap()), vec![1, 0, 0]);
    }

    #[test]
    fn level_one_is_character_set() {
        let v = build_phoc("a", &cfg("ab", &[1])).unwrap();
        assert_eq!(bits(&v), vec![1, 0]);
    }

    #[test]
    fn repeated_characters_or_their_regions() {
        let v = build_phoc("aa", &cfg("a", &[1, 2])).unwrap();
        assert_eq!(bits(&v), vec![1, 1, 1]);
    }

    #[test]
    fn dimensions() {
        assert_eq!(phoc_dimension(&PhocConfig::default()), 540);
        assert_eq!(phoc_dimension(&cfg("ab", &[1, 2])), 6);
        assert_eq!(phoc_dimension(&cfg("a", &[1])), 1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_phoc("", &PhocConfig::default()),
            Err(Error::EmptyTranscription)
        ));
        assert!(build_phoc("A", &PhocConfig::default()).is_err());
        assert!(PhocConfig::new("aa", &[1]).is_err());
        assert!(PhocConfig::new("ab", &[0]).is_err());
    }

    #[test]
    fn digest_tracks_config() {
        assert_eq!(PhocConfig::default().digest(), PhocConfig::default().digest());
        assert_ne!(PhocConfig::default().digest(), cfg("ab", &[1]).digest());
    }

    /// Brute force over every (occurrence, level, region) triple with the
    /// overlap measured on the unit interval.
    fn oracle(word: &str, config: &PhocConfig) -> Vec<bool> {
        let symbols = config.symbols();
        let chars: Vec<char> = word.chars().collect();
        let n = chars.len() as f64;
        let mut out = Vec::new();
        for &level in &config.levels {
            for region in 0..level {
                let (rlo, rhi) = (region as f64 / level as f64, (region + 1) as f64 / level as f64);
                for &symbol in &symbols {
                    out.push(chars.iter().enumerate().any(|(k, &c)| {
                        let (lo, hi) = (k as f64 / n, (k + 1) as f64 / n);
                        let overlap = (hi.min(rhi) - lo.max(rlo)).max(0.0);
                        c == symbol && overlap >= config.overlap_threshold * (hi - lo) - 1e-12
                    }));
                }
            }
        }
        out
    }

    proptest::proptest! {
        #[test]
        fn matches_brute_force(
            word in "[abcd]{1,10}",
            levels in proptest::collection::vec(1usize..7, 1..4),
        ) {
            let config = cfg("abcd", &levels);
            let v = build_phoc(&word, &config).unwrap();
            proptest::prop_assert_eq!(v.len(), phoc_dimension(&config));
            let expected = oracle(&word, &config);
            proptest::prop_assert_eq!(v.bits(), expected.as_slice());
            if levels[0] == 1 {
                for c in word.chars() {
                    proptest::prop_assert!(v.bits()[config.index_of(c).unwrap()]);
                }
            }
        }
    }
}
