//! Retrieval and confidence metrics: QbS mAP, threshold sweeps, cumulative
//! WER, confidence histograms, AUROC and rank correlation.

mod csv;

pub use csv::{
    write_histogram_csv, write_quality_scatter_csv, write_summary_csv, write_threshold_csv, write_wer_csv, SummaryRow,
};

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::datagen::Split;
use crate::error::{Error, Result};
use crate::estimator::AttributeEstimate;
use crate::phoc::{build_phoc, normalize_transcription, PhocConfig};
use crate::retrieval::{quality, recognize, Lexicon, LogEstimate};

/// One sample as seen by the metrics.
#[derive(Debug, Clone, Copy)]
pub struct EvalSample<'a> {
    pub id: &'a str,
    pub split: Split,
    pub transcription: &'a str,
    pub estimate: &'a AttributeEstimate,
}

/// Uninterpolated AP: mean precision at the rank of every relevant hit,
/// divided by `total_relevant`.
pub fn average_precision(relevance: &[bool], total_relevant: usize) -> Result<f64> {
    if total_relevant == 0 {
        return Err(Error::Empty("relevant set"));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevance.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    if hits > total_relevant {
        return Err(Error::shape(total_relevant, hits));
    }
    Ok(sum / total_relevant as f64)
}

/// Full PRM ranking of a sample set for each query, computed once so that
/// pruned subsets can be scored without re-ranking.
#[derive(Debug, Clone)]
pub struct QueryRankings {
    queries: Vec<String>,
    /// Per query, sample indices in ranked order with their relevance.
    orders: Vec<Vec<(usize, bool)>>,
    total_relevant: Vec<usize>,
    samples: usize,
}

impl QueryRankings {
    /// Queries are normalized and deduplicated; empty ones are dropped.
    pub fn new<S: AsRef<str>>(queries: &[S], samples: &[EvalSample<'_>], phoc: &PhocConfig) -> Result<Self> {
        let queries: Vec<String> = queries
            .iter()
            .map(|q| normalize_transcription(q.as_ref(), phoc))
            .filter(|q| !q.is_empty())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let logs: Vec<LogEstimate> = samples.iter().map(|s| LogEstimate::new(s.estimate)).collect();
        let truth: Vec<String> = samples
            .iter()
            .map(|s| normalize_transcription(s.transcription, phoc))
            .collect();
        let mut scores = Vec::with_capacity(queries.len());
        let mut relevance = Vec::with_capacity(queries.len());
        for q in &queries {
            let query = build_phoc(q, phoc)?;
            scores.push(logs.iter().map(|l| l.score(&query)).collect::<Result<Vec<f64>>>()?);
            relevance.push(truth.iter().map(|t| t == q).collect());
        }
        let ids: Vec<&str> = samples.iter().map(|s| s.id).collect();
        Self::from_scores(queries, &scores, relevance, &ids)
    }

    /// Rankings from precomputed per-query scores (higher first, ties by
    /// ascending id) and relevance flags.
    pub fn from_scores(
        queries: Vec<String>,
        scores: &[Vec<f64>],
        relevance: Vec<Vec<bool>>,
        ids: &[&str],
    ) -> Result<Self> {
        if scores.len() != queries.len() || relevance.len() != queries.len() {
            return Err(Error::shape(queries.len(), scores.len().min(relevance.len())));
        }
        let mut orders = Vec::with_capacity(queries.len());
        let mut total_relevant = Vec::with_capacity(queries.len());
        for (s, rel) in scores.iter().zip(relevance) {
            if s.len() != ids.len() || rel.len() != ids.len() {
                return Err(Error::shape(ids.len(), s.len().min(rel.len())));
            }
            let mut order: Vec<usize> = (0..ids.len()).collect();
            order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then_with(|| ids[a].cmp(ids[b])));
            let ranked: Vec<(usize, bool)> = order.into_iter().map(|i| (i, rel[i])).collect();
            total_relevant.push(ranked.iter().filter(|r| r.1).count());
            orders.push(ranked);
        }
        Ok(Self {
            queries,
            orders,
            total_relevant,
            samples: ids.len(),
        })
    }

    pub fn queries(&self) -> &[String] {
        &self.queries
    }

    /// mAP over the samples accepted by `keep`, averaging only queries with
    /// at least one relevant sample left. `None` when no query qualifies.
    pub fn map_where(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let mut sum = 0.0;
        let mut counted = 0usize;
        for order in &self.orders {
            let mut rank = 0usize;
            let mut hits = 0usize;
            let mut ap = 0.0;
            for &(i, rel) in order {
                if !keep(i) {
                    continue;
                }
                rank += 1;
                if rel {
                    hits += 1;
                    ap += hits as f64 / rank as f64;
                }
            }
            if hits > 0 {
                sum += ap / hits as f64;
                counted += 1;
            }
        }
        (counted > 0).then(|| sum / counted as f64)
    }

    /// Mean over queries with relevant samples of the fraction of those
    /// samples accepted by `keep`.
    pub fn recall_where(&self, keep: impl Fn(usize) -> bool) -> Option<f64> {
        let mut sum = 0.0;
        let mut counted = 0usize;
        for (order, &total) in self.orders.iter().zip(&self.total_relevant) {
            if total == 0 {
                continue;
            }
            let kept = order.iter().filter(|&&(i, rel)| rel && keep(i)).count();
            sum += kept as f64 / total as f64;
            counted += 1;
        }
        (counted > 0).then(|| sum / counted as f64)
    }
}

/// QbS mean average precision of `samples` for `queries`; queries without a
/// relevant sample are left out.
pub fn qbs_map<S: AsRef<str>>(queries: &[S], samples: &[EvalSample<'_>], phoc: &PhocConfig) -> Result<f64> {
    QueryRankings::new(queries, samples, phoc)?
        .map_where(|_| true)
        .ok_or(Error::Empty("queries with a relevant sample"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdCurveRow {
    pub t: f64,
    /// `None` when no query keeps a relevant sample.
    pub map_at_t: Option<f64>,
    pub mr_at_t: f64,
    pub coverage: f64,
}

/// `-inf` followed by every distinct confidence in ascending order.
pub fn default_grid(confidences: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = confidences.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid.insert(0, f64::NEG_INFINITY);
    grid
}

/// Prunes the ranked set at each threshold (keeping confidence `>= t`) and
/// reports mAP, mean recall against the unpruned set, and coverage.
pub fn threshold_sweep(rankings: &QueryRankings, confidences: &[f64], grid: &[f64]) -> Result<Vec<ThresholdCurveRow>> {
    if rankings.samples == 0 {
        return Err(Error::Empty("composed test set"));
    }
    if confidences.len() != rankings.samples {
        return Err(Error::shape(rankings.samples, confidences.len()));
    }
    Ok(grid
        .iter()
        .map(|&t| {
            let keep = |i: usize| confidences[i] >= t;
            let kept = confidences.iter().filter(|&&c| c >= t).count();
            ThresholdCurveRow {
                t,
                map_at_t: rankings.map_where(keep),
                mr_at_t: rankings.recall_where(keep).unwrap_or(0.0),
                coverage: kept as f64 / rankings.samples as f64,
            }
        })
        .collect())
}

/// Nearest-rank quantile: the `⌈q·N⌉`-th smallest value.
pub fn quantile_threshold(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("quantile sample"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Config(format!("quantile {q} outside (0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Guard against q·N landing a hair above an integer.
    let rank = ((q * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(sorted.len()) - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WerCurvePoint {
    pub portion: u32,
    pub wer: f64,
}

pub fn default_portions() -> Vec<u32> {
    (10..=100).collect()
}

/// Positions of `samples` sorted most confident first, ties by id.
pub fn confidence_order(samples: &[EvalSample<'_>], confidences: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| {
        confidences[b]
            .total_cmp(&confidences[a])
            .then_with(|| samples[a].id.cmp(samples[b].id))
    });
    order
}

/// WER over the most confident `p%` of `samples` for each portion `p`.
pub fn cumulative_wer(
    samples: &[EvalSample<'_>],
    confidences: &[f64],
    lexicon: &Lexicon,
    phoc: &PhocConfig,
    portions: &[u32],
) -> Result<Vec<WerCurvePoint>> {
    if samples.is_empty() {
        return Err(Error::Empty("ID test set"));
    }
    if confidences.len() != samples.len() {
        return Err(Error::shape(samples.len(), confidences.len()));
    }
    if let Some(p) = portions.iter().find(|&&p| p == 0 || p > 100) {
        return Err(Error::Config(format!("portion {p} outside 1..=100")));
    }
    let mut errors = vec![0usize; samples.len() + 1];
    for (k, &i) in confidence_order(samples, confidences).iter().enumerate() {
        let s = &samples[i];
        let wrong = recognize(s.estimate, lexicon)? != normalize_transcription(s.transcription, phoc);
        errors[k + 1] = errors[k] + usize::from(wrong);
    }
    let n = samples.len();
    Ok(portions
        .iter()
        .map(|&p| {
            let k = (p as usize * n).div_ceil(100);
            WerCurvePoint {
                portion: p,
                wer: errors[k] as f64 / k as f64,
            }
        })
        .collect())
}

/// Plain WER of `samples`.
pub fn word_error_rate(samples: &[EvalSample<'_>], lexicon: &Lexicon, phoc: &PhocConfig) -> Result<f64> {
    let flat = vec![0.0; samples.len()];
    Ok(cumulative_wer(samples, &flat, lexicon, phoc, &[100])?[0].wer)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramRow {
    pub bin_center: f64,
    pub train_count: usize,
    pub id_count: usize,
    pub od_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub rows: Vec<HistogramRow>,
    /// All values were equal; everything was put in the first bin.
    pub zero_range: bool,
}

/// Counts per split after jointly rescaling all values to `[0, 100]`.
pub fn histogram(train: &[f64], id: &[f64], od: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let all = || train.iter().chain(id).chain(od).copied();
    let min = all().fold(f64::INFINITY, f64::min);
    let max = all().fold(f64::NEG_INFINITY, f64::max);
    if !min.is_finite() || !max.is_finite() {
        return Err(Error::Empty("histogram input"));
    }
    let range = max - min;
    let zero_range = range == 0.0;
    let bin_of = |v: f64| {
        if zero_range {
            return 0;
        }
        let scaled = 100.0 * (v - min) / range;
        ((scaled * bins as f64 / 100.0) as usize).min(bins - 1)
    };
    let width = 100.0 / bins as f64;
    let mut rows: Vec<HistogramRow> = (0..bins)
        .map(|b| HistogramRow {
            bin_center: (b as f64 + 0.5) * width,
            train_count: 0,
            id_count: 0,
            od_count: 0,
        })
        .collect();
    for &v in train {
        rows[bin_of(v)].train_count += 1;
    }
    for &v in id {
        rows[bin_of(v)].id_count += 1;
    }
    for &v in od {
        rows[bin_of(v)].od_count += 1;
    }
    Ok(Histogram { rows, zero_range })
}

/// Average (1-based) ranks; tied values share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]].total_cmp(&values[order[start]]) == Ordering::Equal {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn auroc(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Empty("AUROC class"));
    }
    let joined: Vec<f64> = positives.iter().chain(negatives).copied().collect();
    let ranks = average_ranks(&joined);
    let (n, m) = (positives.len() as f64, negatives.len() as f64);
    let rank_sum: f64 = ranks[..positives.len()].iter().sum();
    Ok((rank_sum - n * (n + 1.0) / 2.0) / (n * m))
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    if x.len() != y.len() {
        return Err(Error::shape(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Ok(None);
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some(sxy / (sxx * syy).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub sample_id: String,
    pub split: Split,
    pub confidence: f64,
    pub neg_log_quality: f64,
}

/// One row per sample with a usable transcription, plus the number of
/// samples skipped for lacking one.
pub fn quality_scatter(
    samples: &[EvalSample<'_>],
    confidences: &[f64],
    phoc: &PhocConfig,
) -> Result<(Vec<ScatterRow>, usize)> {
    if confidences.len() != samples.len() {
        return Err(Error::shape(samples.len(), confidences.len()));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut skipped = 0;
    for (s, &c) in samples.iter().zip(confidences) {
        if normalize_transcription(s.transcription, phoc).is_empty() {
            skipped += 1;
            continue;
        }
        rows.push(ScatterRow {
            sample_id: s.id.to_owned(),
            split: s.split,
            confidence: c,
            neg_log_quality: -quality(s.transcription, s.estimate, phoc)?,
        });
    }
    Ok((rows, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::PROB_EPS;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_ap(relevance: &[bool], total: usize) -> f64 {
        let mut sum = 0.0;
        for k in 0..relevance.len() {
            if relevance[k] {
                let hits = relevance[..=k].iter().filter(|&&r| r).count();
                sum += hits as f64 / (k + 1) as f64;
            }
        }
        sum / total as f64
    }

    fn pairwise_auc(pos: &[f64], neg: &[f64]) -> f64 {
        let mut twice = 0u64;
        for p in pos {
            for n in neg {
                twice += match p.partial_cmp(n).unwrap() {
                    Ordering::Greater => 2,
                    Ordering::Equal => 1,
                    Ordering::Less => 0,
                };
            }
        }
        twice as f64 / (2 * pos.len() * neg.len()) as f64
    }

    #[test]
    fn average_precision_examples() {
        assert!((average_precision(&[true, false, true], 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(average_precision(&[true, true, false], 2).unwrap(), 1.0);
        assert!((average_precision(&[false, false, true], 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(average_precision(&[true], 0).is_err());
    }

    #[test]
    fn average_precision_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..40);
            let relevance: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
            let hits = relevance.iter().filter(|&&r| r).count();
            let total = hits.max(1) + rng.random_range(0..3);
            assert_eq!(
                average_precision(&relevance, total).unwrap(),
                brute_ap(&relevance, total)
            );
        }
    }

    fn phoc_ab() -> PhocConfig {
        PhocConfig::new("ab", &[1]).unwrap()
    }

    fn perfect(word: &str, phoc: &PhocConfig) -> AttributeEstimate {
        let bits = build_phoc(word, phoc).unwrap();
        AttributeEstimate::new(
            bits.bits()
                .iter()
                .map(|&b| if b { 1.0 - PROB_EPS } else { PROB_EPS })
                .collect(),
        )
    }

    #[test]
    fn self_retrieval_is_perfect() {
        let phoc = PhocConfig::default();
        let words = ["ab", "cd", "ef", "gh"];
        let ests: Vec<_> = words.iter().map(|w| perfect(w, &phoc)).collect();
        let ids = ["s0", "s1", "s2", "s3"];
        let samples: Vec<EvalSample> = (0..4)
            .map(|i| EvalSample {
                id: ids[i],
                split: Split::IdTest,
                transcription: words[i],
                estimate: &ests[i],
            })
            .collect();
        assert_eq!(qbs_map(&words, &samples, &phoc).unwrap(), 1.0);
    }

    #[test]
    fn constant_estimates_follow_the_tie_rule() {
        let phoc = phoc_ab();
        let c = AttributeEstimate::new(vec![0.5, 0.5]);
        let samples = [
            EvalSample {
                id: "s1",
                split: Split::IdTest,
                transcription: "a",
                estimate: &c,
            },
            EvalSample {
                id: "s2",
                split: Split::IdTest,
                transcription: "b",
                estimate: &c,
            },
        ];
        // Both queries see the order [s1, s2]: AP("a") = 1, AP("b") = 1/2.
        assert_eq!(qbs_map(&["a", "b"], &samples, &phoc).unwrap(), 0.75);
    }

    #[test]
    fn queries_without_relevant_samples_are_skipped() {
        let phoc = phoc_ab();
        let e = perfect("a", &phoc);
        let samples = [EvalSample {
            id: "s1",
            split: Split::IdTest,
            transcription: "a",
            estimate: &e,
        }];
        assert_eq!(qbs_map(&["a", "b"], &samples, &phoc).unwrap(), 1.0);
        assert!(qbs_map(&["b"], &samples, &phoc).is_err());
    }

    #[test]
    fn quantile_examples() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile_threshold(&v, 0.01).unwrap(), 1.0);
        assert_eq!(quantile_threshold(&v, 0.5).unwrap(), 50.0);
        assert_eq!(quantile_threshold(&[3.5], 0.01).unwrap(), 3.5);
        assert_eq!(quantile_threshold(&[3.5], 1.0).unwrap(), 3.5);
        assert!(quantile_threshold(&[], 0.01).is_err());
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.5);
        assert_eq!(auroc(&[1.0], &[0.0, 2.0]).unwrap(), 0.5);
        assert!(auroc(&[], &[1.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(spearman(&x, &x).unwrap(), Some(1.0));
        assert_eq!(spearman(&x, &[3.0, 2.0, 1.0]).unwrap(), Some(-1.0));
        assert_eq!(spearman(&x, &[1.0, 1.0, 1.0]).unwrap(), None);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.0, 1.0], &[], &[], 2).unwrap();
        assert_eq!(h.rows.iter().map(|r| r.train_count).collect::<Vec<_>>(), vec![1, 1]);
        assert_eq!(h.rows[0].bin_center, 25.0);
        assert!(!h.zero_range);

        let same = [0.3, -1.0, 2.5, 2.5];
        let h = histogram(&same, &same, &same, 100).unwrap();
        assert!(h
            .rows
            .iter()
            .all(|r| r.train_count == r.id_count && r.id_count == r.od_count));
        assert_eq!(h.rows[99].train_count, 2);

        let flat = histogram(&[4.0, 4.0], &[4.0], &[], 10).unwrap();
        assert!(flat.zero_range);
        assert_eq!((flat.rows[0].train_count, flat.rows[0].id_count), (2, 1));
        assert!(histogram(&[], &[], &[], 10).is_err());
    }

    #[test]
    fn wer_portions_and_oracle_confidence() {
        let phoc = PhocConfig::default();
        let lexicon = Lexicon::new(["ab", "cd", "ef"], &phoc).unwrap();
        let words = ["ab", "cd", "ef", "ab", "cd", "ef", "ab", "cd", "ef", "ab"];
        let ids: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let mut ests: Vec<_> = words.iter().map(|w| perfect(w, &phoc)).collect();
        // Sample 4 is corrupted: it looks like "ef".
        ests[4] = perfect("ef", &phoc);
        let samples: Vec<EvalSample> = (0..10)
            .map(|i| EvalSample {
                id: &ids[i],
                split: Split::IdTest,
                transcription: words[i],
                estimate: &ests[i],
            })
            .collect();
        let oracle: Vec<f64> = samples
            .iter()
            .map(|s| quality(s.transcription, s.estimate, &phoc).unwrap())
            .collect();
        let curve = cumulative_wer(&samples, &oracle, &lexicon, &phoc, &default_portions()).unwrap();
        assert_eq!(curve.len(), 91);
        for p in &curve {
            let expected = if p.portion <= 90 { 0.0 } else { 0.1 };
            assert_eq!(p.wer, expected, "portion {}", p.portion);
        }
        assert!(curve.windows(2).all(|w| w[0].wer <= w[1].wer));
        assert_eq!(
            curve.last().unwrap().wer,
            word_error_rate(&samples, &lexicon, &phoc).unwrap()
        );
    }

    #[test]
    fn sweep_edges_and_oracle_separation() {
        let phoc = PhocConfig::default();
        let words = ["ab", "cd", "ab", "cd", "ab", "cd"];
        let ids = ["i0", "i1", "i2", "o0", "o1", "o2"];
        // OD estimates are poor: they all look like "ab".
        let ests: Vec<_> = (0..6)
            .map(|i| {
                if i < 3 {
                    perfect(words[i], &phoc)
                } else {
                    perfect("ab", &phoc)
                }
            })
            .collect();
        let samples: Vec<EvalSample> = (0..6)
            .map(|i| EvalSample {
                id: ids[i],
                split: if i < 3 { Split::IdTest } else { Split::OdTest },
                transcription: words[i],
                estimate: &ests[i],
            })
            .collect();
        let queries = ["ab", "cd"];
        let conf = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let rankings = QueryRankings::new(&queries, &samples, &phoc).unwrap();
        let rows = threshold_sweep(&rankings, &conf, &default_grid(&conf)).unwrap();
        assert_eq!(rows[0].t, f64::NEG_INFINITY);
        assert_eq!((rows[0].coverage, rows[0].mr_at_t), (1.0, 1.0));

        let map_id = qbs_map(&queries, &samples[..3], &phoc).unwrap();
        let sep = threshold_sweep(&rankings, &conf, &[0.5]).unwrap()[0];
        assert_eq!(sep.map_at_t, Some(map_id));
        assert_eq!(sep.coverage, 0.5);

        let above = threshold_sweep(&rankings, &conf, &[2.0]).unwrap()[0];
        assert_eq!((above.map_at_t, above.mr_at_t, above.coverage), (None, 0.0, 0.0));
    }

    #[test]
    fn scatter_of_perfect_estimates_is_near_zero() {
        let phoc = PhocConfig::default();
        let e = perfect("word", &phoc);
        let samples = [
            EvalSample {
                id: "a",
                split: Split::OdTest,
                transcription: "word",
                estimate: &e,
            },
            EvalSample {
                id: "b",
                split: Split::OdTest,
                transcription: "--",
                estimate: &e,
            },
        ];
        let (rows, skipped) = quality_scatter(&samples, &[0.5, 0.1], &phoc).unwrap();
        assert_eq!((rows.len(), skipped), (1, 1));
        assert!(rows[0].neg_log_quality >= 0.0 && rows[0].neg_log_quality < 1e-4);
    }

    fn random_set(
        rng: &mut ChaCha8Rng,
        phoc: &PhocConfig,
        n: usize,
    ) -> (Vec<String>, Vec<String>, Vec<AttributeEstimate>) {
        let lex = ["ab", "ba", "aab", "b", "a"];
        let words: Vec<String> = (0..n).map(|_| lex[rng.random_range(0..lex.len())].to_owned()).collect();
        let ids = (0..n).map(|i| format!("s{i:03}")).collect();
        let ests = (0..n)
            .map(|_| AttributeEstimate::new((0..phoc.dimension()).map(|_| rng.random::<f64>()).collect()))
            .collect();
        (ids, words, ests)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn sweep_is_monotone(seed in any::<u64>(), n in 2usize..30) {
            let phoc = PhocConfig::new("ab", &[1, 2]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (ids, words, ests) = random_set(&mut rng, &phoc, n);
            let samples: Vec<EvalSample> = (0..n)
                .map(|i| EvalSample { id: &ids[i], split: Split::IdTest, transcription: &words[i], estimate: &ests[i] })
                .collect();
            let conf: Vec<f64> = (0..n).map(|_| (rng.random_range(0..6) as f64) / 2.0).collect();
            let rankings = QueryRankings::new(&words, &samples, &phoc).unwrap();
            let rows = threshold_sweep(&rankings, &conf, &default_grid(&conf)).unwrap();
            prop_assert_eq!(rows[0].coverage, 1.0);
            for w in rows.windows(2) {
                prop_assert!(w[1].coverage <= w[0].coverage);
                prop_assert!(w[1].mr_at_t <= w[0].mr_at_t);
            }
        }

        #[test]
        fn rank_metrics_ignore_monotone_transforms(
            pos in prop::collection::vec(-5.0f64..5.0, 1..20),
            neg in prop::collection::vec(-5.0f64..5.0, 1..20),
        ) {
            let a = auroc(&pos, &neg).unwrap();
            prop_assert_eq!(a, pairwise_auc(&pos, &neg));
            let lin = |v: &[f64]| v.iter().map(|x| 2.0 * x + 1.0).collect::<Vec<_>>();
            let exp = |v: &[f64]| v.iter().map(|x| x.exp()).collect::<Vec<_>>();
            prop_assert_eq!(auroc(&lin(&pos), &lin(&neg)).unwrap(), a);
            prop_assert_eq!(auroc(&exp(&pos), &exp(&neg)).unwrap(), a);
        }

        #[test]
        fn histogram_conserves_counts(
            train in prop::collection::vec(-1e3f64..1e3, 1..50),
            id in prop::collection::vec(-1e3f64..1e3, 0..50),
            od in prop::collection::vec(-1e3f64..1e3, 0..50),
            bins in 1usize..120,
        ) {
            let h = histogram(&train, &id, &od, bins).unwrap();
            prop_assert_eq!(h.rows.len(), bins);
            prop_assert_eq!(h.rows.iter().map(|r| r.train_count).sum::<usize>(), train.len());
            prop_assert_eq!(h.rows.iter().map(|r| r.id_count).sum::<usize>(), id.len());
            prop_assert_eq!(h.rows.iter().map(|r| r.od_count).sum::<usize>(), od.len());
        }
    }
}
