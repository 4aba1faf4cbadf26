//! LDA topic mining by collapsed Gibbs sampling, with UMass coherence for
//! choosing the topic count.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.01;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const DEFAULT_MIN_COUNT: usize = 2;
pub const DEFAULT_MIN_TOKENS: usize = 3;
/// Top words per topic entering the coherence score.
pub const COHERENCE_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCorpus {
    pub docs: Vec<Vec<usize>>,
    pub vocab: Vec<String>,
    pub doc_ids: Vec<String>,
    /// Documents dropped for having fewer than `min_tokens` in-vocabulary tokens.
    pub dropped_docs: usize,
}

impl TopicCorpus {
    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }
}

/// Builds id-mapped documents. The vocabulary keeps words seen at least
/// `min_count` times in the segment; documents left with fewer than
/// `min_tokens` tokens are dropped.
pub fn build_topic_corpus<'a, I>(segment: I, min_count: usize, min_tokens: usize) -> Result<TopicCorpus>
where
    I: IntoIterator<Item = (&'a str, &'a [String])>,
{
    let segment: Vec<(&str, &[String])> = segment.into_iter().collect();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, toks) in &segment {
        for t in *toks {
            *freq.entry(t.as_str()).or_default() += 1;
        }
    }
    let vocab: Vec<String> = freq
        .iter()
        .filter(|(_, &c)| c >= min_count)
        .map(|(w, _)| w.to_string())
        .collect();
    let index: HashMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut docs = Vec::new();
    let mut doc_ids = Vec::new();
    let mut dropped_docs = 0;
    for (id, toks) in &segment {
        let ids: Vec<usize> = toks.iter().filter_map(|t| index.get(t.as_str()).copied()).collect();
        if ids.len() < min_tokens.max(1) {
            dropped_docs += 1;
            continue;
        }
        docs.push(ids);
        doc_ids.push(id.to_string());
    }
    if docs.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no document has {min_tokens} or more tokens with frequency >= {min_count} \
             ({dropped_docs} dropped)"
        )));
    }
    Ok(TopicCorpus {
        docs,
        vocab,
        doc_ids,
        dropped_docs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Document-topic smoothing; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize, seed: u64) -> Self {
        LdaParams {
            k,
            alpha: None,
            beta: DEFAULT_BETA,
            iterations: DEFAULT_ITERATIONS,
            seed,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub k: usize,
    /// `k x V` topic-word distributions.
    pub phi: Vec<Vec<f64>>,
    /// `D x k` document-topic distributions.
    pub theta: Vec<Vec<f64>>,
    /// Topic of every token, shaped like the corpus documents.
    pub assignments: Vec<Vec<usize>>,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocab: Vec<String>,
    pub doc_lengths: Vec<usize>,
    /// Joint log-likelihood `ln p(w | z)` after each iteration.
    pub log_likelihood: Vec<f64>,
}

/// Collapsed Gibbs sampler state. [`lda_fit`] drives it to completion; it is
/// exposed so callers can inspect the count matrices between sweeps.
pub struct GibbsSampler<'c> {
    corpus: &'c TopicCorpus,
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    rng: ChaCha8Rng,
    z: Vec<Vec<usize>>,
    doc_topic: Vec<Vec<u32>>,
    topic_word: Vec<Vec<u32>>,
    topic_total: Vec<u64>,
    weights: Vec<f64>,
    iterations_done: usize,
    log_likelihood: Vec<f64>,
}

impl<'c> GibbsSampler<'c> {
    /// Assigns every token a uniformly random topic.
    pub fn new(corpus: &'c TopicCorpus, params: &LdaParams) -> Result<Self> {
        let k = params.k;
        if k == 0 {
            return Err(Error::InvalidArgument("topic count must be >= 1".into()));
        }
        if k > corpus.total_tokens() {
            return Err(Error::InvalidArgument(format!(
                "topic count {k} exceeds the corpus token count {}",
                corpus.total_tokens()
            )));
        }
        let alpha = params.alpha();
        if !(alpha > 0.0 && params.beta > 0.0) {
            return Err(Error::InvalidArgument("alpha and beta must be positive".into()));
        }
        let v = corpus.vocab_size();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut doc_topic = vec![vec![0u32; k]; corpus.docs.len()];
        let mut topic_word = vec![vec![0u32; v]; k];
        let mut topic_total = vec![0u64; k];
        let mut z = Vec::with_capacity(corpus.docs.len());
        for (d, doc) in corpus.docs.iter().enumerate() {
            let zd: Vec<usize> = doc
                .iter()
                .map(|&w| {
                    let t = rng.random_range(0..k);
                    doc_topic[d][t] += 1;
                    topic_word[t][w] += 1;
                    topic_total[t] += 1;
                    t
                })
                .collect();
            z.push(zd);
        }
        Ok(GibbsSampler {
            corpus,
            k,
            alpha,
            beta: params.beta,
            seed: params.seed,
            rng,
            z,
            doc_topic,
            topic_word,
            topic_total,
            weights: vec![0.0; k],
            iterations_done: 0,
            log_likelihood: Vec::new(),
        })
    }

    /// One pass over every token, resampling its topic from
    /// `(n_dk + alpha) (n_kw + beta) / (n_k + V beta)` with the token removed.
    pub fn sweep(&mut self) {
        let vbeta = self.corpus.vocab_size() as f64 * self.beta;
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                let old = self.z[d][i];
                self.doc_topic[d][old] -= 1;
                self.topic_word[old][w] -= 1;
                self.topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..self.k {
                    let p = (self.doc_topic[d][t] as f64 + self.alpha)
                        * (self.topic_word[t][w] as f64 + self.beta)
                        / (self.topic_total[t] as f64 + vbeta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(self.k - 1);

                self.z[d][i] = new;
                self.doc_topic[d][new] += 1;
                self.topic_word[new][w] += 1;
                self.topic_total[new] += 1;
            }
        }
        self.iterations_done += 1;
        let ll = self.log_likelihood();
        self.log_likelihood.push(ll);
    }

    /// `ln p(w | z)` with the topic-word distributions integrated out.
    pub fn log_likelihood(&self) -> f64 {
        let v = self.corpus.vocab_size() as f64;
        let mut ll = self.k as f64 * (ln_gamma(v * self.beta) - v * ln_gamma(self.beta));
        for t in 0..self.k {
            for &c in &self.topic_word[t] {
                if c > 0 {
                    ll += ln_gamma(c as f64 + self.beta);
                }
            }
            let zeros = self.topic_word[t].iter().filter(|&&c| c == 0).count() as f64;
            ll += zeros * ln_gamma(self.beta);
            ll -= ln_gamma(self.topic_total[t] as f64 + v * self.beta);
        }
        ll
    }

    pub fn iterations_done(&self) -> usize {
        self.iterations_done
    }

    pub fn doc_topic_counts(&self) -> &[Vec<u32>] {
        &self.doc_topic
    }

    pub fn topic_word_counts(&self) -> &[Vec<u32>] {
        &self.topic_word
    }

    pub fn topic_totals(&self) -> &[u64] {
        &self.topic_total
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.z
    }

    /// Checks that all count tables agree with the assignments and each other.
    pub fn check_consistency(&self) -> std::result::Result<(), String> {
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            let s: u64 = self.doc_topic[d].iter().map(|&c| c as u64).sum();
            if s != doc.len() as u64 {
                return Err(format!("doc {d}: topic counts sum to {s}, length {}", doc.len()));
            }
        }
        for t in 0..self.k {
            let s: u64 = self.topic_word[t].iter().map(|&c| c as u64).sum();
            if s != self.topic_total[t] {
                return Err(format!("topic {t}: word counts sum to {s}, total {}", self.topic_total[t]));
            }
        }
        let grand: u64 = self.topic_total.iter().sum();
        if grand != self.corpus.total_tokens() as u64 {
            return Err(format!("topic totals sum to {grand}, corpus has {}", self.corpus.total_tokens()));
        }
        let mut recount = vec![vec![0u32; self.corpus.vocab_size()]; self.k];
        for (d, doc) in self.corpus.docs.iter().enumerate() {
            for (i, &w) in doc.iter().enumerate() {
                recount[self.z[d][i]][w] += 1;
            }
        }
        if recount != self.topic_word {
            return Err("topic-word counts disagree with assignments".into());
        }
        Ok(())
    }

    /// Smoothed point estimates from the current sample.
    pub fn finish(self) -> TopicModel {
        let v = self.corpus.vocab_size();
        let phi = self
            .topic_word
            .iter()
            .map(|row| normalized(row.iter().map(|&c| c as f64 + self.beta), v))
            .collect();
        let theta = self
            .doc_topic
            .iter()
            .map(|row| normalized(row.iter().map(|&c| c as f64 + self.alpha), self.k))
            .collect();
        TopicModel {
            k: self.k,
            phi,
            theta,
            assignments: self.z,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            iterations: self.iterations_done,
            vocab: self.corpus.vocab.clone(),
            doc_lengths: self.corpus.docs.iter().map(Vec::len).collect(),
            log_likelihood: self.log_likelihood,
        }
    }
}

fn normalized(values: impl Iterator<Item = f64>, len: usize) -> Vec<f64> {
    let mut row: Vec<f64> = Vec::with_capacity(len);
    row.extend(values);
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|x| *x /= sum);
    row
}

pub fn lda_fit(corpus: &TopicCorpus, params: &LdaParams) -> Result<TopicModel> {
    if params.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    let mut sampler = GibbsSampler::new(corpus, params)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordProb {
    pub word: String,
    pub probability: f64,
}

/// The `n` most probable words of topic `k`, ties broken lexicographically.
pub fn top_words(model: &TopicModel, k: usize, n: usize) -> Result<Vec<WordProb>> {
    top_word_ids(model, k, n).map(|ids| {
        ids.into_iter()
            .map(|w| WordProb {
                word: model.vocab[w].clone(),
                probability: model.phi[k][w],
            })
            .collect()
    })
}

fn top_word_ids(model: &TopicModel, k: usize, n: usize) -> Result<Vec<usize>> {
    if k >= model.k {
        return Err(Error::InvalidArgument(format!(
            "topic {k} out of range for {} topics",
            model.k
        )));
    }
    let row = &model.phi[k];
    let mut ids: Vec<usize> = (0..row.len()).collect();
    ids.sort_by(|&a, &b| {
        row[b]
            .total_cmp(&row[a])
            .then_with(|| model.vocab[a].cmp(&model.vocab[b]))
    });
    ids.truncate(n);
    Ok(ids)
}

/// Token-weighted corpus share of each topic.
pub fn topic_prevalence(model: &TopicModel) -> Vec<f64> {
    let total: f64 = model.doc_lengths.iter().map(|&l| l as f64).sum();
    let mut shares = vec![0.0; model.k];
    for (row, &len) in model.theta.iter().zip(&model.doc_lengths) {
        for (s, &p) in shares.iter_mut().zip(row) {
            *s += p * len as f64;
        }
    }
    shares.iter_mut().for_each(|s| *s /= total);
    shares
}

/// Document frequencies of single words and word pairs.
pub struct CoOccurrence {
    postings: Vec<Vec<u32>>,
}

impl CoOccurrence {
    pub fn new(corpus: &TopicCorpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab_size()];
        for (d, doc) in corpus.docs.iter().enumerate() {
            let mut seen: Vec<usize> = doc.clone();
            seen.sort_unstable();
            seen.dedup();
            for w in seen {
                postings[w].push(d as u32);
            }
        }
        CoOccurrence { postings }
    }

    pub fn doc_freq(&self, w: usize) -> usize {
        self.postings[w].len()
    }

    pub fn co_doc_freq(&self, a: usize, b: usize) -> usize {
        let (pa, pb) = (&self.postings[a], &self.postings[b]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Mean of `ln((D(w_i, w_j) + 1) / D(w_j))` over pairs with `j` ranked
    /// above `i`. Words are vocab ids in rank order.
    pub fn umass(&self, words: &[usize]) -> f64 {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 1..words.len() {
            for j in 0..i {
                let dj = self.doc_freq(words[j]) as f64;
                let dij = self.co_doc_freq(words[i], words[j]) as f64;
                sum += ((dij + 1.0) / dj).ln();
                pairs += 1;
            }
        }
        if pairs == 0 {
            0.0
        } else {
            sum / pairs as f64
        }
    }
}

/// Mean UMass coherence over all topics of a fitted model.
pub fn mean_coherence(model: &TopicModel, cooc: &CoOccurrence) -> f64 {
    let per_topic: Vec<f64> = (0..model.k)
        .map(|k| {
            let ids = top_word_ids(model, k, COHERENCE_TOP_N).expect("k < K");
            cooc.umass(&ids)
        })
        .collect();
    per_topic.iter().sum::<f64>() / model.k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceRow {
    pub k: usize,
    pub mean_coherence: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best_k: usize,
    pub table: Vec<CoherenceRow>,
    pub best_model: TopicModel,
}

/// Fits one model per candidate K (in parallel, candidate `i` seeded with
/// `seed + i` over the ascending candidate list) and keeps the K with the
/// highest mean coherence, ties to the smaller K.
pub fn select_k(corpus: &TopicCorpus, candidates: &[usize], base: &LdaParams) -> Result<Selection> {
    let mut ks: Vec<usize> = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return Err(Error::InvalidArgument("no candidate topic counts".into()));
    }
    let cooc = CoOccurrence::new(corpus);
    let fitted: Vec<(usize, u64, TopicModel, f64)> = ks
        .par_iter()
        .enumerate()
        .map(|(i, &k)| {
            let seed = base.seed.wrapping_add(i as u64);
            let params = LdaParams {
                k,
                alpha: base.alpha,
                seed,
                ..*base
            };
            let model = lda_fit(corpus, &params)?;
            let c = mean_coherence(&model, &cooc);
            Ok((k, seed, model, c))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, f) in fitted.iter().enumerate() {
        if f.3 > fitted[best].3 {
            best = i;
        }
    }
    let table = fitted
        .iter()
        .map(|(k, seed, _, c)| CoherenceRow {
            k: *k,
            mean_coherence: *c,
            seed: *seed,
        })
        .collect();
    let best_model = fitted.into_iter().nth(best).expect("non-empty").2;
    Ok(Selection {
        best_k: best_model.k,
        table,
        best_model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(docs: &[&[&str]], min_count: usize, min_tokens: usize) -> Result<TopicCorpus> {
        let owned: Vec<(String, Vec<String>)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (format!("d{i}"), d.iter().map(|s| s.to_string()).collect()))
            .collect();
        build_topic_corpus(owned.iter().map(|(id, t)| (id.as_str(), t.as_slice())), min_count, min_tokens)
    }

    #[test]
    fn corpus_building() {
        let c = corpus(&[&["a", "b", "c"], &["a", "b", "c"]], 1, 1).unwrap();
        assert_eq!(c.vocab, ["a", "b", "c"]);
        let c = corpus(&[&["a", "b", "x"], &["a", "b", "y"]], 2, 1).unwrap();
        assert_eq!(c.vocab, ["a", "b"]);
        assert_eq!(c.docs, vec![vec![0, 1], vec![0, 1]]);
        let c = corpus(&[&["a", "b", "x"], &["a"], &["a", "b"]], 1, 2).unwrap();
        assert_eq!(c.dropped_docs, 1);
        assert_eq!(c.doc_ids, ["d0", "d2"]);
        assert!(matches!(corpus(&[&["a"], &["b"]], 1, 3), Err(Error::EmptyCorpus(_))));
    }

    #[test]
    fn single_topic_is_smoothed_unigram() {
        let c = corpus(&[&["a", "b", "a"], &["c", "a", "b"]], 1, 1).unwrap();
        let m = lda_fit(&c, &LdaParams { iterations: 5, ..LdaParams::new(1, 3) }).unwrap();
        for row in &m.theta {
            assert_eq!(row, &vec![1.0]);
        }
        let n = 6.0;
        let v = 3.0;
        let expect = [(3.0 + 0.01) / (n + v * 0.01), (2.0 + 0.01) / (n + v * 0.01), (1.0 + 0.01) / (n + v * 0.01)];
        for (p, e) in m.phi[0].iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
        assert_eq!(topic_prevalence(&m), vec![1.0]);
    }

    #[test]
    fn too_many_topics_rejected() {
        let c = corpus(&[&["a", "b"]], 1, 1).unwrap();
        assert!(lda_fit(&c, &LdaParams::new(3, 0)).is_err());
        assert!(lda_fit(&c, &LdaParams { iterations: 0, ..LdaParams::new(1, 0) }).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let c = corpus(&[&["a", "b", "c", "d"], &["a", "c", "e", "f"], &["b", "d", "f", "e"]], 1, 1).unwrap();
        let p = LdaParams { iterations: 30, ..LdaParams::new(2, 42) };
        let m1 = lda_fit(&c, &p).unwrap();
        let m2 = lda_fit(&c, &p).unwrap();
        assert_eq!(m1.assignments, m2.assignments);
        assert_eq!(m1.phi, m2.phi);
    }

    #[test]
    fn counts_stay_consistent() {
        let c = corpus(&[&["a", "b", "c", "d"], &["a", "c", "e", "f"], &["b", "d", "f", "e"]], 1, 1).unwrap();
        let mut s = GibbsSampler::new(&c, &LdaParams::new(3, 1)).unwrap();
        s.check_consistency().unwrap();
        for _ in 0..10 {
            s.sweep();
            s.check_consistency().unwrap();
        }
    }

    #[test]
    fn top_words_ordering() {
        let c = corpus(&[&["b", "a", "c"]], 1, 1).unwrap();
        let m = lda_fit(&c, &LdaParams { iterations: 2, ..LdaParams::new(1, 0) }).unwrap();
        let words: Vec<String> = top_words(&m, 0, 10).unwrap().into_iter().map(|w| w.word).collect();
        assert_eq!(words, ["a", "b", "c"]);
        assert_eq!(top_words(&m, 0, 2).unwrap().len(), 2);
        assert!(top_words(&m, 1, 2).is_err());
    }

    #[test]
    fn umass_maximal_when_always_co_occurring() {
        let c = corpus(&[&["a", "b", "x"], &["a", "b", "y"], &["a", "b", "x", "y"]], 1, 1).unwrap();
        let cooc = CoOccurrence::new(&c);
        // a, b co-occur in every doc: ln((3 + 1) / 3) > 0 is the smoothed ceiling
        let together = cooc.umass(&[0, 1]);
        let apart = cooc.umass(&[2, 3]);
        assert!((together - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!(together > apart);
        assert_eq!(cooc.co_doc_freq(2, 3), 1);
    }

    #[test]
    fn select_single_candidate() {
        let c = corpus(&[&["a", "b", "c", "d"], &["a", "c", "e", "f"], &["b", "d", "f", "e"]], 1, 1).unwrap();
        let s = select_k(&c, &[2], &LdaParams { iterations: 10, ..LdaParams::new(2, 0) }).unwrap();
        assert_eq!(s.best_k, 2);
        assert_eq!(s.table.len(), 1);
        assert!(select_k(&c, &[], &LdaParams::new(2, 0)).is_err());
    }
}
