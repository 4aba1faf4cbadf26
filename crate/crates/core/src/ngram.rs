//! Bigram statistics, chain-rule sequence probability and class-bigram word
//! clustering.
//!
//! The clustering objective for a class map `G` is
//!
//! ```text
//! F(G) = sum_w N(w) ln N(w) + sum_{g,h} N(g,h) ln( N(g,h) / (N(g) N(h)) )
//! ```
//!
//! where `N(g,h)` counts word bigrams whose endpoints fall in classes `g`, `h`
//! and `N(g)` is the summed unigram count of class `g`. Terms with a zero
//! count contribute nothing. The exchange optimizer moves one word at a time
//! to whichever class raises `F` the most.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BigramStats {
    /// Distinct tokens, sorted.
    pub vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// Total token count.
    pub total: u64,
    pub unigram: Vec<u64>,
    /// Adjacent within-document pairs, keyed by vocab ids.
    pub bigram: BTreeMap<(usize, usize), u64>,
}

impl BigramStats {
    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn unigram_count(&self, word: &str) -> u64 {
        self.id(word).map_or(0, |i| self.unigram[i])
    }

    pub fn bigram_count(&self, v: &str, w: &str) -> u64 {
        match (self.id(v), self.id(w)) {
            (Some(a), Some(b)) => self.bigram.get(&(a, b)).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn total_bigrams(&self) -> u64 {
        self.bigram.values().sum()
    }
}

/// Counts unigrams and within-document bigrams.
pub fn count<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<BigramStats> {
    let mut uni: BTreeMap<&str, u64> = BTreeMap::new();
    for doc in docs {
        for t in doc {
            *uni.entry(t.as_ref()).or_default() += 1;
        }
    }
    if uni.is_empty() {
        return Err(Error::EmptyCorpus("no tokens to count bigrams over".into()));
    }
    let vocab: Vec<String> = uni.keys().map(|s| s.to_string()).collect();
    let index: HashMap<String, usize> = vocab.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let unigram: Vec<u64> = uni.values().copied().collect();
    let mut bigram = BTreeMap::new();
    for doc in docs {
        for pair in doc.windows(2) {
            let a = index[pair[0].as_ref()];
            let b = index[pair[1].as_ref()];
            *bigram.entry((a, b)).or_default() += 1;
        }
    }
    Ok(BigramStats {
        vocab,
        index,
        total: unigram.iter().sum(),
        unigram,
        bigram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ZeroReason {
    OutOfVocabulary(String),
    UnseenBigram(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroStep {
    pub position: usize,
    pub reason: ZeroReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceScore {
    /// `-inf` when any factor is zero.
    pub log_prob: f64,
    pub factors: Vec<f64>,
    pub first_zero: Option<ZeroStep>,
}

impl SequenceScore {
    pub fn probability(&self) -> f64 {
        self.factors.iter().product()
    }
}

/// `P(w1) * prod P(w_n | w_{n-1})` with maximum-likelihood estimates.
pub fn sequence_prob<S: AsRef<str>>(stats: &BigramStats, seq: &[S]) -> Result<SequenceScore> {
    if seq.is_empty() {
        return Err(Error::InvalidArgument("sequence must be non-empty".into()));
    }
    let mut factors = Vec::with_capacity(seq.len());
    let mut first_zero = None;
    let mut note = |pos: usize, reason: ZeroReason| {
        if first_zero.is_none() {
            first_zero = Some(ZeroStep { position: pos, reason });
        }
    };
    let ids: Vec<Option<usize>> = seq.iter().map(|w| stats.id(w.as_ref())).collect();
    match ids[0] {
        Some(i) => factors.push(stats.unigram[i] as f64 / stats.total as f64),
        None => {
            note(0, ZeroReason::OutOfVocabulary(seq[0].as_ref().to_string()));
            factors.push(0.0);
        }
    }
    for n in 1..seq.len() {
        let f = match (ids[n - 1], ids[n]) {
            (_, None) => {
                note(n, ZeroReason::OutOfVocabulary(seq[n].as_ref().to_string()));
                0.0
            }
            // history already flagged
            (None, Some(_)) => 0.0,
            (Some(v), Some(w)) => {
                let c = stats.bigram.get(&(v, w)).copied().unwrap_or(0);
                if c == 0 {
                    note(
                        n,
                        ZeroReason::UnseenBigram(seq[n - 1].as_ref().into(), seq[n].as_ref().into()),
                    );
                }
                c as f64 / stats.unigram[v] as f64
            }
        };
        factors.push(f);
    }
    let log_prob = if factors.iter().any(|&f| f == 0.0) {
        f64::NEG_INFINITY
    } else {
        factors.iter().map(|f| f.ln()).sum()
    };
    Ok(SequenceScore {
        log_prob,
        factors,
        first_zero,
    })
}

/// Bigrams by count descending, ties by `(v, w)` ascending.
pub fn top_bigrams(stats: &BigramStats, n: usize) -> Vec<(String, String, u64)> {
    let mut all: Vec<(&str, &str, u64)> = stats
        .bigram
        .iter()
        .map(|(&(a, b), &c)| (stats.vocab[a].as_str(), stats.vocab[b].as_str(), c))
        .collect();
    all.sort_by(|x, y| y.2.cmp(&x.2).then_with(|| (x.0, x.1).cmp(&(y.0, y.1))));
    all.into_iter()
        .take(n)
        .map(|(a, b, c)| (a.to_string(), b.to_string(), c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMap {
    pub num_classes: usize,
    /// Class of each vocab id.
    pub assign: Vec<usize>,
}

impl ClassMap {
    pub fn new(num_classes: usize, assign: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = assign.iter().find(|&&c| c >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "class index {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(ClassMap { num_classes, assign })
    }

    /// `(word, class)` rows in vocab order.
    pub fn rows<'a>(&'a self, stats: &'a BigramStats) -> impl Iterator<Item = (&'a str, usize)> + 'a {
        stats.vocab.iter().map(String::as_str).zip(self.assign.iter().copied())
    }
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn pair_term(count: f64, left: f64, right: f64) -> f64 {
    if count > 0.0 {
        count * (count / (left * right)).ln()
    } else {
        0.0
    }
}

fn unigram_term(stats: &BigramStats) -> f64 {
    stats.unigram.iter().map(|&c| xlogx(c as f64)).sum()
}

/// Class-bigram log-likelihood of a class map.
pub fn class_likelihood(stats: &BigramStats, cm: &ClassMap) -> Result<f64> {
    if cm.assign.len() != stats.vocab_size() {
        return Err(Error::InvalidArgument(format!(
            "class map covers {} words, vocabulary has {}",
            cm.assign.len(),
            stats.vocab_size()
        )));
    }
    let mut class_uni = vec![0u64; cm.num_classes];
    for (w, &c) in stats.unigram.iter().enumerate() {
        class_uni[cm.assign[w]] += c;
    }
    let mut class_bi: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (&(v, w), &c) in &stats.bigram {
        *class_bi.entry((cm.assign[v], cm.assign[w])).or_default() += c;
    }
    let pairs: f64 = class_bi
        .iter()
        .map(|(&(g, h), &c)| pair_term(c as f64, class_uni[g] as f64, class_uni[h] as f64))
        .sum();
    Ok(unigram_term(stats) + pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeResult {
    pub class_map: ClassMap,
    /// Objective at initialization, then after every sweep.
    pub history: Vec<f64>,
    pub sweeps: usize,
    pub moves: usize,
    pub converged: bool,
}

/// Words sorted by count descending, ties lexicographic.
fn frequency_order(stats: &BigramStats) -> Vec<usize> {
    let mut order: Vec<usize> = (0..stats.vocab_size()).collect();
    order.sort_by(|&a, &b| {
        stats.unigram[b]
            .cmp(&stats.unigram[a])
            .then_with(|| stats.vocab[a].cmp(&stats.vocab[b]))
    });
    order
}

/// Initial map: the `g - 1` most frequent words get singleton classes, the
/// rest share the last class.
pub fn initial_class_map(stats: &BigramStats, g: usize) -> ClassMap {
    let mut assign = vec![g - 1; stats.vocab_size()];
    for (class, &w) in frequency_order(stats).iter().take(g - 1).enumerate() {
        assign[w] = class;
    }
    ClassMap { num_classes: g, assign }
}

struct ExchangeState {
    g: usize,
    assign: Vec<usize>,
    class_uni: Vec<f64>,
    /// Dense `g x g` class bigram counts, row-major.
    class_bi: Vec<f64>,
    succ: Vec<Vec<(usize, f64)>>,
    pred: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    word_uni: Vec<f64>,
}

impl ExchangeState {
    fn new(stats: &BigramStats, cm: &ClassMap) -> Self {
        let g = cm.num_classes;
        let w = stats.vocab_size();
        let mut class_uni = vec![0.0; g];
        for (i, &c) in stats.unigram.iter().enumerate() {
            class_uni[cm.assign[i]] += c as f64;
        }
        let mut class_bi = vec![0.0; g * g];
        let mut succ = vec![Vec::new(); w];
        let mut pred = vec![Vec::new(); w];
        let mut self_loop = vec![0.0; w];
        for (&(a, b), &c) in &stats.bigram {
            class_bi[cm.assign[a] * g + cm.assign[b]] += c as f64;
            if a == b {
                self_loop[a] = c as f64;
            } else {
                succ[a].push((b, c as f64));
                pred[b].push((a, c as f64));
            }
        }
        ExchangeState {
            g,
            assign: cm.assign.clone(),
            class_uni,
            class_bi,
            succ,
            pred,
            self_loop,
            word_uni: stats.unigram.iter().map(|&c| c as f64).collect(),
        }
    }

    /// Counts from `word` to each class (`out`) and from each class to `word`
    /// (`inn`), excluding the self loop.
    fn word_class_counts(&self, word: usize, out: &mut [f64], inn: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        inn.iter_mut().for_each(|x| *x = 0.0);
        for &(x, c) in &self.succ[word] {
            out[self.assign[x]] += c;
        }
        for &(x, c) in &self.pred[word] {
            inn[self.assign[x]] += c;
        }
    }

    fn apply(&mut self, word: usize, class: usize, out: &[f64], inn: &[f64], sign: f64) {
        let g = self.g;
        for h in 0..g {
            if h != class {
                self.class_bi[class * g + h] += sign * out[h];
                self.class_bi[h * g + class] += sign * inn[h];
            }
        }
        self.class_bi[class * g + class] += sign * (out[class] + inn[class] + self.self_loop[word]);
        self.class_uni[class] += sign * self.word_uni[word];
    }

    /// Sum of pair terms over row and column `class`.
    fn cross_terms(&self, class: usize, extra: Option<(&[f64], &[f64], f64, f64)>) -> f64 {
        let g = self.g;
        let (out, inn, self_c, wu) = match extra {
            Some((o, i, s, u)) => (Some(o), Some(i), s, u),
            None => (None, None, 0.0, 0.0),
        };
        let nc = self.class_uni[class] + wu;
        let mut total = 0.0;
        for h in 0..g {
            if h == class {
                continue;
            }
            let row = self.class_bi[class * g + h] + out.map_or(0.0, |o| o[h]);
            let col = self.class_bi[h * g + class] + inn.map_or(0.0, |i| i[h]);
            total += pair_term(row, nc, self.class_uni[h]);
            total += pair_term(col, self.class_uni[h], nc);
        }
        let diag = self.class_bi[class * g + class]
            + out.map_or(0.0, |o| o[class])
            + inn.map_or(0.0, |i| i[class])
            + self_c;
        total + pair_term(diag, nc, nc)
    }

    /// Objective change from inserting an unassigned `word` into `class`.
    fn insertion_gain(&self, word: usize, class: usize, out: &[f64], inn: &[f64]) -> f64 {
        let after = self.cross_terms(class, Some((out, inn, self.self_loop[word], self.word_uni[word])));
        after - self.cross_terms(class, None)
    }
}

/// Greedy exchange clustering into `g` classes.
///
/// Words are visited in frequency order; each is taken out of its class and
/// put into the class with the largest objective, staying put unless another
/// class is strictly better (ties among better classes go to the lowest
/// index). Stops after a sweep without moves or after `max_sweeps` sweeps.
pub fn cluster_exchange(stats: &BigramStats, g: usize, max_sweeps: usize) -> Result<ExchangeResult> {
    let w = stats.vocab_size();
    if g == 0 || g > w {
        return Err(Error::InvalidArgument(format!(
            "class count must be in 1..={w}, got {g}"
        )));
    }
    let init = initial_class_map(stats, g);
    let mut history = vec![class_likelihood(stats, &init)?];
    if g == 1 {
        return Ok(ExchangeResult {
            class_map: init,
            history,
            sweeps: 0,
            moves: 0,
            converged: true,
        });
    }
    let tol = 1e-9 * (1.0 + stats.total as f64);
    let order = frequency_order(stats);
    let mut state = ExchangeState::new(stats, &init);
    let mut out = vec![0.0; g];
    let mut inn = vec![0.0; g];
    let mut sweeps = 0;
    let mut moves = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut moved = 0;
        for &word in &order {
            let current = state.assign[word];
            state.word_class_counts(word, &mut out, &mut inn);
            state.apply(word, current, &out, &inn, -1.0);
            let stay = state.insertion_gain(word, current, &out, &inn);
            let mut best = current;
            let mut best_gain = stay;
            for c in 0..g {
                if c == current {
                    continue;
                }
                let gain = state.insertion_gain(word, c, &out, &inn);
                let better_than_stay = gain > stay + tol;
                if better_than_stay && (best == current || gain > best_gain + tol) {
                    best = c;
                    best_gain = gain;
                }
            }
            state.apply(word, best, &out, &inn, 1.0);
            if best != current {
                state.assign[word] = best;
                moved += 1;
            }
        }
        moves += moved;
        let cm = ClassMap {
            num_classes: g,
            assign: state.assign.clone(),
        };
        history.push(class_likelihood(stats, &cm)?);
        if moved == 0 {
            converged = true;
            break;
        }
    }
    Ok(ExchangeResult {
        class_map: ClassMap {
            num_classes: g,
            assign: state.assign,
        },
        history,
        sweeps,
        moves,
        converged,
    })
}
