//! Lexicon valence scoring.
//!
//! The compound score is the sum `S` of the valences of all lexicon hits,
//! normalized as `S / sqrt(S^2 + 15)`. With the default settings a post is
//! negative below zero, positive above zero and neutral exactly at zero.

use std::collections::HashMap;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CleanPost;
use crate::error::{Error, Result};

static BUNDLED_LEXICON: &str = include_str!("../data/vader_lexicon.txt");

/// Normalization constant in `S / sqrt(S^2 + ALPHA)`.
pub const ALPHA: f64 = 15.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: HashMap<String, f64>,
}

impl Lexicon {
    /// Reads a tab-separated lexicon: token, mean valence, then any number of
    /// ignored columns. Tokens are lowercased; on duplicates the last line wins.
    pub fn parse<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = HashMap::new();
        let mut duplicates = 0usize;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split('\t');
            let token = cols.next().unwrap_or("").trim();
            if token.is_empty() {
                return Err(Error::Lexicon(format!("line {}: empty token", i + 1)));
            }
            let raw = cols
                .next()
                .ok_or_else(|| Error::Lexicon(format!("line {}: missing valence column", i + 1)))?;
            let valence: f64 = raw.trim().parse().map_err(|_| {
                Error::Lexicon(format!("line {}: valence `{}` is not numeric", i + 1, raw.trim()))
            })?;
            if !valence.is_finite() {
                return Err(Error::Lexicon(format!("line {}: valence is not finite", i + 1)));
            }
            if entries.insert(token.to_lowercase(), valence).is_some() {
                duplicates += 1;
            }
        }
        if entries.is_empty() {
            return Err(Error::Lexicon("lexicon is empty".into()));
        }
        if duplicates > 0 {
            log::warn!("lexicon: {duplicates} duplicate token(s) after lowercasing, last entry kept");
        }
        Ok(Lexicon { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file))
    }

    /// The published VADER lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON.as_bytes()).expect("bundled lexicon is valid")
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Lexicon {
            entries: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.entries.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentClass {
    Negative,
    Neutral,
    Positive,
}

impl SentimentClass {
    pub const ALL: [SentimentClass; 3] = [
        SentimentClass::Negative,
        SentimentClass::Neutral,
        SentimentClass::Positive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SentimentClass::Negative => "negative",
            SentimentClass::Neutral => "neutral",
            SentimentClass::Positive => "positive",
        }
    }
}

impl fmt::Display for SentimentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SentimentClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(SentimentClass::Negative),
            "neutral" => Ok(SentimentClass::Neutral),
            "positive" => Ok(SentimentClass::Positive),
            other => Err(Error::InvalidArgument(format!("unknown sentiment segment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub compound: f64,
    pub class: SentimentClass,
    pub hit_count: usize,
}

/// Maps a valence sum into (-1, 1).
///
/// For very large `|sum|` the quotient rounds to ±1 in f64; it is pinned to
/// the adjacent representable value so the open interval holds.
pub fn normalize(sum: f64) -> f64 {
    let c = sum / (sum * sum + ALPHA).sqrt();
    if c >= 1.0 {
        1.0f64.next_down()
    } else if c <= -1.0 {
        (-1.0f64).next_up()
    } else {
        c
    }
}

/// Three-way class with a zero-width neutral band.
pub fn classify(compound: f64) -> Result<SentimentClass> {
    classify_with_band(compound, 0.0)
}

/// `|compound| <= band` is neutral.
pub fn classify_with_band(compound: f64, band: f64) -> Result<SentimentClass> {
    if !(-1.0..=1.0).contains(&compound) {
        return Err(Error::InvalidArgument(format!(
            "compound score {compound} outside [-1, 1]"
        )));
    }
    if !(0.0..1.0).contains(&band) {
        return Err(Error::InvalidArgument(format!("neutral band {band} outside [0, 1)")));
    }
    Ok(if compound.abs() <= band {
        SentimentClass::Neutral
    } else if compound < 0.0 {
        SentimentClass::Negative
    } else {
        SentimentClass::Positive
    })
}

// Valence-shifting rules, applied only with `heuristics` on. Capitalization and
// punctuation emphasis are gone after cleaning, so only word-level rules remain.
const BOOST_INCR: f64 = 0.293;
const BOOST_DECR: f64 = -0.293;
const NEGATION_SCALAR: f64 = -0.74;

const BOOSTERS: &[&str] = &[
    "absolutely", "amazingly", "awfully", "completely", "considerably", "decidedly", "deeply",
    "effing", "enormously", "entirely", "especially", "exceptionally", "extremely", "fabulously",
    "flipping", "fucking", "fully", "greatly", "hella", "highly", "hugely", "incredibly",
    "intensely", "majorly", "more", "most", "particularly", "purely", "quite", "really",
    "remarkably", "so", "substantially", "thoroughly", "totally", "tremendously", "uber",
    "unbelievably", "unusually", "utterly", "very",
];

const DAMPENERS: &[&str] = &[
    "almost", "barely", "hardly", "less", "little", "marginally", "occasionally", "partly",
    "scarcely", "slightly", "somewhat",
];

const NEGATIONS: &[&str] = &[
    "aint", "arent", "cannot", "cant", "couldnt", "darent", "didnt", "doesnt", "dont", "hadnt",
    "hasnt", "havent", "isnt", "mightnt", "mustnt", "neither", "never", "none", "nope", "nor",
    "not", "nothing", "nowhere", "oughtnt", "shant", "shouldnt", "uhuh", "wasnt", "werent",
    "without", "wont", "wouldnt", "rarely", "seldom", "despite",
];

fn is_negation(tok: &str) -> bool {
    NEGATIONS.contains(&tok) || tok.ends_with("n't")
}

fn booster_value(tok: &str) -> f64 {
    if BOOSTERS.contains(&tok) {
        BOOST_INCR
    } else if DAMPENERS.contains(&tok) {
        BOOST_DECR
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct Scorer {
    pub lexicon: Lexicon,
    pub heuristics: bool,
    pub neutral_band: f64,
}

impl Scorer {
    pub fn new(lexicon: Lexicon) -> Self {
        Scorer {
            lexicon,
            heuristics: false,
            neutral_band: 0.0,
        }
    }

    pub fn with_heuristics(mut self, on: bool) -> Self {
        self.heuristics = on;
        self
    }

    pub fn with_neutral_band(mut self, band: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&band) {
            return Err(Error::InvalidArgument(format!("neutral band {band} outside [0, 1)")));
        }
        self.neutral_band = band;
        Ok(self)
    }

    /// Sum of lexicon valences and the number of hits.
    pub fn valence_sum(&self, tokens: &[String]) -> (f64, usize) {
        if self.heuristics {
            return self.shifted_sum(tokens);
        }
        tokens
            .iter()
            .filter_map(|t| self.lexicon.valence(t))
            .fold((0.0, 0), |(s, n), v| (s + v, n + 1))
    }

    fn shifted_sum(&self, tokens: &[String]) -> (f64, usize) {
        let but_at = tokens.iter().position(|t| t == "but");
        let mut sum = 0.0;
        let mut hits = 0;
        for (i, tok) in tokens.iter().enumerate() {
            let Some(mut v) = self.lexicon.valence(tok) else {
                continue;
            };
            if BOOSTERS.contains(&tok.as_str()) || DAMPENERS.contains(&tok.as_str()) {
                // boosters shift their neighbour instead of scoring themselves
                continue;
            }
            hits += 1;
            for dist in 1..=3usize {
                let Some(j) = i.checked_sub(dist) else { break };
                let prev = tokens[j].as_str();
                let mut b = booster_value(prev);
                if b != 0.0 {
                    b *= [1.0, 0.95, 0.9][dist - 1];
                    v += if v < 0.0 { -b } else { b };
                }
            }
            if (1..=3).any(|d| i.checked_sub(d).is_some_and(|j| is_negation(&tokens[j]))) {
                v *= NEGATION_SCALAR;
            }
            match but_at {
                Some(b) if i < b => v *= 0.5,
                Some(b) if i > b => v *= 1.5,
                _ => {}
            }
            sum += v;
        }
        (sum, hits)
    }

    pub fn score(&self, tokens: &[String]) -> SentimentResult {
        let (sum, hit_count) = self.valence_sum(tokens);
        let compound = normalize(sum);
        let class = classify_with_band(compound, self.neutral_band)
            .expect("normalized score and validated band");
        SentimentResult {
            compound,
            class,
            hit_count,
        }
    }
}

/// Convenience wrapper over [`Scorer::score`] with default settings.
pub fn score(tokens: &[String], lex: &Lexicon) -> SentimentResult {
    let (sum, hit_count) = tokens
        .iter()
        .filter_map(|t| lex.valence(t))
        .fold((0.0, 0), |(s, n), v| (s + v, n + 1));
    let compound = normalize(sum);
    SentimentResult {
        compound,
        class: classify(compound).expect("normalized score"),
        hit_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPost {
    pub post: CleanPost,
    pub sentiment: SentimentResult,
}

pub fn score_corpus(corpus: &[CleanPost], scorer: &Scorer) -> Vec<ScoredPost> {
    corpus
        .par_iter()
        .map(|p| ScoredPost {
            post: p.clone(),
            sentiment: scorer.score(&p.tokens),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Segments<T> {
    pub negative: Vec<T>,
    pub neutral: Vec<T>,
    pub positive: Vec<T>,
}

impl<T> Segments<T> {
    pub fn get(&self, class: SentimentClass) -> &[T] {
        match class {
            SentimentClass::Negative => &self.negative,
            SentimentClass::Neutral => &self.neutral,
            SentimentClass::Positive => &self.positive,
        }
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.negative.len(), self.neutral.len(), self.positive.len())
    }
}

/// Order-preserving partition by class.
pub fn segment_by<T>(items: Vec<T>, class_of: impl Fn(&T) -> SentimentClass) -> Segments<T> {
    let mut out = Segments {
        negative: Vec::new(),
        neutral: Vec::new(),
        positive: Vec::new(),
    };
    for item in items {
        match class_of(&item) {
            SentimentClass::Negative => out.negative.push(item),
            SentimentClass::Neutral => out.neutral.push(item),
            SentimentClass::Positive => out.positive.push(item),
        }
    }
    out
}

pub fn segment(corpus: Vec<ScoredPost>) -> Segments<ScoredPost> {
    segment_by(corpus, |p| p.sentiment.class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lexicon_lines() {
        let lex = Lexicon::parse("good\t1.9\n".as_bytes()).unwrap();
        assert_eq!(lex.valence("good"), Some(1.9));
        let lex = Lexicon::parse("good\t1.9\t0.5\t[2,2,1]\r\n".as_bytes()).unwrap();
        assert_eq!(lex.valence("good"), Some(1.9));
        let lex = Lexicon::parse("good\t1.0\nGood\t2.0\n".as_bytes()).unwrap();
        assert_eq!(lex.valence("good"), Some(2.0));
        assert_eq!(lex.len(), 1);
    }

    #[test]
    fn lexicon_errors() {
        assert!(matches!(Lexicon::parse("".as_bytes()), Err(Error::Lexicon(_))));
        assert!(Lexicon::parse("good\tgreat\n".as_bytes()).is_err());
        assert!(Lexicon::parse("good\n".as_bytes()).is_err());
        assert!(Lexicon::parse("good\tNaN\n".as_bytes()).is_err());
        assert!(Lexicon::load(Path::new("/nonexistent/lexicon.txt")).is_err());
    }

    #[test]
    fn bundled_lexicon_loads() {
        let lex = Lexicon::bundled();
        assert!(lex.len() > 7000);
        assert_eq!(lex.valence("good"), Some(1.9));
        assert!(lex.valence("racism").unwrap() < 0.0);
    }

    #[test]
    fn score_examples() {
        let lex = Lexicon::from_pairs([("good", 2.0), ("bad", -3.0), ("great", 3.0)]);
        let r = score(&toks(&["bus", "late"]), &lex);
        assert_eq!((r.compound, r.class, r.hit_count), (0.0, SentimentClass::Neutral, 0));

        let r = score(&toks(&["good"]), &lex);
        assert!((r.compound - 2.0 / 19f64.sqrt()).abs() < 1e-15);
        assert!((r.compound - 0.4588).abs() < 5e-5);
        assert_eq!(r.class, SentimentClass::Positive);

        let r = score(&toks(&["great", "bad"]), &lex);
        assert_eq!(r.compound, 0.0);
        assert_eq!(r.class, SentimentClass::Neutral);
        assert_eq!(r.hit_count, 2);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.892).unwrap(), SentimentClass::Positive);
        assert_eq!(classify(-0.498).unwrap(), SentimentClass::Negative);
        assert_eq!(classify(-0.8689).unwrap(), SentimentClass::Negative);
        assert_eq!(classify(0.0).unwrap(), SentimentClass::Neutral);
        assert_eq!(classify(-0.0).unwrap(), SentimentClass::Neutral);
        assert!(classify(1.5).is_err());
        assert!(classify(f64::NAN).is_err());
        assert_eq!(classify_with_band(0.04, 0.05).unwrap(), SentimentClass::Neutral);
        assert_eq!(classify_with_band(-0.06, 0.05).unwrap(), SentimentClass::Negative);
    }

    #[test]
    fn normalize_saturates_inside_open_interval() {
        assert!(normalize(1e12) < 1.0);
        assert!(normalize(-1e12) > -1.0);
        assert!(normalize(f64::MAX.sqrt()) < 1.0);
    }

    #[test]
    fn heuristics_shift_valence() {
        let lex = Lexicon::from_pairs([("good", 1.9), ("bad", -2.5), ("very", 0.0)]);
        let plain = Scorer::new(lex.clone());
        let h = Scorer::new(lex).with_heuristics(true);
        let neg = h.score(&toks(&["not", "good"]));
        assert!(neg.compound < 0.0);
        assert!((neg.compound - normalize(1.9 * NEGATION_SCALAR)).abs() < 1e-12);
        let boosted = h.score(&toks(&["very", "good"]));
        assert!(boosted.compound > plain.score(&toks(&["good"])).compound);
        let but = h.score(&toks(&["good", "but", "bad"]));
        assert!((but.compound - normalize(1.9 * 0.5 - 2.5 * 1.5)).abs() < 1e-12);
        assert_eq!(h.score(&toks(&["isn't", "bad"])).class, SentimentClass::Positive);
    }

    #[test]
    fn segments_partition() {
        let mk = |c| ScoredPost {
            post: CleanPost {
                post_id: "x".into(),
                user_id: "u".into(),
                created_at: "2020-01-01T00:00:00Z".parse().unwrap(),
                lon: 0.0,
                lat: 0.0,
                clean_text: String::new(),
                tokens: vec![],
            },
            sentiment: SentimentResult {
                compound: 0.0,
                class: c,
                hit_count: 0,
            },
        };
        use SentimentClass::*;
        let s = segment(vec![mk(Positive), mk(Negative), mk(Positive), mk(Neutral)]);
        assert_eq!(s.sizes(), (1, 1, 2));
        let s = segment(vec![mk(Neutral), mk(Neutral)]);
        assert_eq!(s.sizes(), (0, 2, 0));
        assert_eq!(segment(vec![]).sizes(), (0, 0, 0));
    }

    proptest! {
        #[test]
        fn compound_in_open_interval(sum in -1e6f64..1e6) {
            let c = normalize(sum);
            prop_assert!(c > -1.0 && c < 1.0);
            prop_assert_eq!(c.signum() == sum.signum() || sum == 0.0, true);
        }

        #[test]
        fn score_is_order_independent(mut bag in proptest::collection::vec(0usize..4, 0..12)) {
            let lex = Lexicon::from_pairs([("a", 1.5), ("b", -2.25), ("c", 0.5)]);
            let words = ["a", "b", "c", "zz"];
            let t1: Vec<String> = bag.iter().map(|&i| words[i].to_string()).collect();
            bag.reverse();
            let t2: Vec<String> = bag.iter().map(|&i| words[i].to_string()).collect();
            let (r1, r2) = (score(&t1, &lex), score(&t2, &lex));
            prop_assert!((r1.compound - r2.compound).abs() < 1e-12);
            prop_assert_eq!(r1.hit_count, r2.hit_count);
        }

        #[test]
        fn segment_sizes_sum(classes in proptest::collection::vec(0usize..3, 0..50)) {
            let items: Vec<(usize, SentimentClass)> =
                classes.iter().enumerate().map(|(i, &c)| (i, SentimentClass::ALL[c])).collect();
            let s = segment_by(items.clone(), |x| x.1);
            let (a, b, c) = s.sizes();
            prop_assert_eq!(a + b + c, items.len());
            for seg in [&s.negative, &s.neutral, &s.positive] {
                prop_assert!(seg.windows(2).all(|w| w[0].0 < w[1].0));
            }
        }
    }
}
