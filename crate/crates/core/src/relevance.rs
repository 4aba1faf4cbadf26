//! Two-stage keyword relevance screen: a post is kept when it contains at
//! least one DEI keyword and, among those, at least one transportation keyword.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use once_cell::sync::Lazy;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::{clean_text, CleanPost, Stopwords};
use crate::error::{Error, Result};

static BUNDLED_DEI: &str = include_str!("../data/dei_keywords.txt");
static BUNDLED_TRANSPORT: &str = include_str!("../data/transport_keywords.txt");

static STATED_COUNT_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"stated count:\s*(\d+)").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordList {
    pub name: String,
    pub words: BTreeSet<String>,
    /// Count printed in the list's source, if the file declares one. Not validated.
    pub stated_count: Option<usize>,
    /// Entries dropped on load because they repeat an earlier entry.
    pub duplicates: Vec<String>,
}

impl KeywordList {
    /// Parses a keyword file: one keyword per line, `#` comments. A comment of
    /// the form `stated count: N` is kept as label metadata.
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        let mut duplicates = Vec::new();
        let mut stated_count = None;
        for (i, line) in text.lines().enumerate() {
            let (body, comment) = match line.split_once('#') {
                Some((b, c)) => (b, Some(c)),
                None => (line, None),
            };
            if let Some(caps) = comment.and_then(|c| STATED_COUNT_RE.captures(c)) {
                stated_count = caps[1].parse().ok();
            }
            let word = body.trim();
            if word.is_empty() {
                continue;
            }
            let normalized = clean_text(word);
            if normalized != word.to_lowercase() || normalized.contains(' ') {
                return Err(Error::Keywords {
                    name: name.into(),
                    reason: format!("line {}: `{word}` is not a single clean token", i + 1),
                });
            }
            if !words.insert(normalized.clone()) {
                duplicates.push(normalized);
            }
        }
        if words.is_empty() {
            return Err(Error::Keywords {
                name: name.into(),
                reason: "no keywords".into(),
            });
        }
        if !duplicates.is_empty() {
            log::warn!(
                "keyword list {name}: dropped duplicate entries {}",
                duplicates.join(", ")
            );
        }
        Ok(KeywordList {
            name: name.into(),
            words,
            stated_count,
            duplicates,
        })
    }

    pub fn bundled_dei() -> Self {
        Self::parse("dei", BUNDLED_DEI).expect("bundled DEI list is valid")
    }

    pub fn bundled_transport() -> Self {
        Self::parse("transport", BUNDLED_TRANSPORT).expect("bundled transport list is valid")
    }

    pub fn from_words<I, S>(name: &str, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let text: String = words
            .into_iter()
            .map(|w| format!("{}\n", w.as_ref()))
            .collect();
        Self::parse(name, &text)
    }

    /// Keywords the stopword list would remove before matching.
    pub fn shadowed_by<'a>(&'a self, stopwords: &'a Stopwords) -> impl Iterator<Item = &'a str> + 'a {
        self.words
            .iter()
            .map(String::as_str)
            .filter(|w| stopwords.contains(w))
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Whole-token equality.
    #[default]
    Token,
    /// A token containing a keyword anywhere matches (sensitivity analysis only).
    Substring,
}

impl FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "token" => Ok(MatchMode::Token),
            "substring" => Ok(MatchMode::Substring),
            other => Err(Error::InvalidArgument(format!(
                "match mode must be `token` or `substring`, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Token => "token",
            MatchMode::Substring => "substring",
        })
    }
}

pub fn matches(tokens: &[String], kw: &KeywordList) -> bool {
    matches_with(tokens, kw, MatchMode::Token)
}

pub fn matches_with(tokens: &[String], kw: &KeywordList, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Token => tokens.iter().any(|t| kw.words.contains(t)),
        MatchMode::Substring => tokens
            .iter()
            .any(|t| kw.words.iter().any(|w| t.contains(w.as_str()))),
    }
}

/// `transport` is only evaluated for posts that passed the DEI stage, so it
/// reads "passed stage 2" and `relevant == transport`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceTag {
    pub dei: bool,
    pub transport: bool,
    pub relevant: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub input: usize,
    pub stage1_kept: usize,
    pub stage2_kept: usize,
}

impl StageCounts {
    /// Retained share of the input, in percent.
    pub fn ratio_pct(&self) -> f64 {
        if self.input == 0 {
            0.0
        } else {
            100.0 * self.stage2_kept as f64 / self.input as f64
        }
    }
}

impl fmt::Display for StageCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stage1_kept={} stage2_kept={} ratio={:.2}",
            self.stage1_kept,
            self.stage2_kept,
            self.ratio_pct()
        )
    }
}

#[derive(Debug, Clone)]
pub struct Filtered {
    /// One tag per input post, in input order.
    pub tags: Vec<RelevanceTag>,
    pub retained: Vec<CleanPost>,
    pub counts: StageCounts,
}

#[derive(Debug, Clone)]
pub struct RelevanceFilter {
    pub dei: KeywordList,
    pub transport: KeywordList,
    pub mode: MatchMode,
}

impl RelevanceFilter {
    pub fn new(dei: KeywordList, transport: KeywordList, mode: MatchMode) -> Self {
        RelevanceFilter { dei, transport, mode }
    }

    pub fn bundled() -> Self {
        Self::new(
            KeywordList::bundled_dei(),
            KeywordList::bundled_transport(),
            MatchMode::Token,
        )
    }

    pub fn tag(&self, tokens: &[String]) -> RelevanceTag {
        let dei = matches_with(tokens, &self.dei, self.mode);
        let transport = dei && matches_with(tokens, &self.transport, self.mode);
        RelevanceTag {
            dei,
            transport,
            relevant: transport,
        }
    }

    pub fn tag_and_filter(&self, corpus: &[CleanPost]) -> Filtered {
        let tags: Vec<RelevanceTag> = corpus.par_iter().map(|p| self.tag(&p.tokens)).collect();
        let retained: Vec<CleanPost> = corpus
            .iter()
            .zip(&tags)
            .filter(|(_, t)| t.relevant)
            .map(|(p, _)| p.clone())
            .collect();
        let counts = StageCounts {
            input: corpus.len(),
            stage1_kept: tags.iter().filter(|t| t.dei).count(),
            stage2_kept: retained.len(),
        };
        Filtered {
            tags,
            retained,
            counts,
        }
    }
}
