//! Aggregates: sentiment shares, per-tract rollups, demographic distributions,
//! GeoJSON overlays and the final report bundle.
//!
//! Percentages come from integer counts, rounded half-up to one decimal.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geodemo::{classify_tract, DemoClass, Dimension, TractClassification, TractDemographics, TractPolygon};
use crate::ngram::ExchangeResult;
use crate::record::PostRecord;
use crate::sentiment::SentimentClass;
use crate::topics::{CoherenceRow, WordProb};

/// `100 * count / total` rounded half-up to one decimal; 0 for an empty total.
pub fn percent(count: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (c, t) = (count as u128, total as u128);
    let tenths = (2000 * c + t) / (2 * t);
    tenths as f64 / 10.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SentimentDistribution {
    pub total: usize,
    pub n_negative: usize,
    pub n_neutral: usize,
    pub n_positive: usize,
    pub pct_negative: f64,
    pub pct_neutral: f64,
    pub pct_positive: f64,
    pub empty: bool,
}

pub fn sentiment_distribution<I>(classes: I) -> SentimentDistribution
where
    I: IntoIterator<Item = SentimentClass>,
{
    let mut d = SentimentDistribution::default();
    for c in classes {
        d.total += 1;
        match c {
            SentimentClass::Negative => d.n_negative += 1,
            SentimentClass::Neutral => d.n_neutral += 1,
            SentimentClass::Positive => d.n_positive += 1,
        }
    }
    d.pct_negative = percent(d.n_negative, d.total);
    d.pct_neutral = percent(d.n_neutral, d.total);
    d.pct_positive = percent(d.n_positive, d.total);
    d.empty = d.total == 0;
    d
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub n_negative: usize,
    pub n_neutral: usize,
    pub n_positive: usize,
}

impl ClassCounts {
    pub fn add(&mut self, c: SentimentClass) {
        match c {
            SentimentClass::Negative => self.n_negative += 1,
            SentimentClass::Neutral => self.n_neutral += 1,
            SentimentClass::Positive => self.n_positive += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.n_negative + self.n_neutral + self.n_positive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractRollup {
    pub geoid: String,
    pub n_negative: usize,
    pub n_neutral: usize,
    pub n_positive: usize,
    /// Both negative and positive posts originate here.
    pub highly_sensitive: bool,
    /// `None` when the tract has no demographics record.
    pub classification: Option<TractClassification>,
}

impl TractRollup {
    pub fn total(&self) -> usize {
        self.n_negative + self.n_neutral + self.n_positive
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RollupSummary {
    /// Sorted by GEOID.
    pub rollups: Vec<TractRollup>,
    /// Posts outside every tract.
    pub unassigned: ClassCounts,
    pub tracts_total: usize,
    pub tracts_with_negative: usize,
    pub tracts_with_neutral: usize,
    pub tracts_with_positive: usize,
    pub highly_sensitive: usize,
}

impl RollupSummary {
    pub fn total_posts(&self) -> usize {
        self.rollups.iter().map(TractRollup::total).sum::<usize>() + self.unassigned.total()
    }
}

/// One rollup per distinct GEOID among the posts.
pub fn tract_rollup<'a, I>(posts: I, demographics: &BTreeMap<String, TractDemographics>) -> RollupSummary
where
    I: IntoIterator<Item = (Option<&'a str>, SentimentClass)>,
{
    let mut per_tract: BTreeMap<&str, ClassCounts> = BTreeMap::new();
    let mut unassigned = ClassCounts::default();
    for (geoid, class) in posts {
        match geoid {
            Some(g) => per_tract.entry(g).or_default().add(class),
            None => unassigned.add(class),
        }
    }
    let rollups: Vec<TractRollup> = per_tract
        .into_iter()
        .map(|(g, c)| TractRollup {
            geoid: g.to_string(),
            n_negative: c.n_negative,
            n_neutral: c.n_neutral,
            n_positive: c.n_positive,
            highly_sensitive: c.n_negative >= 1 && c.n_positive >= 1,
            classification: demographics.get(g).map(classify_tract),
        })
        .collect();
    RollupSummary {
        tracts_total: rollups.len(),
        tracts_with_negative: rollups.iter().filter(|r| r.n_negative > 0).count(),
        tracts_with_neutral: rollups.iter().filter(|r| r.n_neutral > 0).count(),
        tracts_with_positive: rollups.iter().filter(|r| r.n_positive > 0).count(),
        highly_sensitive: rollups.iter().filter(|r| r.highly_sensitive).count(),
        rollups,
        unassigned,
    }
}

pub const UNASSIGNED: &str = "unassigned";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub dimension: Dimension,
    /// A class label, or `unassigned` for posts without a tract or without
    /// the tract's value for this dimension.
    pub class: String,
    pub tweets: usize,
    pub tweet_share: f64,
}

/// Tweet-weighted share of posts per demographic class of their tract.
pub fn demographic_distribution(summary: &RollupSummary) -> Vec<DistributionRow> {
    let total = summary.total_posts();
    let mut rows = Vec::new();
    for dim in Dimension::ALL {
        let mut counts: BTreeMap<Option<DemoClass>, usize> = BTreeMap::new();
        for r in &summary.rollups {
            let class = r.classification.and_then(|c| c.get(dim));
            *counts.entry(class).or_default() += r.total();
        }
        *counts.entry(None).or_default() += summary.unassigned.total();
        for &class in dim.classes() {
            let n = counts.get(&Some(class)).copied().unwrap_or(0);
            rows.push(DistributionRow {
                dimension: dim,
                class: class.label().to_string(),
                tweets: n,
                tweet_share: percent(n, total),
            });
        }
        let n = counts.get(&None).copied().unwrap_or(0);
        rows.push(DistributionRow {
            dimension: dim,
            class: UNASSIGNED.to_string(),
            tweets: n,
            tweet_share: percent(n, total),
        });
    }
    rows
}

fn ring_json(ring: &[(f64, f64)]) -> Value {
    Value::Array(ring.iter().map(|&(x, y)| json!([x, y])).collect())
}

fn class_label(c: Option<DemoClass>) -> Value {
    c.map_or(Value::Null, |c| Value::String(c.label().to_string()))
}

/// Point features for posts and polygon features for tracts, the latter
/// carrying rollup counts and demographic classes. Tract parts sharing a
/// GEOID are merged back into one MultiPolygon feature.
pub fn emit_geojson(posts: &[PostRecord], summary: &RollupSummary, tracts: &[TractPolygon]) -> (Value, Value) {
    let points: Vec<Value> = posts
        .iter()
        .map(|p| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": {
                    "id": p.id,
                    "sentiment": p.sentiment.map(|s| s.as_str()),
                    "compound": p.compound,
                    "geoid": p.tract(),
                },
            })
        })
        .collect();

    let by_geoid: BTreeMap<&str, &TractRollup> =
        summary.rollups.iter().map(|r| (r.geoid.as_str(), r)).collect();
    let mut parts: Vec<(&str, Vec<&TractPolygon>)> = Vec::new();
    for t in tracts {
        match parts.iter_mut().find(|(g, _)| *g == t.geoid) {
            Some((_, v)) => v.push(t),
            None => parts.push((t.geoid.as_str(), vec![t])),
        }
    }
    let polygons: Vec<Value> = parts
        .iter()
        .map(|(geoid, polys)| {
            let geometry = if polys.len() == 1 {
                json!({"type": "Polygon", "coordinates": polys[0].rings.iter().map(|r| ring_json(r)).collect::<Vec<_>>()})
            } else {
                json!({"type": "MultiPolygon", "coordinates": polys.iter()
                    .map(|p| p.rings.iter().map(|r| ring_json(r)).collect::<Vec<_>>())
                    .collect::<Vec<_>>()})
            };
            let r = by_geoid.get(geoid);
            let cls = r.and_then(|r| r.classification);
            json!({
                "type": "Feature",
                "geometry": geometry,
                "properties": {
                    "GEOID": geoid,
                    "n_negative": r.map_or(0, |r| r.n_negative),
                    "n_neutral": r.map_or(0, |r| r.n_neutral),
                    "n_positive": r.map_or(0, |r| r.n_positive),
                    "highly_sensitive": r.is_some_and(|r| r.highly_sensitive),
                    "income_class": class_label(cls.and_then(|c| c.income)),
                    "female_class": class_label(cls.and_then(|c| c.female)),
                    "hispanic_latino_class": class_label(cls.and_then(|c| c.hispanic_latino)),
                    "black_class": class_label(cls.and_then(|c| c.black)),
                },
            })
        })
        .collect();

    (
        json!({"type": "FeatureCollection", "features": points}),
        json!({"type": "FeatureCollection", "features": polygons}),
    )
}

/// JSON Schema for `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../data/report.schema.json");

/// Post counts along the filter chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterChain {
    pub total: usize,
    pub parse_errors: usize,
    pub bbox_filtered: usize,
    pub deduped: usize,
    pub dei_relevant: usize,
    pub transport_relevant: usize,
}

impl FilterChain {
    pub fn steps(&self) -> [(&'static str, usize); 5] {
        [
            ("total", self.total),
            ("bbox_filtered", self.bbox_filtered),
            ("deduped", self.deduped),
            ("dei_relevant", self.dei_relevant),
            ("transport_relevant", self.transport_relevant),
        ]
    }

    pub fn is_non_increasing(&self) -> bool {
        self.steps().windows(2).all(|w| w[0].1 >= w[1].1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub topic: usize,
    pub prevalence: f64,
    pub words: Vec<WordProb>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTopics {
    pub segment: SentimentClass,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub n_posts: usize,
    pub n_docs: usize,
    pub dropped_docs: usize,
    pub vocab_size: usize,
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
    pub coherence: Vec<CoherenceRow>,
    /// Ordered by prevalence, highest first.
    pub topics: Vec<TopicEntry>,
}

impl SegmentTopics {
    pub fn skipped(segment: SentimentClass, n_posts: usize, reason: String) -> Self {
        SegmentTopics {
            segment,
            status: "skipped".into(),
            reason: Some(reason),
            n_posts,
            n_docs: 0,
            dropped_docs: 0,
            vocab_size: 0,
            k: 0,
            alpha: 0.0,
            beta: 0.0,
            iterations: 0,
            seed: 0,
            coherence: Vec::new(),
            topics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramRow {
    pub v: String,
    pub w: String,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordClass {
    pub word: String,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringSummary {
    pub g: usize,
    pub max_sweeps: usize,
    pub sweeps: usize,
    pub moves: usize,
    pub converged: bool,
    pub history: Vec<f64>,
    pub classes: Vec<WordClass>,
}

impl ClusteringSummary {
    pub fn new(r: &ExchangeResult, vocab: &[String], max_sweeps: usize) -> Self {
        ClusteringSummary {
            g: r.class_map.num_classes,
            max_sweeps,
            sweeps: r.sweeps,
            moves: r.moves,
            converged: r.converged,
            history: r.history.clone(),
            classes: vocab
                .iter()
                .zip(&r.class_map.assign)
                .map(|(w, &c)| WordClass {
                    word: w.clone(),
                    class: c,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigramSummary {
    pub total_tokens: u64,
    pub vocab_size: usize,
    pub total_bigrams: u64,
    pub top: Vec<BigramRow>,
    pub clustering: Option<ClusteringSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub filter_chain: FilterChain,
    pub sentiment_distribution: SentimentDistribution,
    pub topics: Vec<SegmentTopics>,
    pub bigrams: BigramSummary,
    pub tracts: RollupSummary,
    pub demographic_distribution: Vec<DistributionRow>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn opt_label(c: Option<DemoClass>) -> &'static str {
    c.map_or("", DemoClass::label)
}

pub const REPORT_FILES: &[&str] = &[
    "report.json",
    "filter_chain.csv",
    "sentiment_distribution.csv",
    "topics.csv",
    "coherence.csv",
    "top_bigrams.csv",
    "tract_rollups.csv",
    "demographic_distribution.csv",
];

/// Writes `report.json` plus one CSV per table into `dir`.
pub fn emit_report(report: &Report, dir: &Path) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_file(&dir.join("report.json"), &json)?;

    let fc = csv_bytes(&["step", "count"], |w| {
        for (name, n) in report.filter_chain.steps() {
            w.write_record([name.to_string(), n.to_string()])?;
        }
        Ok(())
    })?;
    write_file(&dir.join("filter_chain.csv"), &fc)?;

    let sd = &report.sentiment_distribution;
    let sent = csv_bytes(&["sentiment", "count", "percent"], |w| {
        for (c, n, p) in [
            ("negative", sd.n_negative, sd.pct_negative),
            ("neutral", sd.n_neutral, sd.pct_neutral),
            ("positive", sd.n_positive, sd.pct_positive),
        ] {
            w.write_record([c.to_string(), n.to_string(), format!("{p:.1}")])?;
        }
        Ok(())
    })?;
    write_file(&dir.join("sentiment_distribution.csv"), &sent)?;

    let topics = csv_bytes(&["segment", "topic", "prevalence", "rank", "word", "probability"], |w| {
        for seg in &report.topics {
            for t in &seg.topics {
                for (rank, wp) in t.words.iter().enumerate() {
                    w.write_record([
                        seg.segment.to_string(),
                        t.topic.to_string(),
                        t.prevalence.to_string(),
                        (rank + 1).to_string(),
                        wp.word.clone(),
                        wp.probability.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })?;
    write_file(&dir.join("topics.csv"), &topics)?;

    let coh = csv_bytes(&["segment", "K", "mean_coherence"], |w| {
        for seg in &report.topics {
            for row in &seg.coherence {
                w.write_record([seg.segment.to_string(), row.k.to_string(), row.mean_coherence.to_string()])?;
            }
        }
        Ok(())
    })?;
    write_file(&dir.join("coherence.csv"), &coh)?;

    let bg = csv_bytes(&["v", "w", "count"], |w| {
        for b in &report.bigrams.top {
            w.write_record([b.v.clone(), b.w.clone(), b.count.to_string()])?;
        }
        Ok(())
    })?;
    write_file(&dir.join("top_bigrams.csv"), &bg)?;

    let tr = csv_bytes(
        &[
            "geoid",
            "n_negative",
            "n_neutral",
            "n_positive",
            "highly_sensitive",
            "income_class",
            "female_class",
            "hispanic_latino_class",
            "black_class",
        ],
        |w| {
            for r in &report.tracts.rollups {
                let c = r.classification.unwrap_or_default();
                w.write_record([
                    r.geoid.clone(),
                    r.n_negative.to_string(),
                    r.n_neutral.to_string(),
                    r.n_positive.to_string(),
                    r.highly_sensitive.to_string(),
                    opt_label(c.income).into(),
                    opt_label(c.female).into(),
                    opt_label(c.hispanic_latino).into(),
                    opt_label(c.black).into(),
                ])?;
            }
            Ok(())
        },
    )?;
    write_file(&dir.join("tract_rollups.csv"), &tr)?;

    let dd = csv_bytes(&["dimension", "class", "tweets", "tweet_share"], |w| {
        for r in &report.demographic_distribution {
            w.write_record([
                r.dimension.as_str().to_string(),
                r.class.clone(),
                r.tweets.to_string(),
                format!("{:.1}", r.tweet_share),
            ])?;
        }
        Ok(())
    })?;
    write_file(&dir.join("demographic_distribution.csv"), &dd)?;
    Ok(())
}

pub fn write_geojson(path: &Path, value: &Value) -> Result<()> {
    let mut bytes = serde_json::to_vec(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}
