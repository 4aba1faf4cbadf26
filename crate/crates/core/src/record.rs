//! NDJSON records passed between pipeline stages.
//!
//! Every line carries `schema_version` and `stage`; a reader rejects files
//! written by another schema version or by the wrong stage.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use crate::corpus::CleanPost;
use crate::error::{Error, Result};
use crate::sentiment::{SentimentClass, SentimentResult};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Clean,
    Relevant,
    Scored,
    Geotagged,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Clean => "clean",
            Stage::Relevant => "relevant",
            Stage::Scored => "scored",
            Stage::Geotagged => "geotagged",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn present<'de, D, T>(d: D) -> std::result::Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

/// Rounds to six decimals, the precision compound scores are written with.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub schema_version: u32,
    pub stage: Stage,
    pub id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub lon: f64,
    pub lat: f64,
    pub clean_text: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dei: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<SentimentClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_count: Option<usize>,
    /// Absent before geotagging; `null` when the post fell outside every tract.
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub geoid: Option<Option<String>>,
}

impl PostRecord {
    pub fn from_clean(p: &CleanPost) -> Self {
        PostRecord {
            schema_version: SCHEMA_VERSION,
            stage: Stage::Clean,
            id: p.post_id.clone(),
            user_id: p.user_id.clone(),
            created_at: p.created_at,
            lon: p.lon,
            lat: p.lat,
            clean_text: p.clean_text.clone(),
            tokens: p.tokens.clone(),
            dei: None,
            transport: None,
            compound: None,
            sentiment: None,
            hit_count: None,
            geoid: None,
        }
    }

    pub fn to_clean(&self) -> CleanPost {
        CleanPost {
            post_id: self.id.clone(),
            user_id: self.user_id.clone(),
            created_at: self.created_at,
            lon: self.lon,
            lat: self.lat,
            clean_text: self.clean_text.clone(),
            tokens: self.tokens.clone(),
        }
    }

    pub fn with_sentiment(mut self, s: &SentimentResult) -> Self {
        self.stage = Stage::Scored;
        self.compound = Some(round6(s.compound));
        self.sentiment = Some(s.class);
        self.hit_count = Some(s.hit_count);
        self
    }

    pub fn sentiment_class(&self) -> Result<SentimentClass> {
        self.sentiment.ok_or_else(|| {
            Error::InvalidArgument(format!("record {} has no sentiment field", self.id))
        })
    }

    pub fn tract(&self) -> Option<&str> {
        self.geoid.as_ref().and_then(|g| g.as_deref())
    }

    fn check_fields(&self) -> std::result::Result<(), &'static str> {
        let needs_tags = matches!(self.stage, Stage::Relevant | Stage::Scored | Stage::Geotagged);
        let needs_sentiment = matches!(self.stage, Stage::Scored | Stage::Geotagged);
        if needs_tags && (self.dei.is_none() || self.transport.is_none()) {
            return Err("missing relevance tags");
        }
        if needs_sentiment && (self.compound.is_none() || self.sentiment.is_none()) {
            return Err("missing sentiment fields");
        }
        if self.stage == Stage::Geotagged && self.geoid.is_none() {
            return Err("missing geoid field");
        }
        Ok(())
    }
}

pub fn write_records(path: &Path, records: &[PostRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads an intermediate artifact, requiring every record to come from
/// `expected` under the current schema version.
pub fn read_records(path: &Path, expected: Stage) -> Result<Vec<PostRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mismatch = |found: String| Error::SchemaMismatch {
        file: name.clone(),
        stage: expected.to_string(),
        expected: SCHEMA_VERSION,
        found,
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)?;
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        let stage = value.get("stage").and_then(|v| v.as_str());
        if version != Some(SCHEMA_VERSION as u64) || stage != Some(expected.as_str()) {
            return Err(mismatch(format!(
                "line {}: schema_version {} stage '{}'",
                i + 1,
                version.map_or("none".to_string(), |v| v.to_string()),
                stage.unwrap_or("none")
            )));
        }
        let rec: PostRecord = serde_json::from_value(value)?;
        rec.check_fields()
            .map_err(|why| mismatch(format!("line {}: {why}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}
