//! Pipeline configuration: a plain `key = value` file with `[section]`
//! headers. Keys are addressed as `section.key`; top-level keys have no
//! prefix. Command-line overrides use the same names and win over the file.
//!
//! ```text
//! seed = 7
//! out_dir = out
//!
//! [input]
//! posts = posts.ndjson
//! tracts = tracts.geojson
//! acs = acs.csv
//!
//! [topics]
//! k = 2,3,4,5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::corpus::BoundingBox;
use crate::error::{Error, Result};
use crate::relevance::MatchMode;
use crate::topics;

/// Every accepted key.
pub const KEYS: &[&str] = &[
    "seed",
    "out_dir",
    "input.posts",
    "input.lexicon",
    "input.stopwords",
    "input.dei_keywords",
    "input.transport_keywords",
    "input.tracts",
    "input.acs",
    "bbox.lat_min",
    "bbox.lat_max",
    "bbox.lon_min",
    "bbox.lon_max",
    "relevance.match",
    "sentiment.heuristics",
    "sentiment.neutral_band",
    "topics.k",
    "topics.alpha",
    "topics.beta",
    "topics.iterations",
    "topics.min_count",
    "topics.min_tokens",
    "topics.top_n",
    "bigrams.top_n",
    "bigrams.g",
    "bigrams.max_sweeps",
];

const PATH_KEYS: &[&str] = &[
    "out_dir",
    "input.posts",
    "input.lexicon",
    "input.stopwords",
    "input.dei_keywords",
    "input.transport_keywords",
    "input.tracts",
    "input.acs",
];

/// Raw key/value pairs with path values already resolved.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    pub values: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses config text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = RawConfig::default();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            cfg.set(&key, v.trim(), base_dir)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn set(&mut self, key: &str, value: &str, base_dir: &Path) -> std::result::Result<(), String> {
        if !KEYS.contains(&key) {
            return Err(format!("unknown key `{key}`"));
        }
        let value = if PATH_KEYS.contains(&key) && !value.is_empty() {
            let p = Path::new(value);
            if p.is_absolute() {
                value.to_string()
            } else {
                base_dir.join(p).to_string_lossy().into_owned()
            }
        } else {
            value.to_string()
        };
        self.values.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies a `key=value` override; paths resolve against the working directory.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(k.trim(), v.trim(), Path::new("")).map_err(Error::Config)
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputPaths {
    pub posts: Option<PathBuf>,
    /// `None` selects the bundled resource.
    pub lexicon: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub dei_keywords: Option<PathBuf>,
    pub transport_keywords: Option<PathBuf>,
    pub tracts: Option<PathBuf>,
    pub acs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicsConfig {
    /// One value fixes K; several are searched with coherence selection.
    pub k: Vec<usize>,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub min_count: usize,
    pub min_tokens: usize,
    pub top_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BigramsConfig {
    pub top_n: usize,
    /// Word-class count; clustering is skipped when unset.
    pub g: Option<usize>,
    pub max_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub inputs: InputPaths,
    pub bbox: BoundingBox,
    pub match_mode: MatchMode,
    pub heuristics: bool,
    pub neutral_band: f64,
    pub topics: TopicsConfig,
    pub bigrams: BigramsConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn parse_k_list(v: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = v
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| Error::Config(format!("`topics.k`: bad topic count `{}`", s.trim())))
        })
        .collect::<Result<_>>()?;
    if ks.is_empty() {
        return Err(Error::Config("`topics.k` is empty".into()));
    }
    Ok(ks)
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

impl PipelineConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let seed = raw
            .parsed::<u64>("seed")?
            .ok_or_else(|| Error::Config("`seed` is required".into()))?;
        let d = BoundingBox::NYC;
        let bbox = BoundingBox::new(
            raw.parsed("bbox.lat_min")?.unwrap_or(d.lat_min),
            raw.parsed("bbox.lat_max")?.unwrap_or(d.lat_max),
            raw.parsed("bbox.lon_min")?.unwrap_or(d.lon_min),
            raw.parsed("bbox.lon_max")?.unwrap_or(d.lon_max),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let match_mode = match raw.get("relevance.match") {
            Some(v) => v.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            None => MatchMode::Token,
        };
        let heuristics = match raw.get("sentiment.heuristics") {
            Some(v) => parse_bool("sentiment.heuristics", v)?,
            None => false,
        };
        let neutral_band: f64 = raw.parsed("sentiment.neutral_band")?.unwrap_or(0.0);
        if !(0.0..1.0).contains(&neutral_band) {
            return Err(Error::Config(format!("`sentiment.neutral_band` {neutral_band} outside [0, 1)")));
        }
        let alpha = match raw.get("topics.alpha") {
            None | Some("auto") => None,
            Some(_) => raw.parsed::<f64>("topics.alpha")?,
        };
        let topics = TopicsConfig {
            k: match raw.get("topics.k") {
                Some(v) => parse_k_list(v)?,
                None => vec![2, 3, 4, 5, 6, 7],
            },
            alpha,
            beta: raw.parsed("topics.beta")?.unwrap_or(topics::DEFAULT_BETA),
            iterations: raw.parsed("topics.iterations")?.unwrap_or(topics::DEFAULT_ITERATIONS),
            min_count: raw.parsed("topics.min_count")?.unwrap_or(topics::DEFAULT_MIN_COUNT),
            min_tokens: raw.parsed("topics.min_tokens")?.unwrap_or(topics::DEFAULT_MIN_TOKENS),
            top_n: raw.parsed("topics.top_n")?.unwrap_or(10),
        };
        if topics.iterations == 0 {
            return Err(Error::Config("`topics.iterations` must be >= 1".into()));
        }
        let bigrams = BigramsConfig {
            top_n: raw.parsed("bigrams.top_n")?.unwrap_or(20),
            g: raw.parsed("bigrams.g")?,
            max_sweeps: raw.parsed("bigrams.max_sweeps")?.unwrap_or(50),
        };
        if bigrams.g == Some(0) {
            return Err(Error::Config("`bigrams.g` must be >= 1".into()));
        }
        Ok(PipelineConfig {
            inputs: InputPaths {
                posts: raw.path("input.posts"),
                lexicon: raw.path("input.lexicon"),
                stopwords: raw.path("input.stopwords"),
                dei_keywords: raw.path("input.dei_keywords"),
                transport_keywords: raw.path("input.transport_keywords"),
                tracts: raw.path("input.tracts"),
                acs: raw.path("input.acs"),
            },
            bbox,
            match_mode,
            heuristics,
            neutral_band,
            topics,
            bigrams,
            seed,
            out_dir: raw.path("out_dir").unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}

/// Fails with the stage name when a required input is unset or an input file is missing.
pub fn require_file(stage: &'static str, what: &str, path: Option<&Path>, required: bool) -> Result<()> {
    match path {
        None if required => Err(Error::Config(format!("input `{what}` is not set")).in_stage(stage)),
        None => Ok(()),
        Some(p) if !p.is_file() => {
            Err(Error::Config(format!("{what} file not found: {}", p.display())).in_stage(stage))
        }
        Some(_) => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
seed = 7
out_dir = out   # trailing comment

[input]
posts = data/posts.ndjson
lexicon = /abs/lexicon.txt

[topics]
k = 2, 3
alpha = auto

[bigrams]
g = 4
";

    #[test]
    fn parses_sections_and_resolves_paths() {
        let raw = RawConfig::parse(SAMPLE, Path::new("/cfg")).unwrap();
        let cfg = PipelineConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.out_dir, PathBuf::from("/cfg/out"));
        assert_eq!(cfg.inputs.posts, Some(PathBuf::from("/cfg/data/posts.ndjson")));
        assert_eq!(cfg.inputs.lexicon, Some(PathBuf::from("/abs/lexicon.txt")));
        assert_eq!(cfg.topics.k, vec![2, 3]);
        assert_eq!(cfg.topics.alpha, None);
        assert_eq!(cfg.bigrams.g, Some(4));
        assert_eq!(cfg.bbox, BoundingBox::NYC);
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse(SAMPLE, Path::new("/cfg")).unwrap();
        raw.set_override("seed=9").unwrap();
        raw.set_override("topics.k=5").unwrap();
        raw.set_override("relevance.match=substring").unwrap();
        let cfg = PipelineConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.topics.k, vec![5]);
        assert_eq!(cfg.match_mode, MatchMode::Substring);
    }

    #[test]
    fn seed_is_mandatory() {
        let raw = RawConfig::parse("[topics]\nk = 2\n", Path::new(".")).unwrap();
        let err = PipelineConfig::from_raw(&raw).unwrap_err().to_string();
        assert!(err.contains("seed"), "{err}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RawConfig::parse("nonsense\n", Path::new(".")).is_err());
        assert!(RawConfig::parse("[topics]\nkk = 2\n", Path::new(".")).is_err());
        let raw = RawConfig::parse("seed = 1\n[topics]\nk = 0\n", Path::new(".")).unwrap();
        assert!(PipelineConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("seed = 1\n[sentiment]\nheuristics = maybe\n", Path::new(".")).unwrap();
        assert!(PipelineConfig::from_raw(&raw).is_err());
        let raw = RawConfig::parse("seed = 1\n[bbox]\nlat_min = 50\n", Path::new(".")).unwrap();
        assert!(PipelineConfig::from_raw(&raw).is_err());
    }

    #[test]
    fn missing_file_names_stage() {
        let err = require_file("sentiment", "lexicon", Some(Path::new("/no/such/lexicon.txt")), false)
            .unwrap_err()
            .to_string();
        assert!(err.starts_with("stage sentiment:"), "{err}");
        assert!(require_file("geotag", "tracts", None, true).is_err());
        assert!(require_file("sentiment", "lexicon", None, false).is_ok());
    }
}
