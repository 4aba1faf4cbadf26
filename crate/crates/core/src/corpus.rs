//! Post ingestion: NDJSON parsing, bounding-box filter, dedup, text cleaning
//! and tokenization.

use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;

use chrono::{DateTime, SecondsFormat, Utc};
use once_cell::sync::Lazy;
use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

static BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct RawPost {
    pub post_id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub text: String,
    pub lon: f64,
    pub lat: f64,
}

/// A malformed input line. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line{}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    /// New York City study area.
    pub const NYC: BoundingBox = BoundingBox {
        lat_min: 40.49,
        lat_max: 42.14,
        lon_min: -74.25,
        lon_max: -73.70,
    };

    pub fn new(lat_min: f64, lat_max: f64, lon_min: f64, lon_max: f64) -> Result<Self> {
        if !(lat_min < lat_max) || !(lon_min < lon_max) {
            return Err(Error::InvalidArgument(format!(
                "bounding box needs lat_min < lat_max and lon_min < lon_max, got \
                 lat {lat_min}..{lat_max} lon {lon_min}..{lon_max}"
            )));
        }
        Ok(BoundingBox {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    /// Inclusive on all four bounds.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        self.lat_min <= lat && lat <= self.lat_max && self.lon_min <= lon && lon <= self.lon_max
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        BoundingBox::NYC
    }
}

/// A cleaned, tokenized post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanPost {
    pub post_id: String,
    pub user_id: String,
    pub created_at: DateTime<Utc>,
    pub lon: f64,
    pub lat: f64,
    pub clean_text: String,
    pub tokens: Vec<String>,
}

pub fn format_timestamp(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn field_str(obj: &serde_json::Map<String, Value>, key: &str) -> std::result::Result<String, String> {
    match obj.get(key) {
        None => Err(format!("missing field `{key}`")),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(format!("field `{key}` must be a string, got {}", json_kind(other))),
    }
}

fn field_coord(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    limit: f64,
) -> std::result::Result<f64, String> {
    let v = match obj.get(key) {
        None => return Err(format!("missing field `{key}`")),
        Some(Value::Number(n)) => n.as_f64().ok_or_else(|| format!("field `{key}` is not a finite number"))?,
        Some(other) => return Err(format!("field `{key}` must be a number, got {}", json_kind(other))),
    };
    if !v.is_finite() || v < -limit || v > limit {
        return Err(format!("field `{key}` out of range: {v}"));
    }
    Ok(v)
}

fn json_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn parse_line(line: &str) -> std::result::Result<RawPost, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("malformed json: {e}"))?;
    let obj = value.as_object().ok_or("expected a json object")?;
    let post_id = field_str(obj, "id")?;
    if post_id.is_empty() {
        return Err("field `id` is empty".into());
    }
    let user_id = field_str(obj, "user_id")?;
    let created_raw = field_str(obj, "created_at")?;
    let created_at = DateTime::parse_from_rfc3339(&created_raw)
        .map_err(|e| format!("field `created_at` is not an ISO-8601 timestamp: {e}"))?
        .with_timezone(&Utc);
    let text = field_str(obj, "text")?;
    let lon = field_coord(obj, "lon", 180.0)?;
    let lat = field_coord(obj, "lat", 90.0)?;
    Ok(RawPost {
        post_id,
        user_id,
        created_at,
        text,
        lon,
        lat,
    })
}

/// Parses newline-delimited JSON posts.
///
/// Every non-blank line yields either a post or a [`ParseError`], never both;
/// blank lines are skipped. Read failures on the stream itself are reported as
/// a parse error on the line where they happened and stop the scan.
pub fn parse_posts<R: BufRead>(reader: R) -> (Vec<RawPost>, Vec<ParseError>) {
    let mut posts = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                errors.push(ParseError {
                    line: line_no,
                    reason: format!("read error: {e}"),
                });
                break;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(p) => posts.push(p),
            Err(reason) => errors.push(ParseError {
                line: line_no,
                reason,
            }),
        }
    }
    (posts, errors)
}

pub fn filter_bbox(posts: Vec<RawPost>, bbox: &BoundingBox) -> Vec<RawPost> {
    posts
        .into_iter()
        .filter(|p| bbox.contains(p.lon, p.lat))
        .collect()
}

/// Keeps the first post per `post_id`, then drops posts repeating an earlier
/// kept post's `(user_id, text)` pair.
pub fn dedup(posts: Vec<RawPost>) -> Vec<RawPost> {
    let mut ids = HashSet::new();
    let mut user_texts = HashSet::new();
    posts
        .into_iter()
        .filter(|p| {
            if ids.contains(&p.post_id) || user_texts.contains(&(p.user_id.clone(), p.text.clone())) {
                return false;
            }
            ids.insert(p.post_id.clone());
            user_texts.insert((p.user_id.clone(), p.text.clone()));
            true
        })
        .collect()
}

/// Codepoint ranges removed as emoji: pictograph and emoticon blocks, the
/// dingbat and miscellaneous-symbol blocks, regional indicators, skin-tone
/// modifiers, variation selectors, joiners and tag characters.
pub const EMOJI_RANGES: &[(u32, u32)] = &[
    (0x200D, 0x200D),   // zero width joiner
    (0x20E3, 0x20E3),   // combining enclosing keycap
    (0x2122, 0x2122),   // trade mark sign
    (0x2139, 0x2139),   // information source
    (0x2194, 0x21AA),   // arrows used as emoji
    (0x231A, 0x23FF),   // watch, hourglass, media controls
    (0x24C2, 0x24C2),   // circled M
    (0x25A0, 0x25FF),   // geometric shapes
    (0x2600, 0x27BF),   // misc symbols, dingbats
    (0x2900, 0x297F),   // supplemental arrows-B
    (0x2B00, 0x2BFF),   // misc symbols and arrows
    (0x3030, 0x3030),   // wavy dash
    (0x303D, 0x303D),   // part alternation mark
    (0x3297, 0x3299),   // circled ideographs
    (0xFE00, 0xFE0F),   // variation selectors
    (0x1F000, 0x1FAFF), // mahjong .. symbols and pictographs extended-A
    (0xE0020, 0xE007F), // tag characters
];

pub fn is_emoji(c: char) -> bool {
    let cp = c as u32;
    EMOJI_RANGES
        .iter()
        .any(|&(lo, hi)| (lo..=hi).contains(&cp))
}

static TAG_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"<[^<>]*>").unwrap());
static ENTITY_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"&(#[0-9]{1,7}|#[xX][0-9a-fA-F]{1,6}|[a-zA-Z]{2,8});").unwrap());
static URL_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap());
static MENTION_RE: Lazy<Regex> = Lazy::new(|| Regex::new(r"@[\p{L}\p{N}_]+").unwrap());

fn decode_entity(body: &str) -> Option<char> {
    if let Some(num) = body.strip_prefix('#') {
        let cp = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse::<u32>().ok()?,
        };
        return char::from_u32(cp);
    }
    Some(match body {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => ' ',
        "hellip" => '…',
        "ndash" => '–',
        "mdash" => '\u{2014}',
        "lsquo" => '‘',
        "rsquo" => '’',
        "ldquo" => '“',
        "rdquo" => '”',
        _ => return None,
    })
}

// Letters with no lowercase form (e.g. U+03D2) are dropped.
fn lexical(c: char) -> bool {
    c.is_alphanumeric() && !c.is_uppercase()
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Normalizes raw post text for tokenization.
///
/// Order: HTML tags, entity decoding, URLs, mentions, emoji, lowercasing, then
/// every character that is not a letter, digit, whitespace or an apostrophe
/// between two alphanumerics becomes a space and whitespace runs collapse.
/// Hashtags keep their word because `#` falls in the last rule.
pub fn clean_text(raw: &str) -> String {
    let s = TAG_RE.replace_all(raw, " ");
    let s = ENTITY_RE.replace_all(&s, |caps: &regex::Captures<'_>| match decode_entity(&caps[1]) {
        Some(c) => c.to_string(),
        None => caps[0].to_string(),
    });
    let s = URL_RE.replace_all(&s, " ");
    let s = MENTION_RE.replace_all(&s, " ");
    let lowered: Vec<char> = s
        .chars()
        .map(|c| if is_emoji(c) { ' ' } else { c })
        .flat_map(char::to_lowercase)
        .collect();

    let mut out = String::with_capacity(lowered.len());
    let mut pending_space = false;
    for (i, &c) in lowered.iter().enumerate() {
        let keep = if c.is_alphanumeric() {
            lexical(c)
        } else if is_apostrophe(c) {
            let prev = i.checked_sub(1).map(|j| lowered[j]);
            let next = lowered.get(i + 1).copied();
            matches!((prev, next), (Some(p), Some(n)) if lexical(p) && lexical(n))
        } else {
            false
        };
        if keep {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(if is_apostrophe(c) { '\'' } else { c });
        } else {
            pending_space = true;
        }
    }
    out
}

/// Splits cleaned text on whitespace, dropping stopwords.
pub fn tokenize(clean: &str, stopwords: &Stopwords) -> Vec<String> {
    clean
        .split_whitespace()
        .filter(|t| !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords {
    words: HashSet<String>,
}

impl Stopwords {
    /// Parses a stopword file: one word per line, `#` starts a comment.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.to_lowercase())
            .collect();
        Stopwords { words }
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Stopwords {
            words: words.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub fn prepare_post(post: &RawPost, stopwords: &Stopwords) -> CleanPost {
    let clean = clean_text(&post.text);
    let tokens = tokenize(&clean, stopwords);
    CleanPost {
        post_id: post.post_id.clone(),
        user_id: post.user_id.clone(),
        created_at: post.created_at,
        lon: post.lon,
        lat: post.lat,
        clean_text: clean,
        tokens,
    }
}

/// Cleans and tokenizes in parallel; output order matches input order.
pub fn prepare(posts: &[RawPost], stopwords: &Stopwords) -> Vec<CleanPost> {
    posts.par_iter().map(|p| prepare_post(p, stopwords)).collect()
}

/// Counts at each step of ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestCounts {
    pub parsed: usize,
    pub parse_errors: usize,
    pub bbox_kept: usize,
    pub deduped: usize,
}

/// parse -> bbox filter -> dedup -> clean/tokenize.
pub fn ingest<R: BufRead>(
    reader: R,
    bbox: &BoundingBox,
    stopwords: &Stopwords,
) -> (Vec<CleanPost>, Vec<ParseError>, IngestCounts) {
    let (posts, errors) = parse_posts(reader);
    let parsed = posts.len();
    let posts = filter_bbox(posts, bbox);
    let bbox_kept = posts.len();
    let posts = dedup(posts);
    let counts = IngestCounts {
        parsed,
        parse_errors: errors.len(),
        bbox_kept,
        deduped: posts.len(),
    };
    (prepare(&posts, stopwords), errors, counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn post(id: &str, user: &str, text: &str, lon: f64, lat: f64) -> RawPost {
        RawPost {
            post_id: id.into(),
            user_id: user.into(),
            created_at: "2020-03-20T10:00:00Z".parse().unwrap(),
            text: text.into(),
            lon,
            lat,
        }
    }

    #[test]
    fn parses_well_formed_record() {
        let line = r#"{"id":"1","user_id":"u1","created_at":"2020-03-20T10:00:00Z","text":"bus late","lon":-73.9,"lat":40.7}"#;
        let (posts, errors) = parse_posts(line.as_bytes());
        assert!(errors.is_empty());
        assert_eq!(posts, vec![post("1", "u1", "bus late", -73.9, 40.7)]);
    }

    #[test]
    fn missing_field_is_a_line_error() {
        let (posts, errors) = parse_posts(r#"{"id":"2"}"#.as_bytes());
        assert!(posts.is_empty());
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 1);
        assert!(errors[0].reason.contains("missing field"), "{}", errors[0]);
        assert!(errors[0].to_string().starts_with("line1: "));
    }

    #[test]
    fn ten_line_fixture_with_two_bad_lines() {
        let mut text = String::new();
        for i in 0..10 {
            if i == 3 {
                text.push_str("{not json\n");
            } else if i == 7 {
                text.push_str(r#"{"id":"7","user_id":"u","created_at":"2020-03-20T10:00:00Z","text":"x","lon":-73.9,"lat":95.0}"#);
                text.push('\n');
            } else {
                text.push_str(&format!(
                    r#"{{"id":"{i}","user_id":"u","created_at":"2020-03-20T10:00:00Z","text":"t{i}","lon":-73.9,"lat":40.7}}"#
                ));
                text.push('\n');
            }
        }
        let (posts, errors) = parse_posts(text.as_bytes());
        assert_eq!(posts.len(), 8);
        assert_eq!(errors.iter().map(|e| e.line).collect::<Vec<_>>(), vec![4, 8]);
        assert!(errors[1].reason.contains("out of range"));
    }

    #[test]
    fn ill_typed_fields_rejected() {
        let (_, errors) = parse_posts(
            r#"{"id":1,"user_id":"u","created_at":"2020-03-20T10:00:00Z","text":"x","lon":-73.9,"lat":40.7}"#.as_bytes(),
        );
        assert!(errors[0].reason.contains("must be a string"));
        let (_, errors) = parse_posts(
            r#"{"id":"1","user_id":"u","created_at":"yesterday","text":"x","lon":-73.9,"lat":40.7}"#.as_bytes(),
        );
        assert!(errors[0].reason.contains("created_at"));
        let (_, errors) = parse_posts(r#"["id"]"#.as_bytes());
        assert!(errors[0].reason.contains("object"));
    }

    #[test]
    fn bbox_filter_inclusive() {
        let b = BoundingBox::NYC;
        let kept = filter_bbox(
            vec![
                post("1", "u", "", -74.00, 40.70),
                post("2", "u", "", -74.00, 43.00),
                post("3", "u", "", -74.25, 40.49),
                post("4", "u", "", -73.70, 42.14),
            ],
            &b,
        );
        let ids: Vec<_> = kept.iter().map(|p| p.post_id.as_str()).collect();
        assert_eq!(ids, ["1", "3", "4"]);
    }

    #[test]
    fn bbox_rejects_degenerate() {
        assert!(BoundingBox::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 1.0, 2.0, 1.0).is_err());
        assert!(BoundingBox::new(f64::NAN, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn dedup_rules() {
        let out = dedup(vec![
            post("1", "a", "x", 0.0, 0.0),
            post("2", "a", "y", 0.0, 0.0),
            post("1", "b", "z", 0.0, 0.0),
        ]);
        assert_eq!(out.iter().map(|p| p.post_id.as_str()).collect::<Vec<_>>(), ["1", "2"]);

        let out = dedup(vec![post("1", "a", "same", 0.0, 0.0), post("9", "a", "same", 0.0, 0.0)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].post_id, "1");

        let unique = vec![post("1", "a", "x", 0.0, 0.0), post("2", "b", "x", 0.0, 0.0)];
        assert_eq!(dedup(unique.clone()), unique);
    }

    #[test]
    fn clean_examples() {
        assert_eq!(clean_text("<b>Bus</b> is LATE 😡 http://t.co/x"), "bus is late");
        assert_eq!(clean_text("#MTA @user delays &amp; crowding"), "mta delays crowding");
        assert_eq!(clean_text(""), "");
    }

    #[test]
    fn clean_details() {
        assert_eq!(clean_text("Don't   ride 'the' bus!!"), "don't ride the bus");
        assert_eq!(clean_text("it’s ok"), "it's ok");
        assert_eq!(clean_text("&lt;b&gt;hi&lt;/b&gt;"), "b hi b");
        assert_eq!(clean_text("see www.mta.info now"), "see now");
        assert_eq!(clean_text("👍🏽ok❤️fine"), "ok fine");
        assert_eq!(clean_text("#PublicTransit"), "publictransit");
        assert_eq!(clean_text("caf&#233; &#x41;"), "café a");
        assert_eq!(clean_text("line\tbreak\nhere"), "line break here");
    }

    #[test]
    fn tokenize_examples() {
        let sw = Stopwords::from_words(["the", "is"]);
        assert_eq!(tokenize("the bus is late", &sw), ["bus", "late"]);
        assert_eq!(tokenize("bus bus bus", &sw), ["bus", "bus", "bus"]);
        assert!(tokenize("the is the", &sw).is_empty());
    }

    #[test]
    fn stopword_file_format() {
        let sw = Stopwords::parse("# header\nThe\n\n  a  # trailing\n");
        assert_eq!(sw.len(), 2);
        assert!(sw.contains("the") && sw.contains("a"));
        assert!(!Stopwords::bundled().contains("not"));
        assert!(Stopwords::bundled().contains("the"));
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                "[a-zA-Z0-9]{1,8}",
                Just(" ".to_string()),
                Just("'".to_string()),
                Just("#".to_string()),
                Just("@x".to_string()),
                Just("&amp;".to_string()),
                Just("<i>".to_string()),
                Just("http://t.co/a".to_string()),
                Just("😡".to_string()),
                Just("É".to_string()),
                Just("ß".to_string()),
                Just("İ".to_string()),
                Just("\u{3D2}".to_string()),
                Just("...".to_string()),
            ],
            0..20,
        )
        .prop_map(|parts| parts.concat())
    }

    proptest! {
        #[test]
        fn clean_is_idempotent(raw in text_strategy()) {
            let once = clean_text(&raw);
            prop_assert_eq!(clean_text(&once), once.clone());
        }

        #[test]
        fn tokens_lowercase_and_not_stopwords(raw in text_strategy()) {
            let sw = Stopwords::bundled();
            for tok in tokenize(&clean_text(&raw), &sw) {
                prop_assert!(!tok.is_empty());
                prop_assert!(!tok.chars().any(|c| c.is_uppercase() || c.is_whitespace()));
                prop_assert!(!sw.contains(&tok));
            }
        }

        #[test]
        fn filters_idempotent(pts in proptest::collection::vec((-75.0f64..-73.0, 40.0f64..43.0, 0u8..5, 0u8..3), 0..40)) {
            let posts: Vec<RawPost> = pts.iter().enumerate()
                .map(|(i, &(lon, lat, id, user))| post(&format!("{}", id as usize * 100 + i % 3), &user.to_string(), "t", lon, lat))
                .collect();
            let b = BoundingBox::NYC;
            let once = filter_bbox(posts.clone(), &b);
            prop_assert_eq!(filter_bbox(once.clone(), &b), once);
            let d = dedup(posts.clone());
            prop_assert!(d.len() <= posts.len());
            prop_assert_eq!(dedup(d.clone()), d.clone());
            for p in &d {
                prop_assert!(posts.iter().any(|q| q.post_id == p.post_id));
            }
        }
    }
}
