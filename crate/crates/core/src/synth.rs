//! Deterministic synthetic inputs: a planted-topic corpus, a relevance
//! stress corpus, a jittered tract grid with demographics, and a small
//! end-to-end post set. Everything is a pure function of the seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::corpus::{format_timestamp, RawPost};
use crate::error::{Error, Result};
use crate::geodemo::{write_acs, Coord, TractDemographics, TractPolygon};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pick<'a, T>(r: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    &xs[r.random_range(0..xs.len())]
}

fn epoch() -> DateTime<Utc> {
    "2020-01-01T00:00:00Z".parse().expect("valid literal")
}

/// Vocabulary `which` (0 or 1) of the planted corpus: `a00..a09` or `b00..b09`.
pub fn planted_vocab(which: usize) -> Vec<String> {
    let prefix = if which == 0 { 'a' } else { 'b' };
    (0..10).map(|i| format!("{prefix}{i:02}")).collect()
}

/// Shape of the planted corpus used for topic-recovery checks. Documents are
/// short enough that an extra topic cannot split one vocabulary cleanly.
pub const PLANTED_DOCS: usize = 200;
pub const PLANTED_DOC_LEN: usize = 12;

/// `n_docs` documents alternating between two disjoint 10-word vocabularies,
/// each `doc_len` tokens drawn uniformly from its vocabulary.
pub fn planted_corpus(n_docs: usize, doc_len: usize, seed: u64) -> Vec<Vec<String>> {
    let mut r = rng(seed);
    let vocabs = [planted_vocab(0), planted_vocab(1)];
    (0..n_docs)
        .map(|d| {
            let v = &vocabs[d % 2];
            (0..doc_len).map(|_| pick(&mut r, v).clone()).collect()
        })
        .collect()
}

const DEI_WORDS: &[&str] = &[
    "equity", "accessibility", "wheelchair", "disabled", "income", "women", "racism", "affordable", "underserved",
    "poor", "justice", "discrimination", "hispanic", "black", "gender", "inaccessible",
];
const TRANSPORT_WORDS: &[&str] = &[
    "bus", "subway", "train", "station", "mta", "metro", "bike", "transit", "taxi", "uber", "ride", "traffic", "car",
    "ridership", "passenger", "road",
];
// Share a prefix or stem with a keyword but are not keywords.
const NEAR_MISSES: &[&str] = &[
    "buses", "subways", "trainer", "stationary", "blackout", "incomes", "justified", "carpet", "raced", "bikes",
    "metros", "riders", "womens", "poorly", "roads", "taxis",
];
const FILLER: &[&str] = &[
    "morning", "today", "city", "people", "line", "street", "work", "waiting", "minutes", "downtown", "queens",
    "brooklyn", "new", "week", "service", "time", "school", "night", "north", "delay",
];

/// Raw posts for stress-testing the relevance filter: random bags of
/// keywords, near-miss words and filler. Coordinates fall inside the NYC box.
pub fn relevance_posts(n: usize, seed: u64) -> Vec<RawPost> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| {
            let len = r.random_range(3..=12);
            let words: Vec<&str> = (0..len)
                .map(|_| match r.random_range(0..10) {
                    0 => *pick(&mut r, DEI_WORDS),
                    1 => *pick(&mut r, TRANSPORT_WORDS),
                    2 | 3 => *pick(&mut r, NEAR_MISSES),
                    _ => *pick(&mut r, FILLER),
                })
                .collect();
            RawPost {
                post_id: format!("s{i:05}"),
                user_id: format!("u{:04}", r.random_range(0..2000)),
                created_at: epoch() + Duration::minutes(i as i64),
                text: words.join(" "),
                lon: r.random_range(-74.2..-73.75),
                lat: r.random_range(40.5..41.0),
            }
        })
        .collect()
}

fn post_json(p: &RawPost) -> Value {
    json!({
        "id": p.post_id,
        "user_id": p.user_id,
        "created_at": format_timestamp(&p.created_at),
        "text": p.text,
        "lon": p.lon,
        "lat": p.lat,
    })
}

/// One JSON object per line, in the ingest input format.
pub fn posts_ndjson(posts: &[RawPost]) -> String {
    let mut out = String::new();
    for p in posts {
        out.push_str(&post_json(p).to_string());
        out.push('\n');
    }
    out
}

pub const GRID_COLS: usize = 5;
pub const GRID_ROWS: usize = 4;
/// Extent of the tract grid as (lon_min, lat_min, lon_max, lat_max).
pub const GRID_EXTENT: (f64, f64, f64, f64) = (-74.02, 40.70, -73.92, 40.78);
/// Index of the tract that carries a hole.
pub const HOLED_TRACT: usize = 7;

pub fn grid_geoid(index: usize) -> String {
    format!("36061{:06}", (index + 1) * 100)
}

/// A 5 x 4 grid of tracts over [`GRID_EXTENT`]. Interior vertices are
/// jittered but shared by neighbouring tracts, so the tracts tile the extent
/// without gaps or overlaps. Tract [`HOLED_TRACT`] has a square hole.
/// Tracts are numbered row-major from the south-west corner.
pub fn tract_grid(seed: u64) -> Vec<TractPolygon> {
    let mut r = rng(seed);
    let (x0, y0, x1, y1) = GRID_EXTENT;
    let dx = (x1 - x0) / GRID_COLS as f64;
    let dy = (y1 - y0) / GRID_ROWS as f64;
    let mut v = vec![vec![(0.0, 0.0); GRID_COLS + 1]; GRID_ROWS + 1];
    for (j, row) in v.iter_mut().enumerate() {
        for (i, p) in row.iter_mut().enumerate() {
            let interior_x = i > 0 && i < GRID_COLS;
            let interior_y = j > 0 && j < GRID_ROWS;
            let jx = if interior_x { r.random_range(-0.25..0.25) * dx } else { 0.0 };
            let jy = if interior_y { r.random_range(-0.25..0.25) * dy } else { 0.0 };
            *p = (x0 + i as f64 * dx + jx, y0 + j as f64 * dy + jy);
        }
    }
    let mut tracts = Vec::new();
    for j in 0..GRID_ROWS {
        for i in 0..GRID_COLS {
            let idx = j * GRID_COLS + i;
            let outer: Vec<Coord> = vec![v[j][i], v[j][i + 1], v[j + 1][i + 1], v[j + 1][i], v[j][i]];
            let mut rings = vec![outer];
            if idx == HOLED_TRACT {
                let cx = (v[j][i].0 + v[j][i + 1].0 + v[j + 1][i + 1].0 + v[j + 1][i].0) / 4.0;
                let cy = (v[j][i].1 + v[j][i + 1].1 + v[j + 1][i + 1].1 + v[j + 1][i].1) / 4.0;
                let (hx, hy) = (0.1 * dx, 0.1 * dy);
                rings.push(vec![
                    (cx - hx, cy - hy),
                    (cx - hx, cy + hy),
                    (cx + hx, cy + hy),
                    (cx + hx, cy - hy),
                    (cx - hx, cy - hy),
                ]);
            }
            tracts.push(TractPolygon {
                geoid: grid_geoid(idx),
                rings,
            });
        }
    }
    tracts
}

fn ring_json(ring: &[Coord]) -> Value {
    Value::Array(ring.iter().map(|&(x, y)| json!([x, y])).collect())
}

/// GeoJSON FeatureCollection with one Polygon feature per tract.
pub fn tracts_geojson(tracts: &[TractPolygon]) -> Value {
    let features: Vec<Value> = tracts
        .iter()
        .map(|t| {
            json!({
                "type": "Feature",
                "properties": { "GEOID": t.geoid },
                "geometry": {
                    "type": "Polygon",
                    "coordinates": t.rings.iter().map(|r| ring_json(r)).collect::<Vec<_>>(),
                },
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// Demographics for the grid tracts. The last tract has no record and the
/// one before it lacks `pct_black`; values are spread across every class.
pub fn grid_demographics(tracts: &[TractPolygon], seed: u64) -> Vec<TractDemographics> {
    let mut r = rng(seed);
    let n = tracts.len();
    tracts
        .iter()
        .take(n.saturating_sub(1))
        .enumerate()
        .map(|(i, t)| {
            let income = [32_000.0, 48_000.0, 75_000.0, 160_000.0][i % 4] + r.random_range(0.0..1_000.0_f64).round();
            let female = [22.0, 41.0, 52.0, 74.0][(i / 2) % 4] + r.random_range(0.0..5.0_f64).round();
            let hl = [4.0, 18.0, 33.0, 60.0][(i + 1) % 4] + r.random_range(0.0..5.0_f64).round();
            let black = [6.0, 12.0, 40.0, 55.0][(i + 3) % 4] + r.random_range(0.0..5.0_f64).round();
            TractDemographics {
                geoid: t.geoid.clone(),
                income_per_capita: Some(income),
                pct_female: Some(female),
                pct_hispanic_latino: Some(hl),
                pct_black: if i + 2 == n { None } else { Some(black) },
            }
        })
        .collect()
}

const POSITIVE: &[&str] = &["great", "love", "happy", "good", "thanks", "excellent", "safe", "nice", "helpful"];
const NEGATIVE: &[&str] = &["terrible", "hate", "unsafe", "bad", "angry", "awful", "broken", "dirty", "sad"];
const THEMES: &[&[&str]] = &[
    &["elevator", "stairs", "ramp", "platform", "access", "elevator"],
    &["fare", "price", "cost", "ticket", "fare", "pay"],
    &["lane", "route", "schedule", "delay", "route", "stop"],
];

/// The end-to-end fixture: relevant and irrelevant posts with sentiment
/// words and topical themes, placed over the tract grid, plus points outside
/// every tract, points outside the NYC box, duplicates and malformed lines.
pub fn fixture_posts_ndjson(seed: u64) -> String {
    let mut r = rng(seed);
    let (x0, y0, x1, y1) = GRID_EXTENT;
    let mut posts = Vec::new();
    for i in 0..360 {
        let mut words: Vec<String> = Vec::new();
        let relevant = i % 5 != 4;
        words.push(if relevant || i % 2 == 0 { pick(&mut r, DEI_WORDS) } else { pick(&mut r, FILLER) }.to_string());
        words.push(if relevant { pick(&mut r, TRANSPORT_WORDS) } else { pick(&mut r, FILLER) }.to_string());
        let theme = THEMES[i % THEMES.len()];
        for _ in 0..r.random_range(3..6) {
            words.push(pick(&mut r, theme).to_string());
        }
        match i % 3 {
            0 => words.push(pick(&mut r, POSITIVE).to_string()),
            1 => words.push(pick(&mut r, NEGATIVE).to_string()),
            _ => {}
        }
        if i % 7 == 0 {
            words.push(pick(&mut r, NEGATIVE).to_string());
        }
        words.push(pick(&mut r, FILLER).to_string());
        let mut text = words.join(" ");
        match i % 11 {
            0 => text = format!("@nyct_subway {text} https://t.co/x{i}"),
            1 => text = format!("{text} &amp; #transit \u{1F68C}"),
            2 => text = format!("<b>{}</b>", text.to_uppercase()),
            _ => {}
        }
        let (lon, lat) = match i % 19 {
            // Inside the NYC box but east of the tract grid.
            0 => (r.random_range(-73.90..-73.75), r.random_range(40.60..40.90)),
            // Outside the NYC box.
            1 => (r.random_range(-75.5..-74.5), r.random_range(39.5..40.3)),
            _ => (r.random_range(x0..x1), r.random_range(y0..y1)),
        };
        posts.push(RawPost {
            post_id: format!("f{i:04}"),
            user_id: format!("u{:03}", r.random_range(0..120)),
            created_at: epoch() + Duration::minutes(37 * i as i64),
            text,
            lon: (lon * 1e6_f64).round() / 1e6,
            lat: (lat * 1e6_f64).round() / 1e6,
        });
    }
    // Same id twice, and the same user and text under a new id.
    let mut dup = posts[10].clone();
    dup.text.push_str(" again");
    posts.push(dup);
    let mut repost = posts[20].clone();
    repost.post_id = "f9999".into();
    posts.push(repost);

    let mut out = posts_ndjson(&posts);
    out.push_str("{\"id\": \"bad1\", \"user_id\": \"u1\"\n");
    out.push_str("not json at all\n");
    out.push_str("{\"id\":\"bad3\",\"user_id\":\"u1\",\"created_at\":\"yesterday\",\"text\":\"bus\",\"lon\":-73.9,\"lat\":40.7}\n");
    out
}

/// Names of the files written by [`write_fixture_bundle`].
pub const FIXTURE_FILES: &[&str] = &[
    "posts.ndjson",
    "tracts.geojson",
    "acs.csv",
    "pipeline.conf",
    "synthetic_10k.ndjson",
];

pub const FIXTURE_SEED: u64 = 20_200_320;
pub const RELEVANCE_SEED: u64 = 10_000;

fn fixture_config() -> String {
    let mut c = String::new();
    let _ = writeln!(c, "# End-to-end fixture run.");
    let _ = writeln!(c, "seed = 42");
    let _ = writeln!(c, "out_dir = out");
    let _ = writeln!(c);
    let _ = writeln!(c, "[input]");
    let _ = writeln!(c, "posts = posts.ndjson");
    let _ = writeln!(c, "tracts = tracts.geojson");
    let _ = writeln!(c, "acs = acs.csv");
    let _ = writeln!(c);
    let _ = writeln!(c, "[topics]");
    let _ = writeln!(c, "k = 2,3,4");
    let _ = writeln!(c, "iterations = 200");
    let _ = writeln!(c);
    let _ = writeln!(c, "[bigrams]");
    let _ = writeln!(c, "g = 6");
    let _ = writeln!(c, "max_sweeps = 20");
    c
}

/// Writes the fixture inputs and config into `dir`.
pub fn write_fixture_bundle(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(p, e))
    };
    let tracts = tract_grid(FIXTURE_SEED);
    write("posts.ndjson", fixture_posts_ndjson(FIXTURE_SEED).as_bytes())?;
    let mut geo = serde_json::to_vec_pretty(&tracts_geojson(&tracts))?;
    geo.push(b'\n');
    write("tracts.geojson", &geo)?;
    let mut acs = Vec::new();
    write_acs(&mut acs, &grid_demographics(&tracts, FIXTURE_SEED))?;
    write("acs.csv", &acs)?;
    write("pipeline.conf", fixture_config().as_bytes())?;
    write("synthetic_10k.ndjson", posts_ndjson(&relevance_posts(10_000, RELEVANCE_SEED)).as_bytes())?;
    Ok(())
}
