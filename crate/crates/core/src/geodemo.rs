//! Census tract assignment by point-in-polygon, ACS demographics join and
//! demographic classification.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub type Coord = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractPolygon {
    pub geoid: String,
    /// Closed rings of `(lon, lat)`; the first is the exterior, the rest holes.
    pub rings: Vec<Vec<Coord>>,
}

impl TractPolygon {
    pub fn bbox(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.rings[0] {
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
        }
        b
    }

    /// Even-odd containment; points on any ring edge count as inside.
    pub fn contains(&self, lon: f64, lat: f64) -> bool {
        let p = (lon, lat);
        match ring_position(&self.rings[0], p) {
            RingPosition::Outside => return false,
            RingPosition::Boundary => return true,
            RingPosition::Inside => {}
        }
        for hole in &self.rings[1..] {
            match ring_position(hole, p) {
                RingPosition::Inside => return false,
                RingPosition::Boundary => return true,
                RingPosition::Outside => {}
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingPosition {
    Inside,
    Boundary,
    Outside,
}

fn on_segment(p: Coord, a: Coord, b: Coord) -> bool {
    let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
    cross == 0.0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

/// Ray casting towards +x over a closed ring.
pub fn ring_position(ring: &[Coord], p: Coord) -> RingPosition {
    let mut inside = false;
    for edge in ring.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        if on_segment(p, a, b) {
            return RingPosition::Boundary;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x {
                inside = !inside;
            }
        }
    }
    if inside {
        RingPosition::Inside
    } else {
        RingPosition::Outside
    }
}

/// A per-feature load failure. `feature` is the 0-based feature index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureError {
    pub feature: usize,
    pub reason: String,
}

impl fmt::Display for FeatureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "feature {}: {}", self.feature, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TractSet {
    pub tracts: Vec<TractPolygon>,
    bboxes: Vec<(f64, f64, f64, f64)>,
}

impl TractSet {
    pub fn new(tracts: Vec<TractPolygon>) -> Self {
        let bboxes = tracts.iter().map(TractPolygon::bbox).collect();
        TractSet { tracts, bboxes }
    }

    pub fn len(&self) -> usize {
        self.tracts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracts.is_empty()
    }

    /// First tract in file order containing the point.
    pub fn assign(&self, lon: f64, lat: f64) -> Option<&str> {
        self.tracts
            .iter()
            .zip(&self.bboxes)
            .find(|(t, b)| lon >= b.0 && lat >= b.1 && lon <= b.2 && lat <= b.3 && t.contains(lon, lat))
            .map(|(t, _)| t.geoid.as_str())
    }

    /// Same as [`TractSet::assign`] without the bounding-box prefilter.
    pub fn assign_exhaustive(&self, lon: f64, lat: f64) -> Option<&str> {
        assign_tract(lon, lat, &self.tracts)
    }
}

pub fn assign_tract(lon: f64, lat: f64, tracts: &[TractPolygon]) -> Option<&str> {
    tracts
        .iter()
        .find(|t| t.contains(lon, lat))
        .map(|t| t.geoid.as_str())
}

pub fn is_valid_geoid(s: &str) -> bool {
    s.len() == 11 && s.bytes().all(|b| b.is_ascii_digit())
}

fn parse_ring(v: &Value) -> std::result::Result<Vec<Coord>, String> {
    let pts = v.as_array().ok_or("ring is not an array")?;
    let ring: Vec<Coord> = pts
        .iter()
        .map(|p| {
            let xy = p.as_array().filter(|a| a.len() >= 2).ok_or("position needs [lon, lat]")?;
            match (xy[0].as_f64(), xy[1].as_f64()) {
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Ok((x, y)),
                _ => Err("non-numeric coordinate"),
            }
        })
        .collect::<std::result::Result<_, _>>()?;
    if ring.len() < 4 {
        return Err(format!("ring has {} positions, need at least 4", ring.len()));
    }
    if ring.first() != ring.last() {
        return Err("ring is not closed".into());
    }
    Ok(ring)
}

fn parse_polygon(v: &Value) -> std::result::Result<Vec<Vec<Coord>>, String> {
    let rings = v.as_array().ok_or("polygon coordinates are not an array")?;
    if rings.is_empty() {
        return Err("polygon has no rings".into());
    }
    rings.iter().map(parse_ring).collect()
}

fn parse_feature(f: &Value) -> std::result::Result<Vec<TractPolygon>, String> {
    let props = f.get("properties").and_then(Value::as_object).ok_or("missing properties")?;
    let geoid = match props.get("GEOID") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("GEOID must be a string".into()),
        None => return Err("missing GEOID".into()),
    };
    if !is_valid_geoid(&geoid) {
        return Err(format!("GEOID `{geoid}` is not an 11-digit tract id"));
    }
    let geom = f.get("geometry").ok_or("missing geometry")?;
    let coords = geom.get("coordinates").ok_or("geometry has no coordinates")?;
    let parts = match geom.get("type").and_then(Value::as_str) {
        Some("Polygon") => vec![parse_polygon(coords)?],
        Some("MultiPolygon") => coords
            .as_array()
            .ok_or("multipolygon coordinates are not an array")?
            .iter()
            .map(parse_polygon)
            .collect::<std::result::Result<_, _>>()?,
        Some(other) => return Err(format!("unsupported geometry type {other}")),
        None => return Err("geometry has no type".into()),
    };
    Ok(parts
        .into_iter()
        .map(|rings| TractPolygon {
            geoid: geoid.clone(),
            rings,
        })
        .collect())
}

#[derive(Debug, Clone, Default)]
pub struct TractLoad {
    pub tracts: Vec<TractPolygon>,
    pub errors: Vec<FeatureError>,
}

/// Reads a GeoJSON FeatureCollection of tract polygons. Bad features are
/// reported individually; a GEOID repeated across features is an error for
/// the later feature.
pub fn load_tracts_str(text: &str) -> Result<TractLoad> {
    let root: Value = serde_json::from_str(text)?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::GeoJson("expected a FeatureCollection".into()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::GeoJson("FeatureCollection has no features array".into()))?;
    let mut seen = HashSet::new();
    let mut out = TractLoad::default();
    for (i, f) in features.iter().enumerate() {
        match parse_feature(f) {
            Ok(parts) => {
                let geoid = parts[0].geoid.clone();
                if !seen.insert(geoid.clone()) {
                    out.errors.push(FeatureError {
                        feature: i,
                        reason: format!("duplicate GEOID {geoid}"),
                    });
                    continue;
                }
                out.tracts.extend(parts);
            }
            Err(reason) => out.errors.push(FeatureError { feature: i, reason }),
        }
    }
    Ok(out)
}

pub fn load_tracts<R: Read>(mut reader: R) -> Result<TractLoad> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    load_tracts_str(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractDemographics {
    pub geoid: String,
    /// USD per person.
    pub income_per_capita: Option<f64>,
    pub pct_female: Option<f64>,
    pub pct_hispanic_latino: Option<f64>,
    pub pct_black: Option<f64>,
}

impl TractDemographics {
    pub fn is_complete(&self) -> bool {
        self.income_per_capita.is_some()
            && self.pct_female.is_some()
            && self.pct_hispanic_latino.is_some()
            && self.pct_black.is_some()
    }
}

pub const ACS_HEADER: [&str; 5] = [
    "geoid",
    "income_per_capita",
    "pct_female",
    "pct_hispanic_latino",
    "pct_black",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line{}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AcsTable {
    pub records: BTreeMap<String, TractDemographics>,
    pub rejected: Vec<RowError>,
}

fn parse_cell(cell: &str, name: &str, max: Option<f64>) -> std::result::Result<Option<f64>, String> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| format!("{name} `{cell}` is not numeric"))?;
    if !v.is_finite() || v < 0.0 || max.is_some_and(|m| v > m) {
        return Err(format!("{name} {v} out of range"));
    }
    Ok(Some(v))
}

/// Loads per-tract demographics. Malformed rows are rejected with their line
/// number; a repeated GEOID fails the whole load.
pub fn load_acs<R: Read>(reader: R) -> Result<AcsTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers != ACS_HEADER {
        return Err(Error::Acs(format!(
            "header must be `{}`, got `{}`",
            ACS_HEADER.join(","),
            headers.join(",")
        )));
    }
    let mut table = AcsTable::default();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != ACS_HEADER.len() {
            table.rejected.push(RowError {
                line,
                reason: format!("expected {} fields, found {}", ACS_HEADER.len(), rec.len()),
            });
            continue;
        }
        let geoid = rec[0].trim().to_string();
        if !is_valid_geoid(&geoid) {
            table.rejected.push(RowError {
                line,
                reason: format!("malformed geoid `{geoid}`"),
            });
            continue;
        }
        let parsed = (|| {
            Ok::<_, String>(TractDemographics {
                geoid: geoid.clone(),
                income_per_capita: parse_cell(&rec[1], "income_per_capita", None)?,
                pct_female: parse_cell(&rec[2], "pct_female", Some(100.0))?,
                pct_hispanic_latino: parse_cell(&rec[3], "pct_hispanic_latino", Some(100.0))?,
                pct_black: parse_cell(&rec[4], "pct_black", Some(100.0))?,
            })
        })();
        match parsed {
            Ok(d) => {
                if table.records.insert(geoid.clone(), d).is_some() {
                    return Err(Error::Acs(format!("line {line}: duplicate geoid {geoid}")));
                }
            }
            Err(reason) => table.rejected.push(RowError { line, reason }),
        }
    }
    Ok(table)
}

/// Writes records in the `load_acs` schema, missing values as empty cells.
pub fn write_acs<'a, W: Write>(
    writer: W,
    records: impl IntoIterator<Item = &'a TractDemographics>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ACS_HEADER)?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.geoid.clone(),
            cell(r.income_per_capita),
            cell(r.pct_female),
            cell(r.pct_hispanic_latino),
            cell(r.pct_black),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DemoClass {
    Low,
    Medium,
    High,
    VeryHigh,
}

impl DemoClass {
    pub fn label(self) -> &'static str {
        match self {
            DemoClass::Low => "Low",
            DemoClass::Medium => "Medium",
            DemoClass::High => "High",
            DemoClass::VeryHigh => "VeryHigh",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Income,
    Female,
    HispanicLatino,
    Black,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Income,
        Dimension::Female,
        Dimension::HispanicLatino,
        Dimension::Black,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Income => "income",
            Dimension::Female => "female",
            Dimension::HispanicLatino => "hispanic_latino",
            Dimension::Black => "black",
        }
    }

    pub fn classes(self) -> &'static [DemoClass] {
        use DemoClass::*;
        match self {
            Dimension::Income | Dimension::Female => &[Low, Medium, High],
            Dimension::HispanicLatino | Dimension::Black => &[Low, Medium, High, VeryHigh],
        }
    }

    /// Upper bounds (inclusive) of every class but the last.
    pub fn upper_bounds(self) -> &'static [f64] {
        match self {
            Dimension::Income => &INCOME_BOUNDS,
            Dimension::Female => &FEMALE_BOUNDS,
            Dimension::HispanicLatino | Dimension::Black => &SHARE_BOUNDS,
        }
    }

    /// Classifies `x` against this dimension's thresholds; `None` for NaN.
    pub fn classify(self, x: f64) -> Option<DemoClass> {
        if x.is_nan() {
            return None;
        }
        let idx = self.upper_bounds().iter().position(|&ub| x <= ub);
        let classes = self.classes();
        Some(classes[idx.unwrap_or(classes.len() - 1)])
    }
}

/// Income: Low <= $50k < Medium <= $150k < High.
pub const INCOME_BOUNDS: [f64; 2] = [50_000.0, 150_000.0];
/// Female share: Low <= 30% < Medium <= 50% < High.
pub const FEMALE_BOUNDS: [f64; 2] = [30.0, 50.0];
/// Hispanic/Latino and Black shares: Low <= 10% < Medium <= 25% < High <= 50% < VeryHigh.
pub const SHARE_BOUNDS: [f64; 3] = [10.0, 25.0, 50.0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TractClassification {
    pub income: Option<DemoClass>,
    pub female: Option<DemoClass>,
    pub hispanic_latino: Option<DemoClass>,
    pub black: Option<DemoClass>,
}

impl TractClassification {
    pub fn get(&self, dim: Dimension) -> Option<DemoClass> {
        match dim {
            Dimension::Income => self.income,
            Dimension::Female => self.female,
            Dimension::HispanicLatino => self.hispanic_latino,
            Dimension::Black => self.black,
        }
    }
}

/// Missing fields leave their dimension unclassified.
pub fn classify_tract(demo: &TractDemographics) -> TractClassification {
    let f = |dim: Dimension, v: Option<f64>| v.and_then(|x| dim.classify(x));
    TractClassification {
        income: f(Dimension::Income, demo.income_per_capita),
        female: f(Dimension::Female, demo.pct_female),
        hispanic_latino: f(Dimension::HispanicLatino, demo.pct_hispanic_latino),
        black: f(Dimension::Black, demo.pct_black),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(geoid: &str, x0: f64, y0: f64, size: f64) -> TractPolygon {
        TractPolygon {
            geoid: geoid.into(),
            rings: vec![vec![(x0, y0), (x0 + size, y0), (x0 + size, y0 + size), (x0, y0 + size), (x0, y0)]],
        }
    }

    fn feature(geoid: &str, geometry: &str) -> String {
        format!(r#"{{"type":"Feature","properties":{{"GEOID":"{geoid}"}},"geometry":{geometry}}}"#)
    }

    fn collection(features: &[String]) -> String {
        format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(","))
    }

    const SQUARE: &str = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}"#;

    #[test]
    fn load_single_polygon() {
        let load = load_tracts_str(&collection(&[feature("36061000100", SQUARE)])).unwrap();
        assert!(load.errors.is_empty());
        assert_eq!(load.tracts.len(), 1);
        assert_eq!(load.tracts[0].rings[0].len(), 5);
    }

    #[test]
    fn load_multipolygon_splits_parts() {
        let mp = r#"{"type":"MultiPolygon","coordinates":[[[[0,0],[1,0],[1,1],[0,0]]],[[[5,5],[6,5],[6,6],[5,5]]]]}"#;
        let load = load_tracts_str(&collection(&[feature("36061000200", mp)])).unwrap();
        assert_eq!(load.tracts.len(), 2);
        assert!(load.tracts.iter().all(|t| t.geoid == "36061000200"));
    }

    #[test]
    fn load_feature_errors() {
        let tri = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}"#;
        let open = r#"{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}"#;
        let no_geoid = r#"{"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[]}}"#;
        let load = load_tracts_str(&collection(&[
            feature("36061000100", tri),
            feature("36061000101", open),
            no_geoid.to_string(),
            feature("36061000102", SQUARE),
            feature("36061000102", SQUARE),
            feature("123", SQUARE),
        ]))
        .unwrap();
        assert_eq!(load.tracts.len(), 1);
        let reasons: Vec<(usize, &str)> = load.errors.iter().map(|e| (e.feature, e.reason.as_str())).collect();
        assert_eq!(reasons.len(), 5);
        assert!(reasons[0].1.contains("at least 4"));
        assert!(reasons[1].1.contains("not closed"));
        assert!(reasons[2].1.contains("missing GEOID"));
        assert_eq!(reasons[3].0, 4);
        assert!(reasons[3].1.contains("duplicate"));
        assert!(reasons[4].1.contains("11-digit"));
        assert!(load_tracts_str(r#"{"type":"Feature"}"#).is_err());
    }

    #[test]
    fn assign_unit_square() {
        let tracts = vec![square("36061000100", 0.0, 0.0, 1.0)];
        assert_eq!(assign_tract(0.5, 0.5, &tracts), Some("36061000100"));
        assert_eq!(assign_tract(2.0, 2.0, &tracts), None);
    }

    #[test]
    fn boundary_points_are_inside() {
        let tracts = vec![square("36061000100", 0.0, 0.0, 1.0)];
        for p in [(0.0, 0.0), (1.0, 1.0), (0.5, 0.0), (1.0, 0.5), (0.0, 0.25)] {
            assert_eq!(assign_tract(p.0, p.1, &tracts), Some("36061000100"), "{p:?}");
        }
        assert_eq!(assign_tract(1.0 + 1e-12, 0.5, &tracts), None);
    }

    #[test]
    fn shared_edge_goes_to_first_tract() {
        let tracts = vec![square("36061000100", 0.0, 0.0, 1.0), square("36061000200", 1.0, 0.0, 1.0)];
        assert_eq!(assign_tract(1.0, 0.5, &tracts), Some("36061000100"));
        assert_eq!(assign_tract(1.5, 0.5, &tracts), Some("36061000200"));
    }

    #[test]
    fn holes_are_excluded() {
        let mut t = square("36061000100", 0.0, 0.0, 4.0);
        t.rings.push(vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0), (1.0, 1.0)]);
        assert!(!t.contains(2.0, 2.0));
        assert!(t.contains(0.5, 0.5));
        assert!(t.contains(1.0, 2.0));
    }

    #[test]
    fn concave_ring() {
        // U shape opening upwards
        let ring = vec![(0.0, 0.0), (3.0, 0.0), (3.0, 3.0), (2.0, 3.0), (2.0, 1.0), (1.0, 1.0), (1.0, 3.0), (0.0, 3.0), (0.0, 0.0)];
        assert_eq!(ring_position(&ring, (1.5, 2.0)), RingPosition::Outside);
        assert_eq!(ring_position(&ring, (0.5, 2.0)), RingPosition::Inside);
        assert_eq!(ring_position(&ring, (1.5, 0.5)), RingPosition::Inside);
        // ray passing exactly through a vertex
        assert_eq!(ring_position(&ring, (0.5, 1.0)), RingPosition::Inside);
    }

    #[test]
    fn acs_rows() {
        let csv = "geoid,income_per_capita,pct_female,pct_hispanic_latino,pct_black\n\
                   36061000100,45000,52.1,12.0,8.0\n\
                   36061000200,,50,10,5\n\
                   bad,1,1,1,1\n\
                   36061000300,1,101,1,1\n";
        let t = load_acs(csv.as_bytes()).unwrap();
        let r = &t.records["36061000100"];
        assert!(r.is_complete());
        assert_eq!(r.income_per_capita, Some(45000.0));
        assert_eq!(t.records["36061000200"].income_per_capita, None);
        assert!(!t.records["36061000200"].is_complete());
        assert_eq!(t.rejected.len(), 2);
        assert_eq!(t.rejected[0].line, 4);
        assert_eq!(t.rejected[1].line, 5);
    }

    #[test]
    fn acs_duplicate_and_header_errors() {
        let dup = "geoid,income_per_capita,pct_female,pct_hispanic_latino,pct_black\n\
                   36061000100,1,1,1,1\n36061000100,2,2,2,2\n";
        assert!(matches!(load_acs(dup.as_bytes()), Err(Error::Acs(_))));
        assert!(load_acs("geoid,income\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn acs_round_trip() {
        let recs = vec![
            TractDemographics {
                geoid: "36061000100".into(),
                income_per_capita: Some(45000.5),
                pct_female: Some(52.1),
                pct_hispanic_latino: Some(12.0),
                pct_black: Some(8.0),
            },
            TractDemographics {
                geoid: "36061000200".into(),
                income_per_capita: Some(0.1 + 0.2),
                pct_female: Some(30.000000000000004),
                pct_hispanic_latino: Some(100.0),
                pct_black: Some(0.0),
            },
        ];
        let mut buf = Vec::new();
        write_acs(&mut buf, &recs).unwrap();
        let back = load_acs(buf.as_slice()).unwrap();
        assert!(back.rejected.is_empty());
        assert_eq!(back.records.values().cloned().collect::<Vec<_>>(), recs);
    }

    #[test]
    fn table_one_cases() {
        use DemoClass::*;
        assert_eq!(Dimension::Income.classify(40_000.0), Some(Low));
        assert_eq!(Dimension::Female.classify(74.0), Some(High));
        assert_eq!(Dimension::HispanicLatino.classify(60.0), Some(VeryHigh));
        assert_eq!(Dimension::Female.classify(30.0), Some(Low));
        assert_eq!(Dimension::Income.classify(50_000.0), Some(Low));
        assert_eq!(Dimension::Income.classify(50_001.0), Some(Medium));
        assert_eq!(Dimension::Income.classify(150_000.0), Some(Medium));
        assert_eq!(Dimension::Income.classify(150_000.01), Some(High));
        assert_eq!(Dimension::Black.classify(25.0), Some(Medium));
        assert_eq!(Dimension::Black.classify(25.5), Some(High));
        assert_eq!(Dimension::Black.classify(f64::NAN), None);
    }

    #[test]
    fn classify_missing_fields() {
        let d = TractDemographics {
            geoid: "36061000100".into(),
            income_per_capita: None,
            pct_female: Some(40.0),
            pct_hispanic_latino: None,
            pct_black: Some(51.0),
        };
        let c = classify_tract(&d);
        assert_eq!(c.income, None);
        assert_eq!(c.female, Some(DemoClass::Medium));
        assert_eq!(c.black, Some(DemoClass::VeryHigh));
    }
}
