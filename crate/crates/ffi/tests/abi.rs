use std::ffi::{CStr, CString};
use std::ptr;

use transit_deia::synth;
use transit_deia_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = td_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn version_is_static_string() {
    let v = unsafe { CStr::from_ptr(td_version()) }.to_str().unwrap();
    assert_eq!(v, transit_deia::TOOL_VERSION);
}

#[test]
fn clean_text_round_trip() {
    let mut out = ptr::null_mut();
    let st = unsafe { td_clean_text(c("The BUS was late!! @mta https://x.co/a").as_ptr(), &mut out) };
    assert_eq!(st, TdStatus::Ok);
    let got = unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned();
    assert_eq!(got, transit_deia::corpus::clean_text("The BUS was late!! @mta https://x.co/a"));
    unsafe { td_string_free(out) };
}

#[test]
fn null_arguments_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { td_clean_text(ptr::null(), &mut out) }, TdStatus::NullPointer);
    assert!(last_error().contains("text"));
    let mut score = std::mem::MaybeUninit::<TdScore>::uninit();
    let st = unsafe { td_score_text(ptr::null(), c("x").as_ptr(), score.as_mut_ptr()) };
    assert_eq!(st, TdStatus::NullPointer);
}

#[test]
fn invalid_utf8_is_rejected() {
    let bad = [0xffu8, 0xfe, 0];
    let mut out = ptr::null_mut();
    let st = unsafe { td_clean_text(bad.as_ptr().cast(), &mut out) };
    assert_eq!(st, TdStatus::InvalidUtf8);
}

#[test]
fn scoring_matches_library() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { td_scorer_new(ptr::null(), false, 0.05, &mut h) }, TdStatus::Ok);
    let mut s = TdScore {
        compound: f64::NAN,
        sentiment: TdSentiment::Neutral,
        hit_count: 0,
    };
    assert_eq!(unsafe { td_score_text(h, c("great train ride").as_ptr(), &mut s) }, TdStatus::Ok);
    let expect = 3.1 / (3.1f64 * 3.1 + 15.0).sqrt();
    assert!((s.compound - expect).abs() < 1e-12, "{}", s.compound);
    assert_eq!(s.sentiment, TdSentiment::Positive);
    assert_eq!(s.hit_count, 1);

    assert_eq!(unsafe { td_score_text(h, c("terrible bus").as_ptr(), &mut s) }, TdStatus::Ok);
    assert_eq!(s.sentiment, TdSentiment::Negative);
    assert_eq!(unsafe { td_score_text(h, c("the bus").as_ptr(), &mut s) }, TdStatus::Ok);
    assert_eq!((s.compound, s.sentiment, s.hit_count), (0.0, TdSentiment::Neutral, 0));
    unsafe { td_scorer_free(h) };
}

#[test]
fn bad_lexicon_path_is_io_error() {
    let mut h = ptr::null_mut();
    let st = unsafe { td_scorer_new(c("/nonexistent/lexicon.txt").as_ptr(), false, 0.05, &mut h) };
    assert_eq!(st, TdStatus::Io);
    assert!(h.is_null());
    assert!(last_error().contains("/nonexistent/lexicon.txt"));
}

#[test]
fn bad_neutral_band_is_invalid_argument() {
    let mut h = ptr::null_mut();
    let st = unsafe { td_scorer_new(ptr::null(), false, -1.0, &mut h) };
    assert_eq!(st, TdStatus::InvalidArgument);
}

#[test]
fn relevance_two_stages() {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { td_relevance_new(ptr::null(), ptr::null(), false, &mut h) }, TdStatus::Ok);
    let mut t = TdRelevanceTag {
        dei: false,
        transport: false,
        relevant: false,
    };
    let cases = [
        ("no wheelchair access on this bus", (true, true, true)),
        ("wheelchair ramp at the park", (true, false, false)),
        ("the bus is late again", (false, false, false)),
    ];
    for (text, want) in cases {
        assert_eq!(unsafe { td_relevance_tag(h, c(text).as_ptr(), &mut t) }, TdStatus::Ok);
        assert_eq!((t.dei, t.transport, t.relevant), want, "{text}");
    }
    unsafe { td_relevance_free(h) };
}

#[test]
fn tracts_assign_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tracts.geojson");
    let grid = synth::tract_grid(3);
    std::fs::write(&path, synth::tracts_geojson(&grid).to_string()).unwrap();
    let set = transit_deia::geodemo::TractSet::new(grid.clone());

    let mut h = ptr::null_mut();
    let mut skipped = usize::MAX;
    let p = c(path.to_str().unwrap());
    assert_eq!(unsafe { td_tracts_load(p.as_ptr(), &mut h, &mut skipped) }, TdStatus::Ok);
    assert_eq!(skipped, 0);
    assert_eq!(unsafe { td_tracts_len(h) }, grid.len());

    for (lon, lat) in [(-73.97, 40.74), (-73.93, 40.71), (-74.5, 40.0)] {
        let mut g = ptr::null_mut();
        assert_eq!(unsafe { td_tracts_assign(h, lon, lat, &mut g) }, TdStatus::Ok);
        let got = (!g.is_null()).then(|| unsafe { CStr::from_ptr(g) }.to_str().unwrap().to_owned());
        assert_eq!(got.as_deref(), set.assign(lon, lat), "({lon}, {lat})");
        unsafe { td_string_free(g) };
    }
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { td_tracts_assign(h, f64::NAN, 40.7, &mut g) }, TdStatus::InvalidArgument);
    unsafe { td_tracts_free(h) };
}

#[test]
fn malformed_tracts_file_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.geojson");
    std::fs::write(&path, r#"{"type":"Feature"}"#).unwrap();
    let mut h = ptr::null_mut();
    let p = c(path.to_str().unwrap());
    assert_eq!(unsafe { td_tracts_load(p.as_ptr(), &mut h, ptr::null_mut()) }, TdStatus::Parse);
    assert!(h.is_null());
    assert!(last_error().contains("FeatureCollection"));
}

#[test]
fn classify_tract_with_missing_fields() {
    let mut out = TdClassification {
        income: TdDemoClass::Missing,
        female: TdDemoClass::Missing,
        hispanic_latino: TdDemoClass::Missing,
        black: TdDemoClass::Missing,
    };
    assert_eq!(unsafe { td_classify_tract(50_000.0, 30.5, 25.0, f64::NAN, &mut out) }, TdStatus::Ok);
    assert_eq!(out.income, TdDemoClass::Low);
    assert_eq!(out.female, TdDemoClass::Medium);
    assert_eq!(out.hispanic_latino, TdDemoClass::Medium);
    assert_eq!(out.black, TdDemoClass::Missing);
    assert_eq!(unsafe { td_classify_tract(150_000.01, 51.0, 50.01, 10.0, &mut out) }, TdStatus::Ok);
    assert_eq!(
        (out.income, out.female, out.hispanic_latino, out.black),
        (TdDemoClass::High, TdDemoClass::High, TdDemoClass::VeryHigh, TdDemoClass::Low)
    );
}
