//! C ABI over the transit-deia library.
//!
//! Every fallible function returns a [`TdStatus`]; on failure a message is
//! available from [`td_last_error`] on the same thread. Handles are opaque and
//! must be released with their matching `*_free` function. Strings returned
//! through out-parameters are owned by the caller and released with
//! [`td_string_free`]. Text is tokenized with the bundled stopword list, as the
//! pipeline does by default.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use transit_deia::corpus::{self, Stopwords};
use transit_deia::geodemo::{self, DemoClass, TractDemographics, TractSet};
use transit_deia::relevance::{KeywordList, MatchMode, RelevanceFilter};
use transit_deia::sentiment::{Lexicon, Scorer, SentimentClass};
use transit_deia::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdSentiment {
    Negative = 0,
    Neutral = 1,
    Positive = 2,
}

/// `Missing` marks an absent or NaN input.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdDemoClass {
    Missing = 0,
    Low = 1,
    Medium = 2,
    High = 3,
    VeryHigh = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TdScore {
    pub compound: f64,
    pub sentiment: TdSentiment,
    /// Tokens found in the lexicon.
    pub hit_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TdRelevanceTag {
    pub dei: bool,
    /// Only set for posts that passed the DEI stage.
    pub transport: bool,
    pub relevant: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TdClassification {
    pub income: TdDemoClass,
    pub female: TdDemoClass,
    pub hispanic_latino: TdDemoClass,
    pub black: TdDemoClass,
}

/// Sentiment scorer handle.
pub struct TdScorer {
    scorer: Scorer,
    stopwords: Stopwords,
}

/// Two-stage keyword filter handle.
pub struct TdRelevance {
    filter: RelevanceFilter,
    stopwords: Stopwords,
}

/// Census tract polygons handle.
pub struct TdTracts {
    set: TractSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(TdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } | Error::Stream(_) => TdStatus::Io,
            Error::InvalidArgument(_) | Error::Config(_) => TdStatus::InvalidArgument,
            _ => TdStatus::Parse,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(TdStatus::NullPointer, format!("{what} is null"))
}

// Runs `f` with panics and errors mapped to a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            TdStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(TdStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap().into_raw()
}

fn read_file(path: &str) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e).into())
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn td_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, e.g. "0.1.0". Static; do not free.
#[no_mangle]
pub extern "C" fn td_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn td_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Lowercases and strips URLs, mentions, emoji and punctuation.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn td_clean_text(text: *const c_char, out: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        write_out(out, c_string(corpus::clean_text(text)), "out")
    })
}

/// Creates a scorer. A null `lexicon_path` uses the bundled lexicon.
/// `neutral_band` is the half-width of the neutral class around zero.
///
/// # Safety
/// `lexicon_path` must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn td_scorer_new(
    lexicon_path: *const c_char,
    heuristics: bool,
    neutral_band: f64,
    out: *mut *mut TdScorer,
) -> TdStatus {
    guard(|| {
        let lexicon = match opt_str_arg(lexicon_path, "lexicon_path")? {
            Some(p) => Lexicon::load(Path::new(p))?,
            None => Lexicon::bundled(),
        };
        let scorer = Scorer::new(lexicon).with_heuristics(heuristics).with_neutral_band(neutral_band)?;
        let h = Box::new(TdScorer {
            scorer,
            stopwords: Stopwords::bundled(),
        });
        write_out(out, Box::into_raw(h), "out")
    })
}

/// # Safety
/// `h` must be null or come from [`td_scorer_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn td_scorer_free(h: *mut TdScorer) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Cleans, tokenizes and scores raw post text.
///
/// # Safety
/// `h` must be a live scorer; `text` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn td_score_text(h: *const TdScorer, text: *const c_char, out: *mut TdScore) -> TdStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("scorer"))?;
        let text = str_arg(text, "text")?;
        let tokens = corpus::tokenize(&corpus::clean_text(text), &h.stopwords);
        let r = h.scorer.score(&tokens);
        let sentiment = match r.class {
            SentimentClass::Negative => TdSentiment::Negative,
            SentimentClass::Neutral => TdSentiment::Neutral,
            SentimentClass::Positive => TdSentiment::Positive,
        };
        write_out(
            out,
            TdScore {
                compound: r.compound,
                sentiment,
                hit_count: r.hit_count,
            },
            "out",
        )
    })
}

/// Creates a keyword filter. Null paths use the bundled lists; `substring`
/// switches from whole-token to substring matching.
///
/// # Safety
/// Paths must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn td_relevance_new(
    dei_path: *const c_char,
    transport_path: *const c_char,
    substring: bool,
    out: *mut *mut TdRelevance,
) -> TdStatus {
    guard(|| {
        let dei = match opt_str_arg(dei_path, "dei_path")? {
            Some(p) => KeywordList::parse("dei", &read_file(p)?)?,
            None => KeywordList::bundled_dei(),
        };
        let transport = match opt_str_arg(transport_path, "transport_path")? {
            Some(p) => KeywordList::parse("transport", &read_file(p)?)?,
            None => KeywordList::bundled_transport(),
        };
        let mode = if substring { MatchMode::Substring } else { MatchMode::Token };
        let h = Box::new(TdRelevance {
            filter: RelevanceFilter::new(dei, transport, mode),
            stopwords: Stopwords::bundled(),
        });
        write_out(out, Box::into_raw(h), "out")
    })
}

/// # Safety
/// `h` must be null or come from [`td_relevance_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn td_relevance_free(h: *mut TdRelevance) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live filter; `text` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn td_relevance_tag(
    h: *const TdRelevance,
    text: *const c_char,
    out: *mut TdRelevanceTag,
) -> TdStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("filter"))?;
        let text = str_arg(text, "text")?;
        let tokens = corpus::tokenize(&corpus::clean_text(text), &h.stopwords);
        let t = h.filter.tag(&tokens);
        write_out(
            out,
            TdRelevanceTag {
                dei: t.dei,
                transport: t.transport,
                relevant: t.relevant,
            },
            "out",
        )
    })
}

/// Loads tract polygons from a GeoJSON FeatureCollection. Features that fail
/// to parse are skipped and counted in `skipped` (which may be null).
///
/// # Safety
/// `path` NUL-terminated; `out` writable; `skipped` null or writable.
#[no_mangle]
pub unsafe extern "C" fn td_tracts_load(path: *const c_char, out: *mut *mut TdTracts, skipped: *mut usize) -> TdStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let load = geodemo::load_tracts(BufReader::new(file))?;
        if !skipped.is_null() {
            skipped.write(load.errors.len());
        }
        let h = Box::new(TdTracts {
            set: TractSet::new(load.tracts),
        });
        write_out(out, Box::into_raw(h), "out")
    })
}

/// # Safety
/// `h` must be null or come from [`td_tracts_load`], freed once.
#[no_mangle]
pub unsafe extern "C" fn td_tracts_free(h: *mut TdTracts) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Number of polygons (a multipolygon tract counts once per part).
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_tracts_len(h: *const TdTracts) -> usize {
    h.as_ref().map_or(0, |t| t.set.len())
}

/// Finds the tract containing (lon, lat). `*geoid` is set to a new string, or
/// to null when no tract contains the point.
///
/// # Safety
/// `h` must be a live handle; `geoid` writable.
#[no_mangle]
pub unsafe extern "C" fn td_tracts_assign(h: *const TdTracts, lon: f64, lat: f64, geoid: *mut *mut c_char) -> TdStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("tracts"))?;
        if !lon.is_finite() || !lat.is_finite() {
            return Err(Fail(TdStatus::InvalidArgument, "coordinates must be finite".into()));
        }
        let found = h.set.assign(lon, lat).map_or(ptr::null_mut(), |g| c_string(g.to_string()));
        write_out(geoid, found, "geoid")
    })
}

/// Classifies one tract's demographics. Pass NaN for a missing field.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn td_classify_tract(
    income_per_capita: f64,
    pct_female: f64,
    pct_hispanic_latino: f64,
    pct_black: f64,
    out: *mut TdClassification,
) -> TdStatus {
    guard(|| {
        let opt = |x: f64| (!x.is_nan()).then_some(x);
        let demo = TractDemographics {
            geoid: String::new(),
            income_per_capita: opt(income_per_capita),
            pct_female: opt(pct_female),
            pct_hispanic_latino: opt(pct_hispanic_latino),
            pct_black: opt(pct_black),
        };
        let c = geodemo::classify_tract(&demo);
        let conv = |d: Option<DemoClass>| match d {
            None => TdDemoClass::Missing,
            Some(DemoClass::Low) => TdDemoClass::Low,
            Some(DemoClass::Medium) => TdDemoClass::Medium,
            Some(DemoClass::High) => TdDemoClass::High,
            Some(DemoClass::VeryHigh) => TdDemoClass::VeryHigh,
        };
        write_out(
            out,
            TdClassification {
                income: conv(c.income),
                female: conv(c.female),
                hispanic_latino: conv(c.hispanic_latino),
                black: conv(c.black),
            },
            "out",
        )
    })
}
