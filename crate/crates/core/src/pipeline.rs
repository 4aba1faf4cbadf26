//! Stage runners. Each stage reads the previous stage's artifact from the
//! output directory and writes its own, so stages can run one at a time or
//! chained by [`run_all`] with identical results.

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{require_file, PipelineConfig};
use crate::corpus::{self, IngestCounts, ParseError, Stopwords};
use crate::error::{Error, Result};
use crate::geodemo::{self, TractDemographics, TractSet};
use crate::ngram;
use crate::record::{read_records, write_records, PostRecord, Stage};
use crate::relevance::{KeywordList, RelevanceFilter, StageCounts};
use crate::report::{
    self, BigramRow, BigramSummary, ClusteringSummary, FilterChain, Report, SegmentTopics, SentimentDistribution,
    TopicEntry,
};
use crate::sentiment::{Lexicon, Scorer, SentimentClass};
use crate::topics::{self, CoherenceRow, LdaParams};
use crate::SCHEMA_VERSION;

pub const CLEAN: &str = "clean.ndjson";
pub const INGEST_COUNTS: &str = "ingest_counts.json";
pub const RELEVANT: &str = "relevant.ndjson";
pub const FILTER_COUNTS: &str = "filter_counts.json";
pub const SCORED: &str = "scored.ndjson";
pub const BIGRAMS_CSV: &str = "bigrams.csv";
pub const BIGRAMS_JSON: &str = "bigrams.json";
pub const CLUSTERS_CSV: &str = "clusters.csv";
pub const FBI_HISTORY: &str = "fbi_history.txt";
pub const GEOTAGGED: &str = "geotagged.ndjson";
pub const POSTS_GEOJSON: &str = "posts.geojson";
pub const TRACTS_GEOJSON: &str = "tracts.geojson";
/// Present only while a run is incomplete; holds the failing stage.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

pub fn topics_file(segment: SentimentClass) -> String {
    format!("topics_{segment}.json")
}

pub fn coherence_file(segment: SentimentClass) -> String {
    format!("coherence_{segment}.csv")
}

fn out(cfg: &PipelineConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

fn write_versioned<T: Serialize>(path: &Path, body: T) -> Result<()> {
    write_json(path, &Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
}

fn read_versioned<T: DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    let v: serde_json::Value = read_json(path)?;
    let found = v.get("schema_version").and_then(|x| x.as_u64());
    if found != Some(SCHEMA_VERSION as u64) {
        return Err(Error::SchemaMismatch {
            file: path.display().to_string(),
            stage: stage.to_string(),
            expected: SCHEMA_VERSION,
            found: format!("schema_version {}", found.map_or("none".into(), |f| f.to_string())),
        });
    }
    Ok(serde_json::from_value::<Versioned<T>>(v)?.body)
}

fn ensure_out_dir(cfg: &PipelineConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))
}

fn load_stopwords(cfg: &PipelineConfig) -> Result<Stopwords> {
    match &cfg.inputs.stopwords {
        Some(p) => Ok(Stopwords::parse(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)),
        None => Ok(Stopwords::bundled()),
    }
}

fn load_keywords(path: Option<&Path>, name: &str, bundled: fn() -> KeywordList) -> Result<KeywordList> {
    match path {
        Some(p) => KeywordList::parse(name, &fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
        None => Ok(bundled()),
    }
}

fn load_scorer(cfg: &PipelineConfig) -> Result<Scorer> {
    let lexicon = match &cfg.inputs.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::bundled(),
    };
    Scorer::new(lexicon)
        .with_heuristics(cfg.heuristics)
        .with_neutral_band(cfg.neutral_band)
}

/// Result of the ingest stage; `errors` are the malformed input lines.
#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub counts: IngestCounts,
    pub errors: Vec<ParseError>,
}

pub fn ingest(cfg: &PipelineConfig) -> Result<IngestOutcome> {
    let run = || {
        require_file("ingest", "posts", cfg.inputs.posts.as_deref(), true)?;
        require_file("ingest", "stopwords", cfg.inputs.stopwords.as_deref(), false)?;
        let posts = cfg.inputs.posts.as_deref().expect("checked above");
        let stopwords = load_stopwords(cfg)?;
        ensure_out_dir(cfg)?;
        let file = File::open(posts).map_err(|e| Error::io(posts, e))?;
        let (clean, errors, counts) = corpus::ingest(BufReader::new(file), &cfg.bbox, &stopwords);
        for e in &errors {
            warn!("{e}");
        }
        let records: Vec<PostRecord> = clean.iter().map(PostRecord::from_clean).collect();
        write_records(&out(cfg, CLEAN), &records)?;
        write_versioned(&out(cfg, INGEST_COUNTS), counts)?;
        info!(
            "ingest: parsed={} parse_errors={} bbox_kept={} deduped={}",
            counts.parsed, counts.parse_errors, counts.bbox_kept, counts.deduped
        );
        Ok(IngestOutcome { counts, errors })
    };
    run().map_err(|e: Error| e.in_stage("ingest"))
}

pub fn filter(cfg: &PipelineConfig) -> Result<StageCounts> {
    let run = || {
        require_file("filter", "dei_keywords", cfg.inputs.dei_keywords.as_deref(), false)?;
        require_file("filter", "transport_keywords", cfg.inputs.transport_keywords.as_deref(), false)?;
        let dei = load_keywords(cfg.inputs.dei_keywords.as_deref(), "dei", KeywordList::bundled_dei)?;
        let transport = load_keywords(
            cfg.inputs.transport_keywords.as_deref(),
            "transport",
            KeywordList::bundled_transport,
        )?;
        let filter = RelevanceFilter::new(dei, transport, cfg.match_mode);
        let records = read_records(&out(cfg, CLEAN), Stage::Clean)?;
        let clean: Vec<_> = records.iter().map(PostRecord::to_clean).collect();
        let filtered = filter.tag_and_filter(&clean);
        let kept: Vec<PostRecord> = records
            .into_iter()
            .zip(&filtered.tags)
            .filter(|(_, t)| t.relevant)
            .map(|(mut r, t)| {
                r.stage = Stage::Relevant;
                r.dei = Some(t.dei);
                r.transport = Some(t.transport);
                r
            })
            .collect();
        write_records(&out(cfg, RELEVANT), &kept)?;
        write_versioned(&out(cfg, FILTER_COUNTS), filtered.counts)?;
        info!("filter: {}", filtered.counts);
        Ok(filtered.counts)
    };
    run().map_err(|e: Error| e.in_stage("filter"))
}

pub fn sentiment(cfg: &PipelineConfig) -> Result<SentimentDistribution> {
    let run = || {
        require_file("sentiment", "lexicon", cfg.inputs.lexicon.as_deref(), false)?;
        let scorer = load_scorer(cfg)?;
        let records = read_records(&out(cfg, RELEVANT), Stage::Relevant)?;
        let scored: Vec<PostRecord> = records
            .into_iter()
            .map(|r| {
                let s = scorer.score(&r.tokens);
                r.with_sentiment(&s)
            })
            .collect();
        write_records(&out(cfg, SCORED), &scored)?;
        let dist = report::sentiment_distribution(scored.iter().filter_map(|r| r.sentiment));
        info!(
            "sentiment: negative={} neutral={} positive={}",
            dist.n_negative, dist.n_neutral, dist.n_positive
        );
        Ok(dist)
    };
    run().map_err(|e: Error| e.in_stage("sentiment"))
}

fn segment_index(s: SentimentClass) -> u64 {
    SentimentClass::ALL.iter().position(|&c| c == s).expect("listed") as u64
}

/// Seed for a segment: `seed + 1000 * index` over negative, neutral, positive.
pub fn segment_seed(base: u64, segment: SentimentClass) -> u64 {
    base.wrapping_add(1000 * segment_index(segment))
}

fn fit_segment(cfg: &PipelineConfig, segment: SentimentClass, posts: &[&PostRecord]) -> Result<SegmentTopics> {
    let t = &cfg.topics;
    let docs = posts.iter().map(|r| (r.id.as_str(), r.tokens.as_slice()));
    let corpus = match topics::build_topic_corpus(docs, t.min_count, t.min_tokens) {
        Ok(c) => c,
        Err(Error::EmptyCorpus(why)) => return Ok(SegmentTopics::skipped(segment, posts.len(), why)),
        Err(e) => return Err(e),
    };
    let candidates: Vec<usize> = t.k.iter().copied().filter(|&k| k <= corpus.vocab_size()).collect();
    if candidates.is_empty() {
        let why = format!("vocabulary of {} words is smaller than every candidate K", corpus.vocab_size());
        return Ok(SegmentTopics::skipped(segment, posts.len(), why));
    }
    let base = LdaParams {
        k: candidates[0],
        alpha: t.alpha,
        beta: t.beta,
        iterations: t.iterations,
        seed: segment_seed(cfg.seed, segment),
    };
    let (model, coherence) = if candidates.len() == 1 {
        let model = topics::lda_fit(&corpus, &base)?;
        let c = topics::mean_coherence(&model, &topics::CoOccurrence::new(&corpus));
        let row = CoherenceRow {
            k: model.k,
            mean_coherence: c,
            seed: base.seed,
        };
        (model, vec![row])
    } else {
        let sel = topics::select_k(&corpus, &candidates, &base)?;
        (sel.best_model, sel.table)
    };
    let prevalence = topics::topic_prevalence(&model);
    let mut entries: Vec<TopicEntry> = (0..model.k)
        .map(|k| {
            Ok(TopicEntry {
                topic: k,
                prevalence: prevalence[k],
                words: topics::top_words(&model, k, t.top_n)?,
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| b.prevalence.total_cmp(&a.prevalence).then(a.topic.cmp(&b.topic)));
    Ok(SegmentTopics {
        segment,
        status: "ok".into(),
        reason: None,
        n_posts: posts.len(),
        n_docs: corpus.docs.len(),
        dropped_docs: corpus.dropped_docs,
        vocab_size: corpus.vocab_size(),
        k: model.k,
        alpha: model.alpha,
        beta: model.beta,
        iterations: model.iterations,
        seed: model.seed,
        coherence,
        topics: entries,
    })
}

/// Fits topics per sentiment segment (or only `only`), writing
/// `topics_<segment>.json` and `coherence_<segment>.csv` for each.
pub fn topics(cfg: &PipelineConfig, only: Option<SentimentClass>) -> Result<Vec<SegmentTopics>> {
    let run = || {
        let records = read_records(&out(cfg, SCORED), Stage::Scored)?;
        let mut results = Vec::new();
        for &segment in SentimentClass::ALL.iter() {
            if only.is_some_and(|o| o != segment) {
                continue;
            }
            let posts: Vec<&PostRecord> = records.iter().filter(|r| r.sentiment == Some(segment)).collect();
            let st = fit_segment(cfg, segment, &posts)?;
            match &st.reason {
                Some(why) => warn!("topics: {segment} segment skipped: {why}"),
                None => info!("topics: {segment} segment K={} over {} docs", st.k, st.n_docs),
            }
            write_versioned(&out(cfg, &topics_file(segment)), &st)?;
            let mut w = csv::Writer::from_path(out(cfg, &coherence_file(segment)))?;
            w.write_record(["K", "mean_coherence"])?;
            for row in &st.coherence {
                w.write_record([row.k.to_string(), row.mean_coherence.to_string()])?;
            }
            w.flush()?;
            results.push(st);
        }
        Ok(results)
    };
    run().map_err(|e: Error| e.in_stage("topics"))
}

pub fn bigrams(cfg: &PipelineConfig) -> Result<BigramSummary> {
    let run = || {
        let records = read_records(&out(cfg, SCORED), Stage::Scored)?;
        let docs: Vec<&[String]> = records.iter().map(|r| r.tokens.as_slice()).collect();
        let docs: Vec<Vec<&str>> = docs.iter().map(|d| d.iter().map(String::as_str).collect()).collect();
        let stats = ngram::count(&docs)?;

        let mut w = csv::Writer::from_path(out(cfg, BIGRAMS_CSV))?;
        w.write_record(["v", "w", "count"])?;
        for (v, wd, c) in ngram::top_bigrams(&stats, usize::MAX) {
            w.write_record([v, wd, c.to_string()])?;
        }
        w.flush()?;

        let clustering = match cfg.bigrams.g {
            None => None,
            Some(g) => {
                let res = ngram::cluster_exchange(&stats, g, cfg.bigrams.max_sweeps)?;
                let summary = ClusteringSummary::new(&res, &stats.vocab, cfg.bigrams.max_sweeps);
                let mut w = csv::Writer::from_path(out(cfg, CLUSTERS_CSV))?;
                w.write_record(["word", "class"])?;
                for wc in &summary.classes {
                    w.write_record([wc.word.clone(), wc.class.to_string()])?;
                }
                w.flush()?;
                let history: String = res.history.iter().map(|f| format!("{f}\n")).collect();
                let path = out(cfg, FBI_HISTORY);
                fs::write(&path, history).map_err(|e| Error::io(&path, e))?;
                info!(
                    "bigrams: G={g} sweeps={} moves={} converged={}",
                    res.sweeps, res.moves, res.converged
                );
                Some(summary)
            }
        };
        let summary = BigramSummary {
            total_tokens: stats.total,
            vocab_size: stats.vocab_size(),
            total_bigrams: stats.total_bigrams(),
            top: ngram::top_bigrams(&stats, cfg.bigrams.top_n)
                .into_iter()
                .map(|(v, w, count)| BigramRow { v, w, count })
                .collect(),
            clustering,
        };
        write_versioned(&out(cfg, BIGRAMS_JSON), &summary)?;
        Ok(summary)
    };
    run().map_err(|e: Error| e.in_stage("bigrams"))
}

fn load_tract_set(cfg: &PipelineConfig, stage: &'static str) -> Result<(TractSet, Vec<geodemo::TractPolygon>)> {
    require_file(stage, "tracts", cfg.inputs.tracts.as_deref(), true)?;
    let path = cfg.inputs.tracts.as_deref().expect("checked above");
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let load = geodemo::load_tracts(BufReader::new(file))?;
    for e in &load.errors {
        warn!("{}: {e}", path.display());
    }
    if load.tracts.is_empty() {
        return Err(Error::GeoJson(format!("{}: no usable tract features", path.display())));
    }
    Ok((TractSet::new(load.tracts.clone()), load.tracts))
}

/// Counts from the geotag stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeotagCounts {
    pub assigned: usize,
    pub unassigned: usize,
}

pub fn geotag(cfg: &PipelineConfig) -> Result<GeotagCounts> {
    let run = || {
        let (set, _) = load_tract_set(cfg, "geotag")?;
        let records = read_records(&out(cfg, SCORED), Stage::Scored)?;
        let mut counts = GeotagCounts {
            assigned: 0,
            unassigned: 0,
        };
        let tagged: Vec<PostRecord> = records
            .into_iter()
            .map(|mut r| {
                let g = set.assign(r.lon, r.lat).map(str::to_string);
                if g.is_some() {
                    counts.assigned += 1;
                } else {
                    counts.unassigned += 1;
                }
                r.stage = Stage::Geotagged;
                r.geoid = Some(g);
                r
            })
            .collect();
        write_records(&out(cfg, GEOTAGGED), &tagged)?;
        info!("geotag: assigned={} unassigned={}", counts.assigned, counts.unassigned);
        Ok(counts)
    };
    run().map_err(|e: Error| e.in_stage("geotag"))
}

fn load_demographics(cfg: &PipelineConfig) -> Result<std::collections::BTreeMap<String, TractDemographics>> {
    require_file("report", "acs", cfg.inputs.acs.as_deref(), true)?;
    let path = cfg.inputs.acs.as_deref().expect("checked above");
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = geodemo::load_acs(file)?;
    for r in &table.rejected {
        warn!("{}: {r}", path.display());
    }
    Ok(table.records)
}

/// Assembles the report bundle from the stage artifacts in the output directory.
pub fn report(cfg: &PipelineConfig) -> Result<Report> {
    let run = || {
        let demographics = load_demographics(cfg)?;
        let (_, polygons) = load_tract_set(cfg, "report")?;
        let ingest: IngestCounts = read_versioned(&out(cfg, INGEST_COUNTS), "ingest")?;
        let filter: StageCounts = read_versioned(&out(cfg, FILTER_COUNTS), "filter")?;
        let posts = read_records(&out(cfg, GEOTAGGED), Stage::Geotagged)?;

        let mut segments = Vec::new();
        for &segment in SentimentClass::ALL.iter() {
            let path = out(cfg, &topics_file(segment));
            if path.is_file() {
                segments.push(read_versioned::<SegmentTopics>(&path, "topics")?);
            }
        }
        let bigrams: BigramSummary = read_versioned(&out(cfg, BIGRAMS_JSON), "bigrams")?;

        let classes: Vec<(Option<&str>, SentimentClass)> = posts
            .iter()
            .map(|r| Ok((r.tract(), r.sentiment_class()?)))
            .collect::<Result<_>>()?;
        let tracts = report::tract_rollup(classes.iter().copied(), &demographics);
        let rep = Report {
            schema_version: SCHEMA_VERSION,
            tool_version: crate::TOOL_VERSION.to_string(),
            seed: cfg.seed,
            filter_chain: FilterChain {
                total: ingest.parsed + ingest.parse_errors,
                parse_errors: ingest.parse_errors,
                bbox_filtered: ingest.bbox_kept,
                deduped: ingest.deduped,
                dei_relevant: filter.stage1_kept,
                transport_relevant: filter.stage2_kept,
            },
            sentiment_distribution: report::sentiment_distribution(classes.iter().map(|c| c.1)),
            topics: segments,
            demographic_distribution: report::demographic_distribution(&tracts),
            bigrams,
            tracts,
        };
        report::emit_report(&rep, &cfg.out_dir)?;
        let (points, polys) = report::emit_geojson(&posts, &rep.tracts, &polygons);
        report::write_geojson(&out(cfg, POSTS_GEOJSON), &points)?;
        report::write_geojson(&out(cfg, TRACTS_GEOJSON), &polys)?;
        info!(
            "report: {} posts over {} tracts, {} highly sensitive",
            rep.tracts.total_posts(),
            rep.tracts.tracts_total,
            rep.tracts.highly_sensitive
        );
        Ok(rep)
    };
    run().map_err(|e: Error| e.in_stage("report"))
}

/// Checks every input the full pipeline will read before any stage runs.
pub fn validate(cfg: &PipelineConfig) -> Result<()> {
    let i = &cfg.inputs;
    require_file("ingest", "posts", i.posts.as_deref(), true)?;
    require_file("ingest", "stopwords", i.stopwords.as_deref(), false)?;
    require_file("filter", "dei_keywords", i.dei_keywords.as_deref(), false)?;
    require_file("filter", "transport_keywords", i.transport_keywords.as_deref(), false)?;
    require_file("sentiment", "lexicon", i.lexicon.as_deref(), false)?;
    require_file("geotag", "tracts", i.tracts.as_deref(), true)?;
    require_file("report", "acs", i.acs.as_deref(), true)?;
    Ok(())
}

fn stage_of(e: &Error) -> &'static str {
    match e {
        Error::Stage { stage, .. } => stage,
        _ => "run",
    }
}

/// Runs every stage in order: ingest, filter, sentiment, topics, bigrams,
/// geotag, report. On failure the output directory carries an
/// [`INCOMPLETE_MARKER`] file naming the failed stage.
pub fn run_all(cfg: &PipelineConfig) -> Result<Report> {
    validate(cfg)?;
    ensure_out_dir(cfg)?;
    let marker = out(cfg, INCOMPLETE_MARKER);
    fs::write(&marker, "run in progress\n").map_err(|e| Error::io(&marker, e))?;
    let result = (|| {
        ingest(cfg)?;
        filter(cfg)?;
        sentiment(cfg)?;
        topics(cfg, None)?;
        bigrams(cfg)?;
        geotag(cfg)?;
        report(cfg)
    })();
    match result {
        Ok(rep) => {
            fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
            Ok(rep)
        }
        Err(e) => {
            let _ = fs::write(&marker, format!("failed at stage {}\n{e}\n", stage_of(&e)));
            Err(e)
        }
    }
}
