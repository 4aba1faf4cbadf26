use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use once_cell::sync::Lazy;
use serde_json::Value;

use transit_deia::config::{PipelineConfig, RawConfig};
use transit_deia::sentiment::SentimentClass;
use transit_deia::{pipeline, synth, Error, SCHEMA_VERSION, TOOL_VERSION};

static VERSION: Lazy<String> = Lazy::new(|| format!("{TOOL_VERSION} (schema {SCHEMA_VERSION})"));

#[derive(Parser)]
#[command(name = "transit-deia", about = "Transportation equity signals from geotagged posts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Pipeline config file (`key = value` with `[section]` headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Keyword matching: `token` or `substring`.
    #[arg(long = "match", global = true)]
    match_mode: Option<String>,
    /// Enable negation, booster and contrast heuristics in sentiment scoring.
    #[arg(long, global = true)]
    heuristics: bool,
    #[arg(long, global = true)]
    neutral_band: Option<f64>,
    /// Topic count, or a comma-separated list to select from by coherence.
    #[arg(long, global = true)]
    k: Option<String>,
    /// Number of word classes for bigram clustering.
    #[arg(long, global = true)]
    g: Option<usize>,
    /// Override any config key, e.g. `--set input.posts=posts.ndjson`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Run(Stage),
    /// Parse, filter to the bounding box, deduplicate and clean posts.
    Ingest(Stage),
    /// Keep posts matching both keyword lists.
    Filter(Stage),
    /// Score and classify relevant posts.
    Sentiment(Stage),
    /// Fit LDA topics per sentiment segment.
    Topics {
        #[command(flatten)]
        stage: Stage,
        /// Only this segment: negative, neutral or positive.
        #[arg(long)]
        segment: Option<SentimentClass>,
    },
    /// Count bigrams and optionally cluster words into classes.
    Bigrams(Stage),
    /// Assign posts to census tracts.
    Geotag(Stage),
    /// Build the report bundle from stage outputs.
    Report(Stage),
    /// Write the synthetic fixture inputs into a directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Rewrite posts with nested `coordinates: [lon, lat]` into flat `lon`/`lat` fields.
    ConvertCoords {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct Stage {
    #[command(flatten)]
    common: Common,
}

fn build_config(c: &Common) -> transit_deia::Result<PipelineConfig> {
    let mut raw = match &c.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    let here = Path::new("");
    let mut set = |k: &str, v: String| raw.set(k, &v, here).map_err(Error::Config);
    if let Some(s) = c.seed {
        set("seed", s.to_string())?;
    }
    if let Some(d) = &c.out_dir {
        set("out_dir", d.display().to_string())?;
    }
    if let Some(m) = &c.match_mode {
        set("relevance.match", m.clone())?;
    }
    if c.heuristics {
        set("sentiment.heuristics", "true".into())?;
    }
    if let Some(b) = c.neutral_band {
        set("sentiment.neutral_band", b.to_string())?;
    }
    if let Some(k) = &c.k {
        set("topics.k", k.clone())?;
    }
    if let Some(g) = c.g {
        set("bigrams.g", g.to_string())?;
    }
    for s in &c.set {
        raw.set_override(s)?;
    }
    PipelineConfig::from_raw(&raw)
}

fn convert_coords(input: &Path, output: &Path) -> transit_deia::Result<(usize, usize)> {
    let reader = BufReader::new(File::open(input).map_err(|e| Error::io(input, e))?);
    let mut w = BufWriter::new(File::create(output).map_err(|e| Error::io(output, e))?);
    let (mut ok, mut bad) = (0, 0);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(input, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match flatten_coords(&line) {
            Ok(v) => {
                serde_json::to_writer(&mut w, &v)?;
                w.write_all(b"\n").map_err(|e| Error::io(output, e))?;
                ok += 1;
            }
            Err(reason) => {
                eprintln!("line{}: {reason}", i + 1);
                bad += 1;
            }
        }
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    Ok((ok, bad))
}

// Accepts `coordinates: [lon, lat]` or a GeoJSON point `coordinates: {coordinates: [lon, lat]}`.
fn flatten_coords(line: &str) -> Result<Value, String> {
    let mut v: Value = serde_json::from_str(line).map_err(|e| format!("malformed json: {e}"))?;
    let obj = v.as_object_mut().ok_or("expected a json object")?;
    let coords = obj.remove("coordinates").ok_or("missing field `coordinates`")?;
    let arr = match &coords {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("coordinates")
            .and_then(Value::as_array)
            .ok_or("`coordinates` object has no coordinates array")?,
        _ => return Err("`coordinates` must be an array or a point object".into()),
    };
    match arr.as_slice() {
        [lon, lat, ..] if lon.is_number() && lat.is_number() => {
            obj.insert("lon".into(), lon.clone());
            obj.insert("lat".into(), lat.clone());
            Ok(v)
        }
        _ => Err("`coordinates` must hold [lon, lat]".into()),
    }
}

fn run(cmd: Command) -> transit_deia::Result<()> {
    match cmd {
        Command::Synth { out } => {
            synth::write_fixture_bundle(&out)?;
            println!("wrote {} files to {}", synth::FIXTURE_FILES.len(), out.display());
        }
        Command::ConvertCoords { input, output } => {
            let (ok, bad) = convert_coords(&input, &output)?;
            println!("converted={ok} skipped={bad}");
        }
        Command::Run(s) => {
            let rep = pipeline::run_all(&build_config(&s.common)?)?;
            println!(
                "posts={} relevant={} tracts={} highly_sensitive={}",
                rep.filter_chain.total,
                rep.filter_chain.transport_relevant,
                rep.tracts.tracts_total,
                rep.tracts.highly_sensitive
            );
        }
        Command::Ingest(s) => {
            let o = pipeline::ingest(&build_config(&s.common)?)?;
            println!(
                "parsed={} parse_errors={} bbox_kept={} deduped={}",
                o.counts.parsed, o.counts.parse_errors, o.counts.bbox_kept, o.counts.deduped
            );
        }
        Command::Filter(s) => println!("{}", pipeline::filter(&build_config(&s.common)?)?),
        Command::Sentiment(s) => {
            let d = pipeline::sentiment(&build_config(&s.common)?)?;
            println!(
                "negative={:.1}% neutral={:.1}% positive={:.1}%",
                d.pct_negative, d.pct_neutral, d.pct_positive
            );
        }
        Command::Topics { stage, segment } => {
            for st in pipeline::topics(&build_config(&stage.common)?, segment)? {
                println!("{} {} K={}", st.segment, st.status, st.k);
            }
        }
        Command::Bigrams(s) => {
            let b = pipeline::bigrams(&build_config(&s.common)?)?;
            if let Some(c) = &b.clustering {
                for f in &c.history {
                    println!("{f}");
                }
            }
        }
        Command::Geotag(s) => {
            let c = pipeline::geotag(&build_config(&s.common)?)?;
            println!("assigned={} unassigned={}", c.assigned, c.unassigned);
        }
        Command::Report(s) => {
            let cfg = build_config(&s.common)?;
            pipeline::report(&cfg)?;
            println!("report written to {}", cfg.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, rec| writeln!(buf, "{}", rec.args()))
        .init();
    let matches = Cli::command().version(VERSION.as_str()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
