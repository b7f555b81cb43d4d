//! Command-line front end: `martensim {simulate|stats|render|verify}`.
//!
//! Every flag overrides the corresponding key of the `--config` file. Exit
//! codes: 0 success, 1 failed criterion or runtime failure, 2 usage error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::blocks::{BlockLibrary, Orientation};
use crate::config::RunSpec;
use crate::error::{Error, Result};
use crate::fragment::io::{write_events, write_series};
use crate::fragment::{run, Algorithm, DegenerateRule, SeriesRow, SimConfig, SimResult, SimState, StopRule};
use crate::geometry::BucketParams;
use crate::render::{rasterize, write_ppm, ColorMap};
use crate::sobolev::step_difference_series;
use crate::stats::{
    bucket_volumes, combine_distributions, fit_power_law, inclusion_lengths, tail_fraction, write_buckets, FitMode,
    Histogram, PowerLawFit,
};
use crate::verify::{self, Faults, Level};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "MARTENSIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "martensim", version, about = "Stochastic nucleation of martensitic microstructures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the covering process and write events, series and final state.
    Simulate(Common),
    /// Length histograms, power-law fits, aspect buckets and norm series.
    Stats(StatsArgs),
    /// Rasterize a run or a model block to a PPM image.
    Render(RenderArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
}

fn parse_enum<T: for<'de> Deserialize<'de>>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run specification.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// A, B or Amod.
    #[arg(long, value_parser = parse_enum::<Algorithm>)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Probability of the horizontal direction.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "min_length")]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub min_length: Option<f64>,
    /// Original or Change1.
    #[arg(long, value_parser = parse_enum::<DegenerateRule>)]
    pub degenerate_rule: Option<DegenerateRule>,
    #[arg(long)]
    pub block_depth: Option<u32>,
    #[arg(long)]
    pub n_seeds: Option<u64>,
    #[arg(long)]
    pub base_seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Final-state files to analyse instead of running the ensemble.
    #[arg(long = "input", num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Predict the combined exponent from an outer and an inner fit file.
    #[arg(long, num_args = 2, value_names = ["OUTER", "INNER"])]
    pub combine: Vec<PathBuf>,
    /// Also write the step-difference norm series of each run.
    #[arg(long)]
    pub sobolev: bool,
    #[arg(long)]
    pub bins_per_decade: Option<u32>,
    #[arg(long)]
    pub fit_lo: Option<f64>,
    #[arg(long)]
    pub fit_hi: Option<f64>,
    /// raw_count or count_density.
    #[arg(long, value_parser = parse_enum::<FitMode>)]
    pub fit_mode: Option<FitMode>,
    #[arg(long)]
    pub bucket_lambda: Option<f64>,
    #[arg(long)]
    pub j1: Option<i64>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long = "sobolev-p")]
    pub sobolev_p: Option<f64>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub n_samples: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: Common,
    /// Final-state file to render instead of running a simulation.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Render the model block of this orientation instead of a run.
    #[arg(long, value_parser = parse_enum::<Orientation>)]
    pub block: Option<Orientation>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// fast or full.
    #[arg(value_parser = parse_enum::<Level>, default_value = "fast")]
    pub level: Level,
    /// Comma-separated criterion numbers.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u32>,
    /// Report file; defaults to verify_report.json in the output directory.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Checker fault: replace the Model A contraction constant.
    #[arg(long, hide = true)]
    pub fault_c_tilde_a: Option<f64>,
}

impl Common {
    /// Loads the config file and applies the flags.
    pub fn spec(&self) -> Result<RunSpec> {
        let mut s = match &self.config {
            Some(p) => RunSpec::load(p)?,
            None => RunSpec::default(),
        };
        if let Some(v) = self.algorithm {
            s.algorithm = v;
        }
        if let Some(v) = self.delta {
            s.delta = v;
        }
        if let Some(v) = self.p {
            s.p = v;
        }
        if let Some(v) = self.gamma {
            s.gamma = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.max_steps {
            s.stop = StopRule::MaxSteps(v);
        }
        if let Some(v) = self.min_length {
            s.stop = StopRule::MinLength(v);
        }
        if let Some(v) = self.degenerate_rule {
            s.degenerate_rule = v;
        }
        if let Some(v) = self.block_depth {
            s.block_depth = v;
        }
        if let Some(v) = self.n_seeds {
            s.ensemble.n_seeds = v;
        }
        if let Some(v) = self.base_seed {
            s.ensemble.base_seed = v;
        }
        if let Some(v) = &self.out {
            s.output.dir = v.clone();
        }
        Ok(s)
    }
}

impl StatsArgs {
    fn spec(&self) -> Result<RunSpec> {
        let mut s = self.common.spec()?;
        let st = &mut s.stats;
        if let Some(v) = self.bins_per_decade {
            st.bins_per_decade = v;
        }
        if let Some(v) = self.fit_lo {
            st.fit_lo = v;
        }
        if let Some(v) = self.fit_hi {
            st.fit_hi = v;
        }
        if let Some(v) = self.fit_mode {
            st.fit_mode = v;
        }
        if let Some(v) = self.bucket_lambda {
            st.bucket_lambda = v;
        }
        if let Some(v) = self.j1 {
            st.j1 = v;
        }
        let so = &mut s.sobolev;
        if let Some(v) = self.s {
            so.s = v;
        }
        if let Some(v) = self.sobolev_p {
            so.p = v;
        }
        if let Some(v) = self.r_min {
            so.r_min = v;
        }
        if let Some(v) = self.n_samples {
            so.n_samples = v;
        }
        Ok(s)
    }
}

/// Final state of a run as written by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub config: SimConfig,
    pub series: Vec<SeriesRow>,
    pub state: SimState,
}

impl StateFile {
    pub fn load(path: &Path) -> Result<SimResult> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let s: StateFile =
            serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
        Ok(SimResult { config: s.config, events: Vec::new(), series: s.series, state: s.state })
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let p = dir.join(name);
    let f = File::create(&p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    Ok(BufWriter::new(f))
}

fn suffix(name: &str, ext: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("{name}_{s}.{ext}"),
        None => format!("{name}.{ext}"),
    }
}

fn run_all(spec: &RunSpec) -> Result<Vec<SimResult>> {
    spec.seeds().into_par_iter().map(|s| run(&spec.sim_config(s))).collect()
}

/// Writes `events.jsonl`, `series.csv` and `state.json` per seed.
pub fn cmd_simulate(spec: &RunSpec) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    let results = run_all(spec)?;
    let dir = &spec.output.dir;
    let many = results.len() > 1;
    let mut written = Vec::new();
    for res in &results {
        let tag = many.then_some(res.config.seed);
        let names = [suffix("events", "jsonl", tag), suffix("series", "csv", tag), suffix("state", "json", tag)];
        let mut w = create(dir, &names[0])?;
        write_events(&mut w, &res.events)?;
        w.flush()?;
        let mut w = create(dir, &names[1])?;
        write_series(&mut w, &res.series)?;
        w.flush()?;
        let mut w = create(dir, &names[2])?;
        let state = StateFile { config: res.config.clone(), series: res.series.clone(), state: res.state.clone() };
        serde_json::to_writer(&mut w, &state)?;
        w.write_all(b"\n")?;
        w.flush()?;
        written.extend(names.iter().map(|n| dir.join(n)));
    }
    Ok(written)
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub mode: FitMode,
    pub fit: PowerLawFit,
    /// Exponent of the length density, whichever mode was fitted.
    pub density_exponent: f64,
    pub n_runs: usize,
    pub n_lengths: u64,
    pub covered_fraction: f64,
    pub bucket_total: f64,
    pub tail_fraction: f64,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<Vec<PathBuf>> {
    let spec = args.spec()?;
    let dir = spec.output.dir.clone();
    if !args.combine.is_empty() {
        let read = |p: &PathBuf| -> Result<FitFile> {
            let t = fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&t).map_err(|e| Error::InvalidParameter(format!("{}: {e}", p.display())))
        };
        let (outer, inner) = (read(&args.combine[0])?, read(&args.combine[1])?);
        let c = combine_distributions(-outer.density_exponent, -inner.density_exponent);
        let mut w = create(&dir, "combined.json")?;
        serde_json::to_writer_pretty(
            &mut w,
            &json!({"outer_density_exponent": -outer.density_exponent, "inner_density_exponent": -inner.density_exponent,
                    "combined_exponent": c.exponent, "branch": c.branch}),
        )?;
        w.flush()?;
        println!("combined exponent {} ({:?} branch)", c.exponent, c.branch);
        return Ok(vec![dir.join("combined.json")]);
    }
    spec.validate()?;
    let results = if args.inputs.is_empty() {
        run_all(&spec)?
    } else {
        args.inputs.iter().map(|p| StateFile::load(p)).collect::<Result<Vec<_>>>()?
    };
    let bins = spec.stats.bins();
    let mut hist = Histogram::from_spec(&bins)?;
    for r in &results {
        for x in inclusion_lengths(r) {
            hist.add(x);
        }
    }
    let mut w = create(&dir, "histogram.csv")?;
    hist.write_csv(&mut w)?;
    w.flush()?;
    let fit = fit_power_law(&hist, spec.stats.fit_lo, spec.stats.fit_hi, spec.stats.fit_mode)?;
    let density_exponent = match spec.stats.fit_mode {
        FitMode::RawCount => fit.exponent + 1.0,
        FitMode::CountDensity => fit.exponent,
    };
    let bp = BucketParams::snapped(spec.stats.bucket_lambda, results[0].config.delta)?;
    let rects: Vec<_> = results.iter().flat_map(|r| r.state.components().map(|c| c.rect)).collect();
    let buckets = bucket_volumes(rects.iter(), &bp);
    let mut w = create(&dir, "buckets.csv")?;
    write_buckets(&mut w, &buckets)?;
    w.flush()?;
    let covered = results.iter().map(|r| 1.0 - r.state.volume).sum::<f64>() / results.len() as f64;
    let out = FitFile {
        mode: spec.stats.fit_mode,
        fit,
        density_exponent,
        n_runs: results.len(),
        n_lengths: hist.total,
        covered_fraction: covered,
        bucket_total: buckets.total,
        tail_fraction: tail_fraction(&buckets, spec.stats.j1),
    };
    let mut w = create(&dir, "fit.json")?;
    serde_json::to_writer_pretty(&mut w, &out)?;
    w.flush()?;
    let mut written = vec![dir.join("histogram.csv"), dir.join("fit.json"), dir.join("buckets.csv")];
    if args.sobolev {
        let lib = BlockLibrary::for_config(&results[0].config)?;
        for r in &results {
            let series = step_difference_series(r, &lib, &spec.sobolev, 1.0, r.config.seed)?;
            let name = suffix("sobolev_series", "csv", (results.len() > 1).then_some(r.config.seed));
            let mut w = create(&dir, &name)?;
            series.write_csv(&mut w)?;
            w.flush()?;
            written.push(dir.join(name));
        }
    }
    println!("exponent {:.4} (R^2 {:.4}), covered fraction {covered:.4}", out.fit.exponent, out.fit.r_squared);
    Ok(written)
}

pub fn cmd_render(args: &RenderArgs) -> Result<PathBuf> {
    let mut spec = args.common.spec()?;
    if let Some(v) = args.width {
        spec.render.width = v;
    }
    if let Some(v) = args.height {
        spec.render.height = v;
    }
    spec.validate()?;
    let cfg = spec.sim_config(spec.seed);
    let (ms, name) = match (args.block, &args.input) {
        (Some(o), _) => {
            let lib = BlockLibrary::for_config(&cfg)?;
            ((**lib.block(o)).clone(), format!("block_{}.ppm", if o == Orientation::Horizontal { "h" } else { "v" }))
        }
        (None, Some(p)) => {
            let res = StateFile::load(p)?;
            (BlockLibrary::for_config(&res.config)?.simulation_microstructure(&res), "image.ppm".to_string())
        }
        (None, None) => {
            let res = run(&cfg)?;
            (BlockLibrary::for_config(&cfg)?.simulation_microstructure(&res), "image.ppm".to_string())
        }
    };
    let img = rasterize(&ms, spec.render.width, spec.render.height, &ColorMap::default())?;
    let mut w = create(&spec.output.dir, &name)?;
    write_ppm(&mut w, &img)?;
    w.flush()?;
    Ok(spec.output.dir.join(name))
}

/// Runs the suite, prints one line per criterion and writes the report.
pub fn cmd_verify(args: &VerifyArgs) -> Result<bool> {
    let only: Vec<u32> = if args.only.is_empty() { verify::ALL.to_vec() } else { args.only.clone() };
    let faults = Faults { c_tilde_a: args.fault_c_tilde_a };
    let mut criteria = Vec::new();
    for id in only {
        let r = verify::run_criterion(id, args.level, &faults)?;
        println!("{}", r.line());
        criteria.push(r);
    }
    let passed = criteria.iter().all(|c| c.passed || !c.gated);
    let report = verify::Report { level: args.level, passed, criteria };
    let path = match &args.report {
        Some(p) => p.clone(),
        None => args.out.clone().unwrap_or_else(|| PathBuf::from("out")).join("verify_report.json"),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.flush()?;
    println!("{} ({})", if passed { "all gated criteria passed" } else { "criterion failure" }, path.display());
    Ok(passed)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidParameter(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // a pool may already exist when called twice in one process
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::OutsideHull(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let outcome = match &cli.command {
        Command::Simulate(c) => c.spec().and_then(|s| cmd_simulate(&s)).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            true
        }),
        Command::Stats(a) => cmd_stats(a).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
            true
        }),
        Command::Render(a) => cmd_render(a).map(|f| {
            println!("{}", f.display());
            true
        }),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
