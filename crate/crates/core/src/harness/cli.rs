//! The `gfsim` command line.
//!
//! The master seed is taken from, in increasing precedence, the `seed` key
//! of the config file, the `GFSIM_SEED` environment variable and `--seed`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use super::config::{Config, ConfigError};
use super::experiments::{find, HarnessError, Settings, REGISTRY};
use super::output::{to_csv, to_json, RunManifest, Table};
use crate::cellsystem::{area_profile, tree_text, KillPlacement, TreeEngine, TruncationPolicy};
use crate::cumulant::{find_roots, kappa_theta_closed, StableFamily};
use crate::lamperti::{exp_functional_moment, lamperti_forward, ExpFunctionalOptions, PssmpPath};
use crate::levy::{LevySampler, SamplerOptions, SpineSign};
use crate::rng::StreamSeed;
use crate::spine::{SpineConfig, SpineEngine};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sign {
    Minus,
    Plus,
}

#[derive(Debug, Parser)]
#[command(name = "gfsim", version, about = "Simulate self-similar growth-fragmentations and check their area laws")]
pub struct Cli {
    /// Config file of `key = value` lines grouped in `[section]`s.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides GFSIM_SEED and the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; data commands print to stdout without it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Replica count; overrides the experiment default.
    #[arg(long, global = true)]
    pub replicas: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the cumulant and its Cramér roots.
    Kappa {
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        /// Points at which to evaluate; roots only when absent.
        #[arg(long, num_args = 1..)]
        q: Vec<f64>,
    },
    /// Simulate the self-similar Markov process of the first cell.
    SamplePath {
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        /// Lévy time horizon.
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
    },
    /// Grow a truncated cell system and print it in the tree text format.
    GrowTree {
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        /// Absolute kill threshold; defaults to the config `x_min` times `x`.
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        max_generation: Option<u32>,
        /// Real-time horizon.
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Grow a truncated cell system and print its area profile.
    Area {
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Simulate a spine: absorbed (`minus`) or transient (`plus`).
    Spine {
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        #[arg(long, value_enum, default_value_t = Sign::Minus)]
        sign: Sign,
        #[arg(long, default_value_t = 1.0)]
        x: f64,
        /// Lévy time horizon.
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
    },
    /// Estimate a moment of the exponential functional of the absorbed spine.
    Exfunc {
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        power: f64,
    },
    /// Run a registered experiment and report pass or fail.
    Verify { id: String },
    /// List the registered experiments.
    List,
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::Config(_) | HarnessError::Invalid(_) | HarnessError::UnknownExperiment(_) => EXIT_CONFIG,
                _ => EXIT_FAILED,
            }
        }
    }
}

/// Settings after applying the config file, `GFSIM_SEED` and the flags.
pub fn resolve_settings(cli: &Cli) -> Result<Settings, HarnessError> {
    let config = match &cli.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    let mut s = Settings::from_config(&config)?;
    if let Ok(v) = std::env::var("GFSIM_SEED") {
        s.seed = v.trim().parse().map_err(|_| {
            HarnessError::Config(ConfigError::Env { var: "GFSIM_SEED".into(), message: format!("'{v}' is not a u64") })
        })?;
    }
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if cli.replicas.is_some() {
        s.replicas = cli.replicas;
    }
    Ok(s)
}

fn execute(cli: &Cli) -> Result<i32, HarnessError> {
    let s = resolve_settings(cli)?;
    let format = cli.format.unwrap_or(if s.format == "json" { Format::Json } else { Format::Csv });
    match &cli.command {
        Command::List => {
            for e in REGISTRY {
                println!("{:<20} {}", e.id, e.anchor);
            }
            Ok(EXIT_OK)
        }
        Command::Verify { id } => verify(&s, id, cli.out.as_deref().unwrap_or(Path::new("results")), format),
        Command::Kappa { theta, q } => {
            let fam = StableFamily::new(*theta).map_err(HarnessError::from)?;
            let mut t = Table::new(&["theta", "q", "kappa"]);
            if q.is_empty() {
                let (lo, hi) = find_roots(|q| fam.kappa(q).unwrap_or(f64::NAN), fam.bracket_hint())?.cramer()?;
                t.push(vec![(*theta).into(), lo.into(), 0.0.into()]);
                t.push(vec![(*theta).into(), hi.into(), 0.0.into()]);
            }
            for &v in q {
                t.push(vec![(*theta).into(), v.into(), kappa_theta_closed(*theta, v)?.into()]);
            }
            emit(cli, format, "kappa", &s.manifest("kappa", "", 0), &t)
        }
        Command::SamplePath { theta, x, horizon } => {
            positive("x", *x)?;
            let fam = StableFamily::new(*theta).map_err(HarnessError::from)?;
            let mut triplet = fam.triplet()?;
            triplet.jumps = triplet.jumps.with_cutoff(s.levy_delta).map_err(crate::cumulant::CumulantError::from)?;
            let sampler = LevySampler::new(&triplet, SamplerOptions::default())?;
            let mut rng = StreamSeed::new(s.seed, "sample-path").replica(0);
            let path = lamperti_forward(&sampler.sample_path(*horizon, &mut rng), *x, fam.alpha());
            emit(cli, format, "sample-path", &s.manifest("sample-path", "", 1), &path_table(&path))
        }
        Command::Spine { theta, sign, x, horizon } => {
            let mut c = SpineConfig::new(
                match sign {
                    Sign::Minus => SpineSign::Minus,
                    Sign::Plus => SpineSign::Plus,
                },
                *theta,
                *x,
            );
            c.horizon = *horizon;
            c.delta = s.spine_delta;
            c.x0_floor = s.x0_floor;
            c.stop = s.stop();
            let engine = SpineEngine::from_config(&c)?;
            let path = engine.simulate(&c, &mut StreamSeed::new(s.seed, "spine").replica(0));
            emit(cli, format, "spine", &s.manifest("spine", "", 1), &path_table(&path))
        }
        Command::GrowTree { theta, x, x_min, max_generation, horizon } => {
            positive("x", *x)?;
            let engine = tree(&s, *theta)?;
            let pol = TruncationPolicy {
                x_min: x_min.unwrap_or(s.x_min * x),
                max_generation: max_generation.unwrap_or(u32::MAX),
                max_cells: s.max_cells,
                horizon: horizon.unwrap_or(f64::INFINITY),
            };
            let t = engine.grow(*x, &pol, &mut StreamSeed::new(s.seed, "grow-tree").replica(0))?;
            write_or_print(cli.out.as_deref(), "tree.txt", &tree_text(&t))?;
            Ok(EXIT_OK)
        }
        Command::Area { theta, x, x_min, horizon } => {
            positive("x", *x)?;
            let engine = tree(&s, *theta)?;
            let pol = TruncationPolicy {
                x_min: x_min.unwrap_or(s.x_min * x),
                max_generation: u32::MAX,
                max_cells: s.max_cells,
                horizon: horizon.unwrap_or(f64::INFINITY),
            };
            let tree = engine.grow(*x, &pol, &mut StreamSeed::new(s.seed, "area").replica(0))?;
            let prof = area_profile(&tree);
            let mut t = Table::new(&["t", "A"]);
            for (b, a) in prof.breakpoints.iter().zip(&prof.cumulative) {
                t.push(vec![(*b).into(), (*a).into()]);
            }
            emit(cli, format, "area", &s.manifest("area", "", 1), &t)
        }
        Command::Exfunc { theta, power } => {
            let fam = StableFamily::new(*theta).map_err(HarnessError::from)?;
            let mut triplet = fam.spine_triplet(SpineSign::Minus)?;
            triplet.jumps = triplet.jumps.with_cutoff(s.spine_delta).map_err(crate::cumulant::CumulantError::from)?;
            let n = s.replicas.unwrap_or(10_000);
            let opts = ExpFunctionalOptions { stop: s.stop(), ..ExpFunctionalOptions::default() };
            let est =
                exp_functional_moment(&triplet, fam.alpha(), *power, n, StreamSeed::new(s.seed, "exfunc"), &opts)?;
            let mut t = Table::new(&["theta", "power", "mean", "stderr", "unresolved", "divergence_warning"]);
            t.push(vec![
                (*theta).into(),
                (*power).into(),
                est.estimate.mean.into(),
                est.estimate.stderr.into(),
                est.unresolved.into(),
                est.divergence_warning.into(),
            ]);
            emit(cli, format, "exfunc", &s.manifest("exfunc", "", n), &t)
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), HarnessError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(HarnessError::Invalid(format!("--{name} must be a positive real, got {v}")))
    }
}

fn tree(s: &Settings, theta: f64) -> Result<TreeEngine, HarnessError> {
    let params = StableFamily::new(theta)?.params()?;
    Ok(TreeEngine::new(&params, s.resolution(), KillPlacement::BirthHeight)?)
}

fn path_table(p: &PssmpPath) -> Table {
    let mut t = Table::new(&["t", "x_before", "x_after"]);
    t.push(vec![0.0.into(), p.x.into(), p.x.into()]);
    for (time, before, after) in p.jumps() {
        t.push(vec![time.into(), before.into(), after.into()]);
    }
    let end = p.absorption_time.unwrap_or_else(|| p.horizon());
    let last = if p.absorption_time.is_some() { 0.0 } else { p.terminal_value() };
    t.push(vec![end.into(), last.into(), last.into()]);
    t
}

fn emit(cli: &Cli, format: Format, name: &str, m: &RunManifest, t: &Table) -> Result<i32, HarnessError> {
    let body = match format {
        Format::Csv => to_csv(m, t),
        Format::Json => to_json(m, None, &[], t),
    };
    write_or_print(cli.out.as_deref(), &format!("{name}.{}", format.ext()), &body)?;
    Ok(EXIT_OK)
}

fn write_or_print(out: Option<&Path>, file: &str, body: &str) -> Result<(), HarnessError> {
    match out {
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(body.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::Io(format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
            let p = dir.join(file);
            std::fs::write(&p, body).map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))
        }
    }
}

fn verify(s: &Settings, id: &str, out: &Path, format: Format) -> Result<i32, HarnessError> {
    let exp = find(id)?;
    let start = Instant::now();
    let report = exp.execute(s)?;
    let wall = start.elapsed().as_secs_f64();
    let body = match format {
        Format::Csv => to_csv(&report.manifest, &report.table),
        Format::Json => to_json(&report.manifest, report.passed, &report.summary, &report.table),
    };
    write_or_print(Some(out), &format!("{id}.{}", format.ext()), &body)?;
    let manifest = RunManifest { wall_time_s: Some(wall), ..report.manifest.clone() };
    let doc = serde_json::json!({ "manifest": manifest, "passed": report.passed, "summary": report.summary });
    write_or_print(Some(out), "manifest.json", &(serde_json::to_string_pretty(&doc).expect("serializable") + "\n"))?;
    let verdict = match report.passed {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "DONE",
    };
    println!("{id}: {verdict}");
    for line in &report.summary {
        println!("  {line}");
    }
    Ok(if report.passed == Some(false) { EXIT_FAILED } else { EXIT_OK })
}
