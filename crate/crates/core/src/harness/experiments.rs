//! Registered experiments. Each one is a pure function of [`Settings`]: the
//! same settings give the same table, bit for bit, on any number of workers.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::config::{Config, ConfigError};
use super::output::{sha256_hex, RunManifest, Table, Value, CSV_SCHEMA};
use crate::cellsystem::{
    area_martingale, area_profile, conditional_area, KillPlacement, TreeEngine, TreeError, TreeResolution,
    TruncationPolicy,
};
use crate::cumulant::{
    find_roots, kappa_eval, kappa_theta_closed, kappa_theta_closed_derivative, log_bound_exponents,
    upper_envelope_hypothesis, CumulantError, StableFamily,
};
use crate::lamperti::{exp_functional_moment, ExpFunctionalOptions, StopRule};
use crate::levy::{c_minus, SamplerOptions, SpineSign};
use crate::rng::StreamSeed;
use crate::special::gamma;
use crate::spine::{area_under_p0plus, prob_i_leq, IDistribution, P0PlusOptions, SpineEngine, SpineError};
use crate::stats::{ks_two_sample, EstimateWithCI};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid experiment input: {0}")]
    Invalid(String),
    #[error("unknown experiment '{0}' (see `gfsim list`)")]
    UnknownExperiment(String),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Spine(#[from] SpineError),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<Box<TreeError>> for HarnessError {
    fn from(e: Box<TreeError>) -> Self {
        HarnessError::Tree(*e)
    }
}

/// Resolved run settings: config file values with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    /// Overrides each experiment's default replica count.
    pub replicas: Option<u64>,
    /// Output format named in the config, `csv` or `json`.
    pub format: String,
    pub ks_level: f64,
    pub theta: Option<f64>,
    pub x: f64,
    pub eps_grid: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub n_grid: Option<Vec<f64>>,
    pub x_grid: Option<Vec<f64>>,
    pub theta_grid: Option<Vec<f64>>,
    /// Cutoff for plain driving-process paths.
    pub levy_delta: f64,
    pub level_floor: f64,
    pub levy_horizon: f64,
    /// Kill threshold for area trees, relative to the start size.
    pub x_min: f64,
    /// Kill threshold for martingale trees, relative to the start size.
    pub martingale_x_min: f64,
    pub delta_max: f64,
    pub delta_min: f64,
    pub delta_factor: f64,
    pub diffuse: bool,
    pub gaussian: bool,
    pub max_cells: usize,
    pub spine_delta: f64,
    pub x0_floor: f64,
    pub child_threshold: f64,
    pub pool_size: u64,
    /// Kill threshold for the subtrees attached to the spine from 0.
    pub tree_x_min: f64,
    pub config_hash: String,
}

impl Default for Settings {
    fn default() -> Self {
        Self::from_config(&Config::default()).expect("defaults are valid")
    }
}

impl Settings {
    pub fn from_config(c: &Config) -> Result<Self, ConfigError> {
        let opt_list = |key: &str| -> Result<Option<Vec<f64>>, ConfigError> {
            if c.is_set("experiment", key) {
                c.list("experiment", key, &[]).map(Some)
            } else {
                Ok(None)
            }
        };
        let replicas = if c.is_set("run", "replicas") { Some(c.get::<u64>("run", "replicas", 0)?) } else { None };
        let theta = if c.is_set("experiment", "theta") { Some(c.positive("experiment", "theta", 1.5)?) } else { None };
        Ok(Self {
            seed: c.get("run", "seed", 1)?,
            replicas,
            format: c.choice("run", "format", "csv", &["csv", "json"])?,
            ks_level: c.positive("run", "ks_level", 0.05)?,
            theta,
            x: c.positive("experiment", "x", 1.0)?,
            eps_grid: opt_list("eps_grid")?,
            t_grid: opt_list("t_grid")?,
            n_grid: opt_list("n_grid")?,
            x_grid: opt_list("x_grid")?,
            theta_grid: opt_list("theta_grid")?,
            levy_delta: c.positive("levy", "delta", 1e-2)?,
            level_floor: c.get("lamperti", "level_floor", -16.0)?,
            levy_horizon: c.positive("lamperti", "levy_horizon", 1e3)?,
            x_min: c.positive("cellsystem", "x_min", 5e-3)?,
            martingale_x_min: c.positive("cellsystem", "martingale_x_min", 5e-2)?,
            delta_max: c.positive("cellsystem", "delta_max", 0.05)?,
            delta_min: c.positive("cellsystem", "delta_min", 1e-3)?,
            delta_factor: c.positive("cellsystem", "delta_factor", 1.0)?,
            diffuse: c.get("cellsystem", "diffuse", true)?,
            gaussian: c.get("cellsystem", "gaussian", true)?,
            max_cells: c.get("cellsystem", "max_cells", 10_000_000)?,
            spine_delta: c.positive("spine", "delta", 2e-2)?,
            x0_floor: c.positive("spine", "x0_floor", 1e-8)?,
            child_threshold: c.positive("spine", "child_threshold", 0.05)?,
            pool_size: c.get("spine", "pool_size", 50_000)?,
            tree_x_min: c.positive("spine", "tree_x_min", 0.05)?,
            config_hash: sha256_hex(&c.canonical()),
        })
    }

    /// Provenance block shared by every output file.
    pub fn manifest(&self, experiment: &str, anchor: &str, replicas: u64) -> RunManifest {
        RunManifest {
            schema: CSV_SCHEMA.into(),
            experiment: experiment.into(),
            anchor: anchor.into(),
            config_hash: self.config_hash.clone(),
            master_seed: self.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            delta: self.spine_delta,
            x_min: self.x_min,
            x0_floor: self.x0_floor,
            replicas,
            wall_time_s: None,
        }
    }

    pub fn stop(&self) -> StopRule {
        StopRule { level_floor: self.level_floor, levy_horizon: self.levy_horizon, ..StopRule::default() }
    }

    pub fn resolution(&self) -> TreeResolution {
        TreeResolution {
            delta_max: self.delta_max,
            delta_min: self.delta_min,
            delta_factor: self.delta_factor,
            diffuse: self.diffuse,
            gaussian: self.gaussian,
        }
    }

    fn n(&self, default: u64) -> u64 {
        self.replicas.unwrap_or(default)
    }

    fn grid(v: &Option<Vec<f64>>, default: &[f64]) -> Vec<f64> {
        v.clone().unwrap_or_else(|| default.to_vec())
    }
}

/// Outcome of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub id: String,
    pub anchor: String,
    /// `None` for experiments that only emit data.
    pub passed: Option<bool>,
    pub summary: Vec<String>,
    pub table: Table,
    pub manifest: RunManifest,
}

/// Verdict, summary lines, table and replica count.
type Outcome = Result<(Option<bool>, Vec<String>, Table, u64), HarnessError>;

type Runner = fn(&Settings) -> Outcome;

pub struct Experiment {
    pub id: &'static str,
    /// The statement under test, in one line.
    pub anchor: &'static str,
    pub run: Runner,
}

impl Experiment {
    pub fn execute(&self, s: &Settings) -> Result<Report, HarnessError> {
        let (passed, summary, table, replicas) = (self.run)(s)?;
        Ok(Report {
            id: self.id.into(),
            anchor: self.anchor.into(),
            passed,
            summary,
            table,
            manifest: s.manifest(self.id, self.anchor, replicas),
        })
    }
}

pub const REGISTRY: &[Experiment] = &[
    Experiment {
        id: "exp_cumulant_suite",
        anchor: "kappa_theta has roots theta+1/2 and theta+3/2; kappa'(omega_-) = -sqrt(pi) Gamma(theta+1/2)",
        run: exp_cumulant_suite,
    },
    Experiment {
        id: "exp_calibration",
        anchor: "quadrature kappa of the canonical triplet equals the closed form of kappa_theta",
        run: exp_calibration,
    },
    Experiment {
        id: "exp_exponents",
        anchor: "q* = theta - 1/2, q0 = 6 at theta = 3/2, kappa(omega_+ + omega_- + alpha) < inf",
        run: exp_exponents,
    },
    Experiment { id: "exp_martingale", anchor: "E_x[M(n)] = x^omega_- for every generation n", run: exp_martingale },
    Experiment { id: "exp_area_oracle", anchor: "E_1[A(t)] = P_1^-(I <= t)", run: exp_area_oracle },
    Experiment {
        id: "exp_exfunc",
        anchor: "E_1^-(1/I) = |alpha| |E eta^-(1)|, sqrt(pi)/2 at theta = 3/2",
        run: exp_exfunc,
    },
    Experiment {
        id: "exp_theorem_area",
        anchor: "eps^{-(theta-1/2)/(theta-1)} A(eps) -> const x, const = 3/8 at theta = 3/2",
        run: exp_theorem_area,
    },
    Experiment {
        id: "exp_stationarity",
        anchor: "under the spine law from 0, t^{omega_-/alpha} A(t) has a law free of t",
        run: exp_stationarity,
    },
    Experiment {
        id: "exp_log_bounds",
        anchor: "log-power envelopes of t^{omega_-/alpha} A(t) with exponents 1+delta and q0",
        run: exp_log_bounds,
    },
];

pub fn find(id: &str) -> Result<&'static Experiment, HarnessError> {
    REGISTRY.iter().find(|e| e.id == id).ok_or_else(|| HarnessError::UnknownExperiment(id.into()))
}

pub fn run_experiment(id: &str, s: &Settings) -> Result<Report, HarnessError> {
    find(id)?.execute(s)
}

// ---- shared builders -------------------------------------------------------

fn family(t: f64) -> Result<StableFamily, HarnessError> {
    Ok(StableFamily::new(t)?)
}

fn spine_engine(s: &Settings, theta: f64) -> Result<SpineEngine, HarnessError> {
    Ok(SpineEngine::new(theta, s.spine_delta, SamplerOptions::default(), s.stop())?)
}

type PoolKey = (u64, u64, u64, u64, u64, u64);
type PoolCache = Mutex<HashMap<PoolKey, Arc<OnceLock<Arc<IDistribution>>>>>;

/// Pools of `I` are deterministic in their key, so they are shared between
/// experiments of one process. Each key is simulated once.
fn pool(s: &Settings, engine: &SpineEngine) -> Arc<IDistribution> {
    static CACHE: OnceLock<PoolCache> = OnceLock::new();
    let theta = engine.family.theta;
    let key = (
        theta.to_bits(),
        s.spine_delta.to_bits(),
        s.pool_size,
        s.seed,
        s.level_floor.to_bits(),
        s.levy_horizon.to_bits(),
    );
    let slot = CACHE.get_or_init(Default::default).lock().expect("pool cache").entry(key).or_default().clone();
    slot.get_or_init(|| {
        let seed = StreamSeed::new(s.seed, "pool").child_index(theta.to_bits());
        Arc::new(IDistribution::simulate(engine, s.pool_size, seed))
    })
    .clone()
}

fn tree_engine(s: &Settings, theta: f64, placement: KillPlacement) -> Result<TreeEngine, HarnessError> {
    let params = family(theta)?.params()?;
    Ok(TreeEngine::new(&params, s.resolution(), placement)?)
}

fn check_positive_grid(name: &str, g: &[f64]) -> Result<(), HarnessError> {
    if g.is_empty() || g.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(HarnessError::Invalid(format!("{name} must be a nonempty list of positive reals")));
    }
    Ok(())
}

fn est_cells(e: &EstimateWithCI) -> [Value; 2] {
    [e.mean.into(), e.stderr.into()]
}

// ---- experiments -----------------------------------------------------------

fn exp_cumulant_suite(s: &Settings) -> Outcome {
    let thetas = Settings::grid(&s.theta_grid, &[1.1, 1.25, 1.4, 1.5]);
    let mut t = Table::new(&[
        "theta",
        "omega_minus",
        "omega_plus",
        "root_err_minus",
        "root_err_plus",
        "kappa_prime_minus",
        "kappa_prime_target",
        "kappa_prime_err",
        "pass",
    ]);
    let mut all = true;
    let (mut worst_root, mut worst_der) = (0.0f64, 0.0f64);
    for &theta in &thetas {
        let fam = family(theta)?;
        let (lo, hi) = find_roots(|q| fam.kappa(q).unwrap_or(f64::NAN), fam.bracket_hint())?.cramer()?;
        let (e1, e2) = ((lo - (theta + 0.5)).abs(), (hi - (theta + 1.5)).abs());
        let kp = kappa_theta_closed_derivative(theta, theta + 0.5)?;
        let target = -PI.sqrt() * gamma(theta + 0.5);
        let ed = (kp - target).abs();
        let ok = e1 <= 1e-9 && e2 <= 1e-9 && ed <= 1e-6;
        all &= ok;
        worst_root = worst_root.max(e1).max(e2);
        worst_der = worst_der.max(ed);
        t.push(vec![
            theta.into(),
            lo.into(),
            hi.into(),
            e1.into(),
            e2.into(),
            kp.into(),
            target.into(),
            ed.into(),
            ok.into(),
        ]);
    }
    let summary = vec![format!(
        "max root deviation {worst_root:e} (tol 1e-9), max derivative deviation {worst_der:e} (tol 1e-6)"
    )];
    Ok((Some(all), summary, t, 0))
}

fn exp_calibration(s: &Settings) -> Outcome {
    let thetas = Settings::grid(&s.theta_grid, &[1.1, 1.25, 1.4, 1.5]);
    let mut t = Table::new(&["theta", "q", "kappa_quadrature", "kappa_closed", "abs_err"]);
    let mut worst = 0.0f64;
    for &theta in &thetas {
        let triplet = family(theta)?.triplet()?;
        for k in 1..=10 {
            let q = theta + (theta + 1.0) * f64::from(k) / 11.0;
            let a = kappa_eval(&triplet, q)?;
            let b = kappa_theta_closed(theta, q)?;
            let err = (a - b).abs();
            worst = worst.max(err);
            t.push(vec![theta.into(), q.into(), a.into(), b.into(), err.into()]);
        }
    }
    Ok((Some(worst <= 1e-6), vec![format!("max deviation {worst:e} (tol 1e-6)")], t, 0))
}

fn exp_exponents(s: &Settings) -> Outcome {
    let thetas = Settings::grid(&s.theta_grid, &[1.05, 1.1, 1.25, 1.4, 1.5]);
    let mut t = Table::new(&[
        "theta",
        "q_star",
        "q0",
        "q_star_numeric_lo",
        "q_star_numeric_hi",
        "hypothesis_point",
        "moment_edge",
        "hypothesis_holds",
    ]);
    let mut ok = true;
    let mut summary = Vec::new();
    let mut failing = Vec::new();
    for &theta in &thetas {
        let fam = family(theta)?;
        let e = fam.log_bound_exponents();
        let params = fam.params_unchecked()?;
        let numeric = log_bound_exponents(&params);
        let holds = upper_envelope_hypothesis(&params);
        ok &= holds && e.q0.is_finite();
        ok &= numeric.q_star_bracket.0 <= e.q_star + 1e-9 && numeric.q_star_bracket.1 >= e.q_star - 1e-9;
        if theta == 1.5 {
            let exact = e.q0 == 6.0 && e.q_star == 1.0;
            ok &= exact;
            summary.push(format!("theta = 3/2: q* = {}, q0 = {} (exact match: {exact})", e.q_star, e.q0));
        }
        let point = params.omega_plus + params.omega_minus + params.alpha;
        let edge = params.triplet.jumps.exponential_moment_edge().map_or(f64::INFINITY, |e| e.0);
        if !holds {
            failing.push(theta);
        }
        t.push(vec![
            theta.into(),
            e.q_star.into(),
            e.q0.into(),
            numeric.q_star_bracket.0.into(),
            numeric.q_star_bracket.1.into(),
            point.into(),
            edge.into(),
            holds.into(),
        ]);
    }
    if !failing.is_empty() {
        summary.push(format!(
            "kappa(omega_+ + omega_- + alpha) is infinite for theta in {failing:?}: the point is theta + 3, past the moment edge 2 theta + 1 of the positive jumps"
        ));
    }
    Ok((Some(ok), summary, t, 0))
}

fn exp_martingale(s: &Settings) -> Outcome {
    let thetas = Settings::grid(&s.theta_grid, &[1.25, 1.5]);
    let xs = Settings::grid(&s.x_grid, &[0.5, 1.0, 2.0]);
    let ns: Vec<u32> = Settings::grid(&s.n_grid, &[1.0, 2.0, 3.0]).iter().map(|&n| n as u32).collect();
    check_positive_grid("x_grid", &xs)?;
    let n_max = *ns.iter().max().ok_or_else(|| HarnessError::Invalid("empty n_grid".into()))?;
    if n_max == 0 {
        return Err(HarnessError::Invalid("n_grid must contain positive generations".into()));
    }
    let n = s.n(10_000);
    let base = StreamSeed::new(s.seed, "exp_martingale");
    let mut t = Table::new(&["theta", "x", "n", "mean", "stderr", "target", "z", "pass"]);
    let mut all = true;
    for (i, &theta) in thetas.iter().enumerate() {
        let engine = tree_engine(s, theta, KillPlacement::BirthHeight)?;
        let omega = family(theta)?.omega_minus();
        for (j, &x) in xs.iter().enumerate() {
            let pol = TruncationPolicy {
                x_min: s.martingale_x_min * x,
                max_generation: n_max,
                max_cells: s.max_cells,
                horizon: f64::INFINITY,
            };
            let seed = base.child_index(i as u64).child_index(j as u64);
            let levels: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|r| {
                    let tree = engine.grow(x, &pol, &mut seed.replica(r))?;
                    Ok(ns.iter().map(|&g| area_martingale(&tree, g)).collect())
                })
                .collect::<Result<_, TreeError>>()?;
            for (k, &g) in ns.iter().enumerate() {
                let v: Vec<f64> = levels.iter().map(|l| l[k]).collect();
                let e = EstimateWithCI::from_samples(&v);
                let target = x.powf(omega);
                let z = e.z_score(target);
                let ok = z.abs() < 3.0;
                all &= ok;
                t.push(vec![
                    theta.into(),
                    x.into(),
                    g.into(),
                    e.mean.into(),
                    e.stderr.into(),
                    target.into(),
                    z.into(),
                    ok.into(),
                ]);
            }
        }
    }
    let mut summary = vec![format!("{n} trees per (theta, x); pass when |z| < 3 everywhere")];
    for &theta in &thetas {
        let f = family(theta)?;
        let index = f.omega_plus() / f.omega_minus();
        if index < 2.0 {
            summary.push(format!(
                "theta = {theta}: M(n) has tail index omega_+/omega_- = {index:.3} < 2, so its variance is infinite and the plug-in stderr is unreliable"
            ));
        }
    }
    Ok((Some(all), summary, t, n))
}

/// Per-tree `E[A(t) | tree]` and the raw `A(t)`, one column per `t`.
type AreaColumns = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Per-tree `E[A(t) | tree]` and the raw `A(t)` for every `t`, from `x`.
fn area_samples(
    s: &Settings,
    engine: &TreeEngine,
    pool: &IDistribution,
    x: f64,
    ts: &[f64],
    n: u64,
    seed: StreamSeed,
) -> Result<AreaColumns, HarnessError> {
    let horizon = ts.iter().cloned().fold(0.0, f64::max);
    let pol = TruncationPolicy { x_min: s.x_min * x, max_generation: u32::MAX, max_cells: s.max_cells, horizon };
    let per_tree: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|r| {
            let tree = engine.grow(x, &pol, &mut seed.replica(r))?;
            let prof = area_profile(&tree);
            Ok((
                ts.iter().map(|&t| conditional_area(&tree, t, pool)).collect(),
                ts.iter().map(|&t| prof.value_at(t)).collect(),
            ))
        })
        .collect::<Result<_, TreeError>>()?;
    let col = |k: usize, raw: bool| per_tree.iter().map(|(a, b)| if raw { b[k] } else { a[k] }).collect();
    Ok(((0..ts.len()).map(|k| col(k, false)).collect(), (0..ts.len()).map(|k| col(k, true)).collect()))
}

fn exp_area_oracle(s: &Settings) -> Outcome {
    let theta = s.theta.unwrap_or(1.5);
    let ts = Settings::grid(&s.t_grid, &[0.05, 0.1, 0.2]);
    check_positive_grid("t_grid", &ts)?;
    let n = s.n(10_000);
    let spine = spine_engine(s, theta)?;
    let pool = pool(s, &spine);
    let engine = tree_engine(s, theta, KillPlacement::Smeared(pool.clone()))?;
    let base = StreamSeed::new(s.seed, "exp_area_oracle");
    let (cond, raw) = area_samples(s, &engine, &pool, 1.0, &ts, n, base.child("trees"))?;
    let mut t = Table::new(&[
        "t",
        "area_mean",
        "area_stderr",
        "area_raw_mean",
        "area_raw_stderr",
        "oracle_mean",
        "oracle_stderr",
        "overlap",
    ]);
    let mut all = true;
    for (k, &tt) in ts.iter().enumerate() {
        let a = EstimateWithCI::from_samples(&cond[k]);
        let r = EstimateWithCI::from_samples(&raw[k]);
        let o = prob_i_leq(&spine, tt, n, base.child("oracle").child_index(k as u64));
        let ok = a.ci95_overlaps(&o);
        all &= ok;
        let [am, ase] = est_cells(&a);
        let [rm, rse] = est_cells(&r);
        let [om, ose] = est_cells(&o);
        t.push(vec![tt.into(), am, ase, rm, rse, om, ose, ok.into()]);
    }
    let summary = vec![format!(
        "{n} trees (x_min {}) against {n} absorbed spines; area_mean averages E[A(t) | tree], area_raw_mean the sampled profile",
        s.x_min
    )];
    Ok((Some(all), summary, t, n))
}

fn exp_exfunc(s: &Settings) -> Outcome {
    let theta = s.theta.unwrap_or(1.5);
    let fam = family(theta)?;
    let power = if theta == 1.5 { -1.0 } else { -1.0 / (2.0 * (theta - 1.0)) };
    let n = s.n(100_000);
    let mut triplet = fam.spine_triplet(SpineSign::Minus)?;
    triplet.jumps = triplet.jumps.with_cutoff(s.spine_delta).map_err(CumulantError::from)?;
    let opts = ExpFunctionalOptions { stop: s.stop(), ..ExpFunctionalOptions::default() };
    let seed = StreamSeed::new(s.seed, "exp_exfunc");
    let est = exp_functional_moment(&triplet, fam.alpha(), power, n, seed, &opts)?;
    // E[1/I] = |α|·|E η⁻(1)|
    let target = (power == -1.0).then(|| (theta - 1.0) * PI.sqrt() * gamma(theta + 0.5));
    let z = target.map(|m| est.estimate.z_score(m));
    let passed = match z {
        Some(z) => z.abs() < 3.0,
        None => !est.divergence_warning,
    };
    let mut t = Table::new(&[
        "theta",
        "power",
        "mean",
        "stderr",
        "target",
        "z",
        "unresolved",
        "residual_bound",
        "divergence_warning",
    ]);
    t.push(vec![
        theta.into(),
        power.into(),
        est.estimate.mean.into(),
        est.estimate.stderr.into(),
        target.map_or(Value::Text(String::new()), Value::Num),
        z.map_or(Value::Text(String::new()), Value::Num),
        est.unresolved.into(),
        est.residual_bound.into(),
        est.divergence_warning.into(),
    ]);
    Ok((Some(passed), vec![est.horizon_policy], t, n))
}

fn exp_theorem_area(s: &Settings) -> Outcome {
    let theta = s.theta.unwrap_or(1.5);
    let x = s.x;
    let eps = Settings::grid(&s.eps_grid, &[0.2, 0.1, 0.05]);
    check_positive_grid("eps_grid", &eps)?;
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HarnessError::Invalid("eps_grid must be decreasing".into()));
    }
    let n = s.n(10_000);
    let spine = spine_engine(s, theta)?;
    let pool = pool(s, &spine);
    let engine = tree_engine(s, theta, KillPlacement::Smeared(pool.clone()))?;
    let (cond, raw) = area_samples(s, &engine, &pool, x, &eps, n, StreamSeed::new(s.seed, "exp_theorem_area"))?;
    let (target, kind) = if theta == 1.5 {
        (0.375 * x, "closed form")
    } else {
        let m = pool.moment(-1.0 / (2.0 * (theta - 1.0))).mean;
        (2.0 * (theta - 1.0) / (theta - 0.5) * c_minus(theta) * m * x, "monte carlo")
    };
    let expo = (theta - 0.5) / (theta - 1.0);
    let mut t = Table::new(&[
        "eps",
        "scaled_mean",
        "scaled_stderr",
        "scaled_raw_mean",
        "scaled_raw_stderr",
        "target",
        "rel_dev",
    ]);
    let mut devs = Vec::new();
    for (k, &e) in eps.iter().enumerate() {
        let f = e.powf(-expo);
        let a = EstimateWithCI::from_samples(&cond[k].iter().map(|v| v * f).collect::<Vec<_>>());
        let r = EstimateWithCI::from_samples(&raw[k].iter().map(|v| v * f).collect::<Vec<_>>());
        let dev = (a.mean - target) / target;
        devs.push(dev.abs());
        let [am, ase] = est_cells(&a);
        let [rm, rse] = est_cells(&r);
        t.push(vec![e.into(), am, ase, rm, rse, target.into(), dev.into()]);
    }
    let monotone = devs.windows(2).all(|w| w[1] <= w[0]);
    let last = *devs.last().expect("nonempty grid");
    let summary = vec![
        format!("target {target} ({kind}); distance to target nonincreasing: {monotone}; final relative deviation {last:.4} (budget 0.2)"),
        "the 20% budget is an engineering tolerance; the limit has no known rate".into(),
    ];
    Ok((Some(monotone && last <= 0.2), summary, t, n))
}

/// `t^{ω₋/α}·A(t)` under the spine law from 0, one value per replica.
#[allow(clippy::too_many_arguments)]
fn p0plus_samples(
    s: &Settings,
    spine: &SpineEngine,
    trees: &TreeEngine,
    pool: &IDistribution,
    t: f64,
    x0_floor: f64,
    n: u64,
    seed: StreamSeed,
) -> Result<Vec<f64>, HarnessError> {
    let omega = spine.family.omega_minus();
    let alpha = spine.family.alpha();
    let pol = TruncationPolicy { x_min: s.tree_x_min, max_generation: u32::MAX, max_cells: s.max_cells, horizon: t };
    let opts = P0PlusOptions { x0_floor, child_threshold: s.child_threshold };
    let scale = t.powf(omega / alpha);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let r = seed.child_index(i);
            let a = area_under_p0plus(spine, trees, pool, t, &pol, &opts, r.child("trees"), &mut r.replica(0))?;
            Ok(a * scale)
        })
        .collect()
}

fn exp_stationarity(s: &Settings) -> Outcome {
    let theta = s.theta.unwrap_or(1.5);
    let ts = Settings::grid(&s.t_grid, &[0.5, 1.0]);
    check_positive_grid("t_grid", &ts)?;
    if ts.len() != 2 {
        return Err(HarnessError::Invalid("t_grid must hold exactly two times".into()));
    }
    let n = s.n(2000);
    let spine = spine_engine(s, theta)?;
    let pool = pool(s, &spine);
    let trees = tree_engine(s, theta, KillPlacement::Smeared(pool.clone()))?;
    let base = StreamSeed::new(s.seed, "exp_stationarity");
    let draw = |x0: f64| -> Result<Vec<Vec<f64>>, HarnessError> {
        ts.iter()
            .enumerate()
            .map(|(k, &t)| p0plus_samples(s, &spine, &trees, &pool, t, x0, n, base.child_index(k as u64)))
            .collect()
    };
    let main = draw(s.x0_floor)?;
    let ks = ks_two_sample(&main[0], &main[1]);
    // wrong exponent ω₋ + 1/2: multiply by t^{(1/2)/α}
    let alpha = spine.family.alpha();
    let wrong: Vec<Vec<f64>> =
        ts.iter().zip(&main).map(|(&t, v)| v.iter().map(|a| a * t.powf(0.5 / alpha)).collect()).collect();
    let neg = ks_two_sample(&wrong[0], &wrong[1]);
    let half = draw(0.5 * s.x0_floor)?;
    let ks_half = ks_two_sample(&half[0], &half[1]);
    let noise = (2.0 / n as f64).sqrt();
    let level = s.ks_level;
    let mut t = Table::new(&["comparison", "statistic", "p_value", "rejected", "mean_first", "mean_second"]);
    let mean = |v: &[f64]| EstimateWithCI::from_samples(v).mean;
    for (name, r, pair) in
        [("stationarity", &ks, &main), ("negative_control", &neg, &wrong), ("x0_floor_halved", &ks_half, &half)]
    {
        t.push(vec![
            name.into(),
            r.statistic.into(),
            r.p_value.into(),
            r.rejected(level).into(),
            mean(&pair[0]).into(),
            mean(&pair[1]).into(),
        ]);
    }
    let shift = (ks_half.statistic - ks.statistic).abs();
    let summary = vec![
        format!(
            "t = {} vs {}: KS D = {:.4}, p = {:.4}; negative control p = {:.3e}",
            ts[0], ts[1], ks.statistic, ks.p_value, neg.p_value
        ),
        format!(
            "x0_floor guard: halving x0_floor = {} moves D by {shift:.4} against a sampling scale of {noise:.4} ({})",
            s.x0_floor,
            if shift < noise { "within noise" } else { "NOT within noise" }
        ),
    ];
    Ok((Some(!ks.rejected(level) && neg.rejected(level)), summary, t, n))
}

fn exp_log_bounds(s: &Settings) -> Outcome {
    let theta = s.theta.unwrap_or(1.5);
    let ts = Settings::grid(&s.t_grid, &[0.5, 0.25, 0.125, 0.0625, 0.03125]);
    check_positive_grid("t_grid", &ts)?;
    if ts.iter().any(|&t| t >= 1.0) {
        return Err(HarnessError::Invalid("t_grid must lie in (0, 1)".into()));
    }
    let n = s.n(200);
    let fam = family(theta)?;
    let exps = fam.log_bound_exponents();
    let hyp = upper_envelope_hypothesis(&fam.params_unchecked()?);
    let spine = spine_engine(s, theta)?;
    let pool = pool(s, &spine);
    let trees = tree_engine(s, theta, KillPlacement::Smeared(pool.clone()))?;
    let seed = StreamSeed::new(s.seed, "exp_log_bounds");
    let mut t = Table::new(&["kind", "replica", "t", "scaled_area", "upper_envelope", "lower_envelope"]);
    for &tt in &ts {
        let v = p0plus_samples(s, &spine, &trees, &pool, tt, s.x0_floor, n, seed)?;
        let l = tt.ln().abs();
        let up = l.powf(-exps.upper_exponent);
        let lo = l.powf(exps.q0);
        for (i, a) in v.iter().enumerate() {
            t.push(vec!["replica".into(), (i as u64).into(), tt.into(), (*a).into(), (a * up).into(), (a * lo).into()]);
        }
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        t.push(vec!["max".into(), (n).into(), tt.into(), max.into(), (max * up).into(), (max * lo).into()]);
        t.push(vec!["min".into(), (n).into(), tt.into(), min.into(), (min * up).into(), (min * lo).into()]);
    }
    let summary = vec![
        format!("q0 = {}, upper exponent 1 + delta = {}", exps.q0, exps.upper_exponent),
        format!("kappa(omega_+ + omega_- + alpha) finite: {hyp}"),
        "envelopes are for inspection only; almost-sure limits are not checked".into(),
    ];
    Ok((Some(hyp && exps.q0.is_finite()), summary, t, n))
}
