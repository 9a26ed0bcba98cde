//! The tilted spine processes `Y⁻` (absorbed at 0) and `Y⁺` (transient), the
//! law of the absorption time `I` of `Y⁻`, and the area under the spine law
//! started from 0.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cellsystem::{TreeEngine, TreeError, TruncationPolicy};
use crate::cumulant::{CumulantError, StableFamily};
use crate::lamperti::{
    clock_increment, clock_inverse, run_clock, ClockState, PssmpPath, PssmpSegment, StopReason, StopRule,
};
use crate::levy::{weighted_small_table, InverseCdfTable, LevySampler, SamplerOptions, SpineSign};
use crate::rng::{SimRng, StreamSeed};
use crate::stats::EstimateWithCI;

#[derive(Debug, Error)]
pub enum SpineError {
    #[error("invalid spine configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
    #[error(transparent)]
    Tree(#[from] Box<TreeError>),
}

/// Default jump cutoff for spine paths.
pub const DEFAULT_SPINE_DELTA: f64 = 2e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpineConfig {
    pub sign: SpineSign,
    pub theta: f64,
    /// Start value; 0 is allowed for `Plus` and means "start at `x0_floor`".
    pub x: f64,
    pub x0_floor: f64,
    /// Real-time horizon for `Plus` paths.
    pub horizon: f64,
    /// Jump cutoff `δ` of the driving process.
    pub delta: f64,
    pub sampler: SamplerOptions,
    /// Where `Minus` paths are considered absorbed.
    pub stop: StopRule,
}

impl SpineConfig {
    pub fn new(sign: SpineSign, theta: f64, x: f64) -> Self {
        Self {
            sign,
            theta,
            x,
            x0_floor: 1e-8,
            horizon: 10.0,
            delta: DEFAULT_SPINE_DELTA,
            sampler: SamplerOptions::default(),
            stop: StopRule::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SpineError> {
        let bad = |m: &str| Err(SpineError::InvalidConfig(m.into()));
        if !(self.x >= 0.0) {
            return bad("start value must be nonnegative");
        }
        if self.sign == SpineSign::Minus && self.x == 0.0 {
            return bad("the absorbed spine needs a positive start");
        }
        if !(self.x0_floor > 0.0 && self.horizon > 0.0 && self.delta > 0.0) {
            return bad("x0_floor, horizon and delta must be positive");
        }
        StableFamily::new(self.theta)?;
        Ok(())
    }
}

/// Samplers of `η⁻` and `η⁺` for one `θ` and cutoff.
#[derive(Debug, Clone)]
pub struct SpineEngine {
    pub family: StableFamily,
    pub minus: LevySampler,
    pub plus: LevySampler,
    /// `E[I]` from level 0, `1/(-φ₋(|α|))` for the truncated process.
    pub tail_factor: f64,
    /// `∫_{(-δ,0)} (1 - e^y)^{ω₋} Π⁺(dy)`: area mass rate of sub-cutoff children.
    pub plus_small_mass: f64,
    plus_small_table: Arc<InverseCdfTable>,
    pub stop: StopRule,
}

impl SpineEngine {
    pub fn new(theta: f64, delta: f64, sampler: SamplerOptions, stop: StopRule) -> Result<Self, SpineError> {
        let family = StableFamily::new(theta)?;
        let build = |sign| -> Result<LevySampler, SpineError> {
            let mut t = family.spine_triplet(sign)?;
            t.jumps = t.jumps.with_cutoff(delta).map_err(CumulantError::from)?;
            Ok(LevySampler::new(&t, sampler)?)
        };
        let minus = build(SpineSign::Minus)?;
        let plus = build(SpineSign::Plus)?;
        let psi = minus.psi_truncated(-family.alpha())?;
        let tail_factor = if psi < 0.0 { -1.0 / psi } else { f64::INFINITY };
        let omega = family.omega_minus();
        let spec = &plus.triplet().jumps;
        let table = weighted_small_table(spec, 0x53_5049_4e45 ^ omega.to_bits(), delta, |u: f64| {
            (-u).exp_m1().abs().powf(omega)
        })
        .map_err(CumulantError::from)?;
        Ok(Self { family, minus, plus, tail_factor, plus_small_mass: table.total(), plus_small_table: table, stop })
    }

    pub fn from_config(c: &SpineConfig) -> Result<Self, SpineError> {
        c.validate()?;
        Self::new(c.theta, c.delta, c.sampler, c.stop)
    }

    fn a(&self) -> f64 {
        -self.family.alpha()
    }

    /// One absorption time of `Y⁻` started at 1, with the mean of the
    /// remainder past the level floor added.
    pub fn sample_i(&self, rng: &mut SimRng) -> f64 {
        let mut st = ClockState { clock: 0.0, level: 0.0, levy_time: 0.0 };
        let mut rule = self.stop;
        for _ in 0..8 {
            if run_clock(&self.minus, self.a(), &mut st, &rule, rng) == StopReason::Level {
                break;
            }
            rule.levy_horizon *= 2.0;
        }
        st.clock + (self.a() * st.level).exp() * self.tail_factor
    }

    /// Whether `I ≤ t` for one `Y⁻` started at 1; stops as soon as the clock
    /// passes `t`.
    pub fn absorbed_by(&self, t: f64, rng: &mut SimRng) -> bool {
        let mut st = ClockState { clock: 0.0, level: 0.0, levy_time: 0.0 };
        let mut rule = StopRule { clock_cap: t, ..self.stop };
        loop {
            match run_clock(&self.minus, self.a(), &mut st, &rule, rng) {
                StopReason::ClockCap => return false,
                StopReason::Level => return st.clock + (self.a() * st.level).exp() * self.tail_factor <= t,
                StopReason::Horizon => rule.levy_horizon *= 2.0,
            }
        }
    }

    /// A spine path as a list of segments.
    pub fn simulate(&self, config: &SpineConfig, rng: &mut SimRng) -> PssmpPath {
        let a = self.a();
        let (x, approximate_start) = if config.x > 0.0 { (config.x, false) } else { (config.x0_floor, true) };
        let scale = x.powf(a);
        let sampler = match config.sign {
            SpineSign::Minus => &self.minus,
            SpineSign::Plus => &self.plus,
        };
        let v = sampler.drift;
        let mut clk = sampler.clock();
        let (mut t, mut s, mut xi) = (0.0, 0.0, 0.0);
        let mut segments = Vec::new();
        let floor = config.stop.level_floor;
        loop {
            let ev = sampler.next_event(rng, &mut clk);
            let mut d = ev.dt;
            let mut stop = false;
            if config.sign == SpineSign::Plus {
                let dt = scale * clock_increment(a, xi, v, d);
                if t + dt >= config.horizon {
                    d = clock_inverse(a, xi, v, (config.horizon - t) / scale).unwrap_or(d).min(d);
                    stop = true;
                }
            } else if v < 0.0 && xi + v * d <= floor {
                d = (floor - xi) / v;
                stop = true;
            }
            let dt = scale * clock_increment(a, xi, v, d);
            segments.push(PssmpSegment { t_start: t, t_end: t + dt, s_start: s, s_end: s + d, xi_start: xi, slope: v });
            t += dt;
            s += d;
            xi += v * d;
            if stop {
                break;
            }
            xi += ev.jump;
            if config.sign == SpineSign::Minus && xi <= floor {
                segments.push(PssmpSegment { t_start: t, t_end: t, s_start: s, s_end: s, xi_start: xi, slope: v });
                break;
            }
        }
        let (absorbed, absorption_time) = match config.sign {
            SpineSign::Minus => (true, Some(t + scale * (a * xi).exp() * self.tail_factor)),
            SpineSign::Plus => (false, None),
        };
        PssmpPath { x, alpha: -a, segments, absorbed, absorption_time, approximate_start }
    }
}

/// Simulates one spine path for `config`.
pub fn simulate_spine(config: &SpineConfig, rng: &mut SimRng) -> Result<PssmpPath, SpineError> {
    let engine = SpineEngine::from_config(config)?;
    Ok(engine.simulate(config, rng))
}

/// `P₁⁻(I ≤ t)`: the fraction of `Y⁻` replicas absorbed by time `t`.
pub fn prob_i_leq(engine: &SpineEngine, t: f64, n_replicas: u64, seed: StreamSeed) -> EstimateWithCI {
    assert!(t > 0.0, "t must be positive");
    let k: u64 = (0..n_replicas).into_par_iter().map(|i| u64::from(engine.absorbed_by(t, &mut seed.replica(i)))).sum();
    EstimateWithCI::from_counts(k, n_replicas).with_seed(seed)
}

/// Empirical law of `I` under `P₁⁻`, used to place the area of truncated
/// subtrees.
#[derive(Debug, Clone, Serialize)]
pub struct IDistribution {
    pub theta: f64,
    pub delta: f64,
    samples: Vec<f64>,
}

impl IDistribution {
    pub fn simulate(engine: &SpineEngine, n: u64, seed: StreamSeed) -> Self {
        let mut samples: Vec<f64> = (0..n).into_par_iter().map(|i| engine.sample_i(&mut seed.replica(i))).collect();
        samples.sort_by(f64::total_cmp);
        Self { theta: engine.family.theta, delta: engine.minus.cutoff, samples }
    }

    pub fn from_samples(theta: f64, delta: f64, mut samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty());
        samples.sort_by(f64::total_cmp);
        Self { theta, delta, samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Empirical `P(I ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.samples.partition_point(|&s| s <= x) as f64 / self.samples.len() as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.samples[rng.random_range(0..self.samples.len())]
    }

    pub fn moment(&self, power: f64) -> EstimateWithCI {
        let v: Vec<f64> = self.samples.iter().map(|x| x.powf(power)).collect();
        EstimateWithCI::from_samples(&v)
    }
}

/// Resolution of the area estimator under the spine law from 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct P0PlusOptions {
    pub x0_floor: f64,
    /// Children of `Y⁺` smaller than `child_threshold · t^{1/|α|}` contribute
    /// their conditional mean instead of a simulated subtree.
    pub child_threshold: f64,
}

impl Default for P0PlusOptions {
    fn default() -> Self {
        Self { x0_floor: 1e-8, child_threshold: 0.05 }
    }
}

/// `A(t)` under the spine law from 0: `Y⁺` is run from `x0_floor` up to time
/// `t`, and each negative jump `Δ` at time `s` contributes
/// `|Δ|^{ω₋}·A'((t - s)|Δ|^α)` with `A'` the area of a fresh tree from 1.
#[allow(clippy::too_many_arguments)]
pub fn area_under_p0plus(
    spine: &SpineEngine,
    trees: &TreeEngine,
    pool: &IDistribution,
    t: f64,
    policy: &TruncationPolicy,
    opts: &P0PlusOptions,
    seed: StreamSeed,
    rng: &mut SimRng,
) -> Result<f64, SpineError> {
    assert!(t > 0.0, "t must be positive");
    let a = -spine.family.alpha();
    let omega = spine.family.omega_minus();
    let x0 = opts.x0_floor;
    let threshold = opts.child_threshold * t.powf(1.0 / a);
    let scale = x0.powf(a);
    let sampler = &spine.plus;
    let v = sampler.drift;
    let mut clk = sampler.clock();
    let (mut now, mut xi) = (0.0, 0.0);
    let mut area = 0.0;
    let mut jump_index = 0u64;
    let mean_child = |c: f64, s: f64| c.powf(omega) * pool.cdf((t - s) / c.powf(a));
    loop {
        let ev = sampler.next_event(rng, &mut clk);
        let mut d = ev.dt;
        let dt = scale * clock_increment(a, xi, v, d);
        let last = now + dt >= t;
        if last {
            d = clock_inverse(a, xi, v, (t - now) / scale).unwrap_or(d).min(d);
        }
        // sub-cutoff children along the piece, placed by their mass
        if spine.plus_small_mass > 0.0 && d > 0.0 {
            let w_mass = clock_increment(omega, xi, v, d);
            let u = omega_position(omega, v, d, rng.random::<f64>());
            let s_pos = now + scale * clock_increment(a, xi, v, u);
            let y_size = x0 * (xi + v * u).exp() * (-spine.plus_small_table.sample(rng)).exp_m1().abs();
            let mass = spine.plus_small_mass * x0.powf(omega) * w_mass;
            area += mass * pool.cdf((t - s_pos) / y_size.powf(a));
        }
        now += scale * clock_increment(a, xi, v, d);
        xi += v * d;
        if last {
            break;
        }
        if ev.jump < 0.0 {
            let c = x0 * xi.exp() * (-ev.jump.exp_m1());
            if c >= threshold {
                let horizon = (t - now) / c.powf(a);
                let sub = TruncationPolicy { x_min: policy.x_min, horizon, ..*policy };
                let mut sub_rng = seed.child_index(jump_index).replica(0);
                let tree = trees.grow(1.0, &sub, &mut sub_rng).map_err(Box::new)?;
                area += c.powf(omega) * crate::cellsystem::area_profile(&tree).value_at(horizon);
            } else {
                area += mean_child(c, now);
            }
            jump_index += 1;
        }
        xi += ev.jump;
    }
    Ok(area)
}

/// Position in `[0, d]` drawn with density proportional to `e^{ω v u}`.
pub(crate) fn omega_position(omega: f64, v: f64, d: f64, u: f64) -> f64 {
    let c = omega * v;
    if (c * d).abs() < 1e-12 {
        return u * d;
    }
    ((u * (c * d).exp_m1()).ln_1p() / c).clamp(0.0, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        let mut c = SpineConfig::new(SpineSign::Minus, 1.5, 0.0);
        assert!(c.validate().is_err());
        c.sign = SpineSign::Plus;
        assert!(c.validate().is_ok());
        assert!(SpineConfig::new(SpineSign::Plus, 1.7, 1.0).validate().is_err());
    }

    #[test]
    fn minus_paths_are_absorbed_and_nonincreasing_across_jumps() {
        let c = SpineConfig::new(SpineSign::Minus, 1.5, 1.0);
        let e = SpineEngine::from_config(&c).unwrap();
        let seed = StreamSeed::new(3, "spine");
        for i in 0..50 {
            let p = e.simulate(&c, &mut seed.replica(i));
            assert!(p.absorbed);
            assert!(p.absorption_time.unwrap() > 0.0);
            assert!(p.jumps().iter().all(|(_, b, a)| a < b));
        }
    }

    #[test]
    fn spine_is_deterministic() {
        let c = SpineConfig::new(SpineSign::Plus, 1.5, 1.0);
        let a = simulate_spine(&c, &mut StreamSeed::new(1, "d").replica(0)).unwrap();
        let b = simulate_spine(&c, &mut StreamSeed::new(1, "d").replica(0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn omega_position_is_a_quantile() {
        assert!((omega_position(2.0, -1.0, 1.0, 0.0)).abs() < 1e-15);
        assert!((omega_position(2.0, -1.0, 1.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((omega_position(2.0, 0.0, 3.0, 0.5) - 1.5).abs() < 1e-15);
    }
}
