use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::cumulant::{CumulantError, LevyTriplet};

use super::measure::{JumpMeasureSpec, Side};
use super::table::{jump_table, InverseCdfTable};
use super::LevyError;

/// How the drift of the truncated process is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DriftPolicy {
    /// Keep `E ξ(1)` exact.
    MeanMatching,
    /// Keep `ψ(q)` exact at the given `q`.
    ExponentMatching(f64),
}

/// What replaces the jumps below the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SmallJumps {
    /// Drift only.
    Drift,
    /// Drift plus a Brownian term with the small-jump variance.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerOptions {
    pub drift_policy: DriftPolicy,
    pub small_jumps: SmallJumps,
    /// Largest accepted total jump rate.
    pub max_rate: f64,
    /// Time step of the Gaussian increments, when there are any. Zero picks
    /// `δ²/σ²`, so that increments have the scale of the smallest jump.
    pub gaussian_step: f64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            drift_policy: DriftPolicy::MeanMatching,
            small_jumps: SmallJumps::Drift,
            max_rate: 1e6,
            gaussian_step: 1e-2,
        }
    }
}

/// Compound-Poisson approximation of a Lévy process: jumps with `|y| ≥ δ`
/// are exact, the rest is folded into the drift (and optionally a Gaussian).
#[derive(Debug, Clone)]
pub struct LevySampler {
    triplet: LevyTriplet,
    pub options: SamplerOptions,
    pub cutoff: f64,
    /// Drift of the approximating process.
    pub drift: f64,
    /// Gaussian variance rate of the approximating process.
    pub sigma2: f64,
    /// Time step of the Gaussian increments.
    pub step: f64,
    neg: Option<Arc<InverseCdfTable>>,
    pos: Option<Arc<InverseCdfTable>>,
    rate_neg: f64,
    rate_pos: f64,
}

/// One step of the event stream: wait `dt`, then add `jump`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub dt: f64,
    pub jump: f64,
    /// The increment is a Gaussian grid step, not a jump of the measure.
    pub diffusive: bool,
}

/// Per-path state of the event stream (time left to the next Gaussian step).
#[derive(Debug, Clone, Copy)]
pub struct EventClock {
    to_grid: f64,
}

fn side_table(spec: &JumpMeasureSpec, side: Side) -> Result<Option<Arc<InverseCdfTable>>, LevyError> {
    match spec.support(side) {
        Some((_, hi)) if hi > spec.cutoff_delta => Ok(Some(jump_table(spec, side)?)),
        _ => Ok(None),
    }
}

impl LevySampler {
    pub fn new(triplet: &LevyTriplet, options: SamplerOptions) -> Result<Self, CumulantError> {
        let spec = &triplet.jumps;
        let delta = spec.cutoff_delta;
        let neg = side_table(spec, Side::Negative)?;
        let pos = side_table(spec, Side::Positive)?;
        let rate_neg = neg.as_ref().map_or(0.0, |t| t.total());
        let rate_pos = pos.as_ref().map_or(0.0, |t| t.total());
        let rate = rate_neg + rate_pos;
        if rate > options.max_rate {
            return Err(LevyError::RateOverflow { rate, budget: options.max_rate }.into());
        }
        let comp = triplet.compensation;
        let small = |f: &dyn Fn(f64) -> f64| -> Result<f64, CumulantError> {
            let mut s = 0.0;
            for side in [Side::Negative, Side::Positive] {
                s += spec.integrate_side(side, 0.0, delta, |y| {
                    let d = spec.density(y);
                    if d == 0.0 {
                        0.0
                    } else {
                        f(y) * d
                    }
                })?;
            }
            Ok(s)
        };
        // ∫_{|y|≥δ} c(y) ν(dy), with e^y ν evaluated in tilted form
        let mut big_comp = 0.0;
        for side in [Side::Negative, Side::Positive] {
            big_comp += spec.integrate_side(side, delta, f64::INFINITY, |y| comp.weighted_compensator(spec, y))?;
        }
        let small_var = small(&|y| y * y)?;
        let sigma2 = triplet.gaussian_sigma2
            + match options.small_jumps {
                SmallJumps::Drift => 0.0,
                SmallJumps::Gaussian => small_var,
            };
        let drift = match options.drift_policy {
            DriftPolicy::MeanMatching => triplet.drift_b + small(&|y| comp.mean_term(y))? - big_comp,
            DriftPolicy::ExponentMatching(q) => {
                triplet.drift_b + 0.5 * (triplet.gaussian_sigma2 - sigma2) * q + small(&|y| comp.integrand(q, y))? / q
                    - big_comp
            }
        };
        let step = if options.gaussian_step > 0.0 {
            options.gaussian_step
        } else if sigma2 > 0.0 {
            delta * delta / sigma2
        } else {
            f64::INFINITY
        };
        Ok(Self { triplet: triplet.clone(), options, cutoff: delta, drift, sigma2, step, neg, pos, rate_neg, rate_pos })
    }

    pub fn triplet(&self) -> &LevyTriplet {
        &self.triplet
    }

    pub fn rate(&self) -> f64 {
        self.rate_neg + self.rate_pos
    }

    pub fn rate_neg(&self) -> f64 {
        self.rate_neg
    }

    /// Laplace exponent of the approximating process,
    /// `vq + σ²q²/2 + ∫_{|y|≥δ}(e^{qy} - 1) ν(dy)`.
    pub fn psi_truncated(&self, q: f64) -> Result<f64, CumulantError> {
        let spec = &self.triplet.jumps;
        let mut s = self.drift * q + 0.5 * self.sigma2 * q * q;
        for side in [Side::Negative, Side::Positive] {
            s += spec.integrate_side(side, self.cutoff, f64::INFINITY, |y| {
                let d = spec.density(y);
                if d == 0.0 {
                    0.0
                } else if y.abs() > 1.0 {
                    spec.tilted(q, y) - d
                } else {
                    (q * y).exp_m1() * d
                }
            })?;
        }
        Ok(s)
    }

    pub fn clock(&self) -> EventClock {
        EventClock { to_grid: if self.sigma2 > 0.0 { self.step } else { f64::INFINITY } }
    }

    /// Draws a jump of size at least the cutoff, sign chosen by side mass.
    pub fn sample_big<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() * self.rate();
        if u < self.rate_neg {
            -self.neg.as_ref().expect("negative table").sample(rng)
        } else {
            self.pos.as_ref().expect("positive table").sample(rng)
        }
    }

    /// Next event of the path. `dt` is infinite when nothing ever happens.
    pub fn next_event<R: Rng + ?Sized>(&self, rng: &mut R, clock: &mut EventClock) -> Event {
        let rate = self.rate();
        let wait = if rate > 0.0 { rng.sample::<f64, _>(Exp1) / rate } else { f64::INFINITY };
        if wait < clock.to_grid {
            if clock.to_grid.is_finite() {
                clock.to_grid -= wait;
            }
            Event { dt: wait, jump: self.sample_big(rng), diffusive: false }
        } else if clock.to_grid.is_finite() {
            let dt = clock.to_grid;
            let h = self.step;
            clock.to_grid = h;
            let z: f64 = rng.sample(StandardNormal);
            Event { dt, jump: (self.sigma2 * h).sqrt() * z, diffusive: true }
        } else {
            Event { dt: f64::INFINITY, jump: 0.0, diffusive: false }
        }
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> PathSkeleton {
        assert!(horizon > 0.0, "horizon must be positive");
        let mut clock = self.clock();
        let mut t = 0.0;
        let mut times = Vec::new();
        let mut jump_sizes = Vec::new();
        loop {
            let ev = self.next_event(rng, &mut clock);
            t += ev.dt;
            if !(t <= horizon) {
                break;
            }
            times.push(t);
            jump_sizes.push(ev.jump);
        }
        PathSkeleton { times, jump_sizes, drift: self.drift, sigma: self.sigma2.sqrt(), horizon }
    }
}

/// A Lévy path on `[0, horizon]`: affine with slope `drift` between the
/// listed events. Gaussian increments, when `sigma > 0`, are listed among the
/// events on their time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSkeleton {
    pub times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
    pub drift: f64,
    pub sigma: f64,
    pub horizon: f64,
}

impl PathSkeleton {
    pub fn drift_only(drift: f64, horizon: f64) -> Self {
        Self { times: Vec::new(), jump_sizes: Vec::new(), drift, sigma: 0.0, horizon }
    }

    /// Value at time `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.drift * t + self.jump_sizes[..k].iter().sum::<f64>()
    }

    pub fn endpoint(&self) -> f64 {
        self.value_at(self.horizon)
    }

    /// Affine pieces `(start_time, end_time, start_value)` between events.
    pub fn pieces(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.times.len() + 1);
        let mut t0 = 0.0;
        let mut x0 = 0.0;
        for (&t, &j) in self.times.iter().zip(&self.jump_sizes) {
            out.push((t0, t, x0));
            x0 += self.drift * (t - t0) + j;
            t0 = t;
        }
        out.push((t0, self.horizon, x0));
        out
    }
}

/// Skeleton on `[0, horizon]` with the default sampler options.
pub fn sample_path<R: Rng + ?Sized>(
    triplet: &LevyTriplet,
    horizon: f64,
    rng: &mut R,
) -> Result<PathSkeleton, CumulantError> {
    Ok(LevySampler::new(triplet, SamplerOptions::default())?.sample_path(horizon, rng))
}

/// A jump from `spec` on `side`, conditioned on `|y| ≥ spec.cutoff_delta`.
pub fn sample_jump<R: Rng + ?Sized>(spec: &JumpMeasureSpec, side: Side, rng: &mut R) -> Result<f64, LevyError> {
    let t = jump_table(spec, side)?;
    Ok(side.sign() * t.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulant::{psi_eval, StableFamily};
    use crate::levy::canonical_lambda;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_drift_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_path(&LevyTriplet::pure_drift(-1.0), 2.0, &mut rng).unwrap();
        assert!(p.times.is_empty());
        assert_eq!(p.endpoint(), -2.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let t = StableFamily::new(1.5).unwrap().triplet().unwrap();
        let a = sample_path(&t, 5.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_path(&t, 5.0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(a.times.windows(2).all(|w| w[0] < w[1]));
        assert!(a.times.iter().all(|&s| (0.0..=5.0).contains(&s)));
    }

    #[test]
    fn uniform_jumps() {
        let spec = JumpMeasureSpec::uniform(-2.0, -1.0, 1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 20000;
        let xs: Vec<f64> = (0..n).map(|_| sample_jump(&spec, Side::Negative, &mut rng).unwrap()).collect();
        assert!(xs.iter().all(|&x| (-2.0..=-1.0).contains(&x)));
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (1.0f64 / 12.0).sqrt() / (n as f64).sqrt();
        assert!((mean + 1.5).abs() < 3.0 * se, "{mean}");
        assert!(sample_jump(&spec, Side::Positive, &mut rng).is_err());
    }

    #[test]
    fn lambda_support_contract() {
        let lam = canonical_lambda(1.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10000 {
            let y = sample_jump(&lam, Side::Negative, &mut rng).unwrap();
            assert!(y > -std::f64::consts::LN_2 - 1e-15 && y <= -1e-3);
        }
    }

    #[test]
    fn exponent_matching_is_exact() {
        let t = StableFamily::new(1.25).unwrap().triplet().unwrap();
        let opts = SamplerOptions { drift_policy: DriftPolicy::ExponentMatching(1.75), ..Default::default() };
        let s = LevySampler::new(&t.clone(), opts).unwrap();
        let a = s.psi_truncated(1.75).unwrap();
        let b = psi_eval(&t, 1.75).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn mean_matching_keeps_the_mean() {
        let t = StableFamily::new(1.5).unwrap().triplet().unwrap();
        let s = LevySampler::new(&t, SamplerOptions::default()).unwrap();
        let h = 1e-6;
        let d = (s.psi_truncated(h).unwrap() - s.psi_truncated(-h).unwrap()) / (2.0 * h);
        assert!((d - t.mean().unwrap()).abs() < 1e-6, "{d}");
    }

    #[test]
    fn rate_budget() {
        let t = StableFamily::new(1.5).unwrap().triplet().unwrap();
        let t = LevyTriplet { jumps: t.jumps.with_cutoff(1e-6).unwrap(), ..t };
        let opts = SamplerOptions { max_rate: 1e4, ..Default::default() };
        assert!(matches!(LevySampler::new(&t, opts), Err(CumulantError::Levy(LevyError::RateOverflow { .. }))));
    }
}
