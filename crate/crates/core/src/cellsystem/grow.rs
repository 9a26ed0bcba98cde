use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::{AtomKind, CellRecord, CellTree, KillPlacement, MassAtom, TreeError, Truncation, TruncationPolicy};
use crate::cumulant::{CumulantError, GFParams};
use crate::lamperti::{clock_increment, clock_inverse};
use crate::levy::{weighted_small_table, DriftPolicy, InverseCdfTable, LevySampler, SamplerOptions, SmallJumps};
use crate::rng::SimRng;
use crate::spine::omega_position;

use super::CellLabel;

/// How finely each cell's driving process is resolved.
///
/// A cell born at size `z` uses the largest cutoff `δ_max·2^{-k}` not above
/// `delta_factor·x_min/z`, clamped to `[delta_min, delta_max]`: jumps much
/// smaller than that only produce children below `x_min` anyway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeResolution {
    pub delta_max: f64,
    pub delta_min: f64,
    pub delta_factor: f64,
    /// Add the area mass of the children below the cutoff as diffuse atoms.
    pub diffuse: bool,
    /// Replace the jumps below the cutoff by drift plus a Brownian term of the
    /// same variance, rather than by drift alone. Drift alone keeps
    /// `κ(ω₋) = 0` but shifts `κ'(ω₋)` by about `-ω₋σ²_δ/2`.
    pub gaussian: bool,
}

impl Default for TreeResolution {
    fn default() -> Self {
        Self { delta_max: 0.05, delta_min: 1e-3, delta_factor: 1.0, diffuse: true, gaussian: true }
    }
}

#[derive(Debug)]
struct Level {
    sampler: LevySampler,
    /// `∫_{(-δ,0)} (1 - e^y)^{ω₋} Λ(dy)`.
    small_mass: f64,
    small_table: Option<Arc<InverseCdfTable>>,
}

/// Samplers for every cutoff level of one parameter set, shareable across
/// threads.
#[derive(Debug)]
pub struct TreeEngine {
    alpha: f64,
    omega: f64,
    resolution: TreeResolution,
    placement: KillPlacement,
    levels: Vec<(f64, Level)>,
}

impl TreeEngine {
    pub fn new(params: &GFParams, resolution: TreeResolution, placement: KillPlacement) -> Result<Self, TreeError> {
        let r = resolution;
        if !(r.delta_min > 0.0 && r.delta_min <= r.delta_max && r.delta_factor > 0.0) {
            return Err(TreeError::InvalidPolicy("cutoff ladder must satisfy 0 < delta_min <= delta_max".into()));
        }
        let omega = params.omega_minus;
        let opts = SamplerOptions {
            drift_policy: DriftPolicy::ExponentMatching(omega),
            small_jumps: if r.gaussian { SmallJumps::Gaussian } else { SmallJumps::Drift },
            gaussian_step: 0.0,
            ..SamplerOptions::default()
        };
        let mut levels = Vec::new();
        let mut delta = r.delta_max;
        loop {
            let mut t = params.triplet.clone();
            t.jumps = t.jumps.with_cutoff(delta).map_err(CumulantError::from)?;
            let sampler = LevySampler::new(&t, opts)?;
            let small_table = if t.jumps.has_side(crate::levy::Side::Negative) {
                weighted_small_table(&t.jumps, 0x7472_6565 ^ omega.to_bits(), delta, |u: f64| {
                    (-u).exp_m1().abs().powf(omega)
                })
                .ok()
            } else {
                None
            };
            let small_mass = small_table.as_ref().map_or(0.0, |t| t.total());
            levels.push((delta, Level { sampler, small_mass, small_table }));
            if delta * 0.5 < r.delta_min * (1.0 - 1e-12) {
                break;
            }
            delta *= 0.5;
        }
        Ok(Self { alpha: params.alpha, omega, resolution, placement, levels })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn omega_minus(&self) -> f64 {
        self.omega
    }

    pub fn resolution(&self) -> &TreeResolution {
        &self.resolution
    }

    pub fn placement(&self) -> &KillPlacement {
        &self.placement
    }

    /// Cutoffs of the ladder, largest first.
    pub fn cutoffs(&self) -> Vec<f64> {
        self.levels.iter().map(|(d, _)| *d).collect()
    }

    /// Cutoff used for a cell born at `birth_size`.
    pub fn cutoff_for(&self, birth_size: f64, x_min: f64) -> f64 {
        self.levels[self.level_index(birth_size, x_min)].0
    }

    fn level_index(&self, birth_size: f64, x_min: f64) -> usize {
        let target = self.resolution.delta_factor * x_min / birth_size;
        self.levels.iter().position(|(d, _)| *d <= target).unwrap_or(self.levels.len() - 1)
    }

    fn height(&self, time: f64, size: f64, rng: &mut SimRng) -> f64 {
        match &self.placement {
            KillPlacement::BirthHeight => time,
            KillPlacement::Smeared(pool) => time + size.powf(-self.alpha) * pool.sample(rng),
        }
    }

    fn atom(&self, first_generation: u32, kind: AtomKind, time: f64, size: f64, rng: &mut SimRng) -> MassAtom {
        let height = self.height(time, size, rng);
        MassAtom { first_generation, kind, time, size, mass: size.powf(self.omega), height }
    }

    /// Grows one tree from a cell of size `x`, consuming `rng` only.
    pub fn grow(&self, x: f64, policy: &TruncationPolicy, rng: &mut SimRng) -> Result<CellTree, TreeError> {
        policy.validate()?;
        if !(x > 0.0 && x.is_finite()) {
            return Err(TreeError::InvalidPolicy("start size must be positive".into()));
        }
        let mut tree = CellTree {
            x,
            alpha: self.alpha,
            omega_minus: self.omega,
            policy: *policy,
            records: Vec::new(),
            atoms: Vec::new(),
            stream_key: None,
        };
        let mut queue = VecDeque::new();
        if x < policy.x_min {
            tree.atoms.push(self.atom(0, AtomKind::Killed, 0.0, x, rng));
            return Ok(tree);
        }
        queue.push_back((CellLabel::root(), 0.0, x));
        while let Some((label, birth_time, birth_size)) = queue.pop_front() {
            if tree.records.len() >= policy.max_cells {
                let cells = tree.records.len();
                return Err(TreeError::BudgetExceeded { cells, budget: policy.max_cells, partial: Box::new(tree) });
            }
            let generation = label.generation() as u32;
            if generation >= policy.max_generation {
                tree.records.push(CellRecord {
                    label,
                    birth_time,
                    birth_size,
                    age: 0.0,
                    truncation: Truncation::GenerationCapped,
                });
                tree.atoms.push(self.atom(generation + 1, AtomKind::Capped, birth_time, birth_size, rng));
                continue;
            }
            let record = self.run_cell(&mut tree, &mut queue, label, birth_time, birth_size, policy, rng);
            tree.records.push(record);
        }
        Ok(tree)
    }

    #[allow(clippy::too_many_arguments)]
    fn run_cell(
        &self,
        tree: &mut CellTree,
        queue: &mut VecDeque<(CellLabel, f64, f64)>,
        label: CellLabel,
        birth_time: f64,
        z: f64,
        policy: &TruncationPolicy,
        rng: &mut SimRng,
    ) -> CellRecord {
        let a = -self.alpha;
        let omega = self.omega;
        let level = &self.levels[self.level_index(z, policy.x_min)].1;
        let sampler = &level.sampler;
        let v = sampler.drift;
        let scale = z.powf(a);
        let kill_level = (policy.x_min / z).ln();
        let next_gen = label.generation() as u32 + 1;
        let mut clk = sampler.clock();
        let (mut t, mut xi, mut age) = (birth_time, 0.0_f64, 0.0);
        let mut n_children = 0u32;
        loop {
            let ev = sampler.next_event(rng, &mut clk);
            let mut d = ev.dt;
            let mut end = None;
            let to_horizon = scale * clock_increment(a, xi, v, d);
            if t + to_horizon >= policy.horizon {
                d = clock_inverse(a, xi, v, (policy.horizon - t) / scale).unwrap_or(d).min(d);
                end = Some(Truncation::Horizon);
            }
            if v < 0.0 {
                let to_kill = (kill_level - xi) / v;
                if to_kill <= d {
                    d = to_kill.max(0.0);
                    end = Some(Truncation::KilledBelow(policy.x_min));
                }
            }
            if self.resolution.diffuse && level.small_mass > 0.0 && d > 0.0 && d.is_finite() {
                let table = level.small_table.as_ref().expect("small table");
                let u = omega_position(omega, v, d, rng.random::<f64>());
                let time = t + scale * clock_increment(a, xi, v, u);
                let size = z * (xi + v * u).exp() * (-table.sample(rng)).exp_m1().abs();
                let mass = level.small_mass * z.powf(omega) * clock_increment(omega, xi, v, d);
                let height = self.height(time, size, rng);
                tree.atoms.push(MassAtom {
                    first_generation: next_gen,
                    kind: AtomKind::Diffuse,
                    time,
                    size,
                    mass,
                    height,
                });
            }
            let dt = scale * clock_increment(a, xi, v, d);
            t = match end {
                Some(Truncation::Horizon) => policy.horizon,
                _ => t + dt,
            };
            xi += v * d;
            age += dt;
            if let Some(truncation) = end {
                let kind = match truncation {
                    Truncation::Horizon => AtomKind::Horizon,
                    _ => AtomKind::Killed,
                };
                let size = z * xi.exp();
                tree.atoms.push(self.atom(next_gen, kind, t, size, rng));
                return CellRecord { label, birth_time, birth_size: z, age, truncation };
            }
            let y = ev.jump;
            if y < 0.0 && !ev.diffusive {
                let child = z * xi.exp() * (-y.exp_m1());
                if child < policy.x_min {
                    tree.atoms.push(self.atom(next_gen, AtomKind::Killed, t, child, rng));
                } else {
                    n_children += 1;
                    queue.push_back((label.child(n_children), t, child));
                }
            }
            xi += y;
            if xi < kill_level {
                let size = z * xi.exp();
                tree.atoms.push(self.atom(next_gen, AtomKind::Killed, t, size, rng));
                return CellRecord {
                    label,
                    birth_time,
                    birth_size: z,
                    age,
                    truncation: Truncation::KilledBelow(policy.x_min),
                };
            }
        }
    }
}

/// Grows one tree with the default resolution and mass placed at the
/// truncation time.
pub fn grow_tree(
    params: &GFParams,
    x: f64,
    policy: &TruncationPolicy,
    rng: &mut SimRng,
) -> Result<CellTree, TreeError> {
    TreeEngine::new(params, TreeResolution::default(), KillPlacement::BirthHeight)?.grow(x, policy, rng)
}
