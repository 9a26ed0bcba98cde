use serde::Serialize;

use super::{AtomKind, CellTree, TreeEngine, TreeError, TruncationPolicy};
use crate::rng::SimRng;
use crate::spine::IDistribution;

/// `M(n) = Σ_{|u|=n} χ_u(0)^{ω₋}`, with every stand-in truncated before
/// generation `n` counted at its conditional mean.
pub fn area_martingale(tree: &CellTree, n: u32) -> f64 {
    assert!(n <= tree.policy.max_generation, "generation {n} is past the cap");
    let cells: f64 =
        tree.records.iter().filter(|r| r.generation() == n as usize).map(|r| r.birth_size.powf(tree.omega_minus)).sum();
    let atoms: f64 = tree.atoms.iter().filter(|a| a.first_generation <= n).map(|a| a.mass).sum();
    cells + atoms
}

/// Right-continuous step function `t ↦ A(t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaProfile {
    pub breakpoints: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// `𝓜`, the total mass of the tree.
    pub total: f64,
    /// `x_min^{|α|}`: time scale on which truncated subtrees are smeared.
    pub time_bias_scale: f64,
}

impl AreaProfile {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.breakpoints.partition_point(|&b| b <= t) {
            0 => 0.0,
            k => self.cumulative[k - 1],
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.breakpoints.windows(2).all(|w| w[0] < w[1]) && self.cumulative.windows(2).all(|w| w[0] <= w[1])
    }
}

pub fn area_profile(tree: &CellTree) -> AreaProfile {
    let mut steps: Vec<(f64, f64)> = tree.atoms.iter().map(|a| (a.height, a.mass)).collect();
    steps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut breakpoints: Vec<f64> = Vec::with_capacity(steps.len());
    let mut cumulative: Vec<f64> = Vec::with_capacity(steps.len());
    let mut acc = 0.0;
    for (h, m) in steps {
        acc += m;
        if breakpoints.last() == Some(&h) {
            *cumulative.last_mut().expect("nonempty") = acc;
        } else {
            breakpoints.push(h);
            cumulative.push(acc);
        }
    }
    AreaProfile {
        breakpoints,
        cumulative,
        total: tree.total_mass(),
        time_bias_scale: tree.policy.x_min.powf(-tree.alpha),
    }
}

/// `E[A(t) | tree]`: each stand-in of size `y` at time `s` contributes
/// `y^{ω₋}·P(I ≤ (t - s)/y^{|α|})`, the exact mean of its subtree.
pub fn conditional_area(tree: &CellTree, t: f64, pool: &IDistribution) -> f64 {
    let a = -tree.alpha;
    tree.atoms.iter().filter(|at| at.time <= t).map(|at| at.mass * pool.cdf((t - at.time) / at.size.powf(a))).sum()
}

/// An independent draw of `A(t)` given the Eve cell of `tree`: each child of
/// the Eve cell born at `s ≤ t` with size `c` contributes `c^{ω₋}·A'((t-s)c^α)`
/// with `A'` the area of a fresh tree from 1.
pub fn markov_branching_resample(
    tree: &CellTree,
    engine: &TreeEngine,
    t: f64,
    rng: &mut SimRng,
) -> Result<f64, TreeError> {
    let a = -tree.alpha;
    let omega = tree.omega_minus;
    let mut total = 0.0;
    for r in tree.records.iter().filter(|r| r.generation() == 1 && r.birth_time <= t) {
        let c_abs = r.birth_size;
        let horizon = (t - r.birth_time) / c_abs.powf(a);
        let sub = TruncationPolicy {
            x_min: tree.policy.x_min / c_abs,
            max_generation: tree.policy.max_generation.saturating_sub(1).max(1),
            horizon,
            ..tree.policy
        };
        let fresh = engine.grow(1.0, &sub, rng)?;
        total += c_abs.powf(omega) * area_profile(&fresh).value_at(horizon);
    }
    for at in tree.atoms.iter().filter(|at| at.first_generation == 1 && at.kind != AtomKind::Capped) {
        if at.time <= t {
            let h = match engine.placement() {
                super::KillPlacement::BirthHeight => at.time,
                super::KillPlacement::Smeared(pool) => at.time + at.size.powf(a) * pool.sample(rng),
            };
            if h <= t {
                total += at.mass;
            }
        }
    }
    Ok(total)
}
