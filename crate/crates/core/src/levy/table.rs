//! Tabulated inverse-CDF sampling for densities on a positive range.
//!
//! The range is cut into log-spaced cells; each cell stores its exact mass
//! (by quadrature) and a local power-law fit `f(u) ∝ u^{-p}` used to invert
//! inside the cell in closed form.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;

use crate::quad::{integrate, integrate_log_scale, QuadError, QuadOptions};

use super::measure::{quad_opts, JumpMeasureSpec, Side};
use super::LevyError;

pub const TABLE_CELLS: usize = 1024;

#[derive(Debug, Clone)]
pub struct InverseCdfTable {
    /// Cell edges, increasing; `nodes[0]` is the lower end of the range.
    nodes: Vec<f64>,
    /// Cumulative mass at each node; `cum[0]` is the mass below `nodes[0]`.
    cum: Vec<f64>,
    /// Local power-law exponent per cell.
    power: Vec<f64>,
    /// Whether the table also covers `(0, nodes[0])`.
    from_zero: bool,
}

fn cell_opts() -> QuadOptions {
    QuadOptions { abs_tol: 0.0, rel_tol: 1e-11, max_panels: 200 }
}

fn local_power(f0: f64, f1: f64, u0: f64, u1: f64) -> f64 {
    if f0 > 0.0 && f1 > 0.0 && f0.is_finite() && f1.is_finite() {
        -(f1 / f0).ln() / (u1 / u0).ln()
    } else {
        0.0
    }
}

/// Inverts `∫_{u0}^{u} x^{-p} dx = frac · ∫_{u0}^{u1} x^{-p} dx`.
fn invert_power_cell(u0: f64, u1: f64, p: f64, frac: f64) -> f64 {
    let g = 1.0 - p;
    let lr = (u1 / u0).ln();
    let u = if (g * lr).abs() < 1e-9 {
        u0 * (frac * lr).exp()
    } else {
        let w = frac * (g * lr).exp_m1();
        u0 * ((w).ln_1p() / g).exp()
    };
    u.clamp(u0, u1)
}

/// Fraction of the power-law mass of `[u0, u1]` lying in `[u0, u]`.
fn power_cell_fraction(u0: f64, u1: f64, p: f64, u: f64) -> f64 {
    let g = 1.0 - p;
    let lr = (u1 / u0).ln();
    let lu = (u / u0).ln();
    if (g * lr).abs() < 1e-9 {
        lu / lr
    } else {
        (g * lu).exp_m1() / (g * lr).exp_m1()
    }
}

impl InverseCdfTable {
    /// Tabulates `f` on `[lo, hi]` (`0 < lo < hi < inf`). With `from_zero`,
    /// the mass of `(0, lo)` is added as an extra power-law cell, which
    /// requires `f` to be integrable at 0.
    pub fn build<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, cells: usize, from_zero: bool) -> Result<Self, QuadError> {
        assert!(lo > 0.0 && hi > lo && hi.is_finite() && cells > 0);
        let (llo, lhi) = (lo.ln(), hi.ln());
        let mut nodes: Vec<f64> = (0..=cells).map(|i| (llo + (lhi - llo) * i as f64 / cells as f64).exp()).collect();
        nodes[0] = lo;
        nodes[cells] = hi;
        let opts = cell_opts();
        let mut cum = Vec::with_capacity(cells + 1);
        let mut power = Vec::with_capacity(cells + 1);
        let base = if from_zero {
            // far enough down that the neglected mass is below rounding for
            // any integrand decaying at least like u^{-0.9}
            integrate_log_scale(&f, lo * 1e-60, lo, &quad_opts())?.value
        } else {
            0.0
        };
        cum.push(base);
        let mut acc = base;
        for w in nodes.windows(2) {
            let (u0, u1) = (w[0], w[1]);
            // integrate in log space: the densities are close to power laws
            let m = integrate(
                |s| {
                    let u = s.exp();
                    f(u) * u
                },
                u0.ln(),
                u1.ln(),
                &opts,
            )?
            .value;
            acc += m.max(0.0);
            cum.push(acc);
            power.push(local_power(f(u0), f(u1), u0, u1));
        }
        Ok(Self { nodes, cum, power, from_zero })
    }

    pub fn total(&self) -> f64 {
        *self.cum.last().expect("nonempty")
    }

    pub fn lower(&self) -> f64 {
        if self.from_zero {
            0.0
        } else {
            self.nodes[0]
        }
    }

    pub fn upper(&self) -> f64 {
        *self.nodes.last().expect("nonempty")
    }

    /// Point at which the tabulated mass reaches `m ∈ [0, total]`.
    pub fn quantile_mass(&self, m: f64) -> f64 {
        let m = m.clamp(0.0, self.total());
        if m < self.cum[0] {
            // below the first node: power law with the first cell's exponent
            let p = self.power[0];
            let g = 1.0 - p;
            debug_assert!(g > 0.0);
            return self.nodes[0] * (m / self.cum[0]).powf(1.0 / g);
        }
        let k = self.cum.partition_point(|&c| c <= m).clamp(1, self.nodes.len() - 1) - 1;
        let mass = self.cum[k + 1] - self.cum[k];
        let frac = if mass > 0.0 { (m - self.cum[k]) / mass } else { 0.0 };
        invert_power_cell(self.nodes[k], self.nodes[k + 1], self.power[k], frac.clamp(0.0, 1.0))
    }

    /// Tabulated mass of `[lower, u]`.
    pub fn mass_below(&self, u: f64) -> f64 {
        if u <= self.lower() {
            return 0.0;
        }
        if u >= self.upper() {
            return self.total();
        }
        if u < self.nodes[0] {
            let g = 1.0 - self.power[0];
            return self.cum[0] * (u / self.nodes[0]).powf(g);
        }
        let k = self.nodes.partition_point(|&x| x <= u).clamp(1, self.nodes.len() - 1) - 1;
        let mass = self.cum[k + 1] - self.cum[k];
        self.cum[k] + mass * power_cell_fraction(self.nodes[k], self.nodes[k + 1], self.power[k], u)
    }

    pub fn cdf(&self, u: f64) -> f64 {
        self.mass_below(u) / self.total()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let m: f64 = rng.random::<f64>() * self.total();
        self.quantile_mass(m)
    }
}

/// Upper `|y|` beyond which the side carries a negligible fraction of mass.
fn effective_upper(spec: &JumpMeasureSpec, side: Side, lo: f64, hi: f64) -> Result<f64, QuadError> {
    if hi.is_finite() {
        return Ok(hi);
    }
    let tail = |x: f64| spec.integrate_side(side, x, f64::INFINITY, |y| spec.density(y));
    let total = tail(lo)?;
    let mut u = lo.max(1.0);
    while u < 1e3 {
        if tail(u)? <= 1e-14 * total {
            return Ok(u);
        }
        u *= 2.0;
    }
    Ok(u)
}

type CacheKey = (String, Side, u64, u64);

fn cache() -> &'static Mutex<HashMap<CacheKey, Arc<InverseCdfTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<InverseCdfTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The jump-size table for `|y| ≥ spec.cutoff_delta` on one side, built once
/// per (label, side, δ) and shared afterwards. Labels must identify the
/// density uniquely.
pub fn jump_table(spec: &JumpMeasureSpec, side: Side) -> Result<Arc<InverseCdfTable>, LevyError> {
    let key = (spec.label.clone(), side, spec.cutoff_delta.to_bits(), 0);
    if let Some(t) = cache().lock().expect("table cache").get(&key) {
        return Ok(t.clone());
    }
    let Some((s_lo, s_hi)) = spec.support(side) else {
        return Err(LevyError::EmptySupport(spec.label.clone()));
    };
    let lo = spec.cutoff_delta.max(s_lo);
    if lo >= s_hi {
        return Err(LevyError::EmptySupport(spec.label.clone()));
    }
    let hi = effective_upper(spec, side, lo, s_hi)?;
    let sign = side.sign();
    let table = InverseCdfTable::build(|u| spec.density(sign * u), lo, hi, TABLE_CELLS, false)?;
    if !(table.total() > 0.0) {
        return Err(LevyError::EmptySupport(spec.label.clone()));
    }
    let table = Arc::new(table);
    cache().lock().expect("table cache").insert(key, table.clone());
    Ok(table)
}

/// Table of `w(u) · ν(-u)` on `(0, upper]`, for weights `w` that make the
/// product integrable at 0. Cached under `tag`.
pub fn weighted_small_table<W: Fn(f64) -> f64>(
    spec: &JumpMeasureSpec,
    tag: u64,
    upper: f64,
    w: W,
) -> Result<Arc<InverseCdfTable>, LevyError> {
    let key = (spec.label.clone(), Side::Negative, upper.to_bits(), tag);
    if let Some(t) = cache().lock().expect("table cache").get(&key) {
        return Ok(t.clone());
    }
    let lo = upper * 1e-6;
    let table = InverseCdfTable::build(|u| w(u) * spec.density(-u), lo, upper, TABLE_CELLS, true)?;
    if !(table.total() > 0.0) {
        return Err(LevyError::EmptySupport(spec.label.clone()));
    }
    let table = Arc::new(table);
    cache().lock().expect("table cache").insert(key, table.clone());
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::measure::canonical_lambda;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_power_law_is_inverted_exactly() {
        let t = InverseCdfTable::build(|u| u.powf(-2.5), 1e-3, 1.0, 64, false).unwrap();
        let exact = |u: f64| (1e-3f64.powf(-1.5) - u.powf(-1.5)) / 1.5;
        assert!((t.total() - exact(1.0)).abs() < 1e-9 * exact(1.0));
        for &u in &[2e-3, 0.0137, 0.5] {
            assert!((t.mass_below(u) - exact(u)).abs() < 1e-9 * exact(1.0));
            let back = t.quantile_mass(exact(u));
            assert!((back - u).abs() < 1e-9 * u);
        }
    }

    #[test]
    fn from_zero_covers_the_origin() {
        let t = InverseCdfTable::build(|u| u.powf(-0.5), 1e-2, 1.0, 64, true).unwrap();
        assert!((t.total() - 2.0).abs() < 1e-9);
        let q = t.quantile_mass(0.05);
        assert!((q - 0.000625).abs() < 1e-12, "{q}");
        assert!((t.cdf(0.25) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn lambda_table_mass_matches_tail() {
        let lam = canonical_lambda(1.5).unwrap();
        let t = jump_table(&lam, Side::Negative).unwrap();
        let tail = lam.neg_tail(1e-3).unwrap();
        assert!((t.total() - tail).abs() < 1e-8 * tail);
        assert!((t.upper() - std::f64::consts::LN_2).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = t.sample(&mut rng);
            assert!((1e-3..=std::f64::consts::LN_2).contains(&u));
        }
    }
}
