use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::sync::Arc;

use crate::quad::{integrate_positive_axis, QuadError, QuadOptions};
use crate::special::{gamma, sin_pi};

use super::LevyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Side {
    Negative,
    Positive,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Negative => -1.0,
            Side::Positive => 1.0,
        }
    }
}

/// Which spine tilt to apply to the jump measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum SpineSign {
    Minus,
    Plus,
}

/// Density of a Lévy measure on `ℝ \ {0}`.
///
/// Implementors only need `log_density`; the tilted form is used inside
/// exponential-moment integrals where `e^{qy}` alone would overflow.
pub trait JumpDensity: Send + Sync + fmt::Debug {
    /// `ln ν(y)`, or `-inf` where the density vanishes.
    fn log_density(&self, y: f64) -> f64;

    fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }

    /// `e^{q y} ν(y)`.
    fn tilted(&self, q: f64, y: f64) -> f64 {
        (q * y + self.log_density(y)).exp()
    }
}

/// `ln |1 - e^y|` for `y != 0`, accurate at both ends.
pub fn ln_abs_one_minus_exp(y: f64) -> f64 {
    if y < 0.0 {
        if y < -LN_2 {
            (-y.exp()).ln_1p()
        } else {
            (-y.exp_m1()).ln()
        }
    } else if y > LN_2 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// The family `c_side · e^{a y} · |1 - e^y|^{-(θ+1)}` covering both the
/// cell-process measure (`a = -θ`, negative side cut at `-ln 2`) and the two
/// tilted spine measures (`a = 1/2` and `a = 3/2`).
#[derive(Debug, Clone)]
pub struct HypergeometricDensity {
    pub theta: f64,
    pub exponent: f64,
    pub c_neg: f64,
    pub c_pos: f64,
    /// Negative jumps below this value carry no mass.
    pub neg_floor: f64,
}

impl JumpDensity for HypergeometricDensity {
    fn log_density(&self, y: f64) -> f64 {
        let c = if y < 0.0 {
            if y <= self.neg_floor {
                return f64::NEG_INFINITY;
            }
            self.c_neg
        } else if y > 0.0 {
            self.c_pos
        } else {
            return f64::NEG_INFINITY;
        };
        if c <= 0.0 {
            return f64::NEG_INFINITY;
        }
        c.ln() + self.exponent * y - (self.theta + 1.0) * ln_abs_one_minus_exp(y)
    }
}

/// Constant density on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct UniformDensity {
    pub lo: f64,
    pub hi: f64,
    pub height: f64,
}

impl JumpDensity for UniformDensity {
    fn log_density(&self, y: f64) -> f64 {
        if y >= self.lo && y <= self.hi && y != 0.0 {
            self.height.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// The zero measure.
#[derive(Debug, Clone, Copy)]
pub struct NoJumps;

impl JumpDensity for NoJumps {
    fn log_density(&self, _y: f64) -> f64 {
        f64::NEG_INFINITY
    }
}

/// A Lévy measure together with its support and the activity cutoff used
/// when sampling.
#[derive(Clone)]
pub struct JumpMeasureSpec {
    pub label: String,
    density: Arc<dyn JumpDensity>,
    /// `|y|` range carrying mass on the negative side.
    neg_support: Option<(f64, f64)>,
    /// `|y|` range carrying mass on the positive side.
    pos_support: Option<(f64, f64)>,
    /// Extra `|y|` split points for quadrature.
    breaks: Vec<f64>,
    pub cutoff_delta: f64,
}

impl fmt::Debug for JumpMeasureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpMeasureSpec")
            .field("label", &self.label)
            .field("neg_support", &self.neg_support)
            .field("pos_support", &self.pos_support)
            .field("cutoff_delta", &self.cutoff_delta)
            .finish()
    }
}

/// Smallest `|y|` seen by the quadrature.
pub const MIN_ABS_JUMP: f64 = 1e-100;

pub(crate) fn quad_opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-13, rel_tol: 1e-11, max_panels: 4000 }
}

impl JumpMeasureSpec {
    pub fn new(
        label: impl Into<String>,
        density: Arc<dyn JumpDensity>,
        neg_support: Option<(f64, f64)>,
        pos_support: Option<(f64, f64)>,
        cutoff_delta: f64,
    ) -> Result<Self, LevyError> {
        if !(cutoff_delta > 0.0) {
            return Err(LevyError::InvalidCutoff(cutoff_delta));
        }
        for (lo, hi) in neg_support.iter().chain(pos_support.iter()) {
            if !(*lo >= 0.0 && hi > lo) {
                return Err(LevyError::InvalidSupport(*lo, *hi));
            }
        }
        Ok(Self { label: label.into(), density, neg_support, pos_support, breaks: Vec::new(), cutoff_delta })
    }

    /// The zero measure.
    pub fn empty() -> Self {
        Self {
            label: "none".into(),
            density: Arc::new(NoJumps),
            neg_support: None,
            pos_support: None,
            breaks: Vec::new(),
            cutoff_delta: 1.0,
        }
    }

    /// Uniform density of total mass `mass` on `[lo, hi]` (one side of 0).
    pub fn uniform(lo: f64, hi: f64, mass: f64, cutoff_delta: f64) -> Result<Self, LevyError> {
        if !(lo < hi) || (lo < 0.0 && hi > 0.0) || !(mass > 0.0) {
            return Err(LevyError::InvalidSupport(lo, hi));
        }
        let density = Arc::new(UniformDensity { lo, hi, height: mass / (hi - lo) });
        let (neg, pos) = if hi <= 0.0 { (Some((-hi, -lo)), None) } else { (None, Some((lo, hi))) };
        Self::new(format!("uniform[{lo},{hi}]x{mass}"), density, neg, pos, cutoff_delta)
    }

    pub fn with_breaks(mut self, breaks: Vec<f64>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn with_cutoff(&self, delta: f64) -> Result<Self, LevyError> {
        if !(delta > 0.0) {
            return Err(LevyError::InvalidCutoff(delta));
        }
        let mut s = self.clone();
        s.cutoff_delta = delta;
        Ok(s)
    }

    pub fn support(&self, side: Side) -> Option<(f64, f64)> {
        match side {
            Side::Negative => self.neg_support,
            Side::Positive => self.pos_support,
        }
    }

    pub fn has_side(&self, side: Side) -> bool {
        self.support(side).is_some()
    }

    pub fn density(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        let side = if y < 0.0 { Side::Negative } else { Side::Positive };
        match self.support(side) {
            Some((lo, hi)) if y.abs() >= lo && y.abs() <= hi => self.density.density(y),
            _ => 0.0,
        }
    }

    pub fn tilted(&self, q: f64, y: f64) -> f64 {
        if self.density(y) == 0.0 {
            // keeps 0 * inf out of the integrands
            return 0.0;
        }
        self.density.tilted(q, y)
    }

    pub fn log_density(&self, y: f64) -> f64 {
        let d = self.density(y);
        if d == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.density.log_density(y)
        }
    }

    /// Integrates `f(y)` over `y` on `side` with `|y| ∈ [lo_abs, hi_abs]`
    /// intersected with the support. `f` should already include the density.
    pub fn integrate_side<F: Fn(f64) -> f64>(
        &self,
        side: Side,
        lo_abs: f64,
        hi_abs: f64,
        f: F,
    ) -> Result<f64, QuadError> {
        let Some((s_lo, s_hi)) = self.support(side) else {
            return Ok(0.0);
        };
        // below this the densities overflow; the integrands we use are
        // O(u^{-0.9}) at worst, so the neglected mass is far below tolerance
        let lo = lo_abs.max(s_lo).max(MIN_ABS_JUMP);
        let hi = hi_abs.min(s_hi);
        if hi <= lo {
            return Ok(0.0);
        }
        let mut cuts: Vec<f64> = vec![lo];
        for &b in &self.breaks {
            if b > lo && b < hi {
                cuts.push(b);
            }
        }
        cuts.push(hi);
        let sign = side.sign();
        let opts = quad_opts();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let r = integrate_positive_axis(|u| f(sign * u), w[0], w[1], &opts)?;
            total += r.value;
        }
        Ok(total)
    }

    /// `Λ((-∞, -x])`.
    pub fn neg_tail(&self, x: f64) -> Result<f64, QuadError> {
        self.integrate_side(Side::Negative, x, f64::INFINITY, |y| self.density(y))
    }

    /// `Λ([x, ∞))`.
    pub fn pos_tail(&self, x: f64) -> Result<f64, QuadError> {
        self.integrate_side(Side::Positive, x, f64::INFINITY, |y| self.density(y))
    }

    /// Mass of jumps at or above the sampling cutoff.
    pub fn tail_above_cutoff(&self, side: Side) -> Result<f64, QuadError> {
        match side {
            Side::Negative => self.neg_tail(self.cutoff_delta),
            Side::Positive => self.pos_tail(self.cutoff_delta),
        }
    }

    /// Integrates `f(y)·ν(dy)` over the whole measure, both sides.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64, QuadError> {
        let g = |y: f64| {
            let d = self.density(y);
            if d == 0.0 {
                0.0
            } else {
                f(y) * d
            }
        };
        let neg = self.integrate_side(Side::Negative, 0.0, f64::INFINITY, g)?;
        let pos = self.integrate_side(Side::Positive, 0.0, f64::INFINITY, g)?;
        Ok(neg + pos)
    }

    /// Numerical check that `∫ min(1, y²) ν(dy)` is finite, and with
    /// `exp_moment` also `∫_{y>1} e^y ν(dy)` (otherwise `∫_{y>1} y ν(dy)`).
    pub fn check_integrability(&self, exp_moment: bool) -> Result<(), LevyError> {
        if exp_moment && self.exponential_moment_edge().is_some_and(|(lo, _)| lo <= 1.0) {
            return Err(LevyError::NotIntegrable(self.label.clone()));
        }
        let small = self.integrate(|y| (y * y).min(1.0));
        let big = if exp_moment {
            self.integrate_side(Side::Positive, 1.0, f64::INFINITY, |y| self.tilted(1.0, y))
        } else {
            self.integrate_side(Side::Positive, 1.0, f64::INFINITY, |y| y * self.density(y))
        };
        match (small, big) {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => Ok(()),
            _ => Err(LevyError::NotIntegrable(self.label.clone())),
        }
    }

    /// Upper end of the half-line of `q` for which `∫_{y>1} e^{qy} ν(dy)` is
    /// finite, read off the exponential decay rate of the positive tail.
    /// Returns `(lower, upper)` brackets of that decay rate, or `None` when
    /// the positive side has bounded support (no restriction).
    pub fn exponential_moment_edge(&self) -> Option<(f64, f64)> {
        let (_, hi) = self.pos_support?;
        if hi.is_finite() {
            return None;
        }
        let slope = |a: f64, b: f64| -(self.log_density(b) - self.log_density(a)) / (b - a);
        let s1 = slope(20.0, 40.0);
        let s2 = slope(40.0, 80.0);
        Some((s1.min(s2), s1.max(s2)))
    }
}

fn check_theta(theta: f64) -> Result<(), LevyError> {
    if theta > 1.0 && theta <= 1.5 {
        Ok(())
    } else {
        Err(LevyError::ThetaOutOfRange(theta))
    }
}

/// `Γ(θ+1)/π`.
pub fn c_minus(theta: f64) -> f64 {
    gamma(theta + 1.0) / PI
}

/// `Γ(θ+1)/π · sin(π(θ - 1/2))`; zero at θ = 3/2.
pub fn c_plus(theta: f64) -> f64 {
    c_minus(theta) * sin_pi(theta - 0.5)
}

/// The jump measure of the cell process for the stable-maps family.
///
/// The spine measure only pins down `Λ + Λ̃` on the negative half-line; we
/// take the representative where every cell keeps the larger fragment, which
/// puts the negative support on `(-ln 2, 0)`.
pub fn canonical_lambda(theta: f64) -> Result<JumpMeasureSpec, LevyError> {
    check_theta(theta)?;
    let cp = c_plus(theta);
    let density =
        Arc::new(HypergeometricDensity { theta, exponent: -theta, c_neg: c_minus(theta), c_pos: cp, neg_floor: -LN_2 });
    let pos = if cp > 0.0 { Some((0.0, f64::INFINITY)) } else { None };
    Ok(JumpMeasureSpec::new(format!("lambda(theta={theta})"), density, Some((0.0, LN_2)), pos, 1e-3)?
        .with_breaks(vec![0.1]))
}

/// The jump measure `Π⁻` or `Π⁺` of the tilted spine process.
pub fn spine_measure(theta: f64, sign: SpineSign) -> Result<JumpMeasureSpec, LevyError> {
    check_theta(theta)?;
    let exponent = match sign {
        SpineSign::Minus => 0.5,
        SpineSign::Plus => 1.5,
    };
    let cp = c_plus(theta);
    let density = Arc::new(HypergeometricDensity {
        theta,
        exponent,
        c_neg: c_minus(theta),
        c_pos: cp,
        neg_floor: f64::NEG_INFINITY,
    });
    let pos = if cp > 0.0 { Some((0.0, f64::INFINITY)) } else { None };
    let tag = match sign {
        SpineSign::Minus => "minus",
        SpineSign::Plus => "plus",
    };
    Ok(JumpMeasureSpec::new(format!("spine_{tag}(theta={theta})"), density, Some((0.0, f64::INFINITY)), pos, 1e-2)?
        .with_breaks(vec![0.1, LN_2]))
}

/// The involution `T(y) = ln(1 - e^y)` of `(-∞, 0)` that swaps the two
/// fragments of a split.
#[derive(Debug, Clone, Copy, Default)]
pub struct SplitMapping;

impl SplitMapping {
    pub fn apply(&self, y: f64) -> f64 {
        debug_assert!(y < 0.0);
        ln_abs_one_minus_exp(y)
    }

    /// `|T'(y)| = e^y / (1 - e^y)`.
    pub fn jacobian(&self, y: f64) -> f64 {
        1.0 / (-y).exp_m1()
    }

    /// Density of the push-forward `T⋆ν` at `y < 0`.
    pub fn pushforward_density(&self, spec: &JumpMeasureSpec, y: f64) -> f64 {
        spec.density(self.apply(y)) * self.jacobian(y)
    }

    /// `e^{ω y}(ν + T⋆ν)` at `y`, the spine tilt of a cell measure.
    pub fn tilt(&self, spec: &JumpMeasureSpec, omega: f64, y: f64) -> f64 {
        let mut d = spec.density(y);
        if y < 0.0 {
            d += self.pushforward_density(spec, y);
        }
        (omega * y).exp() * d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn involution_on_grid() {
        let t = SplitMapping;
        for i in 0..1000 {
            // log-spaced in [1e-6, 20]
            let y = -(1e-6f64.ln() + (20f64.ln() - 1e-6f64.ln()) * i as f64 / 999.0).exp();
            let back = t.apply(t.apply(y));
            assert!((back - y).abs() <= 1e-12 * y.abs().max(1.0), "y={y} back={back}");
        }
    }

    #[test]
    fn brownian_constants() {
        let cm = c_minus(1.5);
        assert!((cm - 3.0 / (4.0 * PI.sqrt())).abs() < 1e-14);
        assert!((cm - 0.423_142).abs() < 1e-6);
        assert_eq!(c_plus(1.5), 0.0);
        let lam = canonical_lambda(1.5).unwrap();
        assert!(!lam.has_side(Side::Positive));
        assert_eq!(lam.density(0.3), 0.0);
    }

    #[test]
    fn theta_domain() {
        assert!(canonical_lambda(1.0).is_err());
        assert!(canonical_lambda(1.6).is_err());
        assert!(spine_measure(0.9, SpineSign::Minus).is_err());
    }

    #[test]
    fn spine_plus_formula_at_minus_one() {
        let pi_plus = spine_measure(1.5, SpineSign::Plus).unwrap();
        let y: f64 = -1.0;
        let expected = c_minus(1.5) * (1.5 * y).exp() * (1.0 - y.exp()).powf(-2.5);
        assert!((pi_plus.density(y) - expected).abs() < 1e-14 * expected);
        let pi_minus = spine_measure(1.5, SpineSign::Minus).unwrap();
        assert_eq!(pi_minus.density(0.7), 0.0);
    }

    #[test]
    fn spine_ratio_is_exponential() {
        let plus = spine_measure(1.25, SpineSign::Plus).unwrap();
        let minus = spine_measure(1.25, SpineSign::Minus).unwrap();
        for &y in &[-3.0, -0.4, -0.01, 0.2, 2.5f64] {
            let r = plus.density(y) / minus.density(y);
            assert!((r - y.exp()).abs() < 1e-12 * y.exp(), "y={y}");
        }
    }

    #[test]
    fn tilt_reconstructs_spine_measures() {
        let t = SplitMapping;
        for &theta in &[1.1, 1.25, 1.4, 1.5] {
            let lam = canonical_lambda(theta).unwrap();
            for (sign, omega) in [(SpineSign::Minus, theta + 0.5), (SpineSign::Plus, theta + 1.5)] {
                let pi = spine_measure(theta, sign).unwrap();
                for &y in &[-5.0, -2.0, -0.8, -0.5, -0.1, -1e-3, 1e-3, 0.3, 1.0, 4.0f64] {
                    let lhs = t.tilt(&lam, omega, y);
                    let rhs = pi.density(y);
                    assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300), "theta={theta} y={y} lhs={lhs} rhs={rhs}");
                }
            }
        }
    }

    #[test]
    fn uniform_tails() {
        let u = JumpMeasureSpec::uniform(-2.0, -1.0, 3.0, 0.5).unwrap();
        assert!((u.neg_tail(0.5).unwrap() - 3.0).abs() < 1e-10);
        assert!((u.neg_tail(1.5).unwrap() - 1.5).abs() < 1e-10);
        assert_eq!(u.pos_tail(0.1).unwrap(), 0.0);
    }

    #[test]
    fn tail_of_lambda_scales_like_power() {
        // Λ̄(x)·x^θ → c₋/θ
        let lam = canonical_lambda(1.5).unwrap();
        let x = 1e-6;
        let v = lam.neg_tail(x).unwrap() * x.powf(1.5);
        assert!((v - c_minus(1.5) / 1.5).abs() < 1e-3, "{v}");
    }
}
