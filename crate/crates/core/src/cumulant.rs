//! Laplace exponents and cumulants of the cell process, Cramér roots, drift
//! calibration for the stable-maps family, and the exponents used by the
//! log-power bounds.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

use crate::levy::{canonical_lambda, ln_abs_one_minus_exp, spine_measure, JumpMeasureSpec, LevyError, Side, SpineSign};
use crate::quad::QuadError;
use crate::special::{cos_pi, gamma, sin_pi};

/// Tolerance of the bracketed root search.
pub const TOL_ROOT: f64 = 1e-9;

/// Tolerance for `κ(ω±) ≈ 0` when κ comes from quadrature.
pub const TOL_KAPPA: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CumulantError {
    #[error("q = {q} outside the domain ({lo}, {hi})")]
    Domain { q: f64, lo: f64, hi: f64 },
    #[error("divergent jump integral at q = {q}: e^(qy) is not integrable (edge near {edge})")]
    Divergent { q: f64, edge: f64 },
    #[error("no sign change: kappa is nonnegative on the bracket [{0}, {1}]")]
    NoSignChange(f64, f64),
    #[error("only one Cramér root in the bracket (lower {lower:?}, upper {upper:?})")]
    MissingRoot { lower: Option<f64>, upper: Option<f64> },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Levy(#[from] LevyError),
}

/// Below this `|y|` the compensated integrands are summed as series.
const SERIES_CUTOFF: f64 = 1e-3;

/// How the jump integral in `ψ` is compensated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Compensation {
    /// `e^{qy} - 1 + q(1 - e^y)`; needs `e^y` integrable at `+∞`.
    #[default]
    Exponential,
    /// `e^{qy} - 1 - qy`; the drift is then the mean `E ξ(1)`. Used for the
    /// `η⁺` spine, whose jump measure does not integrate `e^y`.
    Linear,
}

impl Compensation {
    /// The compensated integrand `e^{qy} - 1 - q·c(y)` for moderate `y`.
    pub(crate) fn integrand(self, q: f64, y: f64) -> f64 {
        if y.abs() < SERIES_CUTOFF {
            // Σ_{k≥2} (q^k - q·[exp]) y^k / k!, avoiding the cancellation
            let mut qk = q;
            let mut yk = y;
            let mut fact = 1.0;
            let mut s = 0.0;
            for k in 2..=6 {
                qk *= q;
                yk *= y;
                fact *= k as f64;
                let c = match self {
                    Compensation::Exponential => qk - q,
                    Compensation::Linear => qk,
                };
                s += c * yk / fact;
            }
            return s;
        }
        match self {
            Compensation::Exponential => (q * y).exp_m1() - q * y.exp_m1(),
            Compensation::Linear => (q * y).exp_m1() - q * y,
        }
    }

    /// `y - c(y)`, the per-jump contribution to `ψ'(0)` beyond the drift.
    pub(crate) fn mean_term(self, y: f64) -> f64 {
        match self {
            Compensation::Exponential => {
                if y.abs() < SERIES_CUTOFF {
                    -y * y * (0.5 + y * (1.0 / 6.0 + y * (1.0 / 24.0 + y / 120.0)))
                } else {
                    y - y.exp_m1()
                }
            }
            Compensation::Linear => 0.0,
        }
    }

    /// The compensator `c(y)` itself.
    pub(crate) fn compensator(self, y: f64) -> f64 {
        match self {
            Compensation::Exponential => y.exp_m1(),
            Compensation::Linear => y,
        }
    }

    /// `c(y)·ν(y)`, safe for large `|y|`.
    pub(crate) fn weighted_compensator(self, jumps: &JumpMeasureSpec, y: f64) -> f64 {
        let d = jumps.density(y);
        if d == 0.0 {
            return 0.0;
        }
        match self {
            Compensation::Exponential if y.abs() > 1.0 => jumps.tilted(1.0, y) - d,
            _ => self.compensator(y) * d,
        }
    }
}

/// Drift, Gaussian coefficient and jump measure of a Lévy process, in the
/// parametrisation `ψ(q) = bq + σ²q²/2 + ∫(e^{qy} - 1 + q(1 - e^y)) Λ(dy)`
/// (or the linear compensation, see [`Compensation`]).
#[derive(Debug, Clone)]
pub struct LevyTriplet {
    pub drift_b: f64,
    pub gaussian_sigma2: f64,
    pub jumps: JumpMeasureSpec,
    pub compensation: Compensation,
}

impl LevyTriplet {
    pub fn new(drift_b: f64, gaussian_sigma2: f64, jumps: JumpMeasureSpec) -> Result<Self, CumulantError> {
        Self::with_compensation(drift_b, gaussian_sigma2, jumps, Compensation::Exponential)
    }

    pub fn with_compensation(
        drift_b: f64,
        gaussian_sigma2: f64,
        jumps: JumpMeasureSpec,
        compensation: Compensation,
    ) -> Result<Self, CumulantError> {
        if !(gaussian_sigma2 >= 0.0) || !drift_b.is_finite() {
            return Err(CumulantError::InvalidParams(format!(
                "drift {drift_b} and variance {gaussian_sigma2} must be finite with variance >= 0"
            )));
        }
        jumps.check_integrability(compensation == Compensation::Exponential)?;
        Ok(Self { drift_b, gaussian_sigma2, jumps, compensation })
    }

    pub fn pure_drift(b: f64) -> Self {
        Self {
            drift_b: b,
            gaussian_sigma2: 0.0,
            jumps: JumpMeasureSpec::empty(),
            compensation: Compensation::Exponential,
        }
    }

    /// `ψ'(0) = E ξ(1)`.
    pub fn mean(&self) -> Result<f64, CumulantError> {
        let c = self.compensation;
        let j = &self.jumps;
        let f = |y: f64| {
            if y.abs() > 1.0 {
                y * j.density(y) - c.weighted_compensator(j, y)
            } else {
                c.mean_term(y) * j.density(y)
            }
        };
        let mut s = 0.0;
        for side in [Side::Negative, Side::Positive] {
            s += j.integrate_side(side, 0.0, f64::INFINITY, f)?;
        }
        Ok(self.drift_b + s)
    }

    /// Lower bracket of the exponent beyond which `e^{qy}` is not integrable.
    pub fn moment_edge(&self) -> f64 {
        self.jumps.exponential_moment_edge().map_or(f64::INFINITY, |(lo, _)| lo)
    }
}

/// `∫(e^{qy} - 1 + q(1 - e^y)) ν(dy)`, valid for any real `q` at which the
/// integral converges.
pub(crate) fn compensated_integral(jumps: &JumpMeasureSpec, c: Compensation, q: f64) -> Result<f64, QuadError> {
    let f = |y: f64| {
        let d = jumps.density(y);
        if d == 0.0 {
            0.0
        } else if y.abs() > 1.0 {
            // e^{qy} and e^y only ever appear multiplied by the density
            jumps.tilted(q, y) - d - q * c.weighted_compensator(jumps, y)
        } else {
            c.integrand(q, y) * d
        }
    };
    let delta = jumps.cutoff_delta;
    let mut total = 0.0;
    for side in [Side::Negative, Side::Positive] {
        total += jumps.integrate_side(side, 0.0, delta, f)?;
        total += jumps.integrate_side(side, delta, f64::INFINITY, f)?;
    }
    Ok(total)
}

/// `∫(1 - e^y)^q Λ(dy)` over the negative half-line.
pub(crate) fn fragment_integral(jumps: &JumpMeasureSpec, q: f64) -> Result<f64, QuadError> {
    let f = |y: f64| (q * ln_abs_one_minus_exp(y)).exp() * jumps.density(y);
    let delta = jumps.cutoff_delta;
    Ok(jumps.integrate_side(Side::Negative, 0.0, delta, f)?
        + jumps.integrate_side(Side::Negative, delta, f64::INFINITY, f)?)
}

fn psi_any(triplet: &LevyTriplet, q: f64) -> Result<f64, CumulantError> {
    let edge = triplet.moment_edge();
    if q >= edge {
        return Err(CumulantError::Divergent { q, edge });
    }
    let jumps = compensated_integral(&triplet.jumps, triplet.compensation, q)?;
    Ok(triplet.drift_b * q + 0.5 * triplet.gaussian_sigma2 * q * q + jumps)
}

/// Laplace exponent `ψ(q)` for `q ≥ 0`.
pub fn psi_eval(triplet: &LevyTriplet, q: f64) -> Result<f64, CumulantError> {
    if !(q >= 0.0) {
        return Err(CumulantError::Domain { q, lo: 0.0, hi: f64::INFINITY });
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    psi_any(triplet, q)
}

/// Cumulant `κ(q) = ψ(q) + ∫(1 - e^y)^q Λ(dy)` for `q > 0`.
pub fn kappa_eval(triplet: &LevyTriplet, q: f64) -> Result<f64, CumulantError> {
    if !(q > 0.0) {
        return Err(CumulantError::Domain { q, lo: 0.0, hi: f64::INFINITY });
    }
    Ok(psi_eval(triplet, q)? + fragment_integral(&triplet.jumps, q)?)
}

/// Closed-form cumulant of the stable-maps family on `(θ, 2θ+1)`, written
/// with the reflection formula so the roots are exact zeros.
pub fn kappa_theta_closed(theta: f64, q: f64) -> Result<f64, CumulantError> {
    let (lo, hi) = (theta, 2.0 * theta + 1.0);
    if !(q > lo && q < hi) {
        return Err(CumulantError::Domain { q, lo, hi });
    }
    Ok(cos_pi(q - theta) * gamma(q - theta) * gamma(1.0 + 2.0 * theta - q) / PI)
}

/// Analytic derivative of [`kappa_theta_closed`] in `q`.
pub fn kappa_theta_closed_derivative(theta: f64, q: f64) -> Result<f64, CumulantError> {
    let k = kappa_theta_closed(theta, q)?;
    let (a, b) = (q - theta, 1.0 + 2.0 * theta - q);
    let digamma = statrs::function::gamma::digamma;
    Ok(k * (digamma(a) - digamma(b)) - sin_pi(a) * gamma(a) * gamma(b))
}

/// Zeros of a convex function found inside a bracket. Either may be absent
/// when the function does not change sign on that side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl RootPair {
    /// Both roots, as `(ω₋, ω₊)`.
    pub fn cramer(self) -> Result<(f64, f64), CumulantError> {
        match (self.lower, self.upper) {
            (Some(a), Some(b)) => Ok((a, b)),
            (lower, upper) => Err(CumulantError::MissingRoot { lower, upper }),
        }
    }
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut neg: f64, mut pos: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (neg + pos);
        if (pos - neg).abs() < 1e-14 * mid.abs().max(1.0) {
            break;
        }
        if f(mid) < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    0.5 * (neg + pos)
}

/// Bracketed root search for a convex `kappa`. Locates the minimum on a
/// grid, refines it by golden section, and bisects on each side where the
/// bracket end is positive.
pub fn find_roots<F: Fn(f64) -> f64>(kappa: F, bracket_hint: (f64, f64)) -> Result<RootPair, CumulantError> {
    let (a, b) = bracket_hint;
    if !(a < b) {
        return Err(CumulantError::InvalidParams(format!("empty bracket [{a}, {b}]")));
    }
    let n = 64;
    let grid: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let q = a + (b - a) * i as f64 / n as f64;
            (q, kappa(q))
        })
        .collect();
    let (imin, _) = grid
        .iter()
        .enumerate()
        .filter(|(_, (_, v))| v.is_finite())
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .ok_or(CumulantError::NoSignChange(a, b))?;
    // golden-section refinement of the minimum
    let mut lo = grid[imin.saturating_sub(1)].0;
    let mut hi = grid[(imin + 1).min(n)].0;
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if kappa(x1) < kappa(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let mut m = 0.5 * (lo + hi);
    if !(kappa(m) < 0.0) {
        m = grid[imin].0;
        if !(grid[imin].1 < 0.0) {
            return Err(CumulantError::NoSignChange(a, b));
        }
    }
    let fa = kappa(a);
    let fb = kappa(b);
    let lower = (fa > 0.0).then(|| bisect(&|q| kappa(q), m, a));
    let upper = (fb > 0.0).then(|| bisect(&|q| kappa(q), m, b));
    let h = 1e-5;
    let deriv = |q: f64| (kappa(q + h) - kappa(q - h)) / (2.0 * h);
    if let Some(r) = lower {
        if !(deriv(r) < 0.0) {
            return Err(CumulantError::InvalidParams(format!("kappa'({r}) is not negative")));
        }
    }
    if let Some(r) = upper {
        if !(deriv(r) > 0.0) {
            return Err(CumulantError::InvalidParams(format!("kappa'({r}) is not positive")));
        }
    }
    if lower.is_none() && upper.is_none() {
        return Err(CumulantError::NoSignChange(a, b));
    }
    Ok(RootPair { lower, upper })
}

/// Drift `b` making `κ(ω₋) = 0` for the given jumps and Gaussian part.
pub fn calibrate_drift(jumps: &JumpMeasureSpec, sigma2: f64, omega_minus: f64) -> Result<f64, CumulantError> {
    if !(omega_minus > 0.0) {
        return Err(CumulantError::Domain { q: omega_minus, lo: 0.0, hi: f64::INFINITY });
    }
    let i1 = compensated_integral(jumps, Compensation::Exponential, omega_minus)?;
    let k = fragment_integral(jumps, omega_minus)?;
    Ok(-(0.5 * sigma2 * omega_minus * omega_minus + i1 + k) / omega_minus)
}

/// Full parameter set of a self-similar growth-fragmentation.
#[derive(Debug, Clone)]
pub struct GFParams {
    pub alpha: f64,
    pub triplet: LevyTriplet,
    pub omega_minus: f64,
    pub omega_plus: f64,
    pub rho: f64,
}

impl GFParams {
    /// Validates the Cramér hypothesis and the regular-variation window
    /// `max(2ω₋ - ω₊, -α) < ρ < ω₋`.
    pub fn new(
        alpha: f64,
        triplet: LevyTriplet,
        omega_minus: f64,
        omega_plus: f64,
        rho: f64,
    ) -> Result<Self, CumulantError> {
        let bad = |m: String| Err(CumulantError::InvalidParams(m));
        if !(alpha < 0.0) {
            return bad(format!("alpha = {alpha} must be negative"));
        }
        if !(0.0 < omega_minus && omega_minus < omega_plus) {
            return bad(format!("need 0 < omega_minus < omega_plus, got {omega_minus}, {omega_plus}"));
        }
        let lo = (2.0 * omega_minus - omega_plus).max(-alpha);
        if !(lo < rho && rho < omega_minus) {
            return bad(format!("rho = {rho} outside ({lo}, {omega_minus})"));
        }
        for w in [omega_minus, omega_plus] {
            let k = kappa_eval(&triplet, w)?;
            if !(k.abs() < TOL_KAPPA) {
                return bad(format!("kappa({w}) = {k:e} is not a root"));
            }
        }
        let h = 1e-4;
        let d = |q: f64| -> Result<f64, CumulantError> {
            Ok((kappa_eval(&triplet, q + h)? - kappa_eval(&triplet, q - h)?) / (2.0 * h))
        };
        if !(d(omega_minus)? < 0.0 && d(omega_plus)? > 0.0) {
            return bad("kappa' has the wrong sign at a root".into());
        }
        Ok(Self { alpha, triplet, omega_minus, omega_plus, rho })
    }

    /// Skips the quadrature checks; for parameter sets already validated.
    pub(crate) fn trusted(alpha: f64, triplet: LevyTriplet, omega_minus: f64, omega_plus: f64, rho: f64) -> Self {
        Self { alpha, triplet, omega_minus, omega_plus, rho }
    }

    pub fn abs_alpha(&self) -> f64 {
        -self.alpha
    }

    pub fn kappa(&self, q: f64) -> Result<f64, CumulantError> {
        kappa_eval(&self.triplet, q)
    }
}

/// The stable-maps family `κ_θ`, `θ ∈ (1, 3/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StableFamily {
    pub theta: f64,
}

impl StableFamily {
    pub fn new(theta: f64) -> Result<Self, CumulantError> {
        if theta > 1.0 && theta <= 1.5 {
            Ok(Self { theta })
        } else {
            Err(CumulantError::Levy(LevyError::ThetaOutOfRange(theta)))
        }
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.theta
    }

    pub fn omega_minus(&self) -> f64 {
        self.theta + 0.5
    }

    pub fn omega_plus(&self) -> f64 {
        self.theta + 1.5
    }

    pub fn rho(&self) -> f64 {
        self.theta
    }

    pub fn kappa(&self, q: f64) -> Result<f64, CumulantError> {
        kappa_theta_closed(self.theta, q)
    }

    /// Default root bracket `[ω₋ - 0.4, ω₊ + 0.4]` clipped to the domain.
    pub fn bracket_hint(&self) -> (f64, f64) {
        let eps = 1e-3;
        ((self.omega_minus() - 0.4).max(self.theta + eps), (self.omega_plus() + 0.4).min(2.0 * self.theta + 1.0 - eps))
    }

    /// Canonical cell-process triplet with drift calibrated on `κ(ω₋) = 0`.
    pub fn triplet(&self) -> Result<LevyTriplet, CumulantError> {
        let lambda = canonical_lambda(self.theta)?;
        let b = calibrate_drift(&lambda, 0.0, self.omega_minus())?;
        LevyTriplet::new(b, 0.0, lambda)
    }

    /// Parameters with the canonical triplet, checked against quadrature.
    pub fn params(&self) -> Result<GFParams, CumulantError> {
        GFParams::new(self.alpha(), self.triplet()?, self.omega_minus(), self.omega_plus(), self.rho())
    }

    /// Like [`StableFamily::params`] without re-running the root checks.
    pub fn params_unchecked(&self) -> Result<GFParams, CumulantError> {
        Ok(GFParams::trusted(self.alpha(), self.triplet()?, self.omega_minus(), self.omega_plus(), self.rho()))
    }

    /// Triplet of `η∓` whose Laplace exponent is `φ∓(q) = κ(ω∓ + q)`.
    ///
    /// `φ(0) = 0` holds by construction; the drift is fixed by the second
    /// root, `φ₋(ω₊ - ω₋) = 0` and `φ₊(ω₋ - ω₊) = 0`. Both use the linear
    /// compensation, so the drift is the mean of `η∓(1)`.
    pub fn spine_triplet(&self, sign: SpineSign) -> Result<LevyTriplet, CumulantError> {
        let pi = spine_measure(self.theta, sign)?;
        let d = self.omega_plus() - self.omega_minus();
        let q = match sign {
            SpineSign::Minus => d,
            SpineSign::Plus => -d,
        };
        let b = -compensated_integral(&pi, Compensation::Linear, q)? / q;
        LevyTriplet::with_compensation(b, 0.0, pi, Compensation::Linear)
    }

    /// `κ'(ω₋) = -√π Γ(θ + 1/2)`, the mean of `η⁻(1)`.
    pub fn kappa_prime_minus(&self) -> f64 {
        -PI.sqrt() * gamma(self.theta + 0.5)
    }

    /// `κ'(ω₊) = (√π/2) Γ(θ - 1/2)`, the mean of `η⁺(1)`.
    pub fn kappa_prime_plus(&self) -> f64 {
        0.5 * PI.sqrt() * gamma(self.theta - 0.5)
    }

    /// Exponents with the closed form `q* = θ - 1/2`.
    pub fn log_bound_exponents(&self) -> LogBoundExponents {
        LogBoundExponents::from_parts(
            self.theta - 0.5,
            (self.theta - 0.5, self.theta - 0.5),
            self.alpha(),
            self.omega_minus(),
            self.rho(),
            DEFAULT_UPPER_DELTA,
        )
    }
}

/// Default `δ` in the `|log t|^{-1-δ}` upper envelope.
pub const DEFAULT_UPPER_DELTA: f64 = 0.1;

/// Exponents of the log-power envelopes of `A(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogBoundExponents {
    pub q_star: f64,
    /// Bracket of `q*` as computed; degenerate when exact.
    pub q_star_bracket: (f64, f64),
    pub q0: f64,
    /// The `1 + δ` of the upper envelope.
    pub upper_exponent: f64,
}

impl LogBoundExponents {
    fn from_parts(q_star: f64, bracket: (f64, f64), alpha: f64, omega_minus: f64, rho: f64, delta: f64) -> Self {
        let a = -alpha;
        let q0 = omega_minus * (1.0 / a + 1.0 / q_star + ((a / rho) * (1.0 / q_star - 1.0 / a)).max(0.0));
        Self { q_star, q_star_bracket: bracket, q0, upper_exponent: 1.0 + delta }
    }
}

/// `q* = min(ω₊ - ω₋, sup{p ≥ 0 : κ(ω₊ + p) < ∞})` and the derived `q₀`.
///
/// The supremum is read off the exponential decay of the positive jump
/// density and reported as a bracket.
pub fn log_bound_exponents(params: &GFParams) -> LogBoundExponents {
    let gap = params.omega_plus - params.omega_minus;
    let (edge_lo, edge_hi) = params.triplet.jumps.exponential_moment_edge().unwrap_or((f64::INFINITY, f64::INFINITY));
    let sup_lo = edge_lo - params.omega_plus;
    let sup_hi = edge_hi - params.omega_plus;
    let bracket = (gap.min(sup_lo), gap.min(sup_hi));
    let q_star = 0.5 * (bracket.0 + bracket.1);
    LogBoundExponents::from_parts(q_star, bracket, params.alpha, params.omega_minus, params.rho, DEFAULT_UPPER_DELTA)
}

/// Whether `κ(ω₊ + ω₋ + α) < ∞`, the hypothesis of the upper envelope.
pub fn upper_envelope_hypothesis(params: &GFParams) -> bool {
    let q = params.omega_plus + params.omega_minus + params.alpha;
    kappa_eval(&params.triplet, q).map(|k| k.is_finite()).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpMeasureSpec;

    #[test]
    fn closed_form_values() {
        assert_eq!(kappa_theta_closed(1.5, 2.0).unwrap(), 0.0);
        let v = kappa_theta_closed(1.5, 2.5).unwrap();
        assert!((v + 0.5 / PI.sqrt()).abs() < 1e-14);
        assert!(kappa_theta_closed(1.5, 1.5).is_err());
        assert!(kappa_theta_closed(1.5, 4.0).is_err());
    }

    #[test]
    fn root_identity_on_grid() {
        for i in 0..10 {
            let theta = 1.05 + 0.05 * i as f64;
            assert!(kappa_theta_closed(theta, theta + 0.5).unwrap().abs() < 1e-12);
            assert!(kappa_theta_closed(theta, theta + 1.5).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        for &theta in &[1.1, 1.25, 1.4, 1.5] {
            let q = theta + 0.5;
            let h = 1e-5;
            let num =
                (kappa_theta_closed(theta, q + h).unwrap() - kappa_theta_closed(theta, q - h).unwrap()) / (2.0 * h);
            let exact = -PI.sqrt() * gamma(theta + 0.5);
            assert!((num - exact).abs() < 1e-6, "theta={theta} num={num} exact={exact}");
            assert!((kappa_theta_closed_derivative(theta, q).unwrap() - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn convexity() {
        for &theta in &[1.1, 1.3, 1.5] {
            let (a, b) = (theta + 0.01, 2.0 * theta + 0.99);
            for i in 1..49 {
                let q = a + (b - a) * i as f64 / 49.0;
                let h = (b - a) / 49.0;
                let l = kappa_theta_closed(theta, q - h).unwrap();
                let m = kappa_theta_closed(theta, q).unwrap();
                let r = kappa_theta_closed(theta, q + h).unwrap();
                assert!(0.5 * (l + r) - m >= -1e-10);
            }
        }
    }

    #[test]
    fn roots_of_family() {
        for &theta in &[1.1, 1.25, 1.4, 1.5] {
            let fam = StableFamily::new(theta).unwrap();
            let (lo, hi) = find_roots(|q| kappa_theta_closed(theta, q).unwrap_or(f64::NAN), fam.bracket_hint())
                .unwrap()
                .cramer()
                .unwrap();
            assert!((lo - (theta + 0.5)).abs() < 1e-9);
            assert!((hi - (theta + 1.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn synthetic_roots() {
        let r = find_roots(|q| q * (q - 1.0), (0.5, 2.0)).unwrap();
        assert_eq!(r.lower, None);
        assert!((r.upper.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.cramer().is_err());
        let r = find_roots(|q| q * q - 4.0, (0.0, 3.0)).unwrap();
        assert_eq!(r.lower, None);
        assert!((r.upper.unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(find_roots(|q| q * q + 1.0, (0.0, 3.0)), Err(CumulantError::NoSignChange(..))));
    }

    #[test]
    fn trivial_psi() {
        let t = LevyTriplet::pure_drift(1.0);
        assert_eq!(psi_eval(&t, 0.0).unwrap(), 0.0);
        assert!((psi_eval(&t, 3.0).unwrap() - 3.0).abs() < 1e-15);
        assert_eq!(calibrate_drift(&JumpMeasureSpec::empty(), 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn brownian_drift_is_minus_two_over_root_pi() {
        let t = StableFamily::new(1.5).unwrap().triplet().unwrap();
        assert!((t.drift_b + 2.0 / PI.sqrt()).abs() < 1e-8, "{}", t.drift_b);
    }

    #[test]
    fn calibration_closure() {
        for &(theta, qs) in &[(1.5, [1.6, 2.5, 2.9]), (1.25, [1.5, 2.2, 2.7])] {
            let t = StableFamily::new(theta).unwrap().triplet().unwrap();
            for &q in &qs {
                let a = kappa_eval(&t, q).unwrap();
                let b = kappa_theta_closed(theta, q).unwrap();
                assert!((a - b).abs() < 1e-6, "theta={theta} q={q} quad={a} closed={b}");
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let t = StableFamily::new(1.25).unwrap().triplet().unwrap();
        assert!(matches!(psi_eval(&t, 3.6), Err(CumulantError::Divergent { .. })));
    }

    #[test]
    fn spine_exponents_are_shifted_cumulants() {
        for &theta in &[1.25, 1.5] {
            let fam = StableFamily::new(theta).unwrap();
            for (sign, w) in [(SpineSign::Minus, fam.omega_minus()), (SpineSign::Plus, fam.omega_plus())] {
                let t = fam.spine_triplet(sign).unwrap();
                for &q in &[-0.3, 0.1, 0.25, 0.5, 0.7] {
                    if w + q >= 2.0 * theta + 1.0 {
                        continue;
                    }
                    let phi = psi_any(&t, q).unwrap();
                    assert_eq!(t.compensation, Compensation::Linear);
                    let k = kappa_theta_closed(theta, w + q).unwrap();
                    assert!((phi - k).abs() < 1e-8, "theta={theta} sign={sign:?} q={q} phi={phi} k={k}");
                }
            }
        }
    }

    #[test]
    fn spine_means() {
        let fam = StableFamily::new(1.5).unwrap();
        let m = fam.spine_triplet(SpineSign::Minus).unwrap().mean().unwrap();
        assert!((m + PI.sqrt()).abs() < 1e-8, "{m}");
        let p = fam.spine_triplet(SpineSign::Plus).unwrap().mean().unwrap();
        assert!((p - 0.5 * PI.sqrt()).abs() < 1e-8, "{p}");
        let fam = StableFamily::new(1.25).unwrap();
        let p = fam.spine_triplet(SpineSign::Plus).unwrap().mean().unwrap();
        assert!((p - fam.kappa_prime_plus()).abs() < 1e-7, "{p}");
    }

    #[test]
    fn exponents() {
        let e = StableFamily::new(1.5).unwrap().log_bound_exponents();
        assert_eq!(e.q_star, 1.0);
        assert_eq!(e.q0, 6.0);
        let e = StableFamily::new(1.25).unwrap().log_bound_exponents();
        assert!((e.q0 - 28.0 / 3.0).abs() < 1e-12);
        let p = StableFamily::new(1.25).unwrap().params_unchecked().unwrap();
        let n = log_bound_exponents(&p);
        assert!(n.q_star_bracket.0 <= 0.75 + 1e-9 && n.q_star_bracket.1 >= 0.75 - 1e-9, "{n:?}");
        let p = StableFamily::new(1.5).unwrap().params_unchecked().unwrap();
        let n = log_bound_exponents(&p);
        assert_eq!(n.q_star, 1.0);
        assert_eq!(n.q0, 6.0);
    }
}
