use serde::Serialize;

use super::measure::{canonical_lambda, spine_measure, SpineSign};
use super::LevyError;

/// Local power-law fit of the left tail `Λ̄(x) = Λ((-∞, -x))` near 0.
///
/// The family's tail behaves like `(c₋/θ)·x^{-θ}`; note the negative exponent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularVariationFit {
    /// Log-log slope of `Λ̄` over the grid.
    pub index_estimate: f64,
    /// `(x, Λ̄(x)·x^ρ)`.
    pub slowly_varying_samples: Vec<(f64, f64)>,
    /// `(x, Π⁻((-∞, log x)) / (Λ̄(x)·x^{ω₋}·ρ/(ω₋ - ρ)))`, which tends to 1.
    pub tail_ratios: Vec<(f64, f64)>,
}

/// Least-squares slope of `ys` against `xs`.
pub(crate) fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn tail_equivalence_check(theta: f64, x_grid: &[f64]) -> Result<RegularVariationFit, LevyError> {
    let lam = canonical_lambda(theta)?;
    let pi = spine_measure(theta, SpineSign::Minus)?;
    let (omega, rho) = (theta + 0.5, theta);
    let mut logs = Vec::new();
    let mut samples = Vec::new();
    let mut ratios = Vec::new();
    for &x in x_grid {
        assert!(x > 0.0 && x < 1.0, "x must lie in (0, 1)");
        let bar = lam.neg_tail(x)?;
        samples.push((x, bar * x.powf(rho)));
        logs.push((x.ln(), bar.ln()));
        let lhs = pi.neg_tail(-x.ln())?;
        ratios.push((x, lhs / (bar * x.powf(omega) * rho / (omega - rho))));
    }
    let index_estimate = if logs.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = logs.into_iter().unzip();
        ls_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(RegularVariationFit { index_estimate, slowly_varying_samples: samples, tail_ratios: ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::c_minus;

    #[test]
    fn brownian_tail() {
        let fit = tail_equivalence_check(1.5, &[1e-3]).unwrap();
        assert!((fit.tail_ratios[0].1 - 1.0).abs() < 0.05, "{:?}", fit.tail_ratios);
        let fit = tail_equivalence_check(1.5, &[1e-7]).unwrap();
        assert!((fit.slowly_varying_samples[0].1 - c_minus(1.5) / 1.5).abs() < 1e-3);
    }

    #[test]
    fn fitted_index() {
        let grid: Vec<f64> = (0..9).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect();
        let fit = tail_equivalence_check(1.25, &grid).unwrap();
        assert!((fit.index_estimate + 1.25).abs() < 0.05, "{}", fit.index_estimate);
        let grid: Vec<f64> = (0..9).map(|i| 10f64.powf(-4.0 + 0.25 * i as f64)).collect();
        for theta in [1.1, 1.25, 1.4, 1.5] {
            let fit = tail_equivalence_check(theta, &grid).unwrap();
            assert!((fit.index_estimate + theta).abs() < 0.05, "theta={theta}: {}", fit.index_estimate);
        }
    }
}
