//! Trigonometric helpers with exact zeros, and a thin wrapper over the gamma
//! function.

use std::f64::consts::PI;

/// `cos(pi * x)` with exact zeros at half-integers.
pub fn cos_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    // reduce to [0, 2)
    let r = x.abs() % 2.0;
    if r == 0.5 || r == 1.5 {
        return 0.0;
    }
    if r == 0.0 {
        return 1.0;
    }
    if r == 1.0 {
        return -1.0;
    }
    (PI * r).cos()
}

/// `sin(pi * x)` with exact zeros at integers.
pub fn sin_pi(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    let r = x.abs() % 2.0;
    let s = if r == 0.0 || r == 1.0 {
        0.0
    } else if r == 0.5 {
        1.0
    } else if r == 1.5 {
        -1.0
    } else {
        (PI * r).sin()
    };
    if x < 0.0 {
        -s
    } else {
        s
    }
}

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_zeros() {
        for k in -4..5 {
            assert_eq!(cos_pi(k as f64 + 0.5), 0.0);
            assert_eq!(sin_pi(k as f64), 0.0);
        }
        assert_eq!(cos_pi(2.0), 1.0);
        assert_eq!(cos_pi(3.0), -1.0);
    }

    #[test]
    fn agrees_with_libm() {
        for i in 0..200 {
            let x = -5.0 + i as f64 * 0.0537;
            assert!((cos_pi(x) - (PI * x).cos()).abs() < 1e-13);
            assert!((sin_pi(x) - (PI * x).sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn gamma_half_integers() {
        let sqrt_pi = PI.sqrt();
        assert!((gamma(0.5) - sqrt_pi).abs() < 1e-14);
        assert!((gamma(2.5) - 0.75 * sqrt_pi).abs() < 1e-14);
        assert!((gamma(-0.5) + 2.0 * sqrt_pi).abs() < 1e-13);
    }
}
