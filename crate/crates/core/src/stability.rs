//! Von Neumann analysis of forward-Euler schemes `df/dt = sign * L f`.
//!
//! Substituting `f_j = xi^n e^{i j theta}` gives the amplification factor
//! `xi = 1 + dt h^(h_power) sign sigma(theta)` with the dimensionless symbol
//! `sigma(theta) = sum_j c_j e^{i j theta}`. For a real symbol, `|xi| <= 1`
//! for all modes exactly when `sign sigma <= 0` everywhere and
//! `dt <= alpha h^m` with `alpha = 2 / |min sign sigma|` and `m = -h_power`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::stencil::{to_f64, Stencil};
use crate::Rational;

/// Number of uniform samples of `[0, 2 pi)` before refinement. A multiple of
/// four, so `pi/2`, `pi` and `3 pi/2` are sampled exactly.
pub const SAMPLES: usize = 8192;
/// Width of the bracket left by the golden-section refinement.
pub const THETA_TOL: f64 = 1e-12;
/// Relative tolerance (against the stencil's absolute weight sum) for
/// treating imaginary parts and positive symbol values as roundoff.
pub const SYMBOL_TOL: f64 = 1e-12;
/// Relative distance within which a numeric `alpha` snaps to a candidate.
pub const CANDIDATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("von Neumann analysis needs a 1D stencil, got dimension {found}")]
    DimMismatch { found: usize },
    #[error("symbol is not real (|Im| reaches {max_imag:e}); the operator is not dissipative")]
    NotDissipative { max_imag: f64 },
    #[error("symbol reaches {max:e} > 0: forward Euler grows for every time step")]
    UnstableForAllDt { max: f64 },
}

/// Sign in front of the spatial operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl FromStr for Sign {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" | "plus" | "+1" | "1" => Ok(Sign::Plus),
            "-" | "minus" | "-1" => Ok(Sign::Minus),
            other => Err(format!("sign must be + or -, got `{other}`")),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// Exponent in `dt <= alpha h^m`.
    pub m: i32,
    pub sign: Sign,
    /// Stability constant; equals the matched candidate when one was found.
    pub alpha: f64,
    /// Matched exact candidate, as `num/den`.
    pub alpha_exact: Option<String>,
    /// Value obtained from the extremum search alone.
    pub alpha_numeric: f64,
    /// `min over theta of sign * sigma(theta)`.
    pub symbol_min: f64,
    /// Where the minimum is attained, in `[0, 2 pi)`.
    pub argmin_theta: f64,
    /// Smallest and largest offset.
    pub support: (i64, i64),
}

fn weights_1d(s: &Stencil) -> Result<Vec<(f64, f64)>, StabilityError> {
    if s.dim() != 1 {
        return Err(StabilityError::DimMismatch { found: s.dim() });
    }
    Ok(s.entries()
        .map(|(o, c)| (o.components()[0] as f64, to_f64(c)))
        .collect())
}

fn eval(w: &[(f64, f64)], theta: f64) -> Complex64 {
    w.iter()
        .map(|&(j, c)| Complex64::from_polar(c, j * theta))
        .sum()
}

/// Dimensionless symbol `sigma(theta) = sum_j c_j e^{i j theta}`.
pub fn symbol(s: &Stencil, theta: f64) -> Result<Complex64, StabilityError> {
    Ok(eval(&weights_1d(s)?, theta))
}

/// Minimizes `g` over `[a, b]` by golden-section search.
fn golden_min<G: Fn(f64) -> f64>(g: G, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    while (b - a).abs() > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}

/// Largest stable forward-Euler step for `df/dt = sign * L f`, as
/// `dt <= alpha h^m`.
///
/// `candidates` are exact values the caller expects `alpha` to take; the
/// first one within [`CANDIDATE_TOL`] relative of the numeric estimate is
/// reported as `alpha`.
pub fn max_stable_dt(
    s: &Stencil,
    sign: Sign,
    candidates: &[Rational],
) -> Result<StabilityReport, StabilityError> {
    let w = weights_1d(s)?;
    let scale: f64 = w.iter().map(|(_, c)| c.abs()).sum();
    let sg = sign.value();
    let step = 2.0 * std::f64::consts::PI / SAMPLES as f64;
    let samples: Vec<(f64, f64, f64)> = (0..SAMPLES)
        .into_par_iter()
        .map(|k| {
            let theta = k as f64 * step;
            let z = eval(&w, theta);
            (theta, sg * z.re, z.im.abs())
        })
        .collect();

    let max_imag = samples.iter().map(|s| s.2).fold(0.0, f64::max);
    if max_imag > SYMBOL_TOL * scale {
        return Err(StabilityError::NotDissipative { max_imag });
    }
    let max = samples
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if max > SYMBOL_TOL * scale {
        return Err(StabilityError::UnstableForAllDt { max });
    }
    let (kmin, &(theta0, v0, _)) = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("sample set is non-empty");
    if v0 >= -SYMBOL_TOL * scale {
        // Symbol vanishes everywhere: no mode is damped.
        return Err(StabilityError::NotDissipative { max_imag });
    }
    let lo = kmin as f64 * step - step;
    let hi = kmin as f64 * step + step;
    let (t1, v1) = golden_min(|t| sg * eval(&w, t).re, lo, hi, THETA_TOL);
    let (argmin_theta, symbol_min) = if v1 < v0 {
        (t1.rem_euclid(2.0 * std::f64::consts::PI), v1)
    } else {
        (theta0, v0)
    };

    let alpha_numeric = 2.0 / symbol_min.abs();
    let matched = candidates
        .iter()
        .find(|c| ((to_f64(c) - alpha_numeric) / alpha_numeric).abs() <= CANDIDATE_TOL);
    let support = s.support()[0];
    Ok(StabilityReport {
        m: -s.h_power(),
        sign,
        alpha: matched.map(to_f64).unwrap_or(alpha_numeric),
        alpha_exact: matched.map(|c| c.to_string()),
        alpha_numeric,
        symbol_min,
        argmin_theta,
        support,
    })
}

/// Continued-fraction convergents of `x` with denominators up to `max_den`.
/// Useful as candidate exact values for [`max_stable_dt`].
pub fn convergents(x: f64, max_den: u64) -> Vec<Rational> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut r = x;
    for _ in 0..40 {
        let a = r.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        if k2 > BigInt::from(max_den) {
            break;
        }
        out.push(Rational::new(h2.clone(), k2.clone()));
        (h0, h1) = (h1, h2);
        (k0, k1) = (k1, k2);
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    out.retain(|c| c.is_positive() || x <= 0.0);
    out
}

/// `(theta, |xi(theta)|)` for `dt = ratio * h^m`, on `samples` points of
/// `[0, 2 pi)`.
pub fn amplification_curve(
    s: &Stencil,
    sign: Sign,
    dt_ratio: f64,
    samples: usize,
) -> Result<Vec<(f64, f64)>, StabilityError> {
    let w = weights_1d(s)?;
    let step = 2.0 * std::f64::consts::PI / samples.max(1) as f64;
    Ok((0..samples)
        .map(|k| {
            let theta = k as f64 * step;
            let xi = Complex64::one() + eval(&w, theta) * (dt_ratio * sign.value());
            (theta, xi.norm())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::builtin;
    use crate::stencil::ratio;
    use std::f64::consts::PI;

    fn report(name: &str, sign: Sign) -> StabilityReport {
        let alpha = |n, d| ratio(n, d);
        let cands = [alpha(1, 8), alpha(27, 32), alpha(2, 1), alpha(1, 2)];
        max_stable_dt(&builtin(name).unwrap(), sign, &cands).unwrap()
    }

    #[test]
    fn wide_heat_stencil_symbol() {
        let s = builtin("dx-dx").unwrap();
        for theta in [0.1f64, 0.7, PI / 2.0, 2.5] {
            let z = symbol(&s, theta).unwrap();
            assert!((z.re - ((2.0 * theta).cos() - 1.0) / 2.0).abs() < 1e-15);
            assert!(z.im.abs() < 1e-15);
        }
        assert!((symbol(&s, PI / 2.0).unwrap().re + 1.0).abs() < 1e-15);
        assert_eq!(symbol(&s, 0.0).unwrap().re, 0.0);
    }

    #[test]
    fn composed_fourth_order_symbol() {
        let s = builtin("dx-dx-dxx").unwrap();
        for theta in [0.3f64, 1.1, 2.0, 3.0] {
            let expected =
                ((theta).cos() + 2.0 * (2.0 * theta).cos() - (3.0 * theta).cos() - 2.0) / 2.0;
            let z = symbol(&s, theta).unwrap();
            assert!((Sign::Minus.value() * z.re - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn heat_stencils() {
        let r = report("dx-dx", Sign::Plus);
        assert_eq!(r.alpha, 2.0);
        assert_eq!(r.m, 2);
        assert_eq!(r.support, (-2, 2));
        assert_eq!(r.alpha_exact.as_deref(), Some("2"));
        let r = report("dxx", Sign::Plus);
        assert_eq!(r.alpha, 0.5);
        assert_eq!(r.argmin_theta, PI);
    }

    #[test]
    fn fourth_order_stencils() {
        let compact = report("dxxxx", Sign::Minus);
        let composed = report("dxx-dxx", Sign::Minus);
        let wide = report("dx-dx-dxx", Sign::Minus);
        assert_eq!(compact.alpha, 0.125);
        assert_eq!(composed.alpha, 0.125);
        assert_eq!(wide.alpha, 27.0 / 32.0);
        assert_eq!(wide.m, 4);
        assert_eq!(wide.support, (-3, 3));
        assert!((wide.symbol_min + 64.0 / 27.0).abs() < 1e-12);
        assert!((wide.alpha_numeric - 27.0 / 32.0).abs() < 1e-12);
        assert_eq!(wide.alpha / compact.alpha, 6.75);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            max_stable_dt(&builtin("dx").unwrap(), Sign::Plus, &[]),
            Err(StabilityError::NotDissipative { .. })
        ));
        assert!(matches!(
            max_stable_dt(&builtin("dxx").unwrap(), Sign::Minus, &[]),
            Err(StabilityError::UnstableForAllDt { .. })
        ));
        assert!(matches!(
            symbol(&builtin("laplacian-2d").unwrap(), 0.0),
            Err(StabilityError::DimMismatch { found: 2 })
        ));
    }

    #[test]
    fn continued_fractions() {
        let c = convergents(27.0 / 32.0, 1000);
        assert_eq!(c.last(), Some(&ratio(27, 32)));
        assert_eq!(convergents(0.5, 10), vec![ratio(1, 2)]);
    }

    #[test]
    fn amplification_bounded_at_limit() {
        let s = builtin("dx-dx-dxx").unwrap();
        let curve = amplification_curve(&s, Sign::Minus, 27.0 / 32.0, 1024).unwrap();
        assert!(curve.iter().all(|&(_, a)| a <= 1.0 + 1e-12));
        let over = amplification_curve(&s, Sign::Minus, 0.9, 1024).unwrap();
        assert!(over.iter().any(|&(_, a)| a > 1.0));
    }
}
