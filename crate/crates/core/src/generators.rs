//! Standard one-dimensional stencils from exact moment conditions.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::elimination;
use crate::error::StencilError;
use crate::stencil::{Offset, Stencil};
use crate::Rational;

/// Placement of the support relative to the target point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Centered,
    Forward,
    Backward,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Centered, Style::Forward, Style::Backward];
}

impl FromStr for Style {
    type Err = StencilError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "centered" | "central" => Ok(Style::Centered),
            "forward" => Ok(Style::Forward),
            "backward" => Ok(Style::Backward),
            other => Err(StencilError::InvalidSpec(format!(
                "unknown style `{other}`"
            ))),
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Style::Centered => "centered",
            Style::Forward => "forward",
            Style::Backward => "backward",
        })
    }
}

/// Request for a `p`-th derivative stencil with accuracy at least `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StencilSpec {
    pub derivative: u32,
    pub accuracy: u32,
    pub style: Style,
}

impl StencilSpec {
    pub fn new(derivative: u32, accuracy: u32, style: Style) -> Self {
        StencilSpec {
            derivative,
            accuracy,
            style,
        }
    }

    /// Lattice points used by [`make`].
    pub fn support(&self) -> Vec<i64> {
        let p = self.derivative as i64;
        let q = self.accuracy as i64;
        match self.style {
            Style::Centered => {
                // Symmetric stencils only reach even accuracy, so odd
                // requests are rounded up.
                let q_even = q + q % 2;
                let m = (p + 1) / 2 - 1 + q_even / 2;
                (-m..=m).collect()
            }
            Style::Forward => (0..p + q).collect(),
            Style::Backward => (1 - (p + q)..=0).collect(),
        }
    }

    fn validate(&self) -> Result<(), StencilError> {
        if self.derivative == 0 {
            return Err(StencilError::InvalidSpec(
                "derivative order must be at least 1".into(),
            ));
        }
        if self.accuracy == 0 {
            return Err(StencilError::UnsupportedAccuracy { accuracy: 0 });
        }
        if self.derivative + self.accuracy > 24 {
            return Err(StencilError::InvalidSpec(format!(
                "derivative {} with accuracy {} needs too wide a support",
                self.derivative, self.accuracy
            )));
        }
        Ok(())
    }
}

/// Solves `sum_i a_i u_i^k / k! = [k == p]` for `k < n` over the support.
pub fn make(spec: &StencilSpec) -> Result<Stencil, StencilError> {
    spec.validate()?;
    let support = spec.support();
    let n = support.len();
    let mut fact = BigInt::one();
    let mut rows = Vec::with_capacity(n);
    for k in 0..n {
        if k > 0 {
            fact *= BigInt::from(k);
        }
        rows.push(
            support
                .iter()
                .map(|&u| Rational::new(BigInt::from(u).pow(k as u32), fact.clone()))
                .collect::<Vec<_>>(),
        );
    }
    let rhs = (0..n)
        .map(|k| {
            if k as u32 == spec.derivative {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
        .collect();
    let weights = elimination::solve(rows, rhs).ok_or(StencilError::SingularSystem)?;
    Stencil::new(
        1,
        -(spec.derivative as i32),
        support
            .into_iter()
            .zip(weights)
            .map(|(u, w)| (Offset::from(u), w)),
    )
}

/// Sum of centered second derivatives along each of `dim` axes.
pub fn laplacian(dim: usize, accuracy: u32) -> Result<Stencil, StencilError> {
    if !(1..=3).contains(&dim) {
        return Err(StencilError::InvalidSpec(format!(
            "laplacian supports 1 to 3 dimensions, got {dim}"
        )));
    }
    if accuracy == 0 || accuracy % 2 == 1 || accuracy > 8 {
        return Err(StencilError::UnsupportedAccuracy { accuracy });
    }
    let d2 = make(&StencilSpec::new(2, accuracy, Style::Centered))?;
    let mut lap = d2.embed(0, dim)?;
    for axis in 1..dim {
        lap = lap.add(&d2.embed(axis, dim)?)?;
    }
    Ok(lap)
}

/// The Laplacian composed with itself.
pub fn bilaplacian(dim: usize, accuracy: u32) -> Result<Stencil, StencilError> {
    let lap = laplacian(dim, accuracy)?;
    lap.compose(&lap)
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: &[&str] = &[
    "dx",
    "dxx",
    "dx-dx",
    "dxxxx",
    "dxx-dxx",
    "dx-dxx",
    "dx-dx-dxx",
    "dx-fwd",
    "dxx-fwd",
    "dx-o4",
    "dxx-o4",
    "laplacian-1d",
    "laplacian-2d",
    "laplacian-3d",
    "bilaplacian-2d",
];

/// Named stencils used throughout the experiments. Hyphens between
/// operators denote composition; `dxxxx` is the compact five-point fourth
/// derivative.
pub fn builtin(name: &str) -> Result<Stencil, StencilError> {
    let c = |p, q| make(&StencilSpec::new(p, q, Style::Centered));
    match name {
        "dx" => c(1, 2),
        "dxx" => c(2, 2),
        "dx-dx" => c(1, 2)?.compose(&c(1, 2)?),
        "dxxxx" => Stencil::from_weights_1d(-4, 1, &[(-2, 1), (-1, -4), (0, 6), (1, -4), (2, 1)]),
        "dxx-dxx" => c(2, 2)?.compose(&c(2, 2)?),
        "dx-dxx" => c(1, 2)?.compose(&c(2, 2)?),
        "dx-dx-dxx" => c(1, 2)?.compose(&c(1, 2)?)?.compose(&c(2, 2)?),
        "dx-fwd" => make(&StencilSpec::new(1, 1, Style::Forward)),
        "dxx-fwd" => make(&StencilSpec::new(2, 1, Style::Forward)),
        "dx-o4" => c(1, 4),
        "dxx-o4" => c(2, 4),
        "laplacian-1d" => laplacian(1, 2),
        "laplacian-2d" => laplacian(2, 2),
        "laplacian-3d" => laplacian(3, 2),
        "bilaplacian-2d" => bilaplacian(2, 2),
        other => Err(StencilError::InvalidSpec(format!(
            "unknown builtin stencil `{other}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::ratio;
    use crate::taylor::{analyze, MultiIndex};

    fn w(s: &Stencil) -> Vec<(i64, Rational)> {
        s.entries()
            .map(|(o, c)| (o.components()[0], c.clone()))
            .collect()
    }

    #[test]
    fn centered_first_derivative() {
        let s = make(&StencilSpec::new(1, 2, Style::Centered)).unwrap();
        assert_eq!(s.h_power(), -1);
        assert_eq!(w(&s), vec![(-1, ratio(-1, 2)), (1, ratio(1, 2))]);
    }

    #[test]
    fn centered_second_derivative() {
        let s = make(&StencilSpec::new(2, 2, Style::Centered)).unwrap();
        assert_eq!(s, builtin("dxx").unwrap());
        assert_eq!(
            w(&s),
            vec![(-1, ratio(1, 1)), (0, ratio(-2, 1)), (1, ratio(1, 1))]
        );
    }

    #[test]
    fn fourth_order_first_derivative() {
        let s = make(&StencilSpec::new(1, 4, Style::Centered)).unwrap();
        assert_eq!(
            w(&s),
            vec![
                (-2, ratio(1, 12)),
                (-1, ratio(-8, 12)),
                (1, ratio(8, 12)),
                (2, ratio(-1, 12))
            ]
        );
    }

    #[test]
    fn forward_second_derivative() {
        let s = make(&StencilSpec::new(2, 1, Style::Forward)).unwrap();
        assert_eq!(
            w(&s),
            vec![(0, ratio(1, 1)), (1, ratio(-2, 1)), (2, ratio(1, 1))]
        );
        let b = make(&StencilSpec::new(1, 2, Style::Backward)).unwrap();
        assert_eq!(
            w(&b),
            vec![(-2, ratio(1, 2)), (-1, ratio(-2, 1)), (0, ratio(3, 2))]
        );
    }

    #[test]
    fn all_generated_stencils_meet_their_spec() {
        for style in Style::ALL {
            for p in 1..=4 {
                for q in 1..=4 {
                    let s = make(&StencilSpec::new(p, q, style)).unwrap();
                    assert!(s.coefficient_sum().is_zero());
                    let (_, r) = analyze(&s).unwrap();
                    assert_eq!(r.derivative, MultiIndex::from(p), "{p} {q} {style}");
                    assert!(r.accuracy >= q, "{p} {q} {style}");
                    if style == Style::Centered {
                        assert_eq!(r.accuracy, q + q % 2);
                    } else {
                        assert_eq!(r.accuracy, q);
                    }
                }
            }
        }
    }

    #[test]
    fn laplacians() {
        let l2 = laplacian(2, 2).unwrap();
        assert_eq!(l2.len(), 5);
        assert_eq!(l2.coefficient(&Offset::from([0, 0])), Some(&ratio(-4, 1)));
        assert_eq!(laplacian(1, 2).unwrap(), builtin("dxx").unwrap());
        assert_eq!(laplacian(3, 2).unwrap().len(), 7);
        assert_eq!(
            laplacian(2, 3),
            Err(StencilError::UnsupportedAccuracy { accuracy: 3 })
        );
        assert!(laplacian(4, 2).is_err());
    }

    #[test]
    fn thirteen_point_bilaplacian() {
        let b = bilaplacian(2, 2).unwrap();
        assert_eq!(b.len(), 13);
        assert_eq!(b.h_power(), -4);
        let at = |x: i64, y: i64| b.coefficient(&Offset::from([x, y])).cloned();
        assert_eq!(at(0, 0), Some(ratio(20, 1)));
        assert_eq!(at(1, 0), Some(ratio(-8, 1)));
        assert_eq!(at(0, -1), Some(ratio(-8, 1)));
        assert_eq!(at(1, 1), Some(ratio(2, 1)));
        assert_eq!(at(-1, 1), Some(ratio(2, 1)));
        assert_eq!(at(2, 0), Some(ratio(1, 1)));
        assert_eq!(at(0, -2), Some(ratio(1, 1)));
        assert_eq!(at(2, 1), None);
    }

    #[test]
    fn builtins_resolve() {
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_ok(), "{name}");
        }
        assert_eq!(builtin("dxxxx").unwrap(), builtin("dxx-dxx").unwrap());
        assert!(builtin("nope").is_err());
        assert_eq!("Forward".parse::<Style>().unwrap(), Style::Forward);
        assert!("sideways".parse::<Style>().is_err());
    }
}
