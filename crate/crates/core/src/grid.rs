//! Structured grids and stencil-to-matrix assembly.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::CsrMatrix;
use crate::stencil::{to_f64, Stencil};
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("stencil spans {width} points on axis {axis} but the grid has {points}")]
    StencilWiderThanGrid {
        axis: usize,
        width: i64,
        points: usize,
    },
    #[error("axis {axis} has {n} points; at least 3 are required")]
    TooFewPoints { axis: usize, n: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("length {length} is not a whole number of cells of size {h}")]
    IncommensurateLength { length: f64, h: f64 },
    #[error("stencil weights do not fit 64-bit integers over a common denominator")]
    CoefficientOverflow,
}

/// Boundary treatment along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Indices wrap modulo `n`; every point is an unknown.
    Periodic,
    /// Points `0` and `n - 1` carry `f = 0` and `f'' = 0`; values beyond
    /// them are odd reflections of interior values.
    SimplySupported,
}

impl FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(Boundary::Periodic),
            "simply_supported" | "simply-supported" => Ok(Boundary::SimplySupported),
            other => Err(format!("unknown boundary `{other}`")),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::SimplySupported => "simply_supported",
        })
    }
}

/// Uniform grid: point `i` on axis `a` sits at `origin[a] + i h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: Vec<usize>,
    h: f64,
    origin: Vec<f64>,
    bc: Vec<Boundary>,
}

impl GridSpec {
    pub fn new(
        n: Vec<usize>,
        h: f64,
        origin: Vec<f64>,
        bc: Vec<Boundary>,
    ) -> Result<Self, GridError> {
        if n.is_empty() {
            return Err(GridError::DimMismatch {
                expected: 1,
                found: 0,
            });
        }
        for other in [origin.len(), bc.len()] {
            if other != n.len() {
                return Err(GridError::DimMismatch {
                    expected: n.len(),
                    found: other,
                });
            }
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::InvalidSpacing(h));
        }
        if let Some((axis, &n)) = n.iter().enumerate().find(|(_, &n)| n < 3) {
            return Err(GridError::TooFewPoints { axis, n });
        }
        Ok(GridSpec { n, h, origin, bc })
    }

    /// `n^dim` periodic grid with origin 0.
    pub fn periodic(dim: usize, n: usize, h: f64) -> Result<Self, GridError> {
        Self::new(
            vec![n; dim],
            h,
            vec![0.0; dim],
            vec![Boundary::Periodic; dim],
        )
    }

    /// Periodic cube `[0, length)^dim` with spacing `h`.
    pub fn periodic_box(dim: usize, length: f64, h: f64) -> Result<Self, GridError> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(GridError::InvalidSpacing(h));
        }
        let cells = length / h;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(GridError::IncommensurateLength { length, h });
        }
        Self::periodic(dim, cells.round() as usize, h)
    }

    /// Simply supported `[0, 1]^dim` split into `cells` intervals per axis.
    pub fn unit_simply_supported(dim: usize, cells: usize) -> Result<Self, GridError> {
        Self::new(
            vec![cells + 1; dim],
            1.0 / cells as f64,
            vec![0.0; dim],
            vec![Boundary::SimplySupported; dim],
        )
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn bc(&self) -> &[Boundary] {
        &self.bc
    }

    pub fn all_periodic(&self) -> bool {
        self.bc.iter().all(|b| *b == Boundary::Periodic)
    }

    /// Unknowns along one axis.
    pub fn unknowns_on_axis(&self, axis: usize) -> usize {
        match self.bc[axis] {
            Boundary::Periodic => self.n[axis],
            Boundary::SimplySupported => self.n[axis] - 2,
        }
    }

    pub fn unknown_count(&self) -> usize {
        (0..self.dim()).map(|a| self.unknowns_on_axis(a)).product()
    }

    /// Grid-point index of the first unknown on an axis.
    fn first_unknown(&self, axis: usize) -> usize {
        match self.bc[axis] {
            Boundary::Periodic => 0,
            Boundary::SimplySupported => 1,
        }
    }

    /// Per-axis point indices of unknown `k` (x fastest).
    pub fn point_of(&self, mut k: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|a| {
                let m = self.unknowns_on_axis(a);
                let i = k % m;
                k /= m;
                i + self.first_unknown(a)
            })
            .collect()
    }

    /// Coordinates of unknown `k`.
    pub fn coordinates(&self, k: usize) -> Vec<f64> {
        self.point_of(k)
            .into_iter()
            .enumerate()
            .map(|(a, i)| self.origin[a] + self.h * i as f64)
            .collect()
    }

    /// Samples `f` at every unknown.
    pub fn sample<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.unknown_count())
            .into_par_iter()
            .map(|k| f(&self.coordinates(k)))
            .collect()
    }

    /// Maps a (possibly out-of-range) point index on `axis` to an unknown
    /// index and sign. `Ok(None)` means the point carries a zero value.
    fn resolve(&self, axis: usize, i: i64) -> Result<Option<(usize, i64)>, ()> {
        let n = self.n[axis] as i64;
        match self.bc[axis] {
            Boundary::Periodic => Ok(Some((i.rem_euclid(n) as usize, 1))),
            Boundary::SimplySupported => {
                let last = n - 1;
                let (j, sign) = if i < 0 {
                    (-i, -1)
                } else if i > last {
                    (2 * last - i, -1)
                } else {
                    (i, 1)
                };
                if j < 0 || j > last {
                    Err(())
                } else if j == 0 || j == last {
                    Ok(None)
                } else {
                    Ok(Some(((j - 1) as usize, sign)))
                }
            }
        }
    }
}

/// Stencil weights as integers over a common denominator.
struct IntegerStencil {
    offsets: Vec<Vec<i64>>,
    numerators: Vec<i64>,
    denominator: BigInt,
}

fn integer_weights(s: &Stencil) -> Result<IntegerStencil, GridError> {
    let denominator = s
        .entries()
        .fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
    let mut offsets = Vec::with_capacity(s.len());
    let mut numerators = Vec::with_capacity(s.len());
    for (o, c) in s.entries() {
        let scaled: Rational = c * Rational::from_integer(denominator.clone());
        offsets.push(o.components().to_vec());
        numerators.push(
            scaled
                .to_integer()
                .to_i64()
                .ok_or(GridError::CoefficientOverflow)?,
        );
    }
    Ok(IntegerStencil {
        offsets,
        numerators,
        denominator,
    })
}

/// Assembles `s` into a matrix acting on the unknowns of `g`.
///
/// Contributions to each matrix entry are summed exactly before the single
/// conversion to `f64` and the `h^h_power` scaling.
pub fn assemble(s: &Stencil, g: &GridSpec) -> Result<CsrMatrix, GridError> {
    if s.dim() != g.dim() {
        return Err(GridError::DimMismatch {
            expected: g.dim(),
            found: s.dim(),
        });
    }
    for (axis, (lo, hi)) in s.support().into_iter().enumerate() {
        let width = hi - lo + 1;
        if g.bc[axis] == Boundary::Periodic && width > g.n[axis] as i64 {
            return Err(GridError::StencilWiderThanGrid {
                axis,
                width,
                points: g.n[axis],
            });
        }
    }
    let w = integer_weights(s)?;
    let factor = g.h.powi(s.h_power()) / to_f64(&Rational::from_integer(w.denominator.clone()));
    let dim = g.dim();
    let strides: Vec<usize> = (0..dim)
        .scan(1usize, |acc, a| {
            let s = *acc;
            *acc *= g.unknowns_on_axis(a);
            Some(s)
        })
        .collect();

    let rows: Result<Vec<Vec<(usize, f64)>>, GridError> = (0..g.unknown_count())
        .into_par_iter()
        .map(|k| {
            let point = g.point_of(k);
            let mut acc: Vec<(usize, i128)> = Vec::with_capacity(w.offsets.len());
            'entry: for (off, &num) in w.offsets.iter().zip(&w.numerators) {
                let mut col = 0usize;
                let mut sign = 1i64;
                for axis in 0..dim {
                    let i = point[axis] as i64 + off[axis];
                    match g.resolve(axis, i) {
                        Ok(Some((u, sg))) => {
                            col += u * strides[axis];
                            sign *= sg;
                        }
                        Ok(None) => continue 'entry,
                        Err(()) => {
                            return Err(GridError::StencilWiderThanGrid {
                                axis,
                                width: off[axis].abs() * 2 + 1,
                                points: g.n[axis],
                            })
                        }
                    }
                }
                acc.push((col, (sign * num) as i128));
            }
            acc.sort_by_key(|&(c, _)| c);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(acc.len());
            let mut i = 0;
            while i < acc.len() {
                let c = acc[i].0;
                let mut sum = 0i128;
                while i < acc.len() && acc[i].0 == c {
                    sum += acc[i].1;
                    i += 1;
                }
                if sum != 0 {
                    row.push((c, sum as f64 * factor));
                }
            }
            Ok(row)
        })
        .collect();
    CsrMatrix::from_rows(g.unknown_count(), rows?)
}
