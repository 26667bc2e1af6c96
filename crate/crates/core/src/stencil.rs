//! Exact finite-difference stencils.
//!
//! A [`Stencil`] maps lattice offsets to exact rational weights. The true
//! weight of an entry is `coefficient * h^h_power`, so the grid spacing never
//! enters the algebra: composing two stencils multiplies weights, adds
//! offsets and adds the spacing exponents.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Neg;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::StencilError;
use crate::Rational;

/// Builds `num/den` in lowest terms. Panics if `den == 0`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Converts an exact rational to the nearest `f64`.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Ratio::to_f64 only fails when both parts overflow f64.
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Integer lattice displacement `u` with `x = x0 + h * u`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Offset(Vec<i64>);

impl Offset {
    pub fn new(components: Vec<i64>) -> Self {
        Offset(components)
    }

    pub fn zero(dim: usize) -> Self {
        Offset(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[i64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    fn plus(&self, other: &Offset) -> Offset {
        Offset(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    fn concat(&self, other: &Offset) -> Offset {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Offset(v)
    }
}

impl Neg for &Offset {
    type Output = Offset;

    fn neg(self) -> Offset {
        Offset(self.0.iter().map(|c| -c).collect())
    }
}

impl From<i64> for Offset {
    fn from(u: i64) -> Self {
        Offset(vec![u])
    }
}

impl From<Vec<i64>> for Offset {
    fn from(v: Vec<i64>) -> Self {
        Offset(v)
    }
}

impl<const N: usize> From<[i64; N]> for Offset {
    fn from(v: [i64; N]) -> Self {
        Offset(v.to_vec())
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            return write!(f, "{}", self.0[0]);
        }
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite-difference stencil in canonical form.
///
/// Invariants: every offset has length `dim`, no stored coefficient is zero
/// and the entry map is never empty. Two stencils are equal exactly when
/// their dimension, spacing exponent and entry maps agree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StencilRepr", into = "StencilRepr")]
pub struct Stencil {
    dim: usize,
    h_power: i32,
    entries: BTreeMap<Offset, Rational>,
}

impl Stencil {
    /// Builds a stencil, summing repeated offsets and dropping zeros.
    pub fn new<I>(dim: usize, h_power: i32, entries: I) -> Result<Self, StencilError>
    where
        I: IntoIterator<Item = (Offset, Rational)>,
    {
        if dim == 0 {
            return Err(StencilError::ZeroDim);
        }
        let mut map: BTreeMap<Offset, Rational> = BTreeMap::new();
        for (offset, coeff) in entries {
            if offset.dim() != dim {
                return Err(StencilError::DimMismatch {
                    expected: dim,
                    found: offset.dim(),
                });
            }
            *map.entry(offset).or_insert_with(Rational::zero) += coeff;
        }
        Self::canonical(dim, h_power, map)
    }

    fn canonical(
        dim: usize,
        h_power: i32,
        mut entries: BTreeMap<Offset, Rational>,
    ) -> Result<Self, StencilError> {
        entries.retain(|_, c| !c.is_zero());
        if entries.is_empty() {
            return Err(StencilError::EmptyStencil);
        }
        Ok(Stencil {
            dim,
            h_power,
            entries,
        })
    }

    /// One-dimensional stencil from `(offset, numerator)` pairs over a
    /// common denominator, e.g. `(-1, 8, 1, -16, 1, 8, -1) / 12`.
    pub fn from_weights_1d(
        h_power: i32,
        denominator: i64,
        weights: &[(i64, i64)],
    ) -> Result<Self, StencilError> {
        Self::new(
            1,
            h_power,
            weights
                .iter()
                .map(|&(u, w)| (Offset::from(u), ratio(w, denominator))),
        )
    }

    /// The evaluation stencil `{0: 1}` with `h^0`.
    pub fn identity(dim: usize) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(Offset::zero(dim.max(1)), Rational::one());
        Stencil {
            dim: dim.max(1),
            h_power: 0,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h_power(&self) -> i32 {
        self.h_power
    }

    /// Entries in lexicographic offset order.
    pub fn entries(&self) -> impl Iterator<Item = (&Offset, &Rational)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Always false for a constructed stencil; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn coefficient(&self, offset: &Offset) -> Option<&Rational> {
        self.entries.get(offset)
    }

    pub fn coefficient_sum(&self) -> Rational {
        self.entries
            .values()
            .fold(Rational::zero(), |acc, c| acc + c)
    }

    /// Sum of absolute coefficients (the `l1` norm of the weights).
    pub fn abs_sum(&self) -> Rational {
        self.entries
            .values()
            .fold(Rational::zero(), |acc, c| acc + c.abs())
    }

    /// Per-axis `[min, max]` offset.
    pub fn support(&self) -> Vec<(i64, i64)> {
        (0..self.dim)
            .map(|k| {
                let it = self.entries.keys().map(|o| o.0[k]);
                let min = it.clone().min().unwrap_or(0);
                let max = it.max().unwrap_or(0);
                (min, max)
            })
            .collect()
    }

    fn check_dim(&self, other_dim: usize) -> Result<(), StencilError> {
        if self.dim != other_dim {
            return Err(StencilError::DimMismatch {
                expected: self.dim,
                found: other_dim,
            });
        }
        Ok(())
    }

    pub fn scale(&self, c: &Rational) -> Result<Self, StencilError> {
        if c.is_zero() {
            return Err(StencilError::ZeroScale);
        }
        Ok(Stencil {
            dim: self.dim,
            h_power: self.h_power,
            entries: self
                .entries
                .iter()
                .map(|(o, w)| (o.clone(), w * c))
                .collect(),
        })
    }

    pub fn add(&self, other: &Stencil) -> Result<Self, StencilError> {
        self.check_dim(other.dim)?;
        if self.h_power != other.h_power {
            return Err(StencilError::PowerMismatch {
                left: self.h_power,
                right: other.h_power,
            });
        }
        let mut entries = self.entries.clone();
        for (o, w) in &other.entries {
            *entries.entry(o.clone()).or_insert_with(Rational::zero) += w;
        }
        Self::canonical(self.dim, self.h_power, entries)
    }

    pub fn sub(&self, other: &Stencil) -> Result<Self, StencilError> {
        self.add(&other.scale(&-Rational::one())?)
    }

    /// Sum of `c_k * s_k`; all terms must share dimension and spacing power.
    pub fn linear_combine(terms: &[(Rational, &Stencil)]) -> Result<Self, StencilError> {
        let (_, first) = terms.first().ok_or(StencilError::EmptyStencil)?;
        let mut entries: BTreeMap<Offset, Rational> = BTreeMap::new();
        for (c, s) in terms {
            first.check_dim(s.dim)?;
            if s.h_power != first.h_power {
                return Err(StencilError::PowerMismatch {
                    left: first.h_power,
                    right: s.h_power,
                });
            }
            for (o, w) in &s.entries {
                *entries.entry(o.clone()).or_insert_with(Rational::zero) += c * w;
            }
        }
        Self::canonical(first.dim, first.h_power, entries)
    }

    /// Translates every offset by `by`.
    pub fn shift(&self, by: &Offset) -> Result<Self, StencilError> {
        self.check_dim(by.dim())?;
        Ok(Stencil {
            dim: self.dim,
            h_power: self.h_power,
            entries: self
                .entries
                .iter()
                .map(|(o, w)| (o.plus(by), w.clone()))
                .collect(),
        })
    }

    /// Applies `outer` to the output of `self`: offsets add, weights
    /// multiply and the spacing exponents add.
    pub fn compose(&self, outer: &Stencil) -> Result<Self, StencilError> {
        self.check_dim(outer.dim)?;
        let mut entries: BTreeMap<Offset, Rational> = BTreeMap::new();
        for (u, a) in &self.entries {
            for (v, b) in &outer.entries {
                *entries.entry(u.plus(v)).or_insert_with(Rational::zero) += a * b;
            }
        }
        Self::canonical(self.dim, self.h_power + outer.h_power, entries)
    }

    /// Tensor product acting on disjoint axes: `self` on the leading
    /// `self.dim()` axes, `other` on the trailing ones.
    pub fn outer_product(&self, other: &Stencil) -> Stencil {
        let mut entries = BTreeMap::new();
        for (u, a) in &self.entries {
            for (v, b) in &other.entries {
                entries.insert(u.concat(v), a * b);
            }
        }
        Stencil {
            dim: self.dim + other.dim,
            h_power: self.h_power + other.h_power,
            entries,
        }
    }

    /// Places a one-dimensional stencil on `axis` of a `dim`-dimensional
    /// lattice.
    pub fn embed(&self, axis: usize, dim: usize) -> Result<Self, StencilError> {
        self.check_dim(1)?;
        if axis >= dim {
            return Err(StencilError::DimMismatch {
                expected: dim,
                found: axis + 1,
            });
        }
        let mut out = if axis == 0 {
            self.clone()
        } else {
            Stencil::identity(axis).outer_product(self)
        };
        if dim > axis + 1 {
            out = out.outer_product(&Stencil::identity(dim - axis - 1));
        }
        Ok(out)
    }

    /// Floating weights `coefficient * h^h_power`.
    pub fn weights(&self, h: f64) -> Vec<(Offset, f64)> {
        let scale = h.powi(self.h_power);
        self.entries
            .iter()
            .map(|(o, c)| (o.clone(), to_f64(c) * scale))
            .collect()
    }

    /// Evaluates the stencil on a function at `x0` with spacing `h`.
    pub fn apply_fn<F>(&self, h: f64, x0: &[f64], f: F) -> Result<f64, StencilError>
    where
        F: Fn(&[f64]) -> f64,
    {
        self.check_dim(x0.len())?;
        let mut point = vec![0.0; self.dim];
        let mut acc = 0.0;
        for (o, c) in &self.entries {
            for (k, p) in point.iter_mut().enumerate() {
                *p = x0[k] + h * o.0[k] as f64;
            }
            acc += to_f64(c) * f(&point);
        }
        Ok(acc * h.powi(self.h_power))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stencil serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, StencilError> {
        serde_json::from_str(text).map_err(|e| StencilError::Json(e.to_string()))
    }
}

impl fmt::Display for Stencil {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (o, c)) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{o}: {c}")?;
        }
        write!(f, "}} h^{}", self.h_power)
    }
}

/// Integers that fit in `i64` serialize as JSON numbers, larger ones as
/// decimal strings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum IntRepr {
    Small(i64),
    Big(String),
}

impl From<&BigInt> for IntRepr {
    fn from(v: &BigInt) -> Self {
        match v.to_i64() {
            Some(s) => IntRepr::Small(s),
            None => IntRepr::Big(v.to_string()),
        }
    }
}

impl TryFrom<IntRepr> for BigInt {
    type Error = StencilError;

    fn try_from(v: IntRepr) -> Result<Self, StencilError> {
        match v {
            IntRepr::Small(s) => Ok(BigInt::from(s)),
            IntRepr::Big(s) => s
                .parse()
                .map_err(|_| StencilError::Json(format!("bad integer {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryRepr {
    offset: Vec<i64>,
    num: IntRepr,
    den: IntRepr,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StencilRepr {
    dim: usize,
    h_power: i32,
    entries: Vec<EntryRepr>,
}

impl From<Stencil> for StencilRepr {
    fn from(s: Stencil) -> Self {
        StencilRepr {
            dim: s.dim,
            h_power: s.h_power,
            entries: s
                .entries
                .iter()
                .map(|(o, c)| EntryRepr {
                    offset: o.0.clone(),
                    num: c.numer().into(),
                    den: c.denom().into(),
                })
                .collect(),
        }
    }
}

impl TryFrom<StencilRepr> for Stencil {
    type Error = StencilError;

    fn try_from(r: StencilRepr) -> Result<Self, StencilError> {
        let mut entries = Vec::with_capacity(r.entries.len());
        for e in r.entries {
            let num = BigInt::try_from(e.num)?;
            let den = BigInt::try_from(e.den)?;
            if den.is_zero() {
                return Err(StencilError::Json("zero denominator".into()));
            }
            entries.push((Offset(e.offset), Rational::new(num, den)));
        }
        Stencil::new(r.dim, r.h_power, entries)
    }
}
