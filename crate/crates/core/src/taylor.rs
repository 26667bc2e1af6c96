//! Truncated Taylor tables of stencils.
//!
//! Expanding a stencil about its target point gives
//! `sum_alpha t_alpha h^(|alpha| + e) f^(beta + alpha)(x0)` where
//! `t_alpha = sum_i a_i u_i^alpha / alpha!`. [`expand`] returns the raw
//! table (`beta = 0`, `e = h_power`); [`TaylorTable::normalized`] moves the
//! lowest nonzero term into `beta`, and [`report`] reads off the derivative
//! order, the order of accuracy and the leading error coefficients.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::StencilError;
use crate::stencil::{Offset, Stencil};
use crate::Rational;

/// Largest truncation [`analyze`] will try before giving up.
pub const MAX_TRUNCATION: u32 = 32;

/// Derivative multi-index `alpha`; `|alpha|` is the component sum.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        MultiIndex(components)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference, `None` if any component would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl From<u32> for MultiIndex {
    fn from(a: u32) -> Self {
        MultiIndex(vec![a])
    }
}

impl<const N: usize> From<[u32; N]> for MultiIndex {
    fn from(a: [u32; N]) -> Self {
        MultiIndex(a.to_vec())
    }
}

impl fmt::Display for MultiIndex {
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

/// All multi-indices of length `dim` with `|alpha| < bound`, ordered by
/// `|alpha|` then lexicographically.
pub fn multi_indices_below(dim: usize, bound: u32) -> Vec<MultiIndex> {
    fn rec(dim: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == dim - 1 {
            prefix.push(remaining);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in 0..=remaining {
            prefix.push(a);
            rec(dim, remaining - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    for order in 0..bound {
        let mut level = Vec::new();
        rec(dim, order, &mut Vec::with_capacity(dim), &mut level);
        level.sort();
        out.extend(level);
    }
    out
}

/// Truncated Taylor table `sum_gamma t_gamma h^(|gamma| + h_exponent) f^(beta + gamma)`.
///
/// Every coefficient with `|gamma| < trunc` is known; absent entries are
/// zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaylorTable {
    dim: usize,
    beta: MultiIndex,
    trunc: u32,
    h_exponent: i32,
    coeffs: BTreeMap<MultiIndex, Rational>,
}

/// What a stencil approximates and how well.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StencilReport {
    /// Derivative multi-index approximated (`beta + p`).
    pub derivative: MultiIndex,
    /// Order of accuracy `q`.
    pub accuracy: u32,
    /// Nonzero coefficients at order `|derivative| + accuracy`, indexed by
    /// the derivative they multiply.
    pub leading_errors: Vec<(MultiIndex, Rational)>,
}

impl StencilReport {
    /// Leading error coefficient of a one-dimensional report.
    pub fn leading_coefficient(&self) -> Option<&Rational> {
        match self.leading_errors.as_slice() {
            [(_, c)] => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for StencilReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "derivative {} with accuracy O(h^{}); leading error",
            self.derivative, self.accuracy
        )?;
        for (i, (idx, c)) in self.leading_errors.iter().enumerate() {
            let sep = if i == 0 { " " } else { " + " };
            write!(f, "{sep}{c} h^{} f^({idx})", self.accuracy)?;
        }
        Ok(())
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// `u^a / a!` for `a` in `0..bound`, with `0^0 = 1`.
fn scaled_powers(u: i64, bound: u32) -> Vec<Rational> {
    let base = BigInt::from(u);
    let mut pow = BigInt::one();
    let mut out = Vec::with_capacity(bound as usize);
    for a in 0..bound {
        if a > 0 {
            pow *= &base;
        }
        out.push(Rational::new(pow.clone(), factorial(a)));
    }
    out
}

/// Raw Taylor table of `s` with all terms `|alpha| < trunc`.
pub fn expand(s: &Stencil, trunc: u32) -> Result<TaylorTable, StencilError> {
    if trunc == 0 {
        return Err(StencilError::ZeroTruncation);
    }
    let dim = s.dim();
    let per_entry: Vec<(Vec<Vec<Rational>>, &Rational)> = s
        .entries()
        .map(|(o, c)| {
            let powers = o
                .components()
                .iter()
                .map(|&u| scaled_powers(u, trunc))
                .collect();
            (powers, c)
        })
        .collect();
    let mut coeffs = BTreeMap::new();
    for alpha in multi_indices_below(dim, trunc) {
        let mut t = Rational::zero();
        for (powers, c) in &per_entry {
            let mut term = (*c).clone();
            for (k, &a) in alpha.components().iter().enumerate() {
                let p = &powers[k][a as usize];
                if p.is_zero() {
                    term = Rational::zero();
                    break;
                }
                term *= p;
            }
            t += term;
        }
        if !t.is_zero() {
            coeffs.insert(alpha, t);
        }
    }
    if coeffs.is_empty() {
        return Err(StencilError::TruncationTooSmall { trunc });
    }
    Ok(TaylorTable {
        dim,
        beta: MultiIndex::zeros(dim),
        trunc,
        h_exponent: s.h_power(),
        coeffs,
    })
}

impl TaylorTable {
    /// Builds a table directly; zero coefficients are dropped and entries at
    /// or beyond the truncation are rejected.
    pub fn from_coefficients<I>(
        beta: MultiIndex,
        trunc: u32,
        h_exponent: i32,
        coeffs: I,
    ) -> Result<Self, StencilError>
    where
        I: IntoIterator<Item = (MultiIndex, Rational)>,
    {
        let dim = beta.dim();
        let mut map = BTreeMap::new();
        for (idx, c) in coeffs {
            if idx.dim() != dim {
                return Err(StencilError::DimMismatch {
                    expected: dim,
                    found: idx.dim(),
                });
            }
            if idx.order() >= trunc {
                return Err(StencilError::InvalidSpec(format!(
                    "coefficient at order {} beyond truncation {trunc}",
                    idx.order()
                )));
            }
            if !c.is_zero() {
                map.insert(idx, c);
            }
        }
        Ok(TaylorTable {
            dim,
            beta,
            trunc,
            h_exponent,
            coeffs: map,
        })
    }

    /// One-dimensional table from a dense coefficient list, as the series
    /// are usually written: `({1, 0, 1/12}, beta=2)`.
    pub fn from_series_1d(beta: u32, h_exponent: i32, series: &[Rational]) -> Self {
        TaylorTable {
            dim: 1,
            beta: MultiIndex::from(beta),
            trunc: series.len() as u32,
            h_exponent,
            coeffs: series
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(a, c)| (MultiIndex::from(a as u32), c.clone()))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> &MultiIndex {
        &self.beta
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    pub fn h_exponent(&self) -> i32 {
        self.h_exponent
    }

    /// Coefficient at `gamma` (relative to `beta`); zero when absent.
    pub fn coefficient(&self, gamma: &MultiIndex) -> Rational {
        self.coeffs
            .get(gamma)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    /// Nonzero coefficients ordered by `|gamma|` then lexicographically.
    pub fn nonzero(&self) -> Vec<(&MultiIndex, &Rational)> {
        let mut v: Vec<_> = self.coeffs.iter().collect();
        v.sort_by(|a, b| a.0.order().cmp(&b.0.order()).then(a.0.cmp(b.0)));
        v
    }

    /// Dense one-dimensional series `t_0 .. t_{trunc-1}`.
    pub fn series_1d(&self) -> Option<Vec<Rational>> {
        if self.dim != 1 {
            return None;
        }
        Some(
            (0..self.trunc)
                .map(|a| self.coefficient(&MultiIndex::from(a)))
                .collect(),
        )
    }

    /// Moves the unique lowest-order nonzero term into `beta`, dividing the
    /// series by the matching power of `h`. Coefficients keep their values.
    pub fn normalized(&self) -> Result<TaylorTable, StencilError> {
        let nz = self.nonzero();
        let (first, _) = nz
            .first()
            .ok_or(StencilError::TruncationTooSmall { trunc: self.trunc })?;
        let lowest = first.order();
        let leading: Vec<MultiIndex> = nz
            .iter()
            .take_while(|(i, _)| i.order() == lowest)
            .map(|(i, _)| (*i).clone())
            .collect();
        if leading.len() > 1 {
            return Err(StencilError::MixedLeadingOrder { indices: leading });
        }
        let lead = &leading[0];
        let mut coeffs = BTreeMap::new();
        for (idx, c) in &self.coeffs {
            let gamma = idx
                .checked_sub(lead)
                .ok_or_else(|| StencilError::IncomparableTerm {
                    index: self.beta.plus(idx),
                    leading: self.beta.plus(lead),
                })?;
            coeffs.insert(gamma, c.clone());
        }
        Ok(TaylorTable {
            dim: self.dim,
            beta: self.beta.plus(lead),
            trunc: self.trunc - lowest,
            h_exponent: self.h_exponent + lowest as i32,
            coeffs,
        })
    }

    /// Sum of two tables over the same derivative base and `h` scaling.
    pub fn add(&self, other: &TaylorTable) -> Result<TaylorTable, StencilError> {
        self.check_compatible(other)?;
        let trunc = self.trunc.min(other.trunc);
        let mut coeffs: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (idx, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            if idx.order() < trunc {
                *coeffs.entry(idx.clone()).or_insert_with(Rational::zero) += c;
            }
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(TaylorTable {
            dim: self.dim,
            beta: self.beta.clone(),
            trunc,
            h_exponent: self.h_exponent,
            coeffs,
        })
    }

    pub fn scale(&self, c: &Rational) -> TaylorTable {
        let mut out = self.clone();
        if c.is_zero() {
            out.coeffs.clear();
        } else {
            for v in out.coeffs.values_mut() {
                *v *= c;
            }
        }
        out
    }

    fn check_compatible(&self, other: &TaylorTable) -> Result<(), StencilError> {
        if self.dim != other.dim {
            return Err(StencilError::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.h_exponent != other.h_exponent || self.beta != other.beta {
            return Err(StencilError::PowerMismatch {
                left: self.h_exponent,
                right: other.h_exponent,
            });
        }
        Ok(())
    }

    /// Cauchy product of two series: the table of a composed stencil.
    pub fn cauchy_product(&self, other: &TaylorTable) -> Result<TaylorTable, StencilError> {
        if self.dim != other.dim {
            return Err(StencilError::DimMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let trunc = self.trunc.min(other.trunc);
        let mut coeffs: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
        for (a, x) in &self.coeffs {
            for (b, y) in &other.coeffs {
                let idx = a.plus(b);
                if idx.order() < trunc {
                    *coeffs.entry(idx).or_insert_with(Rational::zero) += x * y;
                }
            }
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(TaylorTable {
            dim: self.dim,
            beta: self.beta.plus(&other.beta),
            trunc,
            h_exponent: self.h_exponent + other.h_exponent,
            coeffs,
        })
    }

    /// JSON dump sorted by `|gamma|` then lexicographically.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            alpha: &'a MultiIndex,
            value: String,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            dim: usize,
            beta: &'a MultiIndex,
            trunc: u32,
            h_exponent: i32,
            coeffs: Vec<Entry<'a>>,
        }
        let dump = Dump {
            dim: self.dim,
            beta: &self.beta,
            trunc: self.trunc,
            h_exponent: self.h_exponent,
            coeffs: self
                .nonzero()
                .into_iter()
                .map(|(alpha, c)| Entry {
                    alpha,
                    value: c.to_string(),
                })
                .collect(),
        };
        serde_json::to_string(&dump).expect("table serialization is infallible")
    }

    /// Series notation `({1, 0, 1/12, ...}, beta=2)` showing every term with
    /// `|gamma| <= through`.
    pub fn format_series(&self, through: u32) -> String {
        let last = through.min(self.trunc.saturating_sub(1));
        let mut body = String::new();
        if self.dim == 1 {
            for a in 0..=last {
                if a > 0 {
                    body.push_str(", ");
                }
                body.push_str(&self.coefficient(&MultiIndex::from(a)).to_string());
            }
        } else {
            let shown: Vec<String> = self
                .nonzero()
                .into_iter()
                .filter(|(i, _)| i.order() <= last)
                .map(|(i, c)| format!("{i}: {c}"))
                .collect();
            body = shown.join(", ");
        }
        if last + 1 < self.trunc || self.trunc == 0 {
            body.push_str(", ...");
        }
        format!("({{{body}}}, beta={})", self.beta)
    }
}

impl fmt::Display for TaylorTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format_series(self.trunc.saturating_sub(1)))
    }
}

/// Reads derivative order, accuracy and leading errors off a table.
pub fn report(t: &TaylorTable) -> Result<StencilReport, StencilError> {
    let n = t.normalized()?;
    let leading = n.coefficient(&MultiIndex::zeros(n.dim));
    if !leading.is_one() || n.h_exponent != 0 {
        return Err(StencilError::NotNormalized {
            leading,
            h_exponent: n.h_exponent,
        });
    }
    let errors: Vec<(&MultiIndex, &Rational)> = n
        .nonzero()
        .into_iter()
        .filter(|(i, _)| i.order() > 0)
        .collect();
    let Some((first, _)) = errors.first() else {
        return Err(StencilError::AccuracyExceedsTruncation { trunc: t.trunc });
    };
    let accuracy = first.order();
    let leading_errors = errors
        .iter()
        .take_while(|(i, _)| i.order() == accuracy)
        .map(|(i, c)| (n.beta.plus(i), (*c).clone()))
        .collect();
    Ok(StencilReport {
        derivative: n.beta.clone(),
        accuracy,
        leading_errors,
    })
}

/// Expands `s` with a growing truncation until both the approximated
/// derivative and the first error term are visible. Returns the normalized
/// table alongside the report.
pub fn analyze(s: &Stencil) -> Result<(TaylorTable, StencilReport), StencilError> {
    let mut trunc = ((-s.h_power()).max(0) as u32 + 4).min(MAX_TRUNCATION);
    loop {
        let attempt = expand(s, trunc).and_then(|t| {
            let r = report(&t)?;
            Ok((t.normalized()?, r))
        });
        match attempt {
            Err(
                StencilError::TruncationTooSmall { .. }
                | StencilError::AccuracyExceedsTruncation { .. },
            ) if trunc < MAX_TRUNCATION => {
                trunc = (trunc * 2).min(MAX_TRUNCATION);
            }
            other => return other,
        }
    }
}

/// Normalized table of `s`, expanded far enough to see its first error
/// term. Unlike [`analyze`] this succeeds for stencils that violate the
/// leading-one rule, so their series can still be inspected.
pub fn normalized_series(s: &Stencil, extra_terms: u32) -> Result<TaylorTable, StencilError> {
    let mut trunc = ((-s.h_power()).max(0) as u32 + 1).min(MAX_TRUNCATION);
    loop {
        match expand(s, trunc).and_then(|t| t.normalized()) {
            Ok(n) if n.trunc() > extra_terms || trunc >= MAX_TRUNCATION => {
                return Ok(n);
            }
            Ok(_) | Err(StencilError::TruncationTooSmall { .. }) if trunc < MAX_TRUNCATION => {
                trunc = (trunc + extra_terms.max(1)).min(MAX_TRUNCATION);
            }
            Ok(n) => return Ok(n),
            Err(e) => return Err(e),
        }
    }
}

/// Re-expands a table about a target displaced by `h * shift`: adds the
/// correction `sum_gamma t_gamma sum_{|delta|>=1} shift^delta / delta!` at
/// `gamma + delta`, truncated at the table's own truncation.
pub fn retarget(t: &TaylorTable, shift: &Offset) -> Result<TaylorTable, StencilError> {
    if shift.dim() != t.dim {
        return Err(StencilError::DimMismatch {
            expected: t.dim,
            found: shift.dim(),
        });
    }
    let powers: Vec<Vec<Rational>> = shift
        .components()
        .iter()
        .map(|&u| scaled_powers(u, t.trunc.max(1)))
        .collect();
    let deltas = multi_indices_below(t.dim, t.trunc);
    let mut coeffs = t.coeffs.clone();
    for (gamma, c) in &t.coeffs {
        let room = t.trunc - gamma.order();
        for delta in deltas.iter().filter(|d| d.order() >= 1 && d.order() < room) {
            let mut w = c.clone();
            for (k, &d) in delta.components().iter().enumerate() {
                w *= &powers[k][d as usize];
            }
            if !w.is_zero() {
                *coeffs
                    .entry(gamma.plus(delta))
                    .or_insert_with(Rational::zero) += w;
            }
        }
    }
    coeffs.retain(|_, c| !c.is_zero());
    Ok(TaylorTable {
        dim: t.dim,
        beta: t.beta.clone(),
        trunc: t.trunc,
        h_exponent: t.h_exponent,
        coeffs,
    })
}

/// Accuracy of two stencils and of their composition, checked against the
/// composition rule: the composed accuracy is `min(q_inner, q_outer)` and
/// its leading error is the sum of the leading errors that sit at that
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AccuracyCheck {
    pub inner: StencilReport,
    pub outer: StencilReport,
    pub composed: StencilReport,
    /// Predicted leading errors of the composition, indexed by the composed
    /// derivative. Empty when the contributions cancel exactly.
    pub predicted: Vec<(MultiIndex, Rational)>,
}

impl AccuracyCheck {
    pub fn predicted_accuracy(&self) -> u32 {
        self.inner.accuracy.min(self.outer.accuracy)
    }

    /// True when the leading contributions cancelled and the composition
    /// gained accuracy.
    pub fn cancelled(&self) -> bool {
        self.predicted.is_empty()
    }
}

pub fn min_accuracy_check(inner: &Stencil, outer: &Stencil) -> Result<AccuracyCheck, StencilError> {
    let (_, ra) = analyze(inner)?;
    let (_, rb) = analyze(outer)?;
    let composed_stencil = inner.compose(outer)?;
    let (_, rc) = analyze(&composed_stencil)?;

    let q = ra.accuracy.min(rb.accuracy);
    let mut predicted: BTreeMap<MultiIndex, Rational> = BTreeMap::new();
    // A's error term f^(pa + g) picks up B's derivative and vice versa.
    let mut contribute = |own: &StencilReport, other: &StencilReport| {
        if own.accuracy == q {
            for (idx, c) in &own.leading_errors {
                *predicted
                    .entry(idx.plus(&other.derivative))
                    .or_insert_with(Rational::zero) += c;
            }
        }
    };
    contribute(&ra, &rb);
    contribute(&rb, &ra);
    predicted.retain(|_, c| !c.is_zero());
    let predicted: Vec<(MultiIndex, Rational)> = predicted.into_iter().collect();

    let consistent = if predicted.is_empty() {
        rc.accuracy > q
    } else {
        let mut got = rc.leading_errors.clone();
        got.sort();
        rc.accuracy == q && got == predicted
    };
    if !consistent {
        return Err(StencilError::LemmaViolation {
            predicted: q,
            composed: rc.accuracy,
        });
    }
    Ok(AccuracyCheck {
        inner: ra,
        outer: rb,
        composed: rc,
        predicted,
    })
}
