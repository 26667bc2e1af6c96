//! Conjugate gradients, power iteration and analytic periodic spectra.

use std::io::{self, Write};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridError, GridSpec};
use crate::sparse::CsrMatrix;
use crate::stencil::{to_f64, Stencil};
use crate::Rational;

/// Seed of the default power-iteration start vector.
pub const DEFAULT_SEED: u64 = 0x5EED_CAFE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no convergence after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("right-hand side has mean {mean:e}; a mean-free solve needs zero mean")]
    NonZeroMean { mean: f64 },
    #[error("matrix is not positive definite on the Krylov space")]
    Breakdown,
    #[error("analytic spectra need every axis periodic")]
    NonPeriodic,
    #[error("stencil weights do not fit 64-bit integers over a common denominator")]
    CoefficientOverflow,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Stop once `||b - A x|| <= rel_tol ||b||`.
    pub rel_tol: f64,
    /// Iteration cap; `None` means ten times the number of unknowns.
    pub max_iter: Option<usize>,
    /// Solve on the zero-mean subspace (singular periodic operators).
    pub mean_free: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rel_tol: 1e-10,
            max_iter: None,
            mean_free: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` of `x`.
    pub rel_residual: f64,
}

/// Sum of `f(k)` over `k < len`. Blocks have a fixed size and partial sums
/// are added in order, so the rounding does not depend on the thread count.
pub(crate) fn block_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    const BLOCK: usize = 4096;
    if len <= BLOCK {
        return (0..len).map(f).sum();
    }
    let partial: Vec<f64> = (0..len.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| (b * BLOCK..((b + 1) * BLOCK).min(len)).map(&f).sum())
        .collect();
    partial.iter().sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    block_sum(a.len(), |k| a[k] * b[k])
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut()
        .zip(x)
        .for_each(|(yi, xi)| *yi += alpha * xi);
}

fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn residual(m: &CsrMatrix, b: &[f64], x: &[f64], mean_free: bool) -> Result<Vec<f64>, LinalgError> {
    let mut r = m.apply(x)?;
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    if mean_free {
        remove_mean(&mut r);
    }
    Ok(r)
}

/// Conjugate gradients from a zero initial guess.
pub fn cg_solve(m: &CsrMatrix, b: &[f64], opts: &SolveOptions) -> Result<CgSolution, LinalgError> {
    cg_solve_from(m, b, vec![0.0; b.len()], opts)
}

/// Conjugate gradients from `x0`. The returned residual is recomputed from
/// scratch, so it is the true residual rather than the recursive one.
pub fn cg_solve_from(
    m: &CsrMatrix,
    b: &[f64],
    x0: Vec<f64>,
    opts: &SolveOptions,
) -> Result<CgSolution, LinalgError> {
    let n = b.len();
    if m.rows() != n || m.cols() != n {
        return Err(GridError::ShapeMismatch {
            expected: m.rows(),
            found: n,
        }
        .into());
    }
    if x0.len() != n {
        return Err(GridError::ShapeMismatch {
            expected: n,
            found: x0.len(),
        }
        .into());
    }
    let mut b = b.to_vec();
    let mut x = x0;
    if opts.mean_free {
        let mean = b.iter().sum::<f64>() / n as f64;
        let scale = b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if mean.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(LinalgError::NonZeroMean { mean });
        }
        remove_mean(&mut b);
        remove_mean(&mut x);
    }
    let bnorm = norm(&b);
    if bnorm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let max_iter = opts.max_iter.unwrap_or(10 * n.max(1));
    let target = opts.rel_tol * bnorm;
    let mut iterations = 0;
    let mut r = residual(m, &b, &x, opts.mean_free)?;
    let mut ap = vec![0.0; n];
    // Restart from the true residual whenever the recursive one claims
    // convergence but the true one disagrees.
    loop {
        let mut rr = dot(&r, &r);
        if rr.sqrt() <= target {
            break;
        }
        let mut p = r.clone();
        while iterations < max_iter {
            m.apply_into(&p, &mut ap)?;
            if opts.mean_free {
                remove_mean(&mut ap);
            }
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(LinalgError::Breakdown);
            }
            let alpha = rr / pap;
            axpy(alpha, &p, &mut x);
            axpy(-alpha, &ap, &mut r);
            iterations += 1;
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= target {
                break;
            }
            let beta = rr_new / rr;
            rr = rr_new;
            p.par_iter_mut()
                .zip(&r)
                .for_each(|(pi, ri)| *pi = ri + beta * *pi);
        }
        r = residual(m, &b, &x, opts.mean_free)?;
        let rel = norm(&r) / bnorm;
        if rel <= opts.rel_tol {
            break;
        }
        if iterations >= max_iter {
            return Err(LinalgError::NoConvergence {
                iterations,
                residual: rel,
            });
        }
    }
    if opts.mean_free {
        remove_mean(&mut x);
    }
    let rel_residual = norm(&residual(m, &b, &x, opts.mean_free)?) / bnorm;
    Ok(CgSolution {
        x,
        iterations,
        rel_residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PowerResult {
    /// Absolute value of the converged Rayleigh quotient.
    pub spectral_radius: f64,
    pub iterations: usize,
}

/// Spectral radius of a symmetric matrix by power iteration with the
/// default seed and an iteration cap of 10^6.
pub fn power_iteration(m: &CsrMatrix, tol: f64) -> Result<PowerResult, LinalgError> {
    power_iteration_seeded(m, tol, DEFAULT_SEED, 1_000_000)
}

/// Power iteration from a seeded uniform random start. Stops when the
/// eigen-residual `||A x - mu x||` drops below `tol |mu|` for the unit
/// iterate `x` and its Rayleigh quotient `mu`.
pub fn power_iteration_seeded(
    m: &CsrMatrix,
    tol: f64,
    seed: u64,
    max_iter: usize,
) -> Result<PowerResult, LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(GridError::ShapeMismatch {
            expected: n,
            found: m.cols(),
        }
        .into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; n];
    let mut last = 0.0;
    for it in 1..=max_iter {
        m.apply_into(&x, &mut y)?;
        let mu = dot(&x, &y);
        let res = block_sum(n, |k| (y[k] - mu * x[k]).powi(2)).sqrt();
        last = res / mu.abs().max(f64::MIN_POSITIVE);
        if res <= tol * mu.abs() {
            return Ok(PowerResult {
                spectral_radius: mu.abs(),
                iterations: it,
            });
        }
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(PowerResult {
                spectral_radius: 0.0,
                iterations: it,
            });
        }
        x.par_iter_mut().zip(&y).for_each(|(xi, yi)| *xi = yi / ny);
    }
    Err(LinalgError::NoConvergence {
        iterations: max_iter,
        residual: last,
    })
}

/// Eigenvalues of a periodic operator, one per Fourier mode.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    /// Ordered by mode tuple `(k_0, k_1, ...)`, `k_0` fastest.
    pub eigenvalues: Vec<Complex64>,
    pub spectral_radius: f64,
    /// `max |lambda| / min |lambda|` over eigenvalues that are not zero
    /// (relative to the spectral radius).
    pub condition_estimate: f64,
}

impl SpectrumReport {
    pub fn from_eigenvalues(eigenvalues: Vec<Complex64>) -> Self {
        let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = 1e-12 * spectral_radius;
        let min = eigenvalues
            .iter()
            .map(|z| z.norm())
            .filter(|&a| a > floor)
            .fold(f64::INFINITY, f64::min);
        let condition_estimate = if min.is_finite() {
            spectral_radius / min
        } else {
            f64::INFINITY
        };
        SpectrumReport {
            eigenvalues,
            spectral_radius,
            condition_estimate,
        }
    }

    /// Spectrum of `diag I + scale A`.
    pub fn shifted(&self, diag: f64, scale: f64) -> SpectrumReport {
        Self::from_eigenvalues(
            self.eigenvalues
                .iter()
                .map(|z| Complex64::new(diag, 0.0) + z * scale)
                .collect(),
        )
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.im.abs())
            .fold(0.0, f64::max)
    }

    pub fn min_real(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// `re,im` rows, one per eigenvalue.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "re,im")?;
        for z in &self.eigenvalues {
            writeln!(w, "{},{}", z.re, z.im)?;
        }
        Ok(())
    }
}

/// `e^{2 pi i t / l}`, exact when the angle is a multiple of a quarter turn.
fn unit_phase(t: u64, l: u64) -> Complex64 {
    if (4 * t).is_multiple_of(l) {
        match 4 * t / l {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    } else {
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * t as f64 / l as f64)
    }
}

/// Eigenvalues of the periodic assembly of `s` on `g`, evaluated from the
/// stencil symbol at `theta = 2 pi k / n` on every axis. Phases are reduced
/// exactly, so quarter-turn modes carry no rounding.
pub fn periodic_spectrum(s: &Stencil, g: &GridSpec) -> Result<SpectrumReport, LinalgError> {
    if !g.all_periodic() {
        return Err(LinalgError::NonPeriodic);
    }
    if s.dim() != g.dim() {
        return Err(GridError::DimMismatch {
            expected: g.dim(),
            found: s.dim(),
        }
        .into());
    }
    let dim = g.dim();
    let n: Vec<u64> = g.n().iter().map(|&v| v as u64).collect();
    let l = n.iter().fold(1u64, |acc, &v| acc.lcm(&v));
    let denominator = s
        .entries()
        .fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
    let den_f = to_f64(&Rational::from_integer(denominator.clone()));
    let factor = g.h().powi(s.h_power()) / den_f;
    let mut terms: Vec<(Vec<u64>, f64)> = Vec::with_capacity(s.len());
    for (o, c) in s.entries() {
        let num = (c * Rational::from_integer(denominator.clone()))
            .to_integer()
            .to_i64()
            .ok_or(LinalgError::CoefficientOverflow)?;
        // Per-axis phase step j * (l / n) mod l.
        let steps = o
            .components()
            .iter()
            .zip(&n)
            .map(|(&j, &na)| (j.rem_euclid(na as i64) as u64) * (l / na) % l)
            .collect();
        terms.push((steps, num as f64));
    }
    let total: usize = g.n().iter().product();
    let eigenvalues = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut k = vec![0u64; dim];
            for (a, ka) in k.iter_mut().enumerate() {
                *ka = (idx % g.n()[a]) as u64;
                idx /= g.n()[a];
            }
            let mut z = Complex64::new(0.0, 0.0);
            for (steps, num) in &terms {
                let t = steps
                    .iter()
                    .zip(&k)
                    .fold(0u64, |acc, (&st, &ka)| (acc + st * ka % l) % l);
                z += unit_phase(t, l) * *num;
            }
            z * factor
        })
        .collect();
    Ok(SpectrumReport::from_eigenvalues(eigenvalues))
}
