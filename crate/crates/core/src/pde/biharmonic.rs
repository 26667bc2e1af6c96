//! Simply supported plate: `Delta^2 f = 4 pi^4 sin(pi x) sin(pi y)` on the
//! unit square with `f = 0` and `f'' = 0` on the boundary. The exact
//! solution is `sin(pi x) sin(pi y)`.

use std::f64::consts::PI;

use serde::Serialize;

use super::convergence::{fit_loglog, ConvergenceFit};
use super::PdeError;
use crate::generators::bilaplacian;
use crate::grid::{assemble, GridSpec};
use crate::linalg::{cg_solve, SolveOptions};

/// Cells per side used by default.
pub const DEFAULT_CELLS: [usize; 4] = [8, 16, 32, 64];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BiharmonicRun {
    pub cells: usize,
    pub h: f64,
    pub unknowns: usize,
    /// Max-norm error against the exact solution at the unknowns.
    pub error_linf: f64,
    pub iterations: usize,
    pub rel_residual: f64,
}

pub fn exact_solution(p: &[f64]) -> f64 {
    (PI * p[0]).sin() * (PI * p[1]).sin()
}

pub fn load(p: &[f64]) -> f64 {
    4.0 * PI.powi(4) * exact_solution(p)
}

/// Solves on a `cells x cells` grid; returns the run summary and the
/// discrete solution at the interior points.
pub fn solve(cells: usize, opts: &SolveOptions) -> Result<(BiharmonicRun, Vec<f64>), PdeError> {
    let g = GridSpec::unit_simply_supported(2, cells)?;
    let m = assemble(&bilaplacian(2, 2)?, &g)?;
    let b = g.sample(load);
    let sol = cg_solve(&m, &b, opts)?;
    let exact = g.sample(exact_solution);
    let error_linf = sol
        .x
        .iter()
        .zip(&exact)
        .map(|(a, e)| (a - e).abs())
        .fold(0.0, f64::max);
    Ok((
        BiharmonicRun {
            cells,
            h: g.h(),
            unknowns: g.unknown_count(),
            error_linf,
            iterations: sol.iterations,
            rel_residual: sol.rel_residual,
        },
        sol.x,
    ))
}

/// Solves on every grid of the ladder and fits the max-norm errors.
pub fn convergence(
    cells: &[usize],
    opts: &SolveOptions,
) -> Result<(ConvergenceFit, Vec<BiharmonicRun>), PdeError> {
    let runs = cells
        .iter()
        .map(|&n| solve(n, opts).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()?;
    let samples: Vec<(f64, f64)> = runs.iter().map(|r| (r.h, r.error_linf)).collect();
    Ok((fit_loglog(&samples)?, runs))
}
