//! Cahn-Hilliard spinodal decomposition on periodic grids.
//!
//! `dc/dt = M Lap(f'(c) - kappa Lap c)`, discretized with the centered
//! Laplacian `L` and the bi-Laplacian `B = L o L`. The stiff `-M kappa B c`
//! term is implicit and `M L f'(c)` explicit:
//!
//! * order 1: `(I + dt M kappa B) c' = c + dt M L f'(c)`
//! * order 2: Crank-Nicolson on `B`, second-order Adams-Bashforth on the
//!   explicit term, started with one order-1 step.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::convergence::{fit_loglog, ConvergenceFit};
use super::PdeError;
use crate::generators::{bilaplacian, laplacian};
use crate::grid::{assemble, GridSpec};
use crate::linalg::{block_sum, cg_solve_from, SolveOptions};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CahnHilliardParams {
    /// Gradient energy coefficient.
    pub kappa: f64,
    pub mobility: f64,
    /// Height of the double well.
    pub rho: f64,
    pub c_alpha: f64,
    pub c_beta: f64,
    /// Mean of the initial field.
    pub c0: f64,
    /// Amplitude of the initial perturbation.
    pub eps: f64,
}

impl Default for CahnHilliardParams {
    fn default() -> Self {
        CahnHilliardParams {
            kappa: 2.0,
            mobility: 5.0,
            rho: 5.0,
            c_alpha: 0.3,
            c_beta: 0.7,
            c0: 0.5,
            eps: 0.01,
        }
    }
}

impl CahnHilliardParams {
    pub fn validate(&self) -> Result<(), PdeError> {
        let positive = [
            self.kappa,
            self.mobility,
            self.rho,
            self.c_alpha,
            self.c_beta,
            self.c0,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite()))
            || self.eps.is_nan()
            || self.eps < 0.0
        {
            return Err(PdeError::InvalidConfig(
                "Cahn-Hilliard parameters must be positive".into(),
            ));
        }
        if self.c_alpha >= self.c_beta {
            return Err(PdeError::InvalidConfig(
                "c_alpha must be below c_beta".into(),
            ));
        }
        Ok(())
    }

    /// Double well `rho (c - c_alpha)^2 (c - c_beta)^2`.
    pub fn f_chem(&self, c: f64) -> f64 {
        self.rho * (c - self.c_alpha).powi(2) * (c - self.c_beta).powi(2)
    }

    pub fn f_chem_prime(&self, c: f64) -> f64 {
        2.0 * self.rho
            * (c - self.c_alpha)
            * (c - self.c_beta)
            * (2.0 * c - self.c_alpha - self.c_beta)
    }
}

/// Initial field at a point of the 2D or 3D benchmark domain.
pub fn initial_value(p: &[f64], params: &CahnHilliardParams) -> f64 {
    let cos = f64::cos;
    let pert = match p {
        [x, y] => {
            cos(0.105 * x) * cos(0.11 * y)
                + (cos(0.13 * x) * cos(0.087 * y)).powi(2)
                + cos(0.025 * x - 0.15 * y) * cos(0.07 * x - 0.02 * y)
        }
        [x, y, z] => {
            cos(0.105 * x) * cos(0.11 * y) * cos(0.11 * z)
                + (cos(0.13 * x) * cos(0.087 * y) * cos(0.1 * z)).powi(2)
                + cos(0.025 * x - 0.15 * y - 0.1 * z) * cos(0.07 * x - 0.02 * y + 0.01 * z)
        }
        _ => 0.0,
    };
    params.c0 + params.eps * pert
}

#[derive(Clone, Debug, PartialEq)]
pub struct CahnHilliardState {
    pub grid: GridSpec,
    pub c: Vec<f64>,
    pub t: f64,
    pub steps: usize,
    /// `(t, F)` after every recorded step.
    pub energy_history: Vec<(f64, f64)>,
}

/// Samples the initial condition on a periodic 2D or 3D grid.
pub fn ch_init(
    grid: &GridSpec,
    params: &CahnHilliardParams,
) -> Result<CahnHilliardState, PdeError> {
    params.validate()?;
    if !grid.all_periodic() || !(2..=3).contains(&grid.dim()) {
        return Err(PdeError::InvalidConfig(
            "Cahn-Hilliard runs need a periodic 2D or 3D grid".into(),
        ));
    }
    let c = grid.sample(|p| initial_value(p, params));
    let energy = free_energy(grid, &c, params);
    Ok(CahnHilliardState {
        grid: grid.clone(),
        c,
        t: 0.0,
        steps: 0,
        energy_history: vec![(0.0, energy)],
    })
}

/// `h^d sum [f_chem(c) + kappa/2 |grad c|^2]` with one-sided differences
/// `(c[i + e_a] - c[i]) / h` on every axis. These are the differences whose
/// adjoint product is the centered Laplacian, so the scheme's variational
/// derivative is `f'(c) - kappa L c`.
pub fn free_energy(grid: &GridSpec, c: &[f64], params: &CahnHilliardParams) -> f64 {
    let n = grid.n();
    let h = grid.h();
    let dim = grid.dim();
    let mut strides = vec![1usize; dim];
    for a in 1..dim {
        strides[a] = strides[a - 1] * n[a - 1];
    }
    let density = block_sum(c.len(), |k| {
        let mut grad2 = 0.0;
        for a in 0..dim {
            let i = (k / strides[a]) % n[a];
            let next = if i + 1 == n[a] {
                k - i * strides[a]
            } else {
                k + strides[a]
            };
            grad2 += ((c[next] - c[k]) / h).powi(2);
        }
        params.f_chem(c[k]) + 0.5 * params.kappa * grad2
    });
    density * h.powi(dim as i32)
}

/// Total of `c` over the grid (`h^d` times the plain sum).
pub fn mass(grid: &GridSpec, c: &[f64]) -> f64 {
    c.iter().sum::<f64>() * grid.h().powi(grid.dim() as i32)
}

/// Semi-implicit stepper bound to one grid, time step and scheme order.
pub struct ImexStepper {
    params: CahnHilliardParams,
    dt: f64,
    order: u32,
    lap: CsrMatrix,
    bilap: CsrMatrix,
    first_order: CsrMatrix,
    crank_nicolson: Option<CsrMatrix>,
    prev_explicit: Option<Vec<f64>>,
    opts: SolveOptions,
    /// CG iterations used by the latest step.
    pub last_iterations: usize,
}

impl ImexStepper {
    pub fn new(
        grid: &GridSpec,
        params: &CahnHilliardParams,
        dt: f64,
        order: u32,
        opts: SolveOptions,
    ) -> Result<Self, PdeError> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PdeError::InvalidConfig(format!(
                "time step must be positive, got {dt}"
            )));
        }
        if !(1..=2).contains(&order) {
            return Err(PdeError::InvalidConfig(format!(
                "IMEX order must be 1 or 2, got {order}"
            )));
        }
        let lap = assemble(&laplacian(grid.dim(), 2)?, grid)?;
        let bilap = assemble(&bilaplacian(grid.dim(), 2)?, grid)?;
        let mk = params.mobility * params.kappa;
        let first_order = bilap.shifted(1.0, dt * mk)?;
        let crank_nicolson = if order == 2 {
            Some(bilap.shifted(1.0, 0.5 * dt * mk)?)
        } else {
            None
        };
        Ok(ImexStepper {
            params: *params,
            dt,
            order,
            lap,
            bilap,
            first_order,
            crank_nicolson,
            prev_explicit: None,
            opts,
            last_iterations: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `M L f'(c)`.
    fn explicit_term(&self, c: &[f64]) -> Result<Vec<f64>, PdeError> {
        let mu: Vec<f64> = c.par_iter().map(|&v| self.params.f_chem_prime(v)).collect();
        let mut out = self.lap.apply(&mu)?;
        out.par_iter_mut().for_each(|v| *v *= self.params.mobility);
        Ok(out)
    }

    /// Advances `state` by one step and appends its free energy.
    pub fn step(&mut self, state: &mut CahnHilliardState) -> Result<(), PdeError> {
        let dt = self.dt;
        let explicit = self.explicit_term(&state.c)?;
        let (matrix, rhs) = match (&self.crank_nicolson, &self.prev_explicit) {
            (Some(cn), Some(prev)) => {
                let bc = self.bilap.apply(&state.c)?;
                let half = 0.5 * dt * self.params.mobility * self.params.kappa;
                let rhs: Vec<f64> = (0..state.c.len())
                    .into_par_iter()
                    .map(|i| state.c[i] - half * bc[i] + dt * (1.5 * explicit[i] - 0.5 * prev[i]))
                    .collect();
                (cn, rhs)
            }
            _ => {
                let rhs: Vec<f64> = state
                    .c
                    .par_iter()
                    .zip(&explicit)
                    .map(|(c, e)| c + dt * e)
                    .collect();
                (&self.first_order, rhs)
            }
        };
        let sol = cg_solve_from(matrix, &rhs, state.c.clone(), &self.opts)?;
        self.last_iterations = sol.iterations;
        if self.order == 2 {
            self.prev_explicit = Some(explicit);
        }
        state.c = sol.x;
        state.steps += 1;
        // Accumulate time as steps * dt so long runs do not drift.
        state.t = state.steps as f64 * dt;
        let energy = free_energy(&state.grid, &state.c, &self.params);
        state.energy_history.push((state.t, energy));
        Ok(())
    }
}

/// Settings for a benchmark run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub dim: usize,
    /// Points per axis.
    pub n: usize,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub order: u32,
    pub rel_tol: f64,
    pub params: CahnHilliardParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            dim: 2,
            n: 100,
            h: 1.0,
            dt: 0.05,
            t_final: 100.0,
            order: 1,
            rel_tol: 1e-10,
            params: CahnHilliardParams::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn grid(&self) -> Result<GridSpec, PdeError> {
        Ok(GridSpec::periodic(self.dim, self.n, self.h)?)
    }

    pub fn steps(&self) -> Result<usize, PdeError> {
        let s = self.t_final / self.dt;
        if !(s.is_finite() && s >= 0.0) || (s - s.round()).abs() > 1e-9 * s.max(1.0) {
            return Err(PdeError::InvalidConfig(format!(
                "t_final {} is not a whole number of steps of {}",
                self.t_final, self.dt
            )));
        }
        Ok(s.round() as usize)
    }
}

/// What a benchmark run observed along the way.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub steps: usize,
    pub t_final: f64,
    pub initial_mass: f64,
    /// Largest `|mass - initial| / initial` seen after any step.
    pub max_mass_drift: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Largest relative energy increase between consecutive steps, counted
    /// from the end of the first step.
    pub max_energy_increase: f64,
    pub c_min: f64,
    pub c_max: f64,
    pub total_cg_iterations: usize,
}

/// Runs the benchmark, calling `observe` after every step.
pub fn run_benchmark<F>(
    config: &BenchmarkConfig,
    mut observe: F,
) -> Result<(CahnHilliardState, BenchmarkSummary), PdeError>
where
    F: FnMut(&CahnHilliardState),
{
    let grid = config.grid()?;
    let steps = config.steps()?;
    let opts = SolveOptions {
        rel_tol: config.rel_tol,
        ..SolveOptions::default()
    };
    let mut state = ch_init(&grid, &config.params)?;
    let mut stepper = ImexStepper::new(&grid, &config.params, config.dt, config.order, opts)?;
    let initial_mass = mass(&grid, &state.c);
    let initial_energy = state.energy_history[0].1;
    let mut summary = BenchmarkSummary {
        steps,
        t_final: 0.0,
        initial_mass,
        max_mass_drift: 0.0,
        initial_energy,
        final_energy: initial_energy,
        max_energy_increase: 0.0,
        c_min: state.c.iter().copied().fold(f64::INFINITY, f64::min),
        c_max: state.c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        total_cg_iterations: 0,
    };
    for k in 0..steps {
        stepper.step(&mut state)?;
        summary.total_cg_iterations += stepper.last_iterations;
        let m = mass(&grid, &state.c);
        summary.max_mass_drift = summary
            .max_mass_drift
            .max(((m - initial_mass) / initial_mass).abs());
        for &v in &state.c {
            summary.c_min = summary.c_min.min(v);
            summary.c_max = summary.c_max.max(v);
        }
        if k >= 1 {
            let hist = &state.energy_history;
            let (prev, cur) = (hist[hist.len() - 2].1, hist[hist.len() - 1].1);
            summary.max_energy_increase =
                summary.max_energy_increase.max((cur - prev) / prev.abs());
        }
        observe(&state);
    }
    summary.t_final = state.t;
    summary.final_energy = state
        .energy_history
        .last()
        .map(|e| e.1)
        .unwrap_or(initial_energy);
    Ok((state, summary))
}

/// Temporal refinement at fixed grid against a fine-step reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemporalConfig {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    pub t_final: f64,
    pub dt_ladder: Vec<f64>,
    pub dt_reference: f64,
    pub orders: Vec<u32>,
    pub rel_tol: f64,
    pub params: CahnHilliardParams,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            dim: 2,
            n: 64,
            h: 1.0,
            t_final: 10.0,
            dt_ladder: (3..=7).map(|k| 2f64.powi(-k)).collect(),
            dt_reference: 2f64.powi(-10),
            orders: vec![1, 2],
            rel_tol: 1e-13,
            params: CahnHilliardParams::default(),
        }
    }
}

/// Field at `t_final` after stepping from the initial condition.
pub fn evolve(
    grid: &GridSpec,
    params: &CahnHilliardParams,
    dt: f64,
    t_final: f64,
    order: u32,
    rel_tol: f64,
) -> Result<Vec<f64>, PdeError> {
    let config = BenchmarkConfig {
        dim: grid.dim(),
        n: grid.n()[0],
        h: grid.h(),
        dt,
        t_final,
        order,
        rel_tol,
        params: *params,
    };
    let steps = config.steps()?;
    let opts = SolveOptions {
        rel_tol,
        ..SolveOptions::default()
    };
    let mut state = ch_init(grid, params)?;
    let mut stepper = ImexStepper::new(grid, params, dt, order, opts)?;
    for _ in 0..steps {
        stepper.step(&mut state)?;
    }
    Ok(state.c)
}

/// Per-order fits of the RMS difference to the reference field.
pub fn temporal_convergence(
    config: &TemporalConfig,
) -> Result<Vec<(u32, ConvergenceFit)>, PdeError> {
    let grid = GridSpec::periodic(config.dim, config.n, config.h)?;
    config
        .orders
        .iter()
        .map(|&order| {
            let reference = evolve(
                &grid,
                &config.params,
                config.dt_reference,
                config.t_final,
                order,
                config.rel_tol,
            )?;
            let samples = config
                .dt_ladder
                .par_iter()
                .map(|&dt| {
                    let c = evolve(
                        &grid,
                        &config.params,
                        dt,
                        config.t_final,
                        order,
                        config.rel_tol,
                    )?;
                    Ok((dt, rms_difference(&c, &reference)))
                })
                .collect::<Result<Vec<_>, PdeError>>()?;
            Ok((order, fit_loglog(&samples)?))
        })
        .collect()
}

pub fn rms_difference(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (s / a.len() as f64).sqrt()
}

/// `(t, F)` rows.
pub fn write_energy_csv<W: Write>(mut w: W, history: &[(f64, f64)]) -> io::Result<()> {
    writeln!(w, "t,F")?;
    for (t, f) in history {
        writeln!(w, "{t},{f}")?;
    }
    Ok(())
}

/// One row per grid point: coordinates then `c`.
pub fn write_field_csv<W: Write>(mut w: W, state: &CahnHilliardState) -> io::Result<()> {
    let names = ["x", "y", "z"];
    let header: Vec<&str> = names[..state.grid.dim()].to_vec();
    writeln!(w, "{},c", header.join(","))?;
    for (k, c) in state.c.iter().enumerate() {
        let p = state.grid.coordinates(k);
        let coords: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{c}", coords.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_energy_on_full_grid() {
        // Reference values from an independent numpy evaluation.
        let g = GridSpec::periodic(2, 200, 1.0).unwrap();
        let p = CahnHilliardParams::default();
        let st = ch_init(&g, &p).unwrap();
        let f = free_energy(&g, &st.c, &p);
        assert!((f / 319.1546586565226 - 1.0).abs() < 1e-12, "{f}");
        let m = mass(&g, &st.c);
        assert!((m / 20101.904733992975 - 1.0).abs() < 1e-13, "{m}");
    }

    #[test]
    fn double_well() {
        let p = CahnHilliardParams::default();
        assert_eq!(p.f_chem(0.3), 0.0);
        assert_eq!(p.f_chem(0.7), 0.0);
        assert!((p.f_chem(0.5) - 0.008).abs() < 1e-17);
        assert_eq!(p.f_chem_prime(0.5), 0.0);
        let h = 1e-6;
        for c in [0.1, 0.42, 0.9] {
            let fd = (p.f_chem(c + h) - p.f_chem(c - h)) / (2.0 * h);
            assert!((fd - p.f_chem_prime(c)).abs() < 1e-8);
        }
    }

    #[test]
    fn initial_conditions() {
        let p = CahnHilliardParams::default();
        assert!((initial_value(&[0.0, 0.0, 0.0], &p) - 0.53).abs() < 1e-15);
        let flat = CahnHilliardParams { eps: 0.0, ..p };
        let g = GridSpec::periodic(2, 8, 1.0).unwrap();
        let s = ch_init(&g, &flat).unwrap();
        assert!(s.c.iter().all(|&v| v == 0.5));
        assert!((s.energy_history[0].1 - 64.0 * 0.008).abs() < 1e-12);
    }

    #[test]
    fn constant_field_is_fixed_point() {
        let p = CahnHilliardParams {
            eps: 0.0,
            c0: 0.41,
            ..CahnHilliardParams::default()
        };
        let g = GridSpec::periodic(2, 16, 1.0).unwrap();
        let mut s = ch_init(&g, &p).unwrap();
        for order in [1, 2] {
            let mut st = ImexStepper::new(&g, &p, 0.1, order, SolveOptions::default()).unwrap();
            for _ in 0..3 {
                st.step(&mut s).unwrap();
            }
            assert!(s.c.iter().all(|&v| (v - 0.41).abs() < 1e-12));
        }
    }

    #[test]
    fn single_mode_gradient_energy() {
        let p = CahnHilliardParams::default();
        let n = 64;
        let length = 32.0;
        let h = length / n as f64;
        let g = GridSpec::periodic(2, n, h).unwrap();
        let a = 0.05;
        let kw = 2.0 * std::f64::consts::PI / length;
        let c = g.sample(|x| p.c_alpha + a * (kw * x[0]).sin());
        let chem: f64 = c.iter().map(|&v| p.f_chem(v)).sum::<f64>() * h * h;
        let grad = free_energy(&g, &c, &p) - chem;
        // Forward differences see the mode through 4 sin^2(k h / 2) / h^2.
        let discrete_k2 = 4.0 * (kw * h / 2.0).sin().powi(2) / (h * h);
        let expected = 0.5 * p.kappa * a * a * discrete_k2 * length * length / 2.0;
        assert!((grad - expected).abs() < 1e-12 * expected);
        let continuous = 0.5 * p.kappa * a * a * kw * kw * length * length / 2.0;
        assert!((grad / continuous - 1.0).abs() < 1e-2);
    }

    #[test]
    fn short_run_conserves_mass_and_dissipates() {
        let config = BenchmarkConfig {
            n: 32,
            t_final: 5.0,
            ..BenchmarkConfig::default()
        };
        let (_, s) = run_benchmark(&config, |_| {}).unwrap();
        assert_eq!(s.steps, 100);
        assert!(s.max_mass_drift < 1e-12);
        assert!(s.max_energy_increase <= 1e-12);
        assert!(s.final_energy < s.initial_energy);
    }

    #[test]
    fn rejects_bad_configuration() {
        let g = GridSpec::periodic(2, 8, 1.0).unwrap();
        let p = CahnHilliardParams::default();
        assert!(ImexStepper::new(&g, &p, 0.1, 3, SolveOptions::default()).is_err());
        assert!(ImexStepper::new(&g, &p, -0.1, 1, SolveOptions::default()).is_err());
        let bad = CahnHilliardParams { c_alpha: 0.8, ..p };
        assert!(ch_init(&g, &bad).is_err());
        let cfg = BenchmarkConfig {
            t_final: 1.01,
            dt: 0.5,
            ..BenchmarkConfig::default()
        };
        assert!(cfg.steps().is_err());
    }
}
