//! `stencil`: command-line driver for stencilkit. Every subcommand prints a
//! short report and, where it produces data, writes CSV/JSON files into
//! `--output-dir`.

mod config;

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stencilkit::generators::{bilaplacian, builtin, laplacian, make, BUILTIN_NAMES};
use stencilkit::grid::assemble;
use stencilkit::linalg::{periodic_spectrum, power_iteration_seeded, DEFAULT_SEED};
use stencilkit::pde::biharmonic;
use stencilkit::pde::cahn_hilliard::{
    run_benchmark, temporal_convergence, write_energy_csv, write_field_csv, BenchmarkConfig,
    TemporalConfig,
};
use stencilkit::pde::convergence::{
    converge_1d, converge_2d, default_ladder_1d, default_ladder_2d,
};
use stencilkit::stability::{amplification_curve, convergents, max_stable_dt};
use stencilkit::taylor::{analyze, normalized_series};
use stencilkit::{Boundary, GridSpec, Sign, SolveOptions, Stencil, StencilSpec, Style};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "stencil",
    version,
    about = "Exact finite-difference stencil algebra and the experiments built on it"
)]
struct Cli {
    /// Directory that receives CSV, JSON and Matrix Market output
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,
    /// JSON or TOML file with experiment parameters (unknown keys are rejected)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for internal parallelism [default: one per core]
    #[arg(long, global = true, env = "STENCILKIT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a derivative stencil and print its Taylor report
    Make {
        #[command(flatten)]
        spec: SpecArgs,
        /// Print the stencil as JSON instead
        #[arg(long)]
        json: bool,
    },
    /// Print the normalized Taylor series and accuracy of a stencil
    Analyze {
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Compose two stencils (outer applied to the result of inner)
    Compose {
        /// Outer stencil: builtin name, JSON text or JSON file
        #[arg(long)]
        outer: String,
        /// Inner stencil: builtin name, JSON text or JSON file
        #[arg(long)]
        inner: String,
        /// Print the composed stencil as JSON instead
        #[arg(long)]
        json: bool,
    },
    /// Forward-Euler stability limit dt <= alpha h^m of a 1D stencil
    Stability {
        #[command(flatten)]
        source: SourceArgs,
        /// Sign of the operator in df/dt = sign L f [default: the dissipative sign for m]
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<Sign>,
        /// Points of the theta -> |xi| curve
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        /// Time step of the curve as a fraction of the limit
        #[arg(long, default_value_t = 1.0)]
        dt_ratio: f64,
    },
    /// Assemble a stencil on a grid and write it in Matrix Market format
    Assemble {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Exact eigenvalues of a stencil on a periodic grid
    Spectrum {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Also report the spectrum of I + dt A
        #[arg(long)]
        dt: Option<f64>,
        /// Cross-check the spectral radius with power iteration
        #[arg(long)]
        power: bool,
        /// Residual tolerance of the power iteration
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        /// Seed of the power-iteration start vector [default: 0x5EEDCAFE]
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Nonzero counts of the 2D Laplacian and bi-Laplacian on a periodic box
    Sparsity {
        /// Side length of the box
        #[arg(long, default_value_t = 200.0)]
        length: f64,
        /// Grid spacings
        #[arg(long, value_delimiter = ',', default_value = "8,4,2,1,0.5")]
        h: Vec<f64>,
    },
    /// Grid refinement of the composed 1D third derivative
    #[command(name = "converge-1d")]
    Converge1d {
        /// Spacings [default: 2^-2 .. 2^-8]
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
    },
    /// Grid refinement of the composed 2D (4,3) mixed derivative
    #[command(name = "converge-2d")]
    Converge2d {
        /// Spacings [default: 2^(-2-k/4), k = 0..5]
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
    },
    /// Simply supported plate on the unit square, solved with CG
    Biharmonic {
        /// Cells per side [default: 8,16,32,64]
        #[arg(long, value_delimiter = ',')]
        cells: Option<Vec<usize>>,
        /// CG relative residual target [default: 1e-10]
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Cahn-Hilliard spinodal decomposition with an IMEX stepper
    #[command(name = "cahn-hilliard")]
    CahnHilliard {
        /// 2 or 3 [default: 2]
        #[arg(long)]
        dim: Option<usize>,
        /// Points per axis [default: 100]
        #[arg(long)]
        n: Option<usize>,
        /// Time step [default: 0.05]
        #[arg(long)]
        dt: Option<f64>,
        /// End time [default: 100]
        #[arg(long)]
        t_final: Option<f64>,
        /// IMEX order, 1 or 2 [default: 1]
        #[arg(long)]
        order: Option<u32>,
        /// Write the field every this many steps (0: final field only)
        #[arg(long, default_value_t = 0)]
        snapshot_every: usize,
    },
    /// Temporal convergence of the IMEX steppers against a fine reference
    #[command(name = "ch-temporal")]
    ChTemporal {
        /// Points per axis [default: 64]
        #[arg(long)]
        n: Option<usize>,
        /// End time [default: 10]
        #[arg(long)]
        t_final: Option<f64>,
        /// Time steps [default: 2^-3 .. 2^-7]
        #[arg(long, value_delimiter = ',')]
        dt: Option<Vec<f64>>,
        /// Reference time step [default: 2^-10]
        #[arg(long)]
        dt_reference: Option<f64>,
        /// Orders to study [default: 1,2]
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<u32>>,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// Derivative order
    #[arg(long)]
    p: u32,
    /// Requested accuracy order
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// centered, forward or backward
    #[arg(long, default_value = "centered")]
    style: Style,
}

#[derive(Args)]
struct SourceArgs {
    /// Built-in stencil
    #[arg(long, value_parser = PossibleValuesParser::new(BUILTIN_NAMES), conflicts_with_all = ["stencil", "p"])]
    builtin: Option<String>,
    /// Stencil as a builtin name, JSON text or path to a JSON file
    #[arg(long, conflicts_with = "p")]
    stencil: Option<String>,
    /// Generate the stencil: derivative order
    #[arg(long)]
    p: Option<u32>,
    /// Generate the stencil: accuracy order
    #[arg(long, default_value_t = 2)]
    q: u32,
    /// Generate the stencil: centered, forward or backward
    #[arg(long, default_value = "centered")]
    style: Style,
}

#[derive(Args)]
struct GridArgs {
    /// Points per axis; a single value is used on every axis
    #[arg(long, value_delimiter = ',', default_value = "25")]
    n: Vec<usize>,
    /// Grid spacing
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    /// periodic or simply_supported, on every axis
    #[arg(long, default_value = "periodic")]
    bc: Boundary,
}

enum Failure {
    /// Bad input: exit code 2.
    Usage(String),
    /// The computation itself failed: exit code 1.
    Compute(String),
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Compute(format!("i/o error: {e}"))
    }
}

fn compute<E: Display>(e: E) -> Failure {
    Failure::Compute(e.to_string())
}

fn usage<E: Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

type Outcome = Result<(), Failure>;

struct Context {
    output_dir: PathBuf,
    config: RunConfig,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>, Failure> {
        fs::create_dir_all(&self.output_dir)?;
        Ok(BufWriter::new(File::create(self.output_dir.join(name))?))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

fn resolve(text: &str) -> Result<Stencil, Failure> {
    if BUILTIN_NAMES.contains(&text) {
        return builtin(text).map_err(compute);
    }
    if text.trim_start().starts_with('{') {
        return Stencil::from_json(text).map_err(usage);
    }
    let body = fs::read_to_string(text).map_err(|e| {
        Failure::Usage(format!(
            "`{text}` is not a builtin, JSON or readable file: {e}"
        ))
    })?;
    Stencil::from_json(&body).map_err(usage)
}

impl SourceArgs {
    fn stencil(&self) -> Result<Stencil, Failure> {
        if let Some(name) = &self.builtin {
            return builtin(name).map_err(compute);
        }
        if let Some(text) = &self.stencil {
            return resolve(text);
        }
        match self.p {
            Some(p) => make(&StencilSpec::new(p, self.q, self.style)).map_err(usage),
            None => Err(Failure::Usage(
                "give one of --builtin, --stencil or --p".into(),
            )),
        }
    }
}

impl GridArgs {
    fn grid(&self, dim: usize) -> Result<GridSpec, Failure> {
        let n = match self.n.len() {
            1 => vec![self.n[0]; dim],
            d if d == dim => self.n.clone(),
            d => {
                return Err(Failure::Usage(format!(
                    "--n has {d} values but the stencil is {dim}-dimensional"
                )))
            }
        };
        GridSpec::new(n, self.h, vec![0.0; dim], vec![self.bc; dim]).map_err(usage)
    }
}

/// Prints the normalized series (1D) and the accuracy report.
fn print_analysis(s: &Stencil) -> Outcome {
    match analyze(s) {
        Ok((table, rep)) => {
            if s.dim() == 1 {
                println!("{}", table.format_series(rep.accuracy));
            }
            println!("{rep}");
            Ok(())
        }
        Err(e) => {
            if s.dim() == 1 {
                if let Ok(t) = normalized_series(s, 3) {
                    println!("{}", t.format_series(t.trunc().saturating_sub(1)));
                }
            }
            Err(compute(e))
        }
    }
}

fn dissipative_sign(m: i32) -> Sign {
    if m.rem_euclid(4) == 0 {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

fn write_json(ctx: &Context, name: &str, value: &serde_json::Value) -> Outcome {
    let mut w = ctx.create(name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(compute)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(compute)?;
    }
    let config = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    let ctx = Context {
        output_dir: cli.output_dir,
        config,
    };

    match cli.command {
        Command::Make { spec, json } => {
            let s = make(&StencilSpec::new(spec.p, spec.q, spec.style)).map_err(usage)?;
            if json {
                println!("{}", s.to_json());
                return Ok(());
            }
            println!("{s}");
            print_analysis(&s)
        }
        Command::Analyze { source } => print_analysis(&source.stencil()?),
        Command::Compose { outer, inner, json } => {
            let outer = resolve(&outer)?;
            let inner = resolve(&inner)?;
            let c = outer.compose(&inner).map_err(compute)?;
            if json {
                println!("{}", c.to_json());
                return Ok(());
            }
            println!("{c}");
            print_analysis(&c)
        }
        Command::Stability {
            source,
            sign,
            samples,
            dt_ratio,
        } => {
            let s = source.stencil()?;
            let sign = sign.unwrap_or_else(|| dissipative_sign(-s.h_power()));
            let first = max_stable_dt(&s, sign, &[]).map_err(compute)?;
            let report = max_stable_dt(&s, sign, &convergents(first.alpha_numeric, 1000))
                .map_err(compute)?;
            let curve = amplification_curve(&s, sign, dt_ratio, samples).map_err(compute)?;
            let mut w = ctx.create("amplification.csv")?;
            writeln!(w, "theta,abs_xi")?;
            for (theta, xi) in &curve {
                writeln!(w, "{theta},{xi}")?;
            }
            w.flush()?;
            let value = serde_json::to_value(&report).map_err(compute)?;
            write_json(&ctx, "stability.json", &value)?;
            println!("{}", serde_json::to_string_pretty(&value).map_err(compute)?);
            Ok(())
        }
        Command::Assemble { source, grid } => {
            let s = source.stencil()?;
            let g = grid.grid(s.dim())?;
            let m = assemble(&s, &g).map_err(compute)?;
            let mut w = ctx.create("matrix.mtx")?;
            m.write_matrix_market(&mut w)?;
            w.flush()?;
            let sp = m.sparsity();
            println!(
                "{} x {} matrix, {} nonzeros ({}%), written to {}",
                sp.rows,
                sp.cols,
                sp.nnz,
                sp.percentage_f64(),
                ctx.path("matrix.mtx").display()
            );
            Ok(())
        }
        Command::Spectrum {
            source,
            grid,
            dt,
            power,
            tol,
            seed,
        } => {
            let s = source.stencil()?;
            let g = grid.grid(s.dim())?;
            let spec = periodic_spectrum(&s, &g).map_err(usage)?;
            let mut w = ctx.create("spectrum.csv")?;
            spec.write_csv(&mut w)?;
            w.flush()?;
            let mut out = json!({
                "eigenvalues": spec.eigenvalues.len(),
                "spectral_radius": spec.spectral_radius,
                "condition_estimate": spec.condition_estimate,
                "max_imag": spec.max_imag(),
                "min_real": spec.min_real(),
            });
            if let Some(dt) = dt {
                let t = spec.shifted(1.0, dt);
                out["shifted"] = json!({
                    "dt": dt,
                    "spectral_radius": t.spectral_radius,
                    "condition_estimate": t.condition_estimate,
                });
            }
            if power {
                let seed = seed.or(ctx.config.seed).unwrap_or(DEFAULT_SEED);
                let m = assemble(&s, &g).map_err(compute)?;
                let pi = power_iteration_seeded(&m, tol, seed, 1_000_000).map_err(compute)?;
                out["power_iteration"] = json!({
                    "seed": seed,
                    "spectral_radius": pi.spectral_radius,
                    "iterations": pi.iterations,
                });
            }
            write_json(&ctx, "spectrum.json", &out)?;
            println!("{}", serde_json::to_string_pretty(&out).map_err(compute)?);
            Ok(())
        }
        Command::Sparsity { length, h } => {
            let ops = [
                ("laplacian", laplacian(2, 2).map_err(compute)?),
                ("bilaplacian", bilaplacian(2, 2).map_err(compute)?),
            ];
            let mut rows = Vec::new();
            for &h in &h {
                let g = GridSpec::periodic_box(2, length, h).map_err(usage)?;
                for (name, op) in &ops {
                    rows.push((h, *name, assemble(op, &g).map_err(compute)?.sparsity()));
                }
            }
            let mut w = ctx.create("sparsity.csv")?;
            writeln!(w, "h,unknowns,operator,nnz,percentage,percentage_exact")?;
            for (h, name, sp) in &rows {
                let pct = sp.percentage_f64();
                writeln!(
                    w,
                    "{h},{},{name},{},{pct},{}",
                    sp.rows, sp.nnz, sp.percentage
                )?;
            }
            w.flush()?;
            // The table is a convenience; a closed pipe is not an error.
            let mut out = io::stdout().lock();
            let _ = writeln!(
                out,
                "{:>8} {:>10} {:>12} {:>10} {:>10}",
                "h", "N", "operator", "nnz", "percent"
            );
            for (h, name, sp) in &rows {
                let _ = writeln!(
                    out,
                    "{h:>8} {:>10} {name:>12} {:>10} {:>10}",
                    sp.rows,
                    sp.nnz,
                    sp.percentage_f64()
                );
            }
            Ok(())
        }
        Command::Converge1d { h } => {
            let ladder = h
                .or_else(|| ctx.config.converge_1d.as_ref().map(|l| l.h.clone()))
                .unwrap_or_else(default_ladder_1d);
            let fit = converge_1d(&ladder).map_err(compute)?;
            let mut w = ctx.create("converge_1d.csv")?;
            fit.write_csv(&mut w, "h")?;
            w.flush()?;
            println!("{}", fit.summary());
            Ok(())
        }
        Command::Converge2d { h } => {
            let ladder = h
                .or_else(|| ctx.config.converge_2d.as_ref().map(|l| l.h.clone()))
                .unwrap_or_else(default_ladder_2d);
            let fit = converge_2d(&ladder).map_err(compute)?;
            let mut w = ctx.create("converge_2d.csv")?;
            fit.write_csv(&mut w, "h")?;
            w.flush()?;
            println!("{}", fit.summary());
            Ok(())
        }
        Command::Biharmonic { cells, rel_tol } => {
            let file = ctx.config.biharmonic.clone();
            let cells = cells
                .or_else(|| file.as_ref().map(|b| b.cells.clone()))
                .unwrap_or_else(|| biharmonic::DEFAULT_CELLS.to_vec());
            let opts = SolveOptions {
                rel_tol: rel_tol.or(file.map(|b| b.rel_tol)).unwrap_or(1e-10),
                ..SolveOptions::default()
            };
            let (fit, runs) = biharmonic::convergence(&cells, &opts).map_err(compute)?;
            let mut w = ctx.create("biharmonic.csv")?;
            writeln!(w, "cells,h,unknowns,error_linf,iterations,rel_residual")?;
            for r in &runs {
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.cells, r.h, r.unknowns, r.error_linf, r.iterations, r.rel_residual
                )?;
            }
            w.flush()?;
            println!("{}", fit.summary());
            Ok(())
        }
        Command::CahnHilliard {
            dim,
            n,
            dt,
            t_final,
            order,
            snapshot_every,
        } => {
            let mut config: BenchmarkConfig = ctx.config.cahn_hilliard.clone().unwrap_or_default();
            config.dim = dim.unwrap_or(config.dim);
            config.n = n.unwrap_or(config.n);
            config.dt = dt.unwrap_or(config.dt);
            config.t_final = t_final.unwrap_or(config.t_final);
            config.order = order.unwrap_or(config.order);
            config.params.validate().map_err(usage)?;
            config.steps().map_err(usage)?;
            let mut failure = None;
            let (state, summary) = run_benchmark(&config, |state| {
                if failure.is_some() || snapshot_every == 0 || state.steps % snapshot_every != 0 {
                    return;
                }
                let name = format!("field_{:06}.csv", state.steps);
                let written = ctx.create(&name).and_then(|mut w| {
                    write_field_csv(&mut w, state)
                        .and_then(|_| w.flush())
                        .map_err(Failure::from)
                });
                if let Err(e) = written {
                    failure = Some(e);
                }
            })
            .map_err(compute)?;
            if let Some(e) = failure {
                return Err(e);
            }
            let mut w = ctx.create("energy.csv")?;
            write_energy_csv(&mut w, &state.energy_history)?;
            w.flush()?;
            let mut w = ctx.create("field_final.csv")?;
            write_field_csv(&mut w, &state)?;
            w.flush()?;
            let value = json!({ "config": config, "summary": summary });
            write_json(&ctx, "cahn_hilliard.json", &value)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).map_err(compute)?
            );
            Ok(())
        }
        Command::ChTemporal {
            n,
            t_final,
            dt,
            dt_reference,
            orders,
        } => {
            let mut config: TemporalConfig = ctx.config.ch_temporal.clone().unwrap_or_default();
            config.n = n.unwrap_or(config.n);
            config.t_final = t_final.unwrap_or(config.t_final);
            config.dt_ladder = dt.unwrap_or(config.dt_ladder);
            config.dt_reference = dt_reference.unwrap_or(config.dt_reference);
            config.orders = orders.unwrap_or(config.orders);
            config.params.validate().map_err(usage)?;
            let fits = temporal_convergence(&config).map_err(compute)?;
            let mut w = ctx.create("ch_temporal.csv")?;
            writeln!(w, "order,dt,error")?;
            for (order, fit) in &fits {
                for (dt, e) in &fit.samples {
                    writeln!(w, "{order},{dt:e},{e:e}")?;
                }
            }
            w.flush()?;
            for (order, fit) in &fits {
                println!("order {order}: {}", fit.summary());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
