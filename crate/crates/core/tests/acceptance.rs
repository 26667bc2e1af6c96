//! End-to-end acceptance checks. Each test prints one PASS/FAIL line per
//! criterion (plus indented detail lines) straight to stderr so the verdicts
//! show up even when libtest captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stencilkit::generators::{bilaplacian, builtin, laplacian, make};
use stencilkit::grid::assemble;
use stencilkit::linalg::{periodic_spectrum, power_iteration};
use stencilkit::pde::biharmonic;
use stencilkit::pde::cahn_hilliard::{
    run_benchmark, temporal_convergence, BenchmarkConfig, TemporalConfig,
};
use stencilkit::pde::convergence::{
    converge_1d, converge_2d, default_ladder_1d, default_ladder_2d,
};
use stencilkit::stability::{max_stable_dt, symbol, Sign};
use stencilkit::taylor::{
    analyze, expand, min_accuracy_check, normalized_series, report, retarget,
};
use stencilkit::{
    ratio, to_f64, GridSpec, MultiIndex, Offset, Rational, SolveOptions, Stencil, StencilError,
    StencilSpec, Style, TaylorTable,
};

// Runtime bounds per criterion.
const BOUND_ALGEBRA: Duration = Duration::from_secs(1);
const BOUND_LEMMA: Duration = Duration::from_secs(10);
const BOUND_STABILITY: Duration = Duration::from_secs(5);
const BOUND_CONVERGENCE: Duration = Duration::from_secs(60);
const BOUND_SPECTRUM: Duration = Duration::from_secs(30);
const BOUND_CAHN_HILLIARD: Duration = Duration::from_secs(300);

// Tolerances.
const ALPHA_TOL: f64 = 1e-9;
const SLOPE_TOL_FD: f64 = 0.05;
const SLOPE_TOL_PLATE: f64 = 0.1;
const COEFF_REL_TOL: f64 = 0.05;
const FIT_RMS_MAX: f64 = 0.05;
const POWER_TOL: f64 = 1e-7;
const POWER_MATCH: f64 = 1e-6;
const MATMUL_REL_TOL: f64 = 1e-13;
const MASS_REL_TOL: f64 = 1e-8;
const ENERGY_SLACK: f64 = 1e-12;
const FIELD_BAND: (f64, f64) = (0.1, 0.9);
const TEMPORAL_SLOPE_TOL: f64 = 0.15;
const SYMBOL_REL_TOL: f64 = 1e-12;

/// Collects named sub-checks and prints a single verdict for a criterion.
struct Criterion {
    id: u32,
    title: &'static str,
    start: Instant,
    bound: Duration,
    failures: Vec<String>,
    details: Vec<String>,
}

impl Criterion {
    fn new(id: u32, title: &'static str, bound: Duration) -> Self {
        Criterion {
            id,
            title,
            start: Instant::now(),
            bound,
            failures: Vec::new(),
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        self.details
            .push(format!("    [{}] {what}", if ok { "ok" } else { "FAIL" }));
        if !ok {
            self.failures.push(what);
        }
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        let in_time = elapsed <= self.bound;
        self.check(
            in_time,
            format!("runtime {:.2?} within {:.0?}", elapsed, self.bound),
        );
        let verdict = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let mut out = format!("criterion {} {verdict}: {}\n", self.id, self.title);
        for d in &self.details {
            out.push_str(d);
            out.push('\n');
        }
        let _ = std::io::stderr().write_all(out.as_bytes());
        assert!(
            self.failures.is_empty(),
            "criterion {} failed: {:?}",
            self.id,
            self.failures
        );
    }
}

fn r(n: i64, d: i64) -> Rational {
    ratio(n, d)
}

/// Parses a printed decimal such as "0.003125" into an exact rational.
fn decimal(text: &str) -> Rational {
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    Rational::new(digits, BigInt::from(10u32).pow(frac.len() as u32))
}

fn round_to(x: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (x * s).round() / s
}

fn centered(p: u32, q: u32) -> Stencil {
    make(&StencilSpec::new(p, q, Style::Centered)).unwrap()
}

fn series_prefix(t: &TaylorTable, k: usize) -> Vec<Rational> {
    t.series_1d().unwrap().into_iter().take(k).collect()
}

#[test]
fn criterion_1_exact_algebra() {
    let mut c = Criterion::new(1, "exact stencil algebra and Taylor tables", BOUND_ALGEBRA);
    let d1 = centered(1, 2);
    let d2 = centered(2, 2);

    let (t, rep) = analyze(&d1.compose(&d1).unwrap()).unwrap();
    c.check(
        t.beta() == &MultiIndex::from(2) && series_prefix(&t, 3) == vec![r(1, 1), r(0, 1), r(1, 3)],
        format!("d1 o d1 -> {}", t.format_series(2)),
    );
    c.check(
        rep.leading_coefficient() == Some(&r(1, 3)),
        "d1 o d1 leading error 1/3",
    );

    let fwd1 = make(&StencilSpec::new(1, 1, Style::Forward)).unwrap();
    let fwd2 = make(&StencilSpec::new(2, 1, Style::Forward)).unwrap();
    let (t, _) = analyze(&fwd1.compose(&fwd2).unwrap()).unwrap();
    c.check(
        t.beta() == &MultiIndex::from(3) && series_prefix(&t, 3) == vec![r(1, 1), r(3, 2), r(5, 4)],
        format!("forward f'' o f' -> {}", t.format_series(2)),
    );

    let (_, rep) = analyze(&centered(1, 4).compose(&d1).unwrap()).unwrap();
    c.check(
        rep.accuracy == 2 && rep.leading_coefficient() == Some(&r(1, 6)),
        format!("4th o 2nd first derivative: {rep}"),
    );

    let table = expand(&d2, 8).unwrap().normalized().unwrap();
    let moved = retarget(&table, &Offset::from(1)).unwrap();
    c.check(
        series_prefix(&moved, 4) == vec![r(1, 1), r(1, 1), r(7, 12), r(1, 4)],
        format!("retarget f'' by +1 -> {}", moved.format_series(3)),
    );

    // Outer centered f' whose two taps see different inner stencils: the
    // centered f' at +1 and the one-sided {-1/2, 2, -3/2}/h at -1.
    let one_sided = Stencil::from_weights_1d(-1, 2, &[(1, -1), (0, 4), (-1, -3)]).unwrap();
    let mixed = Stencil::linear_combine(&[
        (r(1, 2), &d1.shift(&Offset::from(1)).unwrap()),
        (r(-1, 2), &one_sided.shift(&Offset::from(-1)).unwrap()),
    ])
    .unwrap();
    let series = normalized_series(&mixed, 3).unwrap();
    c.check(
        series.beta() == &MultiIndex::from(2)
            && series_prefix(&series, 3) == vec![r(-1, 2), r(0, 1), r(-1, 24)],
        format!(
            "location-dependent composition -> {} (expected {{-1/2, 0, -1/24, ...}}, beta=2)",
            series.format_series(2)
        ),
    );
    c.check(
        matches!(report(&series), Err(StencilError::NotNormalized { .. })),
        "location-dependent composition is not a valid second derivative",
    );
    c.finish();
}

#[test]
fn criterion_2_composition_accuracy_rule() {
    let mut c = Criterion::new(
        2,
        "composed accuracy and leading-coefficient rule",
        BOUND_LEMMA,
    );
    let mut specs = Vec::new();
    for style in Style::ALL {
        for p in 1..=3 {
            for q in 1..=4 {
                specs.push(StencilSpec::new(p, q, style));
            }
        }
    }
    let stencils: Vec<(StencilSpec, Stencil)> =
        specs.iter().map(|s| (*s, make(s).unwrap())).collect();
    let (mut pairs, mut cancelled, mut unequal) = (0, 0, 0);
    let mut violations = Vec::new();
    for (sa, a) in &stencils {
        for (sb, b) in &stencils {
            pairs += 1;
            match min_accuracy_check(a, b) {
                Ok(chk) => {
                    if chk.cancelled() {
                        cancelled += 1;
                    }
                    if chk.inner.accuracy != chk.outer.accuracy {
                        unequal += 1;
                    }
                }
                Err(e) => violations.push(format!("{sa:?} o {sb:?}: {e}")),
            }
        }
    }
    c.check(pairs >= 50, format!("{pairs} stencil pairs"));
    c.check(
        violations.is_empty(),
        format!(
            "rule holds for every pair ({unequal} with q_a != q_b, {cancelled} exact cancellations); violations: {violations:?}"
        ),
    );
    c.finish();
}

#[test]
fn criterion_3_stability_constants() {
    let mut c = Criterion::new(3, "forward-Euler stability constants", BOUND_STABILITY);
    let cases = [
        ("dxxxx", Sign::Minus, r(1, 8), 4, (-2, 2)),
        ("dxx-dxx", Sign::Minus, r(1, 8), 4, (-2, 2)),
        ("dx-dx-dxx", Sign::Minus, r(27, 32), 4, (-3, 3)),
        ("dx-dx", Sign::Plus, r(2, 1), 2, (-2, 2)),
        ("dxx", Sign::Plus, r(1, 2), 2, (-1, 1)),
    ];
    let mut alphas = Vec::new();
    for (name, sign, alpha, m, support) in cases {
        let rep = max_stable_dt(&builtin(name).unwrap(), sign, &[]).unwrap();
        let expected = to_f64(&alpha);
        alphas.push(rep.alpha_numeric);
        c.check(
            (rep.alpha_numeric - expected).abs() <= ALPHA_TOL
                && rep.m == m
                && rep.support == support,
            format!(
                "{name}: alpha {:.12} vs {alpha}, m {}, support {:?}",
                rep.alpha_numeric, rep.m, rep.support
            ),
        );
    }
    c.check(
        (alphas[2] / alphas[0] - 6.75).abs() < 1e-8,
        format!("wide/compact ratio {:.10}", alphas[2] / alphas[0]),
    );
    c.finish();
}

#[test]
fn criterion_4_convergence_fits() {
    let mut c = Criterion::new(4, "grid-refinement convergence fits", BOUND_CONVERGENCE);
    let f1 = converge_1d(&default_ladder_1d()).unwrap();
    c.check(
        (f1.slope - 2.0).abs() <= SLOPE_TOL_FD
            && (f1.coefficient / 4.0 - 1.0).abs() <= COEFF_REL_TOL
            && f1.rms_residual < FIT_RMS_MAX,
        format!("1D third derivative: {}", f1.summary()),
    );
    let f2 = converge_2d(&default_ladder_2d()).unwrap();
    c.check(
        (f2.slope - 4.0).abs() <= SLOPE_TOL_FD
            && (f2.coefficient * 30.0 - 1.0).abs() <= COEFF_REL_TOL
            && f2.rms_residual < FIT_RMS_MAX,
        format!("2D (4,3) derivative: {}", f2.summary()),
    );
    let (fb, runs) =
        biharmonic::convergence(&biharmonic::DEFAULT_CELLS, &SolveOptions::default()).unwrap();
    c.check(
        (fb.slope - 2.0).abs() <= SLOPE_TOL_PLATE && fb.rms_residual < FIT_RMS_MAX,
        format!("biharmonic plate h = 1/8..1/64: {}", fb.summary()),
    );
    c.check(
        runs.iter().all(|r| r.rel_residual <= 1e-10),
        "every plate solve meets the residual contract",
    );
    c.finish();
}

#[test]
fn criterion_5_bilaplacian_spectra() {
    let mut c = Criterion::new(
        5,
        "bi-Laplacian spectral radius and conditioning",
        BOUND_SPECTRUM,
    );
    let b = bilaplacian(2, 2).unwrap();
    // (h, dt, rho(B), rho(I + dt B)) as printed; the h = 8 grid has an odd
    // point count, so its entries are the printed roundings.
    let rows = [
        (8.0, 2.0, "0.0155", "1.031"),
        (4.0, 1.0, "0.25", "1.25"),
        (2.0, 0.5, "4", "3"),
        (1.0, 0.25, "64", "17"),
        (0.5, 0.125, "1024", "129"),
    ];
    for (h, dt, rho_txt, shifted_txt) in rows {
        let g = GridSpec::periodic_box(2, 200.0, h).unwrap();
        let spec = periodic_spectrum(&b, &g).unwrap();
        let t = spec.shifted(1.0, dt);
        let odd = g.n()[0] % 2 == 1;
        let ok = if odd {
            let places = rho_txt.len() as i32 - 2;
            let places_t = shifted_txt.len() as i32 - 2;
            round_to(spec.spectral_radius, places) == to_f64(&decimal(rho_txt))
                && round_to(t.spectral_radius, places_t) == to_f64(&decimal(shifted_txt))
                && round_to(t.condition_estimate, places_t) == to_f64(&decimal(shifted_txt))
                && spec.spectral_radius < 64.0 / h.powi(4)
        } else {
            spec.spectral_radius == to_f64(&decimal(rho_txt))
                && t.spectral_radius == to_f64(&decimal(shifted_txt))
                && t.condition_estimate == t.spectral_radius
        };
        c.check(
            ok && spec.max_imag() <= 1e-12 * spec.spectral_radius && spec.min_real() >= 0.0,
            format!(
                "h={h} (n={}): rho(B)={} rho(I+dtB)={} cond={} vs {rho_txt}/{shifted_txt}",
                g.n()[0],
                spec.spectral_radius,
                t.spectral_radius,
                t.condition_estimate
            ),
        );
        if g.n()[0] <= 100 {
            let m = assemble(&b, &g).unwrap();
            let pi = power_iteration(&m, POWER_TOL).unwrap();
            let rel = (pi.spectral_radius - spec.spectral_radius).abs() / spec.spectral_radius;
            c.check(
                rel <= POWER_MATCH,
                format!(
                    "power iteration h={h}: {} after {} iterations (rel diff {rel:.1e})",
                    pi.spectral_radius, pi.iterations
                ),
            );
        }
    }
    c.finish();
}

#[test]
fn criterion_6_sparsity_table() {
    let mut c = Criterion::new(
        6,
        "Laplacian and bi-Laplacian sparsity",
        Duration::from_secs(60),
    );
    let lap = laplacian(2, 2).unwrap();
    let bil = bilaplacian(2, 2).unwrap();
    let rows = [
        (8.0, 625usize, "0.8", "2.08"),
        (4.0, 2500, "0.2", "0.52"),
        (2.0, 10_000, "0.05", "0.13"),
        (1.0, 40_000, "0.0125", "0.0325"),
        (0.5, 160_000, "0.003125", "0.008125"),
    ];
    for (h, n, lap_pct, bil_pct) in rows {
        let g = GridSpec::periodic_box(2, 200.0, h).unwrap();
        let ls = assemble(&lap, &g).unwrap().sparsity();
        let bs = assemble(&bil, &g).unwrap().sparsity();
        c.check(
            ls.rows == n
                && ls.nnz == 5 * n
                && bs.nnz == 13 * n
                && ls.percentage_exact() == decimal(lap_pct)
                && bs.percentage_exact() == decimal(bil_pct),
            format!(
                "N={n}: nnz {} / {}, percent {} / {}",
                ls.nnz,
                bs.nnz,
                ls.percentage_f64(),
                bs.percentage_f64()
            ),
        );
    }
    for (h, n) in [(8.0, 25usize), (4.0, 50), (1.0, 16)] {
        let g = GridSpec::periodic(2, n, h).unwrap();
        let lm = assemble(&lap, &g).unwrap();
        let direct = assemble(&bil, &g).unwrap();
        let product = lm.matmul(&lm).unwrap();
        let same_pattern =
            direct.row_ptr() == product.row_ptr() && direct.col_idx() == product.col_idx();
        let worst = direct
            .values()
            .iter()
            .zip(product.values())
            .map(|(a, b)| (a - b).abs() / a.abs())
            .fold(0.0, f64::max);
        c.check(
            same_pattern && worst <= MATMUL_REL_TOL,
            format!("assemble(L o L) == L*L on {n}x{n}, h={h} (max rel diff {worst:.1e})"),
        );
    }
    c.finish();
}

#[test]
fn criterion_7_cahn_hilliard() {
    let mut c = Criterion::new(
        7,
        "Cahn-Hilliard benchmark and temporal convergence",
        BOUND_CAHN_HILLIARD,
    );
    let config = BenchmarkConfig::default();
    let (state, s) = run_benchmark(&config, |_| {}).unwrap();
    c.check(
        s.steps == 2000 && (state.t - 100.0).abs() < 1e-9,
        format!(
            "100x100, h=1, dt=0.05, order {}: {} steps to t={}",
            config.order, s.steps, state.t
        ),
    );
    c.check(
        s.max_mass_drift <= MASS_REL_TOL,
        format!("mass drift {:.2e}", s.max_mass_drift),
    );
    c.check(
        s.max_energy_increase <= ENERGY_SLACK,
        format!(
            "free energy {:.6} -> {:.6}, largest relative step increase {:.2e}",
            s.initial_energy, s.final_energy, s.max_energy_increase
        ),
    );
    c.check(
        s.c_min >= FIELD_BAND.0 && s.c_max <= FIELD_BAND.1,
        format!("field range [{:.4}, {:.4}]", s.c_min, s.c_max),
    );

    let fits = temporal_convergence(&TemporalConfig::default()).unwrap();
    for (order, fit) in fits {
        c.check(
            (fit.slope - order as f64).abs() <= TEMPORAL_SLOPE_TOL,
            format!("order {order} IMEX to t=10: {}", fit.summary()),
        );
    }
    c.finish();
}

#[test]
fn criterion_8_symbol_product() {
    let mut c = Criterion::new(
        8,
        "Fourier symbol of a composition is the product",
        Duration::from_secs(5),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut samples = 0;
    for _ in 0..20 {
        let mut random = || {
            let len = rng.random_range(1..=6);
            let entries: Vec<(Offset, Rational)> = (0..len)
                .map(|_| {
                    let num = rng.random_range(1..=9) * if rng.random_bool(0.5) { 1 } else { -1 };
                    (
                        Offset::from(rng.random_range(-4..=4)),
                        r(num, rng.random_range(1..=12)),
                    )
                })
                .collect();
            Stencil::new(1, -rng.random_range(0..=4), entries).unwrap()
        };
        let (a, b) = (random(), random());
        let comp = a.compose(&b).unwrap();
        let scale = to_f64(&a.abs_sum()) * to_f64(&b.abs_sum());
        for _ in 0..50 {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let lhs = symbol(&comp, theta).unwrap();
            let rhs = symbol(&a, theta).unwrap() * symbol(&b, theta).unwrap();
            worst = worst.max((lhs - rhs).norm() / scale);
            samples += 1;
        }
    }
    c.check(
        samples == 1000 && worst <= SYMBOL_REL_TOL,
        format!("{samples} samples over 20 pairs, worst relative deviation {worst:.2e}"),
    );
    c.finish();
}
