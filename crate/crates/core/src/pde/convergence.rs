//! Grid-refinement studies and log-log fits `log e = p log h + log C`.

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::Serialize;

use super::PdeError;
use crate::generators::{make, StencilSpec, Style};
use crate::stencil::Stencil;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceFit {
    /// Observed order `p`.
    pub slope: f64,
    /// Error constant `C`.
    pub coefficient: f64,
    /// Standard error of the slope estimate.
    pub slope_stderr: f64,
    /// Root-mean-square residual of the fit in `log e`.
    pub rms_residual: f64,
    /// `(h, error)` pairs.
    pub samples: Vec<(f64, f64)>,
}

impl ConvergenceFit {
    /// `h,error` rows followed by nothing else, for plotting.
    pub fn write_csv<W: Write>(&self, mut w: W, step_name: &str) -> io::Result<()> {
        writeln!(w, "{step_name},error")?;
        for (h, e) in &self.samples {
            writeln!(w, "{h:e},{e:e}")?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "slope {:.4} (stderr {:.1e}), C {:.6e}, rms residual {:.1e}, {} samples",
            self.slope,
            self.slope_stderr,
            self.coefficient,
            self.rms_residual,
            self.samples.len()
        )
    }
}

/// Least-squares line through `(log h, log e)`.
pub fn fit_loglog(samples: &[(f64, f64)]) -> Result<ConvergenceFit, PdeError> {
    if samples.len() < 3 {
        return Err(PdeError::TooFewSamples {
            needed: 3,
            got: samples.len(),
        });
    }
    if let Some(&(h, error)) = samples
        .iter()
        .find(|(h, e)| !(*h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite()))
    {
        return Err(PdeError::NonPositiveSample { h, error });
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|(h, _)| h.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, e)| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(PdeError::InvalidConfig("all step sizes are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    Ok(ConvergenceFit {
        slope,
        coefficient: intercept.exp(),
        slope_stderr: if samples.len() > 2 {
            (sse / (n - 2.0) / sxx).sqrt()
        } else {
            0.0
        },
        rms_residual: (sse / n).sqrt(),
        samples: samples.to_vec(),
    })
}

/// `h = 2^-2 .. 2^-8`.
pub fn default_ladder_1d() -> Vec<f64> {
    (2..=8).map(|k| 2f64.powi(-k)).collect()
}

/// `h = 2^(-2 - k/4)` for `k = 0..=5`. Coarser spacings are dominated by
/// the sixth-order terms and finer ones by roundoff in the `h^-7` scaling.
pub fn default_ladder_2d() -> Vec<f64> {
    (0..=5).map(|k| 2f64.powf(-2.0 - k as f64 / 4.0)).collect()
}

/// Third derivative by composing centered first and second derivatives.
pub fn third_derivative_stencil() -> Result<Stencil, PdeError> {
    let d1 = make(&StencilSpec::new(1, 2, Style::Centered))?;
    let d2 = make(&StencilSpec::new(2, 2, Style::Centered))?;
    Ok(d1.compose(&d2)?)
}

/// `d^4/dx^4 d^3/dy^3` from fourth-order centered pieces, composed per axis
/// and joined by an outer product.
pub fn mixed_derivative_stencil() -> Result<Stencil, PdeError> {
    let d1 = make(&StencilSpec::new(1, 4, Style::Centered))?;
    let d2 = make(&StencilSpec::new(2, 4, Style::Centered))?;
    let x = d2.compose(&d2)?;
    let y = d1.compose(&d2)?;
    Ok(x.outer_product(&y))
}

/// Error of the composed third derivative of `sin x cos x` at `x = pi`,
/// whose exact value is `-4`.
pub fn converge_1d(ladder: &[f64]) -> Result<ConvergenceFit, PdeError> {
    let s = third_derivative_stencil()?;
    let f = |p: &[f64]| p[0].sin() * p[0].cos();
    let exact = -4.0;
    let samples = ladder
        .iter()
        .map(|&h| Ok((h, (s.apply_fn(h, &[PI], f)? - exact).abs())))
        .collect::<Result<Vec<_>, PdeError>>()?;
    fit_loglog(&samples)
}

/// Error of the `(4,3)` mixed derivative of `sin x cos y + cos x sin y` at
/// `(2 pi, pi/3)`, whose exact value is `sin x sin y - cos x cos y`.
pub fn converge_2d(ladder: &[f64]) -> Result<ConvergenceFit, PdeError> {
    let s = mixed_derivative_stencil()?;
    let f = |p: &[f64]| p[0].sin() * p[1].cos() + p[0].cos() * p[1].sin();
    let (x0, y0) = (2.0 * PI, PI / 3.0);
    let exact = x0.sin() * y0.sin() - x0.cos() * y0.cos();
    let samples = ladder
        .iter()
        .map(|&h| Ok((h, (s.apply_fn(h, &[x0, y0], f)? - exact).abs())))
        .collect::<Result<Vec<_>, PdeError>>()?;
    fit_loglog(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_fit() {
        let samples: Vec<(f64, f64)> = [0.5, 0.25, 0.125, 0.0625]
            .iter()
            .map(|&h: &f64| (h, 3.0 * h.powi(2)))
            .collect();
        let fit = fit_loglog(&samples).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.coefficient - 3.0).abs() < 1e-12);
        assert!(fit.rms_residual < 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(
            fit_loglog(&[(0.1, 1.0), (0.2, 2.0)]),
            Err(PdeError::TooFewSamples { .. })
        ));
        assert!(matches!(
            fit_loglog(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]),
            Err(PdeError::NonPositiveSample { .. })
        ));
    }

    #[test]
    fn one_dimensional_error_follows_leading_term() {
        let s = third_derivative_stencil().unwrap();
        let f = |p: &[f64]| p[0].sin() * p[0].cos();
        for h in [0.1, 0.05] {
            let err = s.apply_fn(h, &[PI], f).unwrap() + 4.0;
            // Leading term 1/4 h^2 f^(5)(pi) = 4 h^2, positive.
            assert!(err > 0.0);
            assert!((err / (4.0 * h * h) - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn ladders_are_deterministic() {
        assert_eq!(default_ladder_1d().len(), 7);
        assert_eq!(default_ladder_2d()[0], 0.25);
        assert_eq!(
            converge_1d(&default_ladder_1d()),
            converge_1d(&default_ladder_1d())
        );
    }
}
