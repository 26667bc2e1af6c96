//! Exact finite-difference stencil algebra and the numerics built on it.
//!
//! Stencils carry exact rational weights and a symbolic power of the grid
//! spacing. They can be composed, combined across axes and expanded into
//! Taylor tables, which report the derivative approximated, the order of
//! accuracy and the leading truncation error. Downstream modules turn
//! stencils into sparse operators on structured grids and use them for
//! von Neumann stability analysis, convergence studies, a biharmonic plate
//! problem and Cahn-Hilliard phase-field simulations.
//!
//! ```
//! use stencilkit::{generators, ratio, taylor, StencilSpec, Style};
//!
//! let d1 = generators::make(&StencilSpec::new(1, 2, Style::Centered)).unwrap();
//! let wide = d1.compose(&d1).unwrap();
//! let (_, report) = taylor::analyze(&wide).unwrap();
//! assert_eq!(report.accuracy, 2);
//! assert_eq!(report.leading_coefficient(), Some(&ratio(1, 3)));
//! ```

mod elimination;
mod error;

pub mod generators;
pub mod grid;
pub mod linalg;
pub mod pde;
pub mod sparse;
pub mod stability;
pub mod stencil;
pub mod taylor;

/// Arbitrary-precision rational, always in lowest terms.
pub type Rational = num_rational::BigRational;

pub use error::StencilError;
pub use generators::{StencilSpec, Style};
pub use grid::{Boundary, GridError, GridSpec};
pub use linalg::{LinalgError, SolveOptions, SpectrumReport};
pub use sparse::CsrMatrix;
pub use stability::{Sign, StabilityError, StabilityReport};
pub use stencil::{ratio, to_f64, Offset, Stencil};
pub use taylor::{MultiIndex, StencilReport, TaylorTable};
