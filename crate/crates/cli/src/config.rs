use std::fs;
use std::path::Path;

use serde::Deserialize;
use stencilkit::pde::cahn_hilliard::{BenchmarkConfig, TemporalConfig};

/// Experiment parameters read from `--config`. Every section is optional;
/// command-line flags win over file values, which win over built-in defaults.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Seed for the power-iteration start vector.
    pub seed: Option<u64>,
    pub converge_1d: Option<Ladder>,
    pub converge_2d: Option<Ladder>,
    pub biharmonic: Option<BiharmonicConfig>,
    pub cahn_hilliard: Option<BenchmarkConfig>,
    pub ch_temporal: Option<TemporalConfig>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiharmonicConfig {
    pub cells: Vec<usize>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

fn default_rel_tol() -> f64 {
    1e-10
}

impl RunConfig {
    /// TOML when the extension says so, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let is_toml = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"));
        if is_toml {
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        } else {
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
        }
    }
}
