use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::grid::{GridMap, MapKind};
use crate::problem::MarketParameters;
use crate::richardson::{DEFAULT_DP, DEFAULT_P0};
use crate::solver::{validate_doubling, Method, SolverSettings};

/// Everything a run needs. Serialized as a flat JSON object whose keys are
/// the command-line flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct RunConfig {
    pub sigma2: f64,
    pub rate: f64,
    pub strike: f64,
    pub map: MapKind,
    /// Map control parameter; `None` means the map's default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub n_list: Vec<usize>,
    pub tol_f: f64,
    pub tol_x: f64,
    pub max_iterations: usize,
    pub method: Method,
    pub p0: f64,
    pub dp: f64,
    /// Highest extrapolation column written by `ladder`.
    pub max_k: usize,
    /// Coarse level for `estimate`.
    pub n: usize,
    /// Emit exact-solution columns.
    pub oracle: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let market = MarketParameters::default();
        let solver = SolverSettings::default();
        RunConfig {
            sigma2: market.sigma2,
            rate: market.rate,
            strike: market.strike,
            map: MapKind::Logarithmic,
            c: None,
            n_list: vec![2, 4, 8, 16, 32, 64, 128, 256, 512],
            tol_f: solver.tol_f,
            tol_x: solver.tol_x,
            max_iterations: solver.max_iterations,
            method: solver.method,
            p0: DEFAULT_P0,
            dp: DEFAULT_DP,
            max_k: 3,
            n: 16,
            oracle: true,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("writing config {}", path.display()))
    }

    pub fn market(&self) -> anyhow::Result<MarketParameters> {
        Ok(MarketParameters::new(self.sigma2, self.rate, self.strike)?)
    }

    pub fn grid_map(&self) -> anyhow::Result<GridMap> {
        Ok(GridMap::new(
            self.map,
            self.c.unwrap_or_else(|| self.map.default_c()),
        )?)
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tol_f: self.tol_f,
            tol_x: self.tol_x,
            max_iterations: self.max_iterations,
            method: self.method,
            ..SolverSettings::default()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.market()?;
        self.grid_map()?;
        self.solver_settings().validate()?;
        validate_doubling(&self.n_list)?;
        if !(self.p0 > 0.0) || !self.dp.is_finite() {
            bail!(
                "p0 must be positive and dp finite (p0 = {}, dp = {})",
                self.p0,
                self.dp
            );
        }
        Ok(())
    }
}
