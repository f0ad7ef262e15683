//! Scenario configuration: a TOML file with dotted sections, plus `--set`
//! overrides applied last.

use anyhow::{bail, Context, Result};
use mfg_core::coefficients::{example_catalog, CoefficientSet, ControlSet, Params};
use mfg_core::equilibrium::{default_r, Averaging, FixedPointConfig};
use mfg_core::fpk::Scheme;
use mfg_core::measures::{dirac, gaussian_weights, StateGrid, TimeGrid};
use mfg_core::Point;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    pub grid: GridConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub fixed_point: FixedPointSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub particles: ParticleSection,
}

fn default_out() -> String {
    "runs/latest".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "one")]
    pub dim: usize,
    pub half_width: f64,
    pub n: usize,
    pub horizon: f64,
    pub steps: usize,
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum InitialKind {
    Gaussian,
    Dirac,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(default)]
    pub mean: [f64; 2],
    #[serde(default = "default_var")]
    pub var: f64,
}

fn default_var() -> f64 {
    0.25
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self { kind: InitialKind::Gaussian, mean: [0.0; 2], var: default_var() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub name: String,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum ShapeKind {
    Box,
    Ball,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub shape: ShapeKind,
    /// Box bounds, or ball center ± radius.
    pub lo: f64,
    pub hi: f64,
    #[serde(default)]
    pub center: [f64; 2],
    #[serde(default = "default_radius")]
    pub radius: f64,
    pub points: usize,
    #[serde(default)]
    pub default: [f64; 2],
}

fn default_radius() -> f64 {
    1.0
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self { shape: ShapeKind::Box, lo: -1.0, hi: 1.0, center: [0.0; 2], radius: 1.0, points: 9, default: [0.0; 2] }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Explicit,
    Implicit,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub scheme: SchemeKind,
    pub cfl_max: f64,
    pub leakage_budget: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { scheme: SchemeKind::Explicit, cfl_max: mfg_core::tol::CFL_MAX, leakage_budget: mfg_core::tol::LEAKAGE_BUDGET }
    }
}

impl SolverConfig {
    pub fn scheme(&self) -> Scheme {
        match self.scheme {
            SchemeKind::Explicit => Scheme::Explicit,
            SchemeKind::Implicit => Scheme::Implicit,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingKind {
    DampedPicard,
    FictitiousPlay,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSection {
    pub damping: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub averaging: AveragingKind,
    /// Moment bound; 0 selects the default recipe.
    pub r: f64,
    pub check_hypotheses: bool,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        Self { damping: 0.5, max_iterations: 200, tolerance: 1e-3, averaging: AveragingKind::DampedPicard, r: 0.0, check_hypotheses: true }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct CertifySection {
    pub challengers: usize,
    /// Run directory holding `environment.csv` and `u_star.csv`; empty runs
    /// the fixed-point iteration first.
    pub from: String,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self { challengers: 100, from: String::new() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleSection {
    pub count: usize,
    pub gap_tolerance: f64,
    /// Write every trajectory to `trajectories.bin`.
    pub dump: bool,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self { count: 10_000, gap_tolerance: 0.05, dump: false }
    }
}

/// Sets `path = value` in a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').with_context(|| format!("override `{assignment}` is not of the form key=value"))?;
    let (path, raw) = (path.trim(), raw.trim());
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.split('.').collect();
    let mut cur = table;
    for key in &keys[..keys.len() - 1] {
        let entry = cur.entry(key.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("override `{path}`: `{key}` is not a section"),
        };
    }
    log::info!("override {path} = {value}");
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid TOML")?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ScenarioConfig = table.try_into().context("config does not match the schema")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_str_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn check(&self) -> Result<()> {
        if !mfg_core::coefficients::catalog::NAMES.contains(&self.coefficients.name.as_str()) {
            bail!("unknown coefficient set `{}` (known: {})", self.coefficients.name, mfg_core::coefficients::catalog::NAMES.join(", "));
        }
        Ok(())
    }

    pub fn state_grid(&self) -> Result<StateGrid> {
        Ok(StateGrid::new(self.grid.dim, self.grid.half_width, self.grid.n)?)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        Ok(TimeGrid::new(self.grid.horizon, self.grid.steps)?)
    }

    pub fn default_control(&self) -> Point {
        let mut p = Point::new(self.control.default[0], self.control.default[1]);
        if self.grid.dim == 1 {
            p[1] = 0.0;
        }
        p
    }

    pub fn control_set(&self) -> Result<ControlSet> {
        let c = &self.control;
        Ok(match c.shape {
            ShapeKind::Box => ControlSet::uniform_box(self.grid.dim, c.lo, c.hi, c.points)?,
            ShapeKind::Ball => ControlSet::uniform_ball(self.grid.dim, Point::new(c.center[0], c.center[1]), c.radius, c.points)?,
        })
    }

    pub fn coefficients(&self) -> Result<CoefficientSet> {
        Ok(example_catalog(&self.coefficients.name, &self.coefficients.params, self.grid.dim, self.control_set()?)?)
    }

    pub fn initial_law(&self, grid: &StateGrid) -> Result<Vec<f64>> {
        let mut mean = Point::new(self.initial.mean[0], self.initial.mean[1]);
        if grid.dim() == 1 {
            mean[1] = 0.0;
        }
        Ok(match self.initial.kind {
            InitialKind::Gaussian => gaussian_weights(grid, &mean, self.initial.var)?,
            InitialKind::Dirac => dirac(grid, &mean),
        })
    }

    /// Configured `R`, or the default recipe when it is zero.
    pub fn moment_bound(&self, coeffs: &CoefficientSet, grid: &StateGrid, nu: &[f64]) -> Result<f64> {
        if self.fixed_point.r > 0.0 {
            return Ok(self.fixed_point.r);
        }
        Ok(default_r(coeffs, grid, self.grid.horizon, nu, self.default_control())?)
    }

    pub fn fixed_point(&self, r: f64) -> FixedPointConfig {
        let f = &self.fixed_point;
        FixedPointConfig {
            damping: f.damping,
            max_iterations: f.max_iterations,
            tolerance: f.tolerance,
            averaging: match f.averaging {
                AveragingKind::DampedPicard => Averaging::DampedPicard,
                AveragingKind::FictitiousPlay => Averaging::FictitiousPlay,
            },
            r,
            default_control: self.default_control(),
            seed: self.seed,
            cfl_max: self.solver.cfl_max,
            check_hypotheses: f.check_hypotheses,
        }
    }
}
