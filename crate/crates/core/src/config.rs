//! Run configuration: TOML with one table per stage, presets, overrides and
//! up-front validation.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carleman::{check_admissible, CarlemanWeight};
use crate::driver::StopRule;
use crate::elliptic::SolverBackend;
use crate::error::{Error, Result};
use crate::forward::{check_cfl, initial_denominator, make_phantom, InitialField, Nonlinearity, PhantomKind, StartRule};
use crate::grid::SpatialGrid;
use crate::time_basis::{build_basis_with, Arithmetic, TimeGrid, GRAM_TOLERANCE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    pub modes: usize,
    pub final_time: f64,
    pub intervals: usize,
    pub arithmetic: String,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            modes: 20,
            final_time: 2.0,
            intervals: 256,
            arithmetic: "extended".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// `Ω = (-R, R)^2`.
    pub half_width: f64,
    /// Cells per side of `Ω`.
    pub cells: usize,
    /// Half width of the simulation square `G`.
    pub outer_half_width: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 1.0,
            cells: 64,
            outer_half_width: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardConfig {
    /// Run once per phantom.
    pub phantoms: Vec<String>,
    pub nonlinearity: String,
    /// Constant initial state `p`.
    pub initial_value: f64,
    pub start: String,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            phantoms: vec!["two_disks".into()],
            nonlinearity: "sqrt-grad".into(),
            initial_value: 0.5,
            start: "repeat".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarlemanConfig {
    pub lambda: f64,
    pub beta: f64,
    pub center: [f64; 2],
    pub scale: f64,
}

impl Default for CarlemanConfig {
    fn default() -> Self {
        Self {
            lambda: 2.0,
            beta: 10.0,
            center: [0.0, 1.25],
            scale: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub epsilon: f64,
    /// `cholesky` or `cg`.
    pub backend: String,
    pub cg_max_iterations: usize,
    /// `M = factor · max(|U_0| + |∇U_0|)`; `0` disables the cut-off.
    pub cutoff_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 7e-5,
            backend: "cholesky".into(),
            cg_max_iterations: 20_000,
            cutoff_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub level: f64,
    pub seed: u64,
    /// `series` (sampled traces) or `projected` (coefficient vectors).
    pub stage: String,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            level: 0.05,
            seed: 1,
            stage: "series".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSettings {
    pub max_iterations: usize,
    /// Relative cost change for the early stop; `0` runs all iterations.
    pub tolerance: f64,
    pub consecutive: usize,
    pub divergence_factor: f64,
    /// Dump `U_k` every this many iterations; `0` keeps only the last.
    pub checkpoint_every: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        let stop = StopRule::default();
        Self {
            max_iterations: stop.max_iterations,
            tolerance: 0.0,
            consecutive: stop.consecutive,
            divergence_factor: stop.divergence_factor,
            checkpoint_every: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub basis: BasisConfig,
    pub grid: GridConfig,
    pub forward: ForwardConfig,
    pub carleman: CarlemanConfig,
    pub solver: SolverConfig,
    pub noise: NoiseConfig,
    pub run: RunSettings,
}

const PRESET_TWO_DISKS: &str = include_str!("../../../presets/paper-two-disks-sqrt.toml");
const PRESET_QUADRATIC: &str = include_str!("../../../presets/paper-quadratic-F.toml");

/// Names accepted by [`RunConfig::preset`].
pub const PRESETS: [&str; 2] = ["paper-two-disks-sqrt", "paper-quadratic-F"];

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format {
            what: "configuration".into(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "paper-two-disks-sqrt" => Self::from_toml(PRESET_TWO_DISKS),
            "paper-quadratic-F" => Self::from_toml(PRESET_QUADRATIC),
            other => Err(Error::InvalidParameter(format!(
                "unknown preset '{other}' (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Applies `table.key=value`; the value is parsed as a TOML literal and
    /// falls back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let bad = |detail: String| Error::Format {
            what: format!("override '{assignment}'"),
            detail,
        };
        let (path, raw) = assignment
            .split_once('=')
            .ok_or_else(|| bad("expected table.key=value".into()))?;
        let (table, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| bad("expected table.key=value".into()))?;
        let raw = raw.trim();
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Table::try_from(&*self).map_err(|e| bad(e.to_string()))?;
        let section = root
            .get_mut(table)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| bad(format!("unknown table '{table}'")))?;
        if !section.contains_key(key) {
            return Err(bad(format!("unknown key '{key}' in [{table}]")));
        }
        let previous = section[key].clone();
        section.insert(key.to_string(), coerce(value, &previous));
        *self = toml::Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| bad(e.to_string()))?;
        Ok(())
    }

    pub fn time_grid(&self) -> Result<TimeGrid<f64>> {
        TimeGrid::new(self.basis.final_time, self.basis.intervals)
    }

    pub fn arithmetic(&self) -> Result<Arithmetic> {
        Arithmetic::from_tag(&self.basis.arithmetic)
    }

    pub fn omega(&self) -> Result<SpatialGrid<f64>> {
        SpatialGrid::new(self.grid.half_width, self.grid.cells + 1)
    }

    pub fn outer(&self) -> Result<SpatialGrid<f64>> {
        let omega = self.omega()?;
        let outer = SpatialGrid::with_spacing(self.grid.outer_half_width, omega.spacing())?;
        outer.subgrid_offset(&omega)?;
        Ok(outer)
    }

    pub fn phantoms(&self) -> Result<Vec<PhantomKind>> {
        self.forward.phantoms.iter().map(|t| PhantomKind::from_tag(t)).collect()
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity<f64>> {
        Nonlinearity::from_tag(&self.forward.nonlinearity)
    }

    pub fn initial(&self) -> InitialField<f64> {
        InitialField::Constant(self.forward.initial_value)
    }

    pub fn start_rule(&self) -> Result<StartRule> {
        StartRule::from_tag(&self.forward.start)
    }

    pub fn weight(&self) -> CarlemanWeight<f64> {
        let c = &self.carleman;
        CarlemanWeight {
            lambda: c.lambda,
            beta: c.beta,
            center: c.center,
            scale: c.scale,
        }
    }

    pub fn backend(&self) -> Result<SolverBackend> {
        match SolverBackend::from_tag(&self.solver.backend)? {
            SolverBackend::ConjugateGradient { .. } => Ok(SolverBackend::ConjugateGradient {
                max_iterations: self.solver.cg_max_iterations,
            }),
            b => Ok(b),
        }
    }

    pub fn cutoff_factor(&self) -> Option<f64> {
        (self.solver.cutoff_factor > 0.0).then_some(self.solver.cutoff_factor)
    }

    pub fn noise_stage(&self) -> Result<NoiseStage> {
        match self.noise.stage.as_str() {
            "series" => Ok(NoiseStage::Series),
            "projected" => Ok(NoiseStage::Projected),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise stage '{other}' (expected series or projected)"
            ))),
        }
    }

    pub fn stop_rule(&self) -> StopRule {
        let r = &self.run;
        StopRule {
            max_iterations: r.max_iterations,
            tolerance: (r.tolerance > 0.0).then_some(r.tolerance),
            consecutive: r.consecutive,
            divergence_factor: r.divergence_factor,
        }
    }
}

/// Keeps floats floats when an override is written as an integer.
fn coerce(value: toml::Value, previous: &toml::Value) -> toml::Value {
    match (value, previous) {
        (toml::Value::Integer(i), toml::Value::Float(_)) => toml::Value::Float(i as f64),
        (v, _) => v,
    }
}

/// Where the noise is injected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseStage {
    Series,
    Projected,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn record(&mut self, name: &'static str, outcome: Result<String>) {
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(e) => (false, e.to_string()),
        };
        self.checks.push(Check { name, passed, detail });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `Err(Error::Config)` listing every failed check.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let lines: Vec<String> = self.failures().map(|c| format!("  {}: {}", c.name, c.detail)).collect();
        Err(Error::Config(lines.join("\n")))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<12} {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail)?;
        }
        Ok(())
    }
}

/// Runs every admissibility check and collects all outcomes; nothing
/// short-circuits, so one call lists every problem.
pub fn validate_config(config: &RunConfig) -> ValidationReport {
    let mut report = ValidationReport::default();
    let omega = config.omega();
    let time = config.time_grid();

    report.record(
        "grid",
        (|| {
            let omega = config.omega()?;
            let outer = config.outer()?;
            let travel = config.grid.outer_half_width - config.grid.half_width;
            if !(travel > config.basis.final_time) {
                return Err(Error::InvalidParameter(format!(
                    "G must extend beyond Ω by more than T = {} (got {travel})",
                    config.basis.final_time
                )));
            }
            Ok(format!("Ω {0}x{0} nodes, G {1}x{1} nodes, h = {2}", omega.nodes(), outer.nodes(), omega.spacing()))
        })(),
    );
    report.record(
        "carleman",
        check_admissible(config.grid.half_width, &config.weight())
            .into_result()
            .map(|a| format!("b margin {:.4}, x0 at distance {:.4}", a.scale_margin, a.center_distance)),
    );
    report.record(
        "cfl",
        match (&omega, &time) {
            (Ok(o), Ok(t)) => check_cfl(t.step(), o.spacing()).map(|_| format!("dt = {:.4e}, h = {:.4e}", t.step(), o.spacing())),
            (Err(e), _) | (_, Err(e)) => Err(Error::InvalidParameter(e.to_string())),
        },
    );
    report.record(
        "nonlinearity",
        (|| {
            let f = config.nonlinearity()?;
            let d = initial_denominator(&f, &config.initial(), &config.omega()?)?;
            let min = d.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
            Ok(format!("min |F(x, p, 0, ∇p)| = {min:.4e}"))
        })(),
    );
    report.record(
        "phantoms",
        (|| {
            let omega = config.omega()?;
            let kinds = config.phantoms()?;
            if kinds.is_empty() {
                return Err(Error::InvalidParameter("no phantom listed".into()));
            }
            for k in &kinds {
                make_phantom(k, &omega)?;
            }
            Ok(config.forward.phantoms.join(", "))
        })(),
    );
    report.record(
        "basis",
        (|| {
            let basis = build_basis_with(config.basis.modes, config.time_grid()?, config.arithmetic()?)?;
            Ok(format!("N = {}, Gram residual {:.2e} ≤ {GRAM_TOLERANCE:.0e}", basis.count(), basis.gram_residual()))
        })(),
    );
    report.record(
        "solver",
        (|| {
            let backend = config.backend()?;
            if !(config.solver.epsilon > 0.0) {
                return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", config.solver.epsilon)));
            }
            if !(config.solver.cutoff_factor >= 0.0) {
                return Err(Error::InvalidParameter("cutoff_factor must be non-negative".into()));
            }
            Ok(format!("{} backend, epsilon = {:e}", backend.tag(), config.solver.epsilon))
        })(),
    );
    report.record(
        "noise",
        (|| {
            config.noise_stage()?;
            if !(config.noise.level >= 0.0) {
                return Err(Error::InvalidParameter(format!("noise level must be non-negative, got {}", config.noise.level)));
            }
            Ok(format!("level {} on the {}, seed {}", config.noise.level, config.noise.stage, config.noise.seed))
        })(),
    );
    report.record(
        "run",
        (|| {
            let r = &config.run;
            if r.consecutive == 0 || !(r.divergence_factor > 1.0) || !(r.tolerance >= 0.0) {
                return Err(Error::InvalidParameter(
                    "need consecutive ≥ 1, divergence_factor > 1 and tolerance ≥ 0".into(),
                ));
            }
            config.start_rule()?;
            Ok(format!("{} iterations, start rule {}", r.max_iterations, config.forward.start))
        })(),
    );
    report
}
