//! Run configuration: one JSON document, defaults filled on load.

use std::path::Path;

use kaefam_core::bergman::{BergmanChart, DEFAULT_QUADRATURE};
use kaefam_core::geometry::GeometryOptions;
use kaefam_core::solver::SolverOptions;
use kaefam_core::twist::DEFAULT_PSD_TOL;
use kaefam_core::verify::DEFAULT_EPSILONS;
use kaefam_core::{parse_chart_weight, parse_potential, BackgroundForm, TorusGrid, TwistForm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridConfig,
    pub family: FamilyConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub bergman: BergmanConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    pub tau_re: f64,
    pub tau_im: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: 64,
            tau_re: 0.0,
            tau_im: 1.0,
        }
    }
}

/// Constant part of the twist form; `tz` is `[re, im]` of `H_tz̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundConfig {
    pub tt: f64,
    pub zz: f64,
    pub tz: [f64; 2],
}

impl Default for BackgroundConfig {
    fn default() -> Self {
        BackgroundConfig {
            tt: 1.0,
            zz: 1.0,
            tz: [0.0, 0.0],
        }
    }
}

fn default_base_points() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0]]
}

fn default_epsilons() -> Vec<f64> {
    DEFAULT_EPSILONS.to_vec()
}

fn default_base_radius() -> f64 {
    1.0
}

fn default_psd_tol() -> f64 {
    DEFAULT_PSD_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub potential: String,
    #[serde(default, rename = "H")]
    pub h: BackgroundConfig,
    #[serde(default = "default_base_points")]
    pub base_points: Vec<[f64; 2]>,
    #[serde(default = "default_epsilons")]
    pub epsilon_list: Vec<f64>,
    /// Base points must satisfy `|t| < base_radius`.
    #[serde(default = "default_base_radius")]
    pub base_radius: f64,
    #[serde(default = "default_psd_tol")]
    pub psd_tol: f64,
    /// Run even when β fails the semipositivity scan.
    #[serde(default)]
    pub allow_non_psd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub linear_tol: f64,
    pub dealias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverOptions::default();
        SolverConfig {
            tol: s.tol,
            max_iters: s.max_iters,
            linear_tol: GeometryOptions::default().linear_tol,
            dealias: s.dealias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BergmanConfig {
    pub radius: f64,
    pub weight: String,
    pub m_list: Vec<u32>,
    pub degree: usize,
    pub quadrature: usize,
    pub points: Vec<[f64; 2]>,
}

impl Default for BergmanConfig {
    fn default() -> Self {
        BergmanConfig {
            radius: 1.0,
            weight: "abs2(z)".into(),
            m_list: vec![10, 20, 40],
            degree: 60,
            quadrature: DEFAULT_QUADRATURE,
            points: vec![[0.0, 0.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: String,
    pub formats: Vec<Format>,
    pub plot_script: bool,
    /// Wall-clock timings go to a separate `timings.json`, outside the
    /// reproducible bundle.
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "kaefam-out".into(),
            formats: vec![Format::Csv, Format::Json],
            plot_script: true,
            timings: false,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.into(),
        message: message.into(),
    }
}

fn check_unit_interval(key: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("tolerance must lie in (0, 1) (got {v})")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.grid.resolution;
        if !n.is_power_of_two() {
            return Err(invalid("grid.resolution", format!("resolution must be a power of two (got {n})")));
        }
        if n < 8 {
            return Err(invalid("grid.resolution", format!("resolution must be at least 8 (got {n})")));
        }
        if !(self.grid.tau_im > 0.0) {
            return Err(invalid("grid.tau_im", format!("Im τ must be positive (got {})", self.grid.tau_im)));
        }
        if !self.grid.tau_re.is_finite() {
            return Err(invalid("grid.tau_re", "Re τ must be finite"));
        }
        check_unit_interval("solver.tol", self.solver.tol)?;
        check_unit_interval("solver.linear_tol", self.solver.linear_tol)?;
        check_unit_interval("family.psd_tol", self.family.psd_tol)?;
        if self.solver.max_iters == 0 {
            return Err(invalid("solver.max_iters", "must be positive"));
        }
        self.twist()?;
        if !(self.family.base_radius > 0.0) {
            return Err(invalid("family.base_radius", "must be positive"));
        }
        if self.family.base_points.is_empty() {
            return Err(invalid("family.base_points", "at least one base point is required"));
        }
        for (i, p) in self.family.base_points.iter().enumerate() {
            if !(Complex64::new(p[0], p[1]).norm() < self.family.base_radius) {
                return Err(invalid(
                    &format!("family.base_points[{i}]"),
                    format!("base point must lie in the disk of radius {}", self.family.base_radius),
                ));
            }
        }
        for (i, &e) in self.family.epsilon_list.iter().enumerate() {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid(&format!("family.epsilon_list[{i}]"), format!("ε must be positive (got {e})")));
            }
        }
        self.validate_bergman()
    }

    fn validate_bergman(&self) -> Result<(), CliError> {
        let b = &self.bergman;
        if b.m_list.is_empty() || b.m_list.contains(&0) {
            return Err(invalid("bergman.m_list", "m values must be positive integers"));
        }
        if b.m_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("bergman.m_list", "m values must be strictly increasing"));
        }
        if b.quadrature < 8 {
            return Err(invalid("bergman.quadrature", "quadrature must be at least 8"));
        }
        for (i, p) in b.points.iter().enumerate() {
            if !(Complex64::new(p[0], p[1]).norm() < b.radius) {
                return Err(invalid(&format!("bergman.points[{i}]"), "point must lie inside the chart disk"));
            }
        }
        self.chart()?;
        Ok(())
    }

    pub fn tau(&self) -> Complex64 {
        Complex64::new(self.grid.tau_re, self.grid.tau_im)
    }

    pub fn grid(&self) -> Result<TorusGrid, CliError> {
        TorusGrid::new(self.grid.resolution, self.tau()).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn twist(&self) -> Result<TwistForm, CliError> {
        let phi = parse_potential(&self.family.potential).map_err(|e| invalid("family.potential", e.to_string()))?;
        let h = &self.family.h;
        let background = BackgroundForm::new(h.tt, Complex64::new(h.tz[0], h.tz[1]), h.zz, self.family.psd_tol)
            .map_err(|e| invalid("family.H", e.to_string()))?;
        TwistForm::new(phi, background, self.tau()).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn base_points(&self) -> Vec<Complex64> {
        self.family.base_points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    /// Chart at the first `m` of the list.
    pub fn chart(&self) -> Result<BergmanChart, CliError> {
        let b = &self.bergman;
        let weight = parse_chart_weight(&b.weight).map_err(|e| invalid("bergman.weight", e.to_string()))?;
        BergmanChart::new(b.radius, weight, b.m_list[0], b.degree, b.quadrature)
            .map_err(|e| invalid("bergman", e.to_string()))
    }

    pub fn bergman_points(&self) -> Vec<Complex64> {
        self.bergman.points.iter().map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn geometry_options(&self) -> GeometryOptions {
        GeometryOptions {
            solver: SolverOptions {
                tol: self.solver.tol,
                max_iters: self.solver.max_iters,
                dealias: self.solver.dealias,
                ..SolverOptions::default()
            },
            linear_tol: self.solver.linear_tol,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

/// A validated configuration together with the identity of its source.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// SHA-256 of the exact configuration bytes, lowercase hex.
    pub sha256: String,
    pub overrides: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Sets `key=value` on a JSON tree; `key` is a dotted path, `value` is
/// parsed as JSON and falls back to a plain string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must have the form key=value"))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(key, "empty path segment in override key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| invalid(key, format!("'{part}' is not inside an object")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    node.as_object_mut()
        .ok_or_else(|| invalid(key, "override target is not inside an object"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn json_error(e: serde_json::Error) -> CliError {
    // serde names the offending field in its message
    invalid("config", e.to_string())
}

pub fn parse_config(bytes: &[u8], overrides: &[String]) -> Result<LoadedConfig, CliError> {
    let mut tree: Value = serde_json::from_slice(bytes).map_err(json_error)?;
    for o in overrides {
        apply_override(&mut tree, o)?;
    }
    let config: RunConfig = serde_json::from_value(tree).map_err(json_error)?;
    config.validate()?;
    Ok(LoadedConfig {
        config,
        sha256: sha256_hex(bytes),
        overrides: overrides.to_vec(),
    })
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| invalid("--config", format!("{}: {e}", path.display())))?;
    parse_config(&bytes, overrides)
}
