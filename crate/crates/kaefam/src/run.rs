//! Experiment orchestration and the report bundle.
//!
//! Every command produces an in-memory bundle of named files. All numeric
//! output is formatted with 17 significant digits and rows are ordered by
//! the configuration (base points in file order, ε descending, m ascending),
//! so identical configurations give byte-identical bundles.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use kaefam_core::bergman::{convergence_study, quadrature_drift};
use kaefam_core::solver::solve_fiber_ke;
use kaefam_core::torus::integrate;
use kaefam_core::twist::SemipositivityReport;
use kaefam_core::verify::{epsilon_sweep, verify_family};
use kaefam_core::{Field, KaeError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{sha256_hex, Format, LoadedConfig, RunConfig};
use crate::plot::plot_script;
use crate::CliError;

/// Sup-norm bound on the fiberwise identity residual.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Allowed negative part of `eig(ρ)` on semipositive families.
pub const EIGEN_TOL: f64 = 1e-10;
/// Allowed negative part of the argmin gap.
pub const GAP_TOL: f64 = 1e-8;
/// Relative Gauss–Bonnet conservation bound.
pub const CONSERVATION_TOL: f64 = 1e-10;
/// Bound on the change of Bergman values under quadrature doubling.
pub const QUADRATURE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Verify,
    Sweep,
    Bergman,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Solve, Command::Verify, Command::Sweep, Command::Bergman];

    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
            Command::Bergman => "bergman",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command '{s}' (expected solve, verify, sweep or bergman)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    VerificationFailure,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::VerificationFailure => 2,
            Status::NumericalFailure => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::VerificationFailure => "verification_failure",
            Status::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub command: Command,
    pub status: Status,
    /// Reproducible outputs by file name, including `manifest.json`.
    pub files: BTreeMap<String, Vec<u8>>,
    /// Wall-clock timings, when enabled; not part of `files`.
    pub timings: Option<Vec<u8>>,
}

impl ReportBundle {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes).map_err(io)?;
        }
        if let Some(t) = &self.timings {
            std::fs::write(dir.join("timings.json"), t).map_err(io)?;
        }
        Ok(())
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.get(name).and_then(|b| std::str::from_utf8(b).ok())
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map_or_else(|| "degenerate".into(), num)
}

struct Table {
    name: &'static str,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { name, writer }
    }

    fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        self.writer.write_record(fields.into_iter().collect::<Vec<_>>()).expect("in-memory write");
    }

    fn finish(self) -> (String, Vec<u8>) {
        (self.name.to_string(), self.writer.into_inner().expect("in-memory flush"))
    }
}

#[derive(Default)]
struct Outcome {
    tables: Vec<Table>,
    checks: BTreeMap<&'static str, bool>,
    results: Map<String, Value>,
    warnings: Vec<String>,
    failures: Vec<[String; 5]>,
    refused: bool,
}

impl Outcome {
    fn fail(&mut self, t: Option<Complex64>, eps: Option<f64>, m: Option<u32>, e: &KaeError) {
        let blank = String::new;
        self.failures.push([
            t.map_or_else(blank, |t| num(t.re)),
            t.map_or_else(blank, |t| num(t.im)),
            eps.map_or_else(blank, num),
            m.map_or_else(blank, |m| m.to_string()),
            e.to_string(),
        ]);
    }

    fn status(&self) -> Status {
        if !self.failures.is_empty() {
            Status::NumericalFailure
        } else if self.refused || self.checks.values().any(|ok| !ok) {
            Status::VerificationFailure
        } else {
            Status::Pass
        }
    }
}

fn semipositivity_json(r: &SemipositivityReport) -> Value {
    json!({
        "min_eigenvalue": r.min_eigenvalue,
        "at_t": [r.at_t.re, r.at_t.im],
        "psd_tol": r.psd_tol,
        "semipositive": r.is_semipositive(),
        "strictly_positive": r.min_eigenvalue > r.psd_tol,
    })
}

fn fmin(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::INFINITY, f64::min)
}

fn fmax(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(0.0, f64::max)
}

fn field_rows(table: &mut Table, prefix: &[String], psi: &Field) {
    let grid = psi.grid();
    for (i, v) in psi.samples().iter().enumerate() {
        let (x, y) = grid.coords(i);
        table.row(prefix.iter().cloned().chain([num(x), num(y), num(v.re)]));
    }
}

/// Checks semipositivity of β over the base points; returns `None` when the
/// run must stop.
fn admit_family(cfg: &RunConfig, out: &mut Outcome) -> Result<Option<SemipositivityReport>, CliError> {
    let twist = cfg.twist()?;
    let report = match twist.check_semipositive(&cfg.base_points(), cfg.grid()?, cfg.family.psd_tol) {
        Ok(r) => r,
        Err(e) => return Err(CliError::Numerical(e.to_string())),
    };
    out.results.insert("semipositivity".into(), semipositivity_json(&report));
    if !report.is_semipositive() {
        if cfg.family.allow_non_psd {
            out.warnings.push(format!(
                "β is not semipositive (min eigenvalue {:e}); running because family.allow_non_psd is set",
                report.min_eigenvalue
            ));
        } else {
            out.refused = true;
            out.warnings.push(format!(
                "refusing to run: β is not semipositive (min eigenvalue {:e} at t = {}); set family.allow_non_psd to override",
                report.min_eigenvalue, report.at_t
            ));
            return Ok(None);
        }
    }
    Ok(Some(report))
}

fn run_solve(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    if admit_family(cfg, out)?.is_none() {
        return Ok(());
    }
    let (twist, grid, opts) = (cfg.twist()?, cfg.grid()?, cfg.geometry_options());
    let points = cfg.base_points();
    let results: Vec<_> = points
        .par_iter()
        .map(|&t| {
            let beta = twist.eval_beta(t, grid)?;
            let sol = solve_fiber_ke(beta.zz(), None, &opts.solver)?;
            Ok::<_, KaeError>((integrate(beta.zz()).re, sol))
        })
        .collect();

    let mut table = Table::new(
        "solve.csv",
        &["t_re", "t_im", "newton_iters", "residual_sup", "fiber_volume", "conservation_error", "degenerate"],
    );
    let mut fields = Table::new("psi.csv", &["t_re", "t_im", "x", "y", "psi"]);
    let mut worst = 0.0f64;
    for (&t, r) in points.iter().zip(&results) {
        match r {
            Ok((mass, sol)) => {
                let err = (sol.fiber_volume - mass).abs() / mass;
                worst = worst.max(err);
                table.row([
                    num(t.re),
                    num(t.im),
                    sol.newton_iters.to_string(),
                    num(sol.residual_sup),
                    num(sol.fiber_volume),
                    num(err),
                    sol.degenerate.to_string(),
                ]);
                field_rows(&mut fields, &[num(t.re), num(t.im)], &sol.psi);
            }
            Err(e) => {
                table.row([num(t.re), num(t.im), String::new(), num(f64::NAN), num(f64::NAN), num(f64::NAN), String::new()]);
                out.fail(Some(t), None, None, e);
            }
        }
    }
    out.checks.insert("conservation", worst <= CONSERVATION_TOL);
    out.results.insert("max_conservation_error".into(), json!(worst));
    out.tables.extend([table, fields]);
    Ok(())
}

fn run_verify(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let Some(sp) = admit_family(cfg, out)? else {
        return Ok(());
    };
    let points = cfg.base_points();
    let report = verify_family(&cfg.twist()?, &points, cfg.grid()?, &cfg.geometry_options());

    let mut table = Table::new(
        "verify.csv",
        &["t_re", "t_im", "min_c", "min_eig_rho", "residual_sup", "residual_l2", "ratio_35", "argmin_gap"],
    );
    for (&t, row) in points.iter().zip(&report.rows) {
        match row {
            Ok(r) => table.row([
                num(t.re),
                num(t.im),
                num(r.min_c),
                num(r.min_eig_rho),
                num(r.residual_sup),
                num(r.residual_l2),
                opt_num(r.ratio_35),
                num(r.argmin_gap),
            ]),
            Err(e) => {
                table.row([num(t.re), num(t.im)].into_iter().chain(std::iter::repeat_n(num(f64::NAN), 6)));
                out.fail(Some(t), None, None, e);
            }
        }
    }
    let ok: Vec<_> = report.rows.iter().filter_map(|r| r.as_ref().ok()).collect();
    out.checks.insert("identity_residual", report.identity_residual_sup() <= IDENTITY_TOL);
    out.checks.insert("rho_semipositive", report.min_eig_rho() >= -EIGEN_TOL);
    if sp.min_eigenvalue > sp.psd_tol {
        out.checks.insert("rho_positive", report.min_eig_rho() > 0.0);
    }
    out.checks.insert("maximum_principle_gap", report.argmin_bound_gap() >= -GAP_TOL);
    out.checks.insert("conservation", ok.iter().all(|r| r.conservation_error <= CONSERVATION_TOL));
    out.results.insert(
        "aggregates".into(),
        json!({
            "identity_residual_sup": report.identity_residual_sup(),
            "identity_residual_l2": report.identity_residual_l2(),
            "min_c": report.min_c(),
            "min_eig_rho": report.min_eig_rho(),
            "argmin_bound_gap": report.argmin_bound_gap(),
            "ratio_35": report.ratio_35(),
            "max_newton_iters": ok.iter().map(|r| r.newton_iters).max(),
        }),
    );
    out.tables.push(table);
    Ok(())
}

fn run_sweep(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let Some(sp) = admit_family(cfg, out)? else {
        return Ok(());
    };
    let (twist, grid) = (cfg.twist()?, cfg.grid()?);
    let points = cfg.base_points();
    let rows = epsilon_sweep(&twist, &cfg.family.epsilon_list, &points, grid, &cfg.geometry_options())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    // mean of β_zz̄ bounds min eig(ρ_ε) from above by ε·mean
    let means: Vec<f64> = points
        .iter()
        .map(|&t| twist.eval_beta(t, grid).map(|b| b.zz().mean().re))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Numerical(e.to_string()))?;

    let mut table = Table::new("sweep.csv", &["epsilon", "t_re", "t_im", "min_c", "min_eig_rho"]);
    let mut certs = Table::new("certificates.csv", &["epsilon", "t_re", "t_im", "x", "y", "psi"]);
    let mut within_bound = true;
    let mut per_point: Vec<Vec<f64>> = vec![Vec::new(); points.len()];
    for row in &rows {
        let i = points.iter().position(|&p| p == row.t).expect("row for a configured base point");
        let prefix = [num(row.epsilon), num(row.t.re), num(row.t.im)];
        match &row.result {
            Ok(p) => {
                table.row(prefix.iter().cloned().chain([num(p.min_c), num(p.min_eig_rho)]));
                field_rows(&mut certs, &prefix, &p.psi);
                within_bound &= p.min_eig_rho <= row.epsilon * means[i] * (1.0 + 1e-12);
                per_point[i].push(p.min_eig_rho);
            }
            Err(e) => {
                table.row(prefix.iter().cloned().chain([num(f64::NAN), num(f64::NAN)]));
                out.fail(Some(row.t), Some(row.epsilon), None, e);
            }
        }
    }
    let computed = rows.iter().filter_map(|r| r.result.as_ref().ok());
    let min_eig = fmin(computed.map(|p| p.min_eig_rho));
    out.checks.insert("rho_semipositive", min_eig >= -EIGEN_TOL);
    if sp.min_eigenvalue > sp.psd_tol {
        out.checks.insert("rho_positive", min_eig > 0.0);
    }
    out.checks.insert("below_epsilon_bound", within_bound);
    let strictly_decreasing = per_point.iter().all(|v| v.windows(2).all(|w| w[1] < w[0]));
    out.results.insert(
        "aggregates".into(),
        json!({
            "min_eig_rho": min_eig,
            "strictly_decreasing_in_epsilon": strictly_decreasing,
            "mean_beta_zz": means,
        }),
    );
    out.tables.extend([table, certs]);
    Ok(())
}

fn run_bergman(cfg: &RunConfig, out: &mut Outcome) -> Result<(), CliError> {
    let template = cfg.chart()?;
    let points = cfg.bergman_points();
    let mut table = Table::new("bergman.csv", &["m", "x_re", "x_im", "value", "abs_error"]);
    let mut sup_errors = Vec::new();
    let mut drifts = Map::new();
    let mut fitted_c = f64::NEG_INFINITY;

    let studies: Vec<_> = cfg
        .bergman
        .m_list
        .par_iter()
        .map(|&m| {
            let study = convergence_study(&template, &[m], &points)?;
            let drift = quadrature_drift(&template.with_m(m)?, &points)?;
            Ok::<_, KaeError>((study, drift))
        })
        .collect();
    for (&m, result) in cfg.bergman.m_list.iter().zip(studies) {
        match result {
            Ok((study, drift)) => {
                let row = &study.rows[0];
                for p in &row.points {
                    table.row([m.to_string(), num(p.x.re), num(p.x.im), num(p.value), num(p.abs_error)]);
                }
                out.warnings.extend(row.warning.clone());
                sup_errors.push(json!([m, row.sup_error]));
                drifts.insert(m.to_string(), json!(drift));
                fitted_c = fitted_c.max(study.fitted_c);
                out.checks.insert("quadrature_stable", out.checks.get("quadrature_stable").copied().unwrap_or(true) && drift <= QUADRATURE_TOL);
                out.checks.insert("kernel_positive", out.checks.get("kernel_positive").copied().unwrap_or(true) && row.points.iter().all(|p| p.value.is_finite()));
            }
            Err(e) => out.fail(None, None, Some(m), &e),
        }
    }
    let errors: Vec<f64> = sup_errors.iter().filter_map(|v| v[1].as_f64()).collect();
    out.results.insert(
        "aggregates".into(),
        json!({
            "sup_error_by_m": sup_errors,
            "error_strictly_decreasing": errors.windows(2).all(|w| w[1] < w[0]),
            "quadrature_drift_by_m": drifts,
            "fitted_c": fitted_c.is_finite().then_some(fitted_c),
            "max_error": fmax(errors.iter().copied()),
        }),
    );
    out.tables.push(table);
    Ok(())
}

/// Runs one command on a validated configuration and assembles the bundle.
pub fn run_experiment(loaded: &LoadedConfig, command: Command) -> Result<ReportBundle, CliError> {
    let cfg = &loaded.config;
    let start = Instant::now();
    let mut out = Outcome::default();
    match command {
        Command::Solve => run_solve(cfg, &mut out)?,
        Command::Verify => run_verify(cfg, &mut out)?,
        Command::Sweep => run_sweep(cfg, &mut out)?,
        Command::Bergman => run_bergman(cfg, &mut out)?,
    }
    let compute = start.elapsed().as_secs_f64();
    let status = out.status();

    let mut files = BTreeMap::new();
    if cfg.wants(Format::Csv) {
        let mut failures = Table::new("failures.csv", &["t_re", "t_im", "epsilon", "m", "error"]);
        for f in &out.failures {
            failures.row(f.iter().cloned());
        }
        for t in out.tables.into_iter().chain((!out.failures.is_empty()).then_some(failures)) {
            let (name, bytes) = t.finish();
            files.insert(name, bytes);
        }
        if cfg.output.plot_script {
            files.insert("plot.py".into(), plot_script(command).into_bytes());
        }
    }
    if cfg.wants(Format::Json) {
        let mut summary = out.results;
        summary.insert("command".into(), json!(command.name()));
        summary.insert("status".into(), json!(status.name()));
        summary.insert("checks".into(), json!(out.checks));
        summary.insert("warnings".into(), json!(out.warnings));
        summary.insert("failures".into(), json!(out.failures.len()));
        files.insert("summary.json".into(), pretty(&Value::Object(summary)));
    }

    let hashes: Map<String, Value> = files.iter().map(|(k, v)| (k.clone(), json!(sha256_hex(v)))).collect();
    let manifest = json!({
        "command": command.name(),
        "config_sha256": loaded.sha256,
        "config": cfg,
        "overrides": loaded.overrides,
        "versions": {
            "kaefam": env!("CARGO_PKG_VERSION"),
            "kaefam-core": kaefam_core::VERSION,
        },
        "files": hashes,
        "timings": if cfg.output.timings { json!("timings.json") } else { Value::Null },
    });
    files.insert("manifest.json".into(), pretty(&manifest));

    let timings = cfg.output.timings.then(|| {
        pretty(&json!({
            "compute_seconds": compute,
            "total_seconds": start.elapsed().as_secs_f64(),
        }))
    });
    Ok(ReportBundle {
        command,
        status,
        files,
        timings,
    })
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(v).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}
