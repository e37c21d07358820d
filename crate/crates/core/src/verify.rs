//! Numerical certificates for the positivity of ρ on each configured family:
//! the fiberwise elliptic identity satisfied by the geodesic curvature, the
//! eigenvalue checks, the integral lower-bound ratio and the ε-sweep.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{KaeError, Result};
use crate::geometry::{analyze_beta, FiberGeometry, GeometryOptions, GeometryReport, RhoField};
use crate::hermitian::HermitianField;
use crate::solver::FiberSolution;
use crate::torus::{integrate, spectral_derivative, Derivative, Field, TorusGrid};
use crate::twist::{BetaEval, TwistForm};

/// Denominators below this make the integral ratio degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

/// Fiber volume below which an ε of the sweep is rejected.
pub const MIN_SWEEP_VOLUME: f64 = 1e-6;

pub const DEFAULT_EPSILONS: [f64; 5] = [1.0, 0.5, 0.25, 0.1, 0.05];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub sup: f64,
    pub l2: f64,
}

/// Residual of `□c = −c + |∂̄v|² + β(v, v̄)` with `□ = −e^{−ψ}∂z∂z̄`.
pub fn check_fiber_identity(c: &Field, dbar_v_sq: &Field, beta_vv: &Field, psi: &Field) -> Result<ResidualNorms> {
    let lap = spectral_derivative(c, Derivative::DzDzBar)?;
    let box_c = lap.zip(psi, true, |l, p| -l * (-p).exp());
    let r = box_c.add(c).sub(dbar_v_sq).sub(beta_vv);
    Ok(ResidualNorms {
        sup: r.sup_norm(),
        l2: r.l2_norm(),
    })
}

/// Identity residual of a finished report (same as stored in the report).
pub fn identity_residual(report: &GeometryReport, sol: &FiberSolution) -> Result<ResidualNorms> {
    check_fiber_identity(&report.c, &report.dbar_v_sq, &report.beta_vv, &sol.psi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityReport {
    pub min_eig_rho: f64,
    /// `min eig(ρ − β − bound)` when a bound form is supplied.
    pub min_eig_excess: Option<f64>,
}

/// Smallest eigenvalue of ρ, and of `Θ − bound = ρ − β − bound` when a lower
/// bound for the relative canonical curvature is given.
pub fn check_positivity(rho: &RhoField, beta: &HermitianField, lower_bound: Option<&HermitianField>) -> PositivityReport {
    PositivityReport {
        min_eig_rho: rho.min_eigenvalue(),
        min_eig_excess: lower_bound.map(|b| rho.sub(beta).sub(b).min_eigenvalue()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureBound {
    /// `inf c / ∫(|∂̄v|² + β(v, v̄))·e^ψ`, `None` when the denominator is
    /// below [`DEGENERATE_DENOMINATOR`].
    pub ratio: Option<f64>,
    /// `c(z*) − (|∂̄v|² + β(v, v̄))(z*)` at the grid argmin `z*` of `c`.
    pub argmin_gap: f64,
    pub denominator: f64,
}

pub fn check_curvature_bound(report: &GeometryReport, sol: &FiberSolution) -> CurvatureBound {
    let density = report.dbar_v_sq.add(&report.beta_vv);
    let denominator = integrate(&density.mul(&sol.psi.exp())).re;
    let star = report.c.argmin_real();
    let inf_c = report.c.samples()[star].re;
    CurvatureBound {
        ratio: (denominator.abs() >= DEGENERATE_DENOMINATOR).then(|| inf_c / denominator),
        argmin_gap: inf_c - density.samples()[star].re,
        denominator,
    }
}

/// One base point of a verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct BasePointRow {
    pub t: Complex64,
    pub min_c: f64,
    pub min_eig_rho: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub ratio_35: Option<f64>,
    pub argmin_gap: f64,
    pub newton_iters: usize,
    pub conservation_error: f64,
}

impl BasePointRow {
    pub fn from_geometry(g: &FiberGeometry) -> Self {
        let bound = check_curvature_bound(&g.report, &g.solution);
        let beta_mass = integrate(g.beta.zz()).re;
        BasePointRow {
            t: g.t,
            min_c: g.report.min_c,
            min_eig_rho: g.report.min_eig_rho,
            residual_sup: g.report.identity_residual_sup,
            residual_l2: g.report.identity_residual_l2,
            ratio_35: bound.ratio,
            argmin_gap: bound.argmin_gap,
            newton_iters: g.solution.newton_iters,
            conservation_error: (g.solution.fiber_volume - beta_mass).abs() / beta_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub rows: Vec<std::result::Result<BasePointRow, KaeError>>,
}

impl VerificationReport {
    fn ok_rows(&self) -> impl Iterator<Item = &BasePointRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn identity_residual_sup(&self) -> f64 {
        self.ok_rows().map(|r| r.residual_sup).fold(0.0, f64::max)
    }

    pub fn identity_residual_l2(&self) -> f64 {
        self.ok_rows().map(|r| r.residual_l2).fold(0.0, f64::max)
    }

    pub fn min_c(&self) -> f64 {
        self.ok_rows().map(|r| r.min_c).fold(f64::INFINITY, f64::min)
    }

    pub fn min_eig_rho(&self) -> f64 {
        self.ok_rows().map(|r| r.min_eig_rho).fold(f64::INFINITY, f64::min)
    }

    pub fn argmin_bound_gap(&self) -> f64 {
        self.ok_rows().map(|r| r.argmin_gap).fold(f64::INFINITY, f64::min)
    }

    /// Smallest non-degenerate ratio; `None` if every base point is degenerate.
    pub fn ratio_35(&self) -> Option<f64> {
        self.ok_rows()
            .filter_map(|r| r.ratio_35)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))))
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.is_ok())
    }
}

/// Runs the geometry pipeline at every base point and tabulates the checks.
pub fn verify_family(
    twist: &TwistForm,
    base_points: &[Complex64],
    grid: TorusGrid,
    opts: &GeometryOptions,
) -> VerificationReport {
    let rows = base_points
        .par_iter()
        .map(|&t| {
            let beta = twist.eval_beta(t, grid)?;
            analyze_beta(beta, None, opts).map(|g| BasePointRow::from_geometry(&g))
        })
        .collect();
    VerificationReport { rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub min_c: f64,
    pub min_eig_rho: f64,
    /// The solved potential for `ε·β`, which serves as the nef certificate.
    pub psi: Field,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub t: Complex64,
    pub result: std::result::Result<SweepPoint, KaeError>,
}

fn sweep_point(beta: &BetaEval, eps: f64, opts: &GeometryOptions) -> Result<SweepPoint> {
    if !(eps > 0.0) {
        return Err(KaeError::InvalidArgument(format!("ε must be positive (got {eps})")));
    }
    let scaled = beta.scaled(eps);
    let volume = integrate(scaled.zz()).re;
    if volume < MIN_SWEEP_VOLUME {
        return Err(KaeError::EpsilonTooSmall {
            epsilon: eps,
            volume,
            threshold: MIN_SWEEP_VOLUME,
        });
    }
    let g = analyze_beta(scaled, None, opts)?;
    Ok(SweepPoint {
        min_c: g.report.min_c,
        min_eig_rho: g.report.min_eig_rho,
        psi: g.solution.psi,
    })
}

/// Solves the pipeline with β replaced by `ε·β` for every ε and base point.
/// Rows are sorted by decreasing ε, then by base point order; failures stay
/// in the table.
pub fn epsilon_sweep(
    twist: &TwistForm,
    epsilons: &[f64],
    base_points: &[Complex64],
    grid: TorusGrid,
    opts: &GeometryOptions,
) -> Result<Vec<SweepRow>> {
    let betas = base_points
        .iter()
        .map(|&t| twist.eval_beta(t, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut eps_sorted = epsilons.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let items: Vec<(f64, usize)> = eps_sorted
        .iter()
        .flat_map(|&e| (0..betas.len()).map(move |i| (e, i)))
        .collect();
    Ok(items
        .par_iter()
        .map(|&(eps, i)| SweepRow {
            epsilon: eps,
            t: base_points[i],
            result: sweep_point(&betas[i], eps, opts),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_potential;
    use crate::geometry::analyze_fiber;
    use crate::twist::BackgroundForm;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn twist(phi: &str, tt: f64, zz: f64) -> TwistForm {
        TwistForm::new(parse_potential(phi).unwrap(), BackgroundForm::diag(tt, zz).unwrap(), I).unwrap()
    }

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n, I).unwrap()
    }

    #[test]
    fn flat_family_identity_and_ratio() {
        let f = analyze_fiber(&twist("0", 1.0, 1.0), Complex64::new(0.0, 0.0), grid(16), &GeometryOptions::default()).unwrap();
        assert!(f.report.identity_residual_sup < 1e-14);
        let b = check_curvature_bound(&f.report, &f.solution);
        assert!((b.ratio.unwrap() - 1.0).abs() < 1e-12);
        assert!(b.argmin_gap.abs() < 1e-14);
        let p = check_positivity(&f.rho, &f.beta.form, None);
        assert_eq!(p.min_eig_rho, 1.0);
    }

    #[test]
    fn degenerate_family() {
        let f = analyze_fiber(&twist("0", 0.0, 1.0), Complex64::new(0.0, 0.0), grid(16), &GeometryOptions::default()).unwrap();
        assert!(f.report.identity_residual_sup < 1e-14);
        let b = check_curvature_bound(&f.report, &f.solution);
        assert_eq!(b.ratio, None);
        assert_eq!(b.argmin_gap, 0.0);
        assert_eq!(check_positivity(&f.rho, &f.beta.form, None).min_eig_rho, 0.0);
    }

    #[test]
    fn lower_bound_form() {
        let f = analyze_fiber(&twist("0", 1.0, 1.0), Complex64::new(0.0, 0.0), grid(8), &GeometryOptions::default()).unwrap();
        let g = grid(8);
        let bound = HermitianField::new(
            Field::constant(g, -0.5),
            Field::constant_complex(g, Complex64::new(0.0, 0.0)),
            Field::constant(g, -0.25),
        );
        // Θ = 0 here, so Θ − bound has eigenvalues 0.5 and 0.25
        let p = check_positivity(&f.rho, &f.beta.form, Some(&bound));
        assert!((p.min_eig_excess.unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn flat_sweep_is_exact() {
        let rows = epsilon_sweep(&twist("0", 1.0, 1.0), &[0.1, 1.0, 0.5], &[Complex64::new(0.0, 0.0)], grid(16), &GeometryOptions::default())
            .unwrap();
        let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
        assert_eq!(eps, vec![1.0, 0.5, 0.1]);
        for r in &rows {
            let p = r.result.as_ref().unwrap();
            assert!((p.min_eig_rho - r.epsilon).abs() < 1e-12);
            assert!((p.min_c - r.epsilon).abs() < 1e-12);
            assert!((p.psi.at(2, 3).re - r.epsilon.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_epsilon_rejected_but_rows_kept() {
        let rows = epsilon_sweep(&twist("0", 1.0, 1.0), &[1.0, 1e-9, -1.0], &[Complex64::new(0.0, 0.0)], grid(8), &GeometryOptions::default())
            .unwrap();
        assert!(rows[0].result.is_ok());
        assert!(matches!(rows[1].result, Err(KaeError::EpsilonTooSmall { .. })));
        assert!(matches!(rows[2].result, Err(KaeError::InvalidArgument(_))));
    }
}
