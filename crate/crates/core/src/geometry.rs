//! The relative form `ρ = β + i∂∂̄ψ` over one base point and the quantities
//! derived from it.
//!
//! Base derivatives of `ψ` come from differentiating the fiber equation in
//! `t` and `t̄`:
//!
//! ```text
//! L[ψ_t]  = −∂tβ_zz̄
//! L[ψ_tt̄] = e^ψ·|ψ_t|² − ∂t∂t̄β_zz̄,      L[u] = u_zz̄ − e^ψ·u
//! ```
//!
//! so no base grid is needed and every quantity is spectrally accurate in `z`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::hermitian::HermitianField;
use crate::solver::{solve_fiber_ke, solve_linearized, FiberSolution, SolverOptions};
use crate::torus::{spectral_derivative, Derivative, Field, TorusGrid};
use crate::twist::{BetaEval, TwistForm};
use crate::verify::check_fiber_identity;

/// Components `g_tt̄`, `g_tz̄`, `g_zz̄` of ρ on one fiber.
pub type RhoField = HermitianField;

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyDerivatives {
    pub psi_t: Field,
    /// `ψ_tt̄`, real
    pub psi_tt: Field,
    /// `ψ_tz̄ = ∂z̄ ψ_t`
    pub psi_tz: Field,
}

impl FamilyDerivatives {
    pub fn psi_tbar(&self) -> Field {
        self.psi_t.conj()
    }
}

pub fn compute_t_derivatives(sol: &FiberSolution, beta: &BetaEval, linear_tol: f64) -> Result<FamilyDerivatives> {
    let psi = &sol.psi;
    let psi_t = solve_linearized(psi, &beta.dt_zz.scale(-1.0), linear_tol)?;
    let rhs = psi.exp().mul(&psi_t.norm_sqr()).sub(&beta.dtt_zz);
    let psi_tt = solve_linearized(psi, &rhs, linear_tol)?;
    let psi_tz = spectral_derivative(&psi_t, Derivative::DzBar)?;
    Ok(FamilyDerivatives {
        psi_t,
        psi_tt,
        psi_tz,
    })
}

/// `g_tt̄ = β_tt̄ + ψ_tt̄`, `g_tz̄ = β_tz̄ + ψ_tz̄`, `g_zz̄ = e^ψ`.
pub fn assemble_rho(sol: &FiberSolution, derivs: &FamilyDerivatives, beta: &BetaEval) -> RhoField {
    HermitianField::new(
        beta.tt().add(&derivs.psi_tt),
        beta.tz().add(&derivs.psi_tz),
        sol.psi.exp(),
    )
}

/// `c(ρ) = g_tt̄ − |g_tz̄|²/g_zz̄`.
pub fn geodesic_curvature(rho: &RhoField) -> Field {
    let off = rho.tz.norm_sqr().zip(&rho.zz, true, |a, b| a / b);
    rho.tt.sub(&off)
}

/// Coefficient `a = g_tz̄/g_zz̄` of the horizontal lift `v = ∂t − a·∂z`, and
/// the pointwise norm `|∂̄v|² = |∂z̄a|²`.
pub fn horizontal_lift(rho: &RhoField) -> Result<(Field, Field)> {
    let a = rho.tz.zip(&rho.zz, false, |g, w| g / w);
    let dbar = spectral_derivative(&a, Derivative::DzBar)?.norm_sqr();
    Ok((a, dbar))
}

/// `β(v, v̄) = β_tt̄ − 2·Re(ā·β_tz̄) + |a|²·β_zz̄`.
pub fn beta_along_lift(beta: &HermitianField, a: &Field) -> Field {
    let grid = a.grid();
    let data = (0..grid.len())
        .map(|i| {
            let a = a.samples()[i];
            let tt = beta.tt.samples()[i].re;
            let tz = beta.tz.samples()[i];
            let zz = beta.zz.samples()[i].re;
            tt - 2.0 * (a.conj() * tz).re + a.norm_sqr() * zz
        })
        .collect();
    Field::from_real(grid, data)
}

/// Curvature `Θ = ρ − β` of the induced metric on the relative canonical
/// bundle, with the smallest eigenvalue of `Θ + β = ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalCurvature {
    pub theta: HermitianField,
    pub min_eig_rho: f64,
}

pub fn relative_canonical_curvature(rho: &RhoField, beta: &HermitianField) -> CanonicalCurvature {
    let theta = rho.sub(beta);
    CanonicalCurvature {
        min_eig_rho: theta.add(beta).min_eigenvalue(),
        theta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub c: Field,
    pub a: Field,
    pub dbar_v_sq: Field,
    pub beta_vv: Field,
    pub identity_residual_sup: f64,
    pub identity_residual_l2: f64,
    pub min_c: f64,
    pub min_eig_rho: f64,
}

impl GeometryReport {
    pub fn build(sol: &FiberSolution, rho: &RhoField, beta: &BetaEval) -> Result<Self> {
        let c = geodesic_curvature(rho);
        let (a, dbar_v_sq) = horizontal_lift(rho)?;
        let beta_vv = beta_along_lift(&beta.form, &a);
        let residual = check_fiber_identity(&c, &dbar_v_sq, &beta_vv, &sol.psi)?;
        Ok(GeometryReport {
            min_c: c.min_real(),
            min_eig_rho: rho.min_eigenvalue(),
            identity_residual_sup: residual.sup,
            identity_residual_l2: residual.l2,
            c,
            a,
            dbar_v_sq,
            beta_vv,
        })
    }
}

/// Everything computed on the fiber over one base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberGeometry {
    pub t: Complex64,
    pub beta: BetaEval,
    pub solution: FiberSolution,
    pub derivs: FamilyDerivatives,
    pub rho: RhoField,
    pub report: GeometryReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryOptions {
    pub solver: SolverOptions,
    /// Sup-norm tolerance for the two implicit-differentiation solves.
    pub linear_tol: f64,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        GeometryOptions {
            solver: SolverOptions::default(),
            linear_tol: 1e-12,
        }
    }
}

/// Runs the whole per-fiber pipeline on an already evaluated twist.
pub fn analyze_beta(beta: BetaEval, init: Option<&Field>, opts: &GeometryOptions) -> Result<FiberGeometry> {
    let solution = solve_fiber_ke(beta.zz(), init, &opts.solver)?;
    let derivs = compute_t_derivatives(&solution, &beta, opts.linear_tol)?;
    let rho = assemble_rho(&solution, &derivs, &beta);
    let report = GeometryReport::build(&solution, &rho, &beta)?;
    Ok(FiberGeometry {
        t: beta.t,
        beta,
        solution,
        derivs,
        rho,
        report,
    })
}

pub fn analyze_fiber(twist: &TwistForm, t: Complex64, grid: TorusGrid, opts: &GeometryOptions) -> Result<FiberGeometry> {
    analyze_beta(twist.eval_beta(t, grid)?, None, opts)
}

/// Base points are independent; results come back in input order.
pub fn analyze_base_points(
    twist: &TwistForm,
    base_points: &[Complex64],
    grid: TorusGrid,
    opts: &GeometryOptions,
) -> Vec<Result<FiberGeometry>> {
    base_points
        .par_iter()
        .map(|&t| analyze_fiber(twist, t, grid, opts))
        .collect()
}
