//! Scalar fiber equation `ψ_zz̄ + β_zz̄ = e^ψ` on a torus fiber.
//!
//! Newton's method with Armijo damping on the residual
//! `F(ψ) = ∂z∂z̄ψ + β_zz̄ − e^ψ`. Each step solves the linearization
//! `L[u] = ∂z∂z̄u − e^ψ·u` by conjugate gradients on `−L`, which is symmetric
//! positive definite, preconditioned by the constant-coefficient operator
//! `(mean(e^ψ) − ∂z∂z̄)⁻¹` applied in Fourier space.

use num_complex::Complex64;

use crate::error::{KaeError, Result};
use crate::torus::{self, dealias, integrate, spectral_derivative, Derivative, Field, TorusGrid};

/// Mean of `β_zz̄` below which the input is flagged as degenerate.
pub const DEGENERATE_MEAN: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Sup-norm tolerance on the fiber residual.
    pub tol: f64,
    pub max_iters: usize,
    pub max_halvings: usize,
    /// Linear solves stop at `forcing·r·min(1, r)` for Newton residual `r`.
    pub forcing: f64,
    pub linear_max_iters: usize,
    /// Apply the 2/3 rule to `e^ψ` when forming the residual.
    pub dealias: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-12,
            max_iters: 50,
            max_halvings: 30,
            forcing: 0.01,
            linear_max_iters: 2000,
            dealias: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberSolution {
    pub psi: Field,
    pub residual_sup: f64,
    pub newton_iters: usize,
    /// `∫ e^ψ`
    pub fiber_volume: f64,
    /// Sup-norm residual before each Newton step and at exit.
    pub residual_history: Vec<f64>,
    /// Set when `mean(β_zz̄) < DEGENERATE_MEAN`.
    pub degenerate: bool,
}

impl FiberSolution {
    pub fn grid(&self) -> TorusGrid {
        self.psi.grid()
    }
}

/// `∂z∂z̄ψ + β_zz̄ − e^ψ`.
pub fn fiber_residual(psi: &Field, beta_zz: &Field, opts: &SolverOptions) -> Result<Field> {
    let lap = spectral_derivative(psi, Derivative::DzDzBar)?;
    let mut e = psi.exp();
    if opts.dealias {
        e = dealias(&e);
    }
    Ok(lap.add(beta_zz).sub(&e))
}

/// The residual of `ψ = u + offset`, differentiating only `u`.
fn offset_residual(u: &Field, offset: f64, beta_zz: &Field, opts: &SolverOptions) -> Result<Field> {
    let lap = spectral_derivative(u, Derivative::DzDzBar)?;
    let mut e = shifted(u, offset).exp();
    if opts.dealias {
        e = dealias(&e);
    }
    Ok(lap.add(beta_zz).sub(&e))
}

fn shifted(u: &Field, offset: f64) -> Field {
    u.map(true, |v| v + offset)
}

fn check_pair(a: &Field, b: &Field) -> Result<()> {
    if a.grid() != b.grid() {
        return Err(KaeError::InvalidArgument("fields live on different grids".into()));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(KaeError::NonFinite);
    }
    Ok(())
}

/// Solves the fiber equation for a real `β_zz̄` with positive mean.
pub fn solve_fiber_ke(beta_zz: &Field, init: Option<&Field>, opts: &SolverOptions) -> Result<FiberSolution> {
    let grid = beta_zz.grid();
    if !beta_zz.is_finite() {
        return Err(KaeError::NonFinite);
    }
    if !beta_zz.is_real() {
        return Err(KaeError::InvalidArgument("β_zz̄ must be a real field".into()));
    }
    let mean = integrate(beta_zz).re / grid.area();
    if !(mean > 0.0) {
        return Err(KaeError::KahlerClassViolation { mean });
    }
    // ψ = ln(mean) + u; for small β the constant dominates ψ and its
    // rounding, amplified by the Laplacian symbol, would set the residual floor
    let offset = mean.ln();
    let mut u = match init {
        Some(f) => {
            check_pair(f, beta_zz)?;
            shifted(&f.re(), -offset)
        }
        None => Field::constant(grid, 0.0),
    };

    let mut history = Vec::new();
    let mut residual = offset_residual(&u, offset, beta_zz, opts)?;
    let mut iters = 0;
    loop {
        let r = residual.sup_norm();
        history.push(r);
        if r <= opts.tol {
            break;
        }
        if iters == opts.max_iters || !r.is_finite() {
            return Err(KaeError::ConvergenceFailure {
                solver: "Newton",
                iterations: iters,
                last: r,
                history,
            });
        }
        let lin_tol = (opts.forcing * r * r.min(1.0)).max(0.1 * opts.tol);
        let step = pcg(&shifted(&u, offset), &residual.scale(-1.0), lin_tol, opts.linear_max_iters)?.re();

        let merit = residual.l2_norm();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = u.add(&step.scale(lambda));
            let trial_res = offset_residual(&trial, offset, beta_zz, opts)?;
            let m = trial_res.l2_norm();
            if m.is_finite() && m <= (1.0 - 1e-4 * lambda) * merit {
                accepted = Some((trial, trial_res));
                break;
            }
            lambda *= 0.5;
        }
        iters += 1;
        match accepted {
            Some((p, res)) => {
                u = p;
                residual = res;
            }
            None => {
                let solver = if r < 100.0 * opts.tol {
                    "Newton (residual stagnated at roundoff level; relax tol or lower N)"
                } else {
                    "Newton line search"
                };
                return Err(KaeError::ConvergenceFailure {
                    solver,
                    iterations: iters,
                    last: r,
                    history,
                })
            }
        }
    }

    let psi = shifted(&u, offset);
    let fiber_volume = integrate(&psi.exp()).re;
    Ok(FiberSolution {
        residual_sup: *history.last().unwrap(),
        psi,
        newton_iters: iters,
        fiber_volume,
        residual_history: history,
        degenerate: mean < DEGENERATE_MEAN,
    })
}

/// Solves `∂z∂z̄u − e^ψ·u = rhs` to sup-norm residual `tol`. The result is
/// real-tagged when `rhs` is.
pub fn solve_linearized(psi: &Field, rhs: &Field, tol: f64) -> Result<Field> {
    check_pair(psi, rhs)?;
    let u = pcg(psi, rhs, tol, SolverOptions::default().linear_max_iters)?;
    Ok(if rhs.is_real() { u.re() } else { u })
}

/// `∂z∂z̄u − w·u`.
pub fn apply_linearized(u: &Field, weight: &Field) -> Result<Field> {
    let lap = spectral_derivative(u, Derivative::DzDzBar)?;
    Ok(lap.sub(&weight.mul(u)))
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.samples()
        .iter()
        .zip(b.samples())
        .map(|(x, y)| (x.conj() * y).re)
        .sum()
}

fn precondition(r: &Field, shift: f64) -> Field {
    let grid = r.grid();
    let n = grid.n();
    let mut coeffs = torus::forward(r);
    for j in 0..n {
        for k in 0..n {
            let lap = match (grid.wavenumber(j), grid.wavenumber(k)) {
                (Some(m), Some(nn)) => grid.symbol(Derivative::DzDzBar, m, nn).re,
                _ => 0.0,
            };
            coeffs[j * n + k] /= shift - lap;
        }
    }
    torus::inverse(grid, coeffs, false)
}

/// Preconditioned CG for `L[u] = rhs`, run on the SPD form `(−L)u = −rhs`.
fn pcg(psi: &Field, rhs: &Field, tol: f64, max_iters: usize) -> Result<Field> {
    let grid = psi.grid();
    let weight = psi.exp();
    let shift = weight.mean().re;
    let b = rhs.scale(-1.0);
    let neg_l = |u: &Field| apply_linearized(u, &weight).map(|f| f.scale(-1.0));

    let mut u = Field::constant_complex(grid, Complex64::new(0.0, 0.0));
    let mut r = b.clone();
    if r.sup_norm() <= tol {
        return Ok(u);
    }
    let mut z = precondition(&r, shift);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    for it in 0..max_iters {
        let ap = neg_l(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        u = u.add(&p.scale(alpha));
        r = r.sub(&ap.scale(alpha));
        let rs = r.sup_norm();
        history.push(rs);
        if rs <= tol {
            // confirm against the true residual, restart if recurrence drifted
            let true_r = b.sub(&neg_l(&u)?);
            if true_r.sup_norm() <= tol {
                return Ok(u);
            }
            r = true_r;
            z = precondition(&r, shift);
            p = z.clone();
            rz = dot(&r, &z);
            continue;
        }
        z = precondition(&r, shift);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = z.add(&p.scale(beta));
        if it > 50 && history.len() > 50 {
            let old = history[history.len() - 51];
            if rs >= 0.999 * old {
                break;
            }
        }
    }
    Err(KaeError::ConvergenceFailure {
        solver: "preconditioned CG",
        iterations: history.len(),
        last: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
