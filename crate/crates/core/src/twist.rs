//! The twist form `β = H + i∂∂̄Φ` on the product family `D × T`.

use num_complex::Complex64;

use crate::error::{KaeError, Result};
use crate::expr::{differentiate, Expr, FiberPoint, PotentialExpr, Wirtinger};
use crate::hermitian::{eigmin, HermitianField};
use crate::torus::{Field, TorusGrid};

pub const DEFAULT_PSD_TOL: f64 = 1e-10;

/// Constant Hermitian part of β, rows/columns indexed `(t, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackgroundForm {
    tt: f64,
    tz: Complex64,
    zz: f64,
}

impl BackgroundForm {
    pub fn new(tt: f64, tz: Complex64, zz: f64, psd_tol: f64) -> Result<Self> {
        if ![tt, zz, tz.re, tz.im].iter().all(|v| v.is_finite()) {
            return Err(KaeError::InvalidArgument(
                "background form entries must be finite".into(),
            ));
        }
        let lo = eigmin(tt, tz, zz);
        if lo < -psd_tol {
            return Err(KaeError::BackgroundNotSemipositive { min_eigenvalue: lo });
        }
        Ok(BackgroundForm { tt, tz, zz })
    }

    pub fn diag(tt: f64, zz: f64) -> Result<Self> {
        BackgroundForm::new(tt, Complex64::new(0.0, 0.0), zz, DEFAULT_PSD_TOL)
    }

    pub fn tt(&self) -> f64 {
        self.tt
    }

    pub fn tz(&self) -> Complex64 {
        self.tz
    }

    pub fn zt(&self) -> Complex64 {
        self.tz.conj()
    }

    pub fn zz(&self) -> f64 {
        self.zz
    }
}

/// β restricted to one fiber, with the t-derivatives of `β_zz̄` that implicit
/// differentiation of the fiber equation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaEval {
    pub t: Complex64,
    pub form: HermitianField,
    /// `∂t β_zz̄`
    pub dt_zz: Field,
    /// `∂t∂t̄ β_zz̄`
    pub dtt_zz: Field,
}

impl BetaEval {
    pub fn tt(&self) -> &Field {
        &self.form.tt
    }

    pub fn tz(&self) -> &Field {
        &self.form.tz
    }

    pub fn zt(&self) -> Field {
        self.form.zt()
    }

    pub fn zz(&self) -> &Field {
        &self.form.zz
    }

    /// `ε·β`, used by the nef sweep.
    pub fn scaled(&self, eps: f64) -> BetaEval {
        BetaEval {
            t: self.t,
            form: self.form.scale(eps),
            dt_zz: self.dt_zz.scale(eps),
            dtt_zz: self.dtt_zz.scale(eps),
        }
    }
}

/// Potential plus background, with the Wirtinger derivatives precomputed for
/// a fixed modulus.
#[derive(Debug, Clone)]
pub struct TwistForm {
    potential: PotentialExpr,
    background: BackgroundForm,
    tau: Complex64,
    d_tt: Expr,
    d_tz: Expr,
    d_zz: Expr,
    d_t_zz: Expr,
    d_tt_zz: Expr,
}

impl TwistForm {
    pub fn new(potential: PotentialExpr, background: BackgroundForm, tau: Complex64) -> Result<Self> {
        let d = |e: &Expr, w| differentiate(e, w, tau);
        let phi = potential.root();
        let d_t = d(phi, Wirtinger::Dt)?;
        let d_tt = d(&d_t, Wirtinger::DtBar)?;
        let d_tz = d(&d_t, Wirtinger::DzBar)?;
        let d_zz = d(&d(phi, Wirtinger::Dz)?, Wirtinger::DzBar)?;
        let d_t_zz = d(&d_zz, Wirtinger::Dt)?;
        let d_tt_zz = d(&d_t_zz, Wirtinger::DtBar)?;
        Ok(TwistForm {
            potential,
            background,
            tau,
            d_tt,
            d_tz,
            d_zz,
            d_t_zz,
            d_tt_zz,
        })
    }

    pub fn potential(&self) -> &PotentialExpr {
        &self.potential
    }

    pub fn background(&self) -> &BackgroundForm {
        &self.background
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    fn sample(&self, e: &Expr, offset: Complex64, t: Complex64, grid: TorusGrid, real: bool) -> Field {
        let n = grid.n();
        let data: Vec<Complex64> = (0..grid.len())
            .map(|i| offset + e.eval(t, FiberPoint::Node { j: i / n, k: i % n, n }))
            .collect();
        let f = Field::from_complex(grid, data);
        if real {
            f.re()
        } else {
            f
        }
    }

    /// Samples `β_ab̄ = H_ab̄ + ∂a∂b̄Φ` and the t-derivatives of `β_zz̄` on
    /// the fiber over `t`.
    pub fn eval_beta(&self, t: Complex64, grid: TorusGrid) -> Result<BetaEval> {
        if grid.tau() != self.tau {
            return Err(KaeError::InvalidArgument(
                "grid modulus differs from the twist form's modulus".into(),
            ));
        }
        let h = &self.background;
        let zero = Complex64::new(0.0, 0.0);
        let tt = self.sample(&self.d_tt, h.tt.into(), t, grid, true);
        let tz = self.sample(&self.d_tz, h.tz, t, grid, false);
        let zz = self.sample(&self.d_zz, h.zz.into(), t, grid, true);
        Ok(BetaEval {
            t,
            form: HermitianField::new(tt, tz, zz),
            dt_zz: self.sample(&self.d_t_zz, zero, t, grid, false),
            dtt_zz: self.sample(&self.d_tt_zz, zero, t, grid, true),
        })
    }

    /// Smallest eigenvalue of β over the given base points and grid nodes.
    pub fn check_semipositive(
        &self,
        base_points: &[Complex64],
        grid: TorusGrid,
        psd_tol: f64,
    ) -> Result<SemipositivityReport> {
        let mut report = SemipositivityReport {
            min_eigenvalue: f64::INFINITY,
            at_t: Complex64::new(0.0, 0.0),
            at_node: 0,
            psd_tol,
        };
        for &t in base_points {
            let beta = self.eval_beta(t, grid)?;
            let eig = beta.form.eigmin_field();
            let i = eig.argmin_real();
            let v = eig.samples()[i].re;
            if v < report.min_eigenvalue {
                report.min_eigenvalue = v;
                report.at_t = t;
                report.at_node = i;
            }
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemipositivityReport {
    pub min_eigenvalue: f64,
    pub at_t: Complex64,
    pub at_node: usize,
    pub psd_tol: f64,
}

impl SemipositivityReport {
    pub fn is_semipositive(&self) -> bool {
        self.min_eigenvalue >= -self.psd_tol
    }

    /// Error form of a violation, for callers that refuse to proceed.
    pub fn require(&self) -> Result<()> {
        if self.is_semipositive() {
            Ok(())
        } else {
            Err(KaeError::NotSemipositive {
                min_eigenvalue: self.min_eigenvalue,
                t_re: self.at_t.re,
                t_im: self.at_t.im,
            })
        }
    }
}
