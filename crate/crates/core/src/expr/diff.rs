use std::f64::consts::PI;

use num_complex::Complex64;

use super::Expr;
use crate::error::{KaeError, Result};

/// Wirtinger derivative direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Wirtinger {
    Dt,
    DtBar,
    Dz,
    DzBar,
}

/// Chain-rule factors `(∂x, ∂y)` of the lattice coordinates for `∂z` or `∂z̄`,
/// using `x = (τ̄z − τz̄)/(τ̄ − τ)` and `y = (z − z̄)/(τ − τ̄)`.
pub(crate) fn lattice_factors(which: Wirtinger, tau: Complex64) -> (Complex64, Complex64) {
    let tb = tau.conj();
    match which {
        Wirtinger::Dz => (tb / (tb - tau), Complex64::new(1.0, 0.0) / (tau - tb)),
        Wirtinger::DzBar => (-tau / (tb - tau), Complex64::new(1.0, 0.0) / (tb - tau)),
        _ => (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
    }
}

/// Exact symbolic Wirtinger derivative. Mixed second derivatives come from
/// composing two calls.
pub fn differentiate(expr: &Expr, which: Wirtinger, tau: Complex64) -> Result<Expr> {
    if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
        return Err(KaeError::InvalidModulus(tau.im));
    }
    Ok(diff(expr, which, tau))
}

fn diff(expr: &Expr, which: Wirtinger, tau: Complex64) -> Expr {
    let half = Complex64::new(0.5, 0.0);
    let i_half = Complex64::new(0.0, 0.5);
    match expr {
        Expr::Const(_) => Expr::zero(),
        Expr::ReT => match which {
            Wirtinger::Dt | Wirtinger::DtBar => Expr::Const(half),
            _ => Expr::zero(),
        },
        Expr::ImT => match which {
            Wirtinger::Dt => Expr::Const(-i_half),
            Wirtinger::DtBar => Expr::Const(i_half),
            _ => Expr::zero(),
        },
        // ∂t(t t̄) = t̄ = re − i·im, ∂t̄(t t̄) = t = re + i·im
        Expr::Abs2T => match which {
            Wirtinger::Dt => Expr::sum(vec![
                Expr::ReT,
                Expr::scale(Complex64::new(0.0, -1.0), Expr::ImT),
            ]),
            Wirtinger::DtBar => Expr::sum(vec![
                Expr::ReT,
                Expr::scale(Complex64::new(0.0, 1.0), Expr::ImT),
            ]),
            _ => Expr::zero(),
        },
        Expr::CosMode(m, n) | Expr::SinMode(m, n) => {
            let (dx, dy) = lattice_factors(which, tau);
            let k = 2.0 * PI * (dx * (*m as f64) + dy * (*n as f64));
            if let Expr::CosMode(..) = expr {
                Expr::scale(-k, Expr::SinMode(*m, *n))
            } else {
                Expr::scale(k, Expr::CosMode(*m, *n))
            }
        }
        Expr::Sum(items) => Expr::sum(items.iter().map(|e| diff(e, which, tau)).collect()),
        Expr::Product(items) => {
            let mut terms = Vec::new();
            for (i, item) in items.iter().enumerate() {
                let d = diff(item, which, tau);
                if d.is_zero() {
                    continue;
                }
                let mut factors: Vec<Expr> = Vec::with_capacity(items.len());
                for (j, other) in items.iter().enumerate() {
                    factors.push(if i == j { d.clone() } else { other.clone() });
                }
                terms.push(Expr::product(factors));
            }
            Expr::sum(terms)
        }
        Expr::Scale(c, e) => Expr::scale(*c, diff(e, which, tau)),
    }
}
