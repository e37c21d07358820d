//! Twist potentials as small expression trees.
//!
//! A potential depends on the base coordinate `t` only through `re(t)`, `im(t)`
//! and `abs2(t) = t·t̄`, and on the fiber only through integer Fourier modes
//! `cos(2π(mx + ny))` / `sin(2π(mx + ny))`, where `(x, y)` are lattice
//! coordinates of `z = x + τy`. Both restrictions make every Wirtinger
//! derivative closed-form and every fiber field exactly periodic.
//!
//! Parsed potentials carry real coefficients ([`PotentialExpr`]); derivatives
//! are general [`Expr`] trees with complex coefficients.

mod diff;
mod parse;

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

pub use diff::{differentiate, Wirtinger};
pub use parse::{parse_chart_weight, parse_potential};

/// Expression node. Sums and products are n-ary and flattened.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    ReT,
    ImT,
    /// `t·t̄`
    Abs2T,
    /// `cos(2π(mx + ny))`
    CosMode(i64, i64),
    /// `sin(2π(mx + ny))`
    SinMode(i64, i64),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Scale(Complex64, Box<Expr>),
}

/// Where fiber modes are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum FiberPoint {
    /// Continuous lattice coordinates `(x, y)`.
    Coords(f64, f64),
    /// Grid node `(j/n, k/n)`; phases are reduced modulo `n` in integer
    /// arithmetic so that sampled fields are exactly periodic.
    Node { j: usize, k: usize, n: usize },
}

impl FiberPoint {
    fn phase(self, m: i64, n_mode: i64) -> f64 {
        match self {
            FiberPoint::Coords(x, y) => (m as f64) * x + (n_mode as f64) * y,
            FiberPoint::Node { j, k, n } => {
                let n = n as i64;
                let idx = (m * j as i64 + n_mode * k as i64).rem_euclid(n);
                idx as f64 / n as f64
            }
        }
    }
}

impl Expr {
    pub fn zero() -> Self {
        Expr::Const(Complex64::new(0.0, 0.0))
    }

    pub fn constant(re: f64) -> Self {
        Expr::Const(Complex64::new(re, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == Complex64::new(0.0, 0.0))
    }

    /// True when the expression contains a Fourier mode.
    pub fn depends_on_fiber(&self) -> bool {
        match self {
            Expr::CosMode(..) | Expr::SinMode(..) => true,
            Expr::Const(_) | Expr::ReT | Expr::ImT | Expr::Abs2T => false,
            Expr::Sum(items) | Expr::Product(items) => items.iter().any(Expr::depends_on_fiber),
            Expr::Scale(_, e) => e.depends_on_fiber(),
        }
    }

    pub fn depends_on_base(&self) -> bool {
        match self {
            Expr::ReT | Expr::ImT | Expr::Abs2T => true,
            Expr::Const(_) | Expr::CosMode(..) | Expr::SinMode(..) => false,
            Expr::Sum(items) | Expr::Product(items) => items.iter().any(Expr::depends_on_base),
            Expr::Scale(_, e) => e.depends_on_base(),
        }
    }

    /// True when every coefficient in the tree is real.
    pub fn has_real_coefficients(&self) -> bool {
        match self {
            Expr::Const(c) => c.im == 0.0,
            Expr::Scale(c, e) => c.im == 0.0 && e.has_real_coefficients(),
            Expr::Sum(items) | Expr::Product(items) => {
                items.iter().all(Expr::has_real_coefficients)
            }
            _ => true,
        }
    }

    pub fn eval(&self, t: Complex64, at: FiberPoint) -> Complex64 {
        match self {
            Expr::Const(c) => *c,
            Expr::ReT => Complex64::new(t.re, 0.0),
            Expr::ImT => Complex64::new(t.im, 0.0),
            Expr::Abs2T => Complex64::new(t.norm_sqr(), 0.0),
            Expr::CosMode(m, n) => Complex64::new((2.0 * PI * at.phase(*m, *n)).cos(), 0.0),
            Expr::SinMode(m, n) => Complex64::new((2.0 * PI * at.phase(*m, *n)).sin(), 0.0),
            Expr::Sum(items) => items.iter().map(|e| e.eval(t, at)).sum(),
            Expr::Product(items) => items.iter().map(|e| e.eval(t, at)).product(),
            Expr::Scale(c, e) => c * e.eval(t, at),
        }
    }

    pub(crate) fn sum(items: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(items.len());
        let mut constant = Complex64::new(0.0, 0.0);
        let mut push = |e: Expr, flat: &mut Vec<Expr>| match e {
            Expr::Const(c) => constant += c,
            e => flat.push(e),
        };
        for item in items {
            match item {
                Expr::Sum(inner) => inner.into_iter().for_each(|e| push(e, &mut flat)),
                e => push(e, &mut flat),
            }
        }
        if constant != Complex64::new(0.0, 0.0) {
            flat.push(Expr::Const(constant));
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => Expr::Sum(flat),
        }
    }

    pub(crate) fn product(items: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(items.len());
        for item in items {
            match item {
                e if e.is_zero() => return Expr::zero(),
                Expr::Product(inner) => flat.extend(inner),
                Expr::Const(c) if c == Complex64::new(1.0, 0.0) => {}
                e => flat.push(e),
            }
        }
        match flat.len() {
            0 => Expr::constant(1.0),
            1 => flat.pop().unwrap(),
            _ => Expr::Product(flat),
        }
    }

    pub(crate) fn scale(c: Complex64, e: Expr) -> Expr {
        if c == Complex64::new(0.0, 0.0) || e.is_zero() {
            return Expr::zero();
        }
        if c == Complex64::new(1.0, 0.0) {
            return e;
        }
        match e {
            Expr::Const(k) => Expr::Const(c * k),
            Expr::Scale(k, inner) => Expr::scale(c * k, *inner),
            e => Expr::Scale(c, Box::new(e)),
        }
    }
}

fn fmt_coeff(c: Complex64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if c.im == 0.0 {
        write!(f, "{:?}", c.re)
    } else {
        write!(f, "({:?}{:+?}i)", c.re, c.im)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => fmt_coeff(*c, f),
            Expr::ReT => write!(f, "re(t)"),
            Expr::ImT => write!(f, "im(t)"),
            Expr::Abs2T => write!(f, "abs2(t)"),
            Expr::CosMode(m, n) => write!(f, "cosm({m},{n})"),
            Expr::SinMode(m, n) => write!(f, "sinm({m},{n})"),
            Expr::Sum(items) => {
                write!(f, "(")?;
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, ")")
            }
            Expr::Product(items) => {
                for (i, e) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Expr::Scale(c, e) => {
                fmt_coeff(*c, f)?;
                write!(f, "*({e})")
            }
        }
    }
}

/// A parsed twist potential: real coefficients, periodic in the fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialExpr {
    root: Expr,
}

impl PotentialExpr {
    pub(crate) fn from_root(root: Expr) -> Self {
        debug_assert!(root.has_real_coefficients());
        PotentialExpr { root }
    }

    pub fn zero() -> Self {
        PotentialExpr { root: Expr::zero() }
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn eval(&self, t: Complex64, at: FiberPoint) -> f64 {
        self.root.eval(t, at).re
    }
}

impl fmt::Display for PotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
