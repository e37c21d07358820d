//! Periodic grids on the torus `ℂ/(ℤ + τℤ)` and spectral calculus on them.
//!
//! Samples sit at lattice coordinates `(x_j, y_k) = (j/N, k/N)`, i.e. at
//! `z = x_j + τ·y_k`. A Fourier mode `e^{2πi(mx + ny)}` is an eigenfunction of
//! `∂z`, `∂z̄` and `∂z∂z̄`, so derivatives are a forward FFT, a multiplication
//! by the exact symbol and an inverse FFT.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{KaeError, Result};
use crate::expr::Wirtinger;

/// Resolution and modulus of a square periodic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusGrid {
    n: usize,
    tau: Complex64,
}

impl TorusGrid {
    pub fn new(n: usize, tau: Complex64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(KaeError::InvalidGrid(format!(
                "resolution must be a power of two and at least 8 (got {n})"
            )));
        }
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(KaeError::InvalidModulus(tau.im));
        }
        Ok(TorusGrid { n, tau })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area of the fundamental domain.
    pub fn area(&self) -> f64 {
        self.tau.im
    }

    /// Lattice coordinates of node `idx = j·N + k`.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (j, k) = (idx / self.n, idx % self.n);
        (j as f64 / self.n as f64, k as f64 / self.n as f64)
    }

    /// Signed wavenumber of FFT index `i`; `None` for the Nyquist index.
    pub(crate) fn wavenumber(&self, i: usize) -> Option<i64> {
        let half = self.n / 2;
        if i == half {
            None
        } else if i < half {
            Some(i as i64)
        } else {
            Some(i as i64 - self.n as i64)
        }
    }

    /// Symbol of `which` on the mode `e^{2πi(mx + ny)}`.
    pub fn symbol(&self, which: Derivative, m: i64, n: i64) -> Complex64 {
        let tau = self.tau;
        let tb = tau.conj();
        let two_pi_i = Complex64::new(0.0, 2.0 * PI);
        let (mf, nf) = (m as f64, n as f64);
        match which {
            Derivative::Dz => two_pi_i * (tb * mf - nf) / (tb - tau),
            Derivative::DzBar => two_pi_i * (Complex64::new(nf, 0.0) - tau * mf) / (tb - tau),
            Derivative::DzDzBar => {
                let w = tau * mf - nf;
                Complex64::new(-PI * PI * w.norm_sqr() / (tau.im * tau.im), 0.0)
            }
        }
    }
}

/// Spectral derivative operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Dz,
    DzBar,
    DzDzBar,
}

impl TryFrom<Wirtinger> for Derivative {
    type Error = KaeError;

    fn try_from(w: Wirtinger) -> Result<Self> {
        match w {
            Wirtinger::Dz => Ok(Derivative::Dz),
            Wirtinger::DzBar => Ok(Derivative::DzBar),
            _ => Err(KaeError::InvalidArgument(
                "base derivatives have no fiber symbol".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Real,
    Complex,
}

/// Samples on a [`TorusGrid`], stored row-major with `x` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: TorusGrid,
    data: Vec<Complex64>,
    kind: FieldKind,
}

impl Field {
    pub fn from_complex(grid: TorusGrid, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.len(), "sample count does not match grid");
        Field {
            grid,
            data,
            kind: FieldKind::Complex,
        }
    }

    pub fn from_real(grid: TorusGrid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.len(), "sample count does not match grid");
        Field {
            grid,
            data: data.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            kind: FieldKind::Real,
        }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Field::from_real(grid, vec![value; grid.len()])
    }

    pub fn constant_complex(grid: TorusGrid, value: Complex64) -> Self {
        Field::from_complex(grid, vec![value; grid.len()])
    }

    /// Samples `f(x, y)` at the grid nodes.
    pub fn sample_real(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let data = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.coords(i);
                f(x, y)
            })
            .collect();
        Field::from_real(grid, data)
    }

    pub fn sample_complex(grid: TorusGrid, f: impl Fn(f64, f64) -> Complex64) -> Self {
        let data = (0..grid.len())
            .map(|i| {
                let (x, y) = grid.coords(i);
                f(x, y)
            })
            .collect();
        Field::from_complex(grid, data)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn is_real(&self) -> bool {
        self.kind == FieldKind::Real
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.data
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.re).collect()
    }

    pub fn at(&self, j: usize, k: usize) -> Complex64 {
        self.data[j * self.grid.n + k]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Applies `f` pointwise. The result is real-tagged iff `real` is set, in
    /// which case imaginary parts are dropped.
    pub fn map(&self, real: bool, f: impl Fn(Complex64) -> Complex64) -> Field {
        let data = self.data.iter().map(|&c| f(c)).collect();
        Field::with_kind(self.grid, data, real)
    }

    pub fn zip(&self, other: &Field, real: bool, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field::with_kind(self.grid, data, real)
    }

    fn with_kind(grid: TorusGrid, mut data: Vec<Complex64>, real: bool) -> Field {
        if real {
            for c in &mut data {
                c.im = 0.0;
            }
        }
        Field {
            grid,
            data,
            kind: if real { FieldKind::Real } else { FieldKind::Complex },
        }
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip(other, self.is_real() && other.is_real(), |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip(other, self.is_real() && other.is_real(), |a, b| a - b)
    }

    pub fn mul(&self, other: &Field) -> Field {
        self.zip(other, self.is_real() && other.is_real(), |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Field {
        self.map(self.is_real(), |c| c * s)
    }

    pub fn exp(&self) -> Field {
        self.map(self.is_real(), |c| c.exp())
    }

    pub fn conj(&self) -> Field {
        self.map(self.is_real(), |c| c.conj())
    }

    pub fn norm_sqr(&self) -> Field {
        self.map(true, |c| Complex64::new(c.norm_sqr(), 0.0))
    }

    /// Real part, tagged real.
    pub fn re(&self) -> Field {
        self.map(true, |c| c)
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `(∫|f|²)^{1/2}` over the fundamental domain.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        (s * self.grid.area() / self.grid.len() as f64).sqrt()
    }

    pub fn mean(&self) -> Complex64 {
        self.data.iter().sum::<Complex64>() / self.grid.len() as f64
    }

    pub fn min_real(&self) -> f64 {
        self.data.iter().map(|c| c.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_real(&self) -> f64 {
        self.data.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the smallest real part (first one on ties).
    pub fn argmin_real(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.data.iter().enumerate() {
            if c.re < self.data[best].re {
                best = i;
            }
        }
        best
    }

    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(n), p.plan_fft_inverse(n))
    })
}

/// Two-dimensional transform in place, unnormalized.
fn fft2(data: &mut [Complex64], n: usize, forward: bool) {
    let (fwd, inv) = plans(n);
    let plan = if forward { fwd } else { inv };
    // y (fast index) first, then x through a transpose
    plan.process(data);
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    transpose(data, &mut t, n);
    plan.process(&mut t);
    transpose(&t, data, n);
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for j in 0..n {
        for k in 0..n {
            dst[k * n + j] = src[j * n + k];
        }
    }
}

/// Fourier coefficients `f̂(m, n)` laid out like the samples (FFT order).
pub fn forward(f: &Field) -> Vec<Complex64> {
    let n = f.grid.n;
    let mut data = f.data.clone();
    fft2(&mut data, n, true);
    let scale = 1.0 / (n * n) as f64;
    for c in &mut data {
        *c *= scale;
    }
    data
}

/// Inverse of [`forward`].
pub fn inverse(grid: TorusGrid, coeffs: Vec<Complex64>, real: bool) -> Field {
    let mut data = coeffs;
    fft2(&mut data, grid.n, false);
    Field::with_kind(grid, data, real)
}

/// Multiplies every Fourier coefficient by `symbol(m, n)`; Nyquist modes are
/// sent to zero.
pub fn apply_symbol(
    f: &Field,
    real_out: bool,
    symbol: impl Fn(i64, i64) -> Complex64,
) -> Field {
    let grid = f.grid;
    let n = grid.n;
    let mut coeffs = forward(f);
    for j in 0..n {
        let m = grid.wavenumber(j);
        for k in 0..n {
            let idx = j * n + k;
            coeffs[idx] = match (m, grid.wavenumber(k)) {
                (Some(m), Some(nn)) => coeffs[idx] * symbol(m, nn),
                _ => Complex64::new(0.0, 0.0),
            };
        }
    }
    inverse(grid, coeffs, real_out)
}

/// Spectral `∂z`, `∂z̄` or `∂z∂z̄`. Exact on modes with `|m|, |n| < N/2`.
pub fn spectral_derivative(f: &Field, which: Derivative) -> Result<Field> {
    if !f.is_finite() {
        return Err(KaeError::NonFinite);
    }
    let grid = f.grid;
    let real_out = which == Derivative::DzDzBar && f.is_real();
    // constants are annihilated; removing the mean first keeps it out of the
    // transform roundoff, which the symbol amplifies by up to O(N²)
    let mean = f.mean();
    let centered = f.map(f.is_real(), |c| c - mean);
    Ok(apply_symbol(&centered, real_out, |m, n| grid.symbol(which, m, n)))
}

/// Zeroes every mode with `|m| > N/3` or `|n| > N/3`.
pub fn dealias(f: &Field) -> Field {
    let cut = (f.grid.n / 3) as i64;
    apply_symbol(f, f.is_real(), |m, n| {
        if m.abs() > cut || n.abs() > cut {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Trapezoidal quadrature over the fundamental domain, `(Im τ / N²)·Σ f`.
pub fn integrate(f: &Field) -> Complex64 {
    let s: Complex64 = f.data.iter().sum();
    s * (f.grid.area() / f.grid.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const I: Complex64 = Complex64::new(0.0, 1.0);

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::new(n, I).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TorusGrid::new(48, I).is_err());
        assert!(TorusGrid::new(4, I).is_err());
        assert!(TorusGrid::new(16, Complex64::new(0.2, -1.0)).is_err());
        assert!(TorusGrid::new(16, Complex64::new(0.2, 0.9)).is_ok());
    }

    #[test]
    fn dz_of_plane_wave() {
        let g = grid(32);
        let f = Field::sample_complex(g, |x, _| (Complex64::new(0.0, 2.0 * PI * x)).exp());
        let d = spectral_derivative(&f, Derivative::Dz).unwrap();
        let want = f.map(false, |c| c * Complex64::new(0.0, PI));
        assert!(d.sub(&want).sup_norm() < 1e-12);
    }

    #[test]
    fn constants_have_zero_derivatives() {
        let g = grid(16);
        let f = Field::constant(g, 3.5);
        for which in [Derivative::Dz, Derivative::DzBar, Derivative::DzDzBar] {
            assert!(spectral_derivative(&f, which).unwrap().sup_norm() < 1e-14);
        }
    }

    #[test]
    fn laplacian_of_cos_y() {
        let g = grid(32);
        let f = Field::sample_real(g, |_, y| (2.0 * PI * y).cos());
        let d = spectral_derivative(&f, Derivative::DzDzBar).unwrap();
        assert!(d.is_real());
        assert!(d.sub(&f.scale(-PI * PI)).sup_norm() < 1e-12);
    }

    #[test]
    fn integrals() {
        let g = grid(32);
        assert!((integrate(&Field::constant(g, 1.0)) - 1.0).norm() < 1e-15);
        let c = Field::sample_real(g, |x, _| (2.0 * PI * x).cos());
        assert!(integrate(&c).norm() < 1e-15);
        let g2 = TorusGrid::new(16, Complex64::new(0.3, 2.0)).unwrap();
        assert!((integrate(&Field::constant(g2, 1.0)) - 2.0).norm() < 1e-15);
    }

    #[test]
    fn exp_cos_integral_matches_bessel_series() {
        // I0(1) = Σ 1/(4^k (k!)²)
        let mut i0 = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            i0 += 1.0 / (4f64.powi(k) * fact * fact);
        }
        assert!((i0 - 1.2660658777520082).abs() < 1e-15);
        let f = Field::sample_real(grid(64), |x, _| (2.0 * PI * x).cos().exp());
        assert!((integrate(&f).re - i0).abs() < 1e-13);
    }

    #[test]
    fn non_finite_rejected() {
        let mut v = vec![0.0; 64];
        v[3] = f64::NAN;
        let f = Field::from_real(grid(8), v);
        assert_eq!(spectral_derivative(&f, Derivative::Dz), Err(KaeError::NonFinite));
    }

    #[test]
    fn dealias_removes_high_modes() {
        let g = grid(16);
        let f = Field::sample_real(g, |x, y| (2.0 * PI * x).cos() + (2.0 * PI * 7.0 * y).sin());
        let d = dealias(&f);
        let want = Field::sample_real(g, |x, _| (2.0 * PI * x).cos());
        assert!(d.sub(&want).sup_norm() < 1e-13);
    }
}
