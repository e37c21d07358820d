//! Weighted Bergman kernels on a planar disk chart.
//!
//! For a strictly psh weight `τ` on `|z| < R` the space of holomorphic
//! polynomials of degree `≤ D` carries the norm
//!
//! ```text
//! ‖f‖² = ∫ |f|² e^{−mτ − |z|²} τ_zz̄ dλ
//! ```
//!
//! and `(1/m)·log K_m(x, x)` approaches `τ(x)` as `m` grows. The Gram matrix
//! of the monomials is assembled by polar quadrature (Gauss–Legendre in `r`,
//! trapezoid in `θ`), Jacobi-scaled and Cholesky-factored; the kernel
//! diagonal is then `‖L⁻¹ S v(x)‖²` with `v_j(x) = x^j`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{KaeError, Result};
use crate::expr::{differentiate, Expr, FiberPoint, PotentialExpr, Wirtinger};

pub const DEFAULT_QUADRATURE: usize = 96;

/// Squared Cholesky pivots of the scaled Gram matrix below this count as
/// numerically singular.
pub const PIVOT_FLOOR: f64 = 1e-13;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct BergmanChart {
    radius: f64,
    weight: PotentialExpr,
    laplacian: Expr,
    m: u32,
    degree: usize,
    quadrature: usize,
}

impl BergmanChart {
    /// `weight` comes from [`crate::expr::parse_chart_weight`]. `quadrature`
    /// is the number of radial nodes; the angular rule uses twice as many.
    pub fn new(radius: f64, weight: PotentialExpr, m: u32, degree: usize, quadrature: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(KaeError::InvalidArgument(format!("chart radius must be positive (got {radius})")));
        }
        if m == 0 {
            return Err(KaeError::InvalidArgument("m must be a positive integer".into()));
        }
        if quadrature < 8 {
            return Err(KaeError::InvalidArgument(format!("quadrature must be at least 8 (got {quadrature})")));
        }
        if weight.root().depends_on_fiber() {
            return Err(KaeError::InvalidArgument("chart weights cannot contain Fourier modes".into()));
        }
        let dz = differentiate(weight.root(), Wirtinger::Dt, I)?;
        let laplacian = differentiate(&dz, Wirtinger::DtBar, I)?;
        let chart = BergmanChart {
            radius,
            weight,
            laplacian,
            m,
            degree,
            quadrature,
        };
        let min = chart.min_laplacian();
        if !(min > 0.0) {
            return Err(KaeError::WeightNotStrictlyPsh { min });
        }
        Ok(chart)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn weight(&self) -> &PotentialExpr {
        &self.weight
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn quadrature(&self) -> usize {
        self.quadrature
    }

    pub fn with_m(&self, m: u32) -> Result<Self> {
        BergmanChart::new(self.radius, self.weight.clone(), m, self.degree, self.quadrature)
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        BergmanChart { degree, ..self.clone() }
    }

    pub fn with_quadrature(&self, quadrature: usize) -> Result<Self> {
        BergmanChart::new(self.radius, self.weight.clone(), self.m, self.degree, quadrature)
    }

    /// `τ(z)`
    pub fn weight_at(&self, z: Complex64) -> f64 {
        self.weight.eval(z, FiberPoint::Coords(0.0, 0.0))
    }

    /// `τ_zz̄(z)`
    pub fn laplacian_at(&self, z: Complex64) -> f64 {
        self.laplacian.eval(z, FiberPoint::Coords(0.0, 0.0)).re
    }

    fn polar_nodes(&self) -> (Vec<(f64, f64)>, usize) {
        let rule = GaussLegendre::new(NonZeroUsize::new(self.quadrature).unwrap());
        let half = 0.5 * self.radius;
        let radial = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (half * (x + 1.0), half * w))
            .collect();
        (radial, 2 * self.quadrature)
    }

    /// Minimum of `τ_zz̄` over the quadrature nodes and the boundary circle.
    pub fn min_laplacian(&self) -> f64 {
        let (radial, n_theta) = self.polar_nodes();
        let radii = radial.iter().map(|&(r, _)| r).chain(std::iter::once(self.radius));
        let mut min = f64::INFINITY;
        for r in radii {
            for l in 0..n_theta {
                let z = Complex64::from_polar(r, 2.0 * PI * l as f64 / n_theta as f64);
                min = min.min(self.laplacian_at(z));
            }
        }
        min
    }

    /// Largest `τ_zz̄` on the chart, the curvature scale of the weight.
    fn curvature_scale(&self) -> f64 {
        let (radial, n_theta) = self.polar_nodes();
        let mut max: f64 = 0.0;
        for &(r, _) in radial.iter().chain(std::iter::once(&(self.radius, 0.0))) {
            for l in 0..n_theta {
                let z = Complex64::from_polar(r, 2.0 * PI * l as f64 / n_theta as f64);
                max = max.max(self.laplacian_at(z));
            }
        }
        max
    }

    /// Warning text when `D < 2·m·R·scale`.
    pub fn degree_warning(&self) -> Option<String> {
        let needed = 2.0 * self.m as f64 * self.radius * self.curvature_scale();
        ((self.degree as f64) < needed).then(|| {
            format!(
                "degree {} below the heuristic 2·m·R·scale = {:.1} for m = {}; kernel values away from the center may be truncated",
                self.degree, needed, self.m
            )
        })
    }
}

/// Gram matrix of `1, z, …, z^D`, scaled by `e^{mτ₀}` where `τ₀` is the
/// smallest sampled weight (the shift is returned and undone in the kernel).
pub fn gram_matrix(chart: &BergmanChart) -> (DMatrix<Complex64>, f64) {
    let (radial, n_theta) = chart.polar_nodes();
    let d = chart.degree;
    let m = chart.m as f64;
    let dtheta = 2.0 * PI / n_theta as f64;

    let mut samples = Vec::with_capacity(radial.len() * n_theta);
    for &(r, _) in &radial {
        for l in 0..n_theta {
            let z = Complex64::from_polar(r, l as f64 * dtheta);
            samples.push((chart.weight_at(z), chart.laplacian_at(z)));
        }
    }
    let tau0 = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);

    // angular moments M_i(q) = ∫ W(r_i, θ) e^{iqθ} dθ for q = 0..=D
    let moments: Vec<Vec<Complex64>> = radial
        .iter()
        .enumerate()
        .map(|(i, &(r, _))| {
            let row = &samples[i * n_theta..(i + 1) * n_theta];
            let w: Vec<f64> = row
                .iter()
                .map(|&(tau, lap)| (-m * (tau - tau0) - r * r).exp() * lap * dtheta)
                .collect();
            (0..=d)
                .map(|q| {
                    w.iter()
                        .enumerate()
                        .map(|(l, &wl)| wl * Complex64::cis(q as f64 * l as f64 * dtheta))
                        .sum()
                })
                .collect()
        })
        .collect();

    let mut g = DMatrix::<Complex64>::zeros(d + 1, d + 1);
    for (i, &(r, wr)) in radial.iter().enumerate() {
        // r^{j+k}·r dr
        let powers: Vec<f64> = (0..=2 * d).scan(wr * r, |p, _| {
            let v = *p;
            *p *= r;
            Some(v)
        })
        .collect();
        for j in 0..=d {
            for k in 0..=j {
                g[(j, k)] += powers[j + k] * moments[i][j - k];
            }
        }
    }
    for j in 0..=d {
        g[(j, j)].im = 0.0;
        for k in 0..j {
            g[(k, j)] = g[(j, k)].conj();
        }
    }
    (g, tau0)
}

/// Cholesky factor of the Jacobi-scaled Gram matrix with the scaling.
struct Factor {
    lower: DMatrix<Complex64>,
    scale: Vec<f64>,
    tau0: f64,
}

fn first_singular_degree(scaled: &DMatrix<Complex64>) -> usize {
    let n = scaled.nrows();
    (1..=n)
        .find(|&k| {
            match scaled.view((0, 0), (k, k)).clone_owned().cholesky() {
                Some(c) => c.l_dirty()[(k - 1, k - 1)].norm_sqr() < PIVOT_FLOOR,
                None => true,
            }
        })
        .map_or(n - 1, |k| k - 1)
}

fn factor(chart: &BergmanChart) -> Result<Factor> {
    let (g, tau0) = gram_matrix(chart);
    let n = g.nrows();
    let scale: Vec<f64> = (0..n).map(|j| 1.0 / g[(j, j)].re.sqrt()).collect();
    if let Some(j) = scale.iter().position(|s| !s.is_finite()) {
        return Err(KaeError::ConditioningFailure { degree: j });
    }
    let scaled = DMatrix::from_fn(n, n, |j, k| g[(j, k)] * scale[j] * scale[k]);
    let lower = match scaled.clone().cholesky() {
        Some(c) => c.unpack(),
        None => {
            return Err(KaeError::ConditioningFailure {
                degree: first_singular_degree(&scaled),
            })
        }
    };
    if let Some(j) = (0..n).find(|&j| lower[(j, j)].norm_sqr() < PIVOT_FLOOR) {
        return Err(KaeError::ConditioningFailure { degree: j });
    }
    Ok(Factor { lower, scale, tau0 })
}

impl Factor {
    fn log_kernel(&self, x: Complex64) -> f64 {
        let n = self.scale.len();
        let mut v = DVector::<Complex64>::zeros(n);
        let mut p = Complex64::new(1.0, 0.0);
        for j in 0..n {
            v[j] = p * self.scale[j];
            p *= x;
        }
        let y = self.lower.solve_lower_triangular(&v).expect("nonzero pivots");
        y.norm_squared().ln()
    }
}

fn check_points(chart: &BergmanChart, points: &[Complex64]) -> Result<()> {
    match points.iter().find(|x| !(x.norm() < chart.radius)) {
        Some(x) => Err(KaeError::PointOutsideChart {
            re: x.re,
            im: x.im,
            radius: chart.radius,
        }),
        None => Ok(()),
    }
}

/// `log K_m(x, x)` at each point.
pub fn log_kernel_diag(chart: &BergmanChart, points: &[Complex64]) -> Result<Vec<f64>> {
    check_points(chart, points)?;
    let f = factor(chart)?;
    let m = chart.m as f64;
    Ok(points.iter().map(|&x| f.log_kernel(x) + m * f.tau0).collect())
}

/// `(1/m)·log K_m(x, x)` at each point.
pub fn bergman_kernel_diag(chart: &BergmanChart, points: &[Complex64]) -> Result<Vec<f64>> {
    let m = chart.m as f64;
    Ok(log_kernel_diag(chart, points)?.into_iter().map(|l| l / m).collect())
}

/// Largest change of [`bergman_kernel_diag`] when the quadrature is doubled.
pub fn quadrature_drift(chart: &BergmanChart, points: &[Complex64]) -> Result<f64> {
    let a = bergman_kernel_diag(chart, points)?;
    let b = bergman_kernel_diag(&chart.with_quadrature(2 * chart.quadrature)?, points)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointError {
    pub x: Complex64,
    pub value: f64,
    pub abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub m: u32,
    pub points: Vec<PointError>,
    pub sup_error: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// Smallest `C` with `(1/m)·log K_m(x, x) ≤ τ(x) + C·log m / m` over the
    /// table (rows with `m ≥ 2`).
    pub fitted_c: f64,
}

/// Runs the chart at every `m` (other parameters fixed) and tabulates
/// `|(1/m)·log K_m(x, x) − τ(x)|`.
pub fn convergence_study(template: &BergmanChart, m_list: &[u32], points: &[Complex64]) -> Result<ConvergenceStudy> {
    if m_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(KaeError::InvalidArgument("m-list must be strictly increasing".into()));
    }
    check_points(template, points)?;
    let rows = m_list
        .par_iter()
        .map(|&m| {
            let chart = template.with_m(m)?;
            let values = bergman_kernel_diag(&chart, points)?;
            let points: Vec<PointError> = points
                .iter()
                .zip(values)
                .map(|(&x, value)| PointError {
                    x,
                    value,
                    abs_error: (value - chart.weight_at(x)).abs(),
                })
                .collect();
            Ok(ConvergenceRow {
                m,
                sup_error: points.iter().map(|p| p.abs_error).fold(0.0, f64::max),
                points,
                warning: chart.degree_warning(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_c = rows
        .iter()
        .filter(|r| r.m >= 2)
        .flat_map(|r| {
            let m = r.m as f64;
            r.points.iter().map(move |p| m * (p.value - template.weight_at(p.x)) / m.ln())
        })
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvergenceStudy { rows, fitted_c })
}
