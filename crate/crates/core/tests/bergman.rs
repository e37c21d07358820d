use std::f64::consts::PI;

use kaefam_core::bergman::{bergman_kernel_diag, convergence_study, gram_matrix, quadrature_drift, BergmanChart};
use kaefam_core::parse_chart_weight;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn chart(weight: &str, m: u32, degree: usize, q: usize) -> BergmanChart {
    BergmanChart::new(1.0, parse_chart_weight(weight).unwrap(), m, degree, q).unwrap()
}

/// `∫_{|z|<1} e^{−(m+1)|z|²} dλ` by composite Simpson on 20000 panels in `r`.
fn simpson_center_mass(m: u32) -> f64 {
    let a = m as f64 + 1.0;
    let n = 20_000;
    let h = 1.0 / n as f64;
    let f = |r: f64| 2.0 * PI * r * (-a * r * r).exp();
    let mut s = f(0.0) + f(1.0);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn center_kernel_matches_radial_oracle() {
    // 1/mass at m = 10, 20, 40, frozen from the Simpson oracle
    let frozen = [3.5014672284796746, 6.684507614928172, 13.050705333535419];
    for (m, want) in [10, 20, 40].into_iter().zip(frozen) {
        let oracle = 1.0 / simpson_center_mass(m);
        assert!((oracle - want).abs() <= 1e-12 * want, "m={m}: oracle {oracle}");
        let closed = (m as f64 + 1.0) / (PI * (1.0 - (-(m as f64 + 1.0)).exp()));
        assert!((closed - want).abs() <= 1e-12 * want);
        let k = (m as f64 * bergman_kernel_diag(&chart("abs2(z)", m, 60, 96), &[c(0.0, 0.0)]).unwrap()[0]).exp();
        assert!((k - want).abs() <= 1e-8 * want, "m={m}: {k} vs {want}");
    }
}

#[test]
fn radial_error_decreases_in_m() {
    let study = convergence_study(&chart("abs2(z)", 1, 60, 96), &[10, 20, 40], &[c(0.0, 0.0)]).unwrap();
    let errs: Vec<f64> = study.rows.iter().map(|r| r.sup_error).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
    assert!(study.fitted_c.is_finite() && study.fitted_c > 0.0);
    // (1/m)·log K_m(0,0) ≤ C·log m / m holds with the fitted C by definition
    for r in &study.rows {
        let m = r.m as f64;
        assert!(r.points[0].value <= study.fitted_c * m.ln() / m + 1e-15);
    }
}

const PERTURBED: &str = "abs2(z) + 0.2*re(z)*re(z) - 0.2*im(z)*im(z)";

#[test]
fn perturbed_weight_converges() {
    let points = [c(0.0, 0.0), c(0.3, 0.0), c(0.0, 0.25), c(-0.2, 0.2)];
    let template = chart(PERTURBED, 1, 60, 96);
    let study = convergence_study(&template, &[10, 40], &points).unwrap();
    assert!(study.rows[1].sup_error < study.rows[0].sup_error, "{:?}", study.rows);
    for m in [10, 40] {
        let drift = quadrature_drift(&template.with_m(m).unwrap(), &points).unwrap();
        assert!(drift <= 1e-8, "m={m}: {drift}");
    }
}

#[test]
fn gram_entries_are_stable_under_quadrature_doubling() {
    for (w, m) in [("abs2(z)", 40), (PERTURBED, 40)] {
        let (a, ta) = gram_matrix(&chart(w, m, 40, 96));
        let (b, tb) = gram_matrix(&chart(w, m, 40, 192));
        let shift = (m as f64 * (ta - tb)).exp();
        for j in 0..=40 {
            for k in 0..=40 {
                let scale = (a[(j, j)].re * a[(k, k)].re).sqrt();
                assert!((a[(j, k)] - b[(j, k)] * shift).norm() <= 1e-10 * scale, "({j},{k})");
            }
        }
    }
}

#[test]
fn gram_is_hermitian_positive() {
    let (g, _) = gram_matrix(&chart(PERTURBED, 20, 30, 96));
    let n = g.nrows();
    let s: Vec<f64> = (0..n).map(|j| 1.0 / g[(j, j)].re.sqrt()).collect();
    let scaled = nalgebra::DMatrix::from_fn(n, n, |j, k| g[(j, k)] * s[j] * s[k]);
    assert!((&scaled - scaled.adjoint()).iter().all(|e| e.norm() <= 1e-12));
    let eig = scaled.symmetric_eigenvalues();
    assert!(eig.min() > -1e-12, "{}", eig.min());
}

#[test]
fn kernel_grows_with_degree() {
    let points = [c(0.0, 0.0), c(0.5, 0.1), c(-0.3, -0.6)];
    let mut prev = vec![f64::NEG_INFINITY; points.len()];
    for d in [0, 2, 5, 10, 20, 40] {
        let v = bergman_kernel_diag(&chart(PERTURBED, 10, d, 96), &points).unwrap();
        for (a, b) in prev.iter().zip(&v) {
            assert!(*b >= *a - 1e-14, "D={d}: {b} < {a}");
        }
        prev = v;
    }
}

#[test]
fn repeated_runs_agree_exactly() {
    let template = chart(PERTURBED, 1, 30, 64);
    let a = convergence_study(&template, &[15], &[c(0.1, 0.2)]).unwrap();
    let b = convergence_study(&template, &[15], &[c(0.1, 0.2)]).unwrap();
    assert_eq!(a, b);
}
