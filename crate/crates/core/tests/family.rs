use std::f64::consts::PI;

use kaefam_core::geometry::{analyze_fiber, geodesic_curvature, GeometryOptions};
use kaefam_core::hermitian::eigmin;
use kaefam_core::torus::{spectral_derivative, Derivative};
use kaefam_core::verify::{check_fiber_identity, verify_family};
use kaefam_core::{parse_potential, BackgroundForm, Field, HermitianField, TorusGrid, TwistForm};
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const RE_T_FAMILY: &str = "0.1*re(t)*cosm(1,0)";

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn twist(phi: &str, tt: f64, zz: f64) -> TwistForm {
    TwistForm::new(parse_potential(phi).unwrap(), BackgroundForm::diag(tt, zz).unwrap(), I).unwrap()
}

fn grid(n: usize) -> TorusGrid {
    TorusGrid::new(n, I).unwrap()
}

fn amp() -> f64 {
    -0.05 * PI * PI / (PI * PI + 1.0)
}

#[test]
fn closed_form_amplitude() {
    assert_eq!(amp(), -0.04540001658248124);
}

#[test]
fn re_t_family_matches_closed_forms() {
    let g = grid(64);
    let f = analyze_fiber(&twist(RE_T_FAMILY, 1.0, 1.0), c(0.0, 0.0), g, &GeometryOptions::default()).unwrap();
    let a = amp();
    let k = 0.05 + a;
    let psi_t = Field::sample_real(g, |x, _| a * (2.0 * PI * x).cos());
    let psi_tt = Field::sample_real(g, |x, _| -a * a / 2.0 - a * a * (4.0 * PI * x).cos() / (2.0 * (4.0 * PI * PI + 1.0)));
    let g_tz = Field::sample_real(g, |x, _| -PI * (2.0 * PI * x).sin() * k);
    let c_field = Field::sample_real(g, |x, _| {
        let s = (2.0 * PI * x).sin();
        1.0 - a * a / 2.0 - a * a * (4.0 * PI * x).cos() / (2.0 * (4.0 * PI * PI + 1.0)) - PI * PI * s * s * k * k
    });
    let dbar = Field::sample_real(g, |x, _| {
        let co = (2.0 * PI * x).cos();
        PI.powi(4) * co * co * k * k
    });

    assert!(f.solution.psi.sup_norm() <= 1e-12);
    assert!(f.derivs.psi_t.sub(&psi_t).sup_norm() <= 1e-9);
    assert!(f.derivs.psi_tt.sub(&psi_tt).sup_norm() <= 1e-9);
    assert!(f.rho.tz.sub(&g_tz).sup_norm() <= 1e-9);
    assert!(f.rho.tt.sub(&psi_tt.add(&Field::constant(g, 1.0))).sup_norm() <= 1e-9);
    assert!(f.report.c.sub(&c_field).sup_norm() <= 1e-9);
    assert!(f.report.a.sub(&g_tz).sup_norm() <= 1e-9);
    assert!(f.report.dbar_v_sq.sub(&dbar).sup_norm() <= 1e-9);
    // the closed-form 2×2 matrix is positive definite on the grid
    let closed_min = (0..g.len())
        .map(|i| eigmin(1.0 + psi_tt.samples()[i].re, g_tz.samples()[i], 1.0))
        .fold(f64::INFINITY, f64::min);
    assert!(closed_min > 0.0);
    assert!((f.report.min_eig_rho - closed_min).abs() <= 1e-9);
}

#[test]
fn semipositivity_scan_matches_direct_eigenvalues() {
    let g = grid(64);
    let base: Vec<Complex64> = [0.125, 0.25, 0.375, 0.5]
        .iter()
        .flat_map(|&r| (0..4).map(move |q| Complex64::from_polar(r, q as f64 * PI / 2.0)))
        .collect();
    // β_tt̄ = 1, β_tz̄ = −0.05π sin 2πx, β_zz̄ = 1 − 0.1π² Re t cos 2πx
    let direct = base
        .iter()
        .flat_map(|t| {
            (0..g.len()).map(move |i| {
                let (x, _) = g.coords(i);
                let b = c(-0.05 * PI * (2.0 * PI * x).sin(), 0.0);
                eigmin(1.0, b, 1.0 - 0.1 * PI * PI * t.re * (2.0 * PI * x).cos())
            })
        })
        .fold(f64::INFINITY, f64::min);
    assert!((direct - 0.5065197799455321).abs() <= 1e-14, "{direct}");
    let report = twist(RE_T_FAMILY, 1.0, 1.0).check_semipositive(&base, g, 1e-10).unwrap();
    assert!((report.min_eigenvalue - 0.5065197799455321).abs() <= 1e-14);
    assert!(report.is_semipositive());
}

#[test]
fn identity_residual_resolves_under_doubling() {
    let opts = GeometryOptions::default();
    // the t = 0 fiber is band-limited: already at the floor from N = 16
    let mut prev = f64::INFINITY;
    for n in [16, 32, 64] {
        let r = analyze_fiber(&twist(RE_T_FAMILY, 1.0, 1.0), c(0.0, 0.0), grid(n), &opts).unwrap().report.identity_residual_sup;
        assert!(r <= 1e-8);
        assert!(r <= prev / 10.0 || r <= 100.0 * opts.solver.tol, "N={n}: {r} after {prev}");
        prev = r;
    }
    // a higher-wavenumber twist is genuinely under-resolved at N = 16
    let mut hist = vec![];
    for n in [16, 32, 64] {
        let f = analyze_fiber(&twist("0.009*re(t)*cosm(3,1)", 1.0, 1.0), c(0.9, 0.0), grid(n), &opts).unwrap();
        hist.push(f.report.identity_residual_sup);
    }
    assert!(hist[0] > 1e-10, "{hist:?}");
    for w in hist.windows(2) {
        assert!(w[1] <= w[0] / 10.0 || w[1] <= 100.0 * opts.solver.tol, "{hist:?}");
    }
}

fn fd_families() -> Vec<(TwistForm, Complex64)> {
    vec![
        (twist(RE_T_FAMILY, 1.0, 1.0), c(0.2, 0.0)),
        (twist("0.3*abs2(t)*cosm(1,0) + 0.1*im(t)*sinm(0,1)", 1.0, 1.0), c(0.2, 0.1)),
        (twist("0.5*abs2(t) + 0.08*re(t)*cosm(1,1) - 0.05*abs2(t)*sinm(2,0)", 0.5, 1.0), c(-0.1, 0.3)),
    ]
}

fn rel(a: &Field, b: &Field) -> f64 {
    a.sub(b).sup_norm() / a.sup_norm()
}

#[test]
fn implicit_derivatives_match_finite_differences() {
    let g = grid(32);
    let opts = GeometryOptions::default();
    let h = 1e-4;
    for (tw, t) in fd_families() {
        let f = analyze_fiber(&tw, t, g, &opts).unwrap();
        let at = |s: Complex64| analyze_fiber(&tw, t + s, g, &opts).unwrap();
        let (xp, xm, yp, ym) = (at(c(h, 0.0)), at(c(-h, 0.0)), at(c(0.0, h)), at(c(0.0, -h)));

        // ψ_t = ½(∂_Re − i∂_Im)ψ from centered differences of ψ
        let d_re = xp.solution.psi.sub(&xm.solution.psi).scale(0.5 / h);
        let d_im = yp.solution.psi.sub(&ym.solution.psi).scale(0.5 / h);
        let fd_t = d_re.zip(&d_im, false, |a, b| 0.5 * (a - I * b));
        let e_t = rel(&f.derivs.psi_t, &fd_t);
        assert!(e_t <= 1e-6, "ψ_t: {e_t}");

        // ψ_tt̄ = ½(∂_Re + i∂_Im)ψ_t from the four neighbouring implicit ψ_t
        let d_re = xp.derivs.psi_t.sub(&xm.derivs.psi_t).scale(0.5 / h);
        let d_im = yp.derivs.psi_t.sub(&ym.derivs.psi_t).scale(0.5 / h);
        let fd_tt = d_re.zip(&d_im, false, |a, b| 0.5 * (a + I * b));
        let e_tt = rel(&f.derivs.psi_tt, &fd_tt);
        assert!(e_tt <= 1e-6, "ψ_tt̄: {e_tt}");
        assert!(fd_tt.max_imag() <= 1e-6 * f.derivs.psi_tt.sup_norm());
    }
}

fn corpus() -> Vec<(TwistForm, bool)> {
    // (family, β strictly positive)
    vec![
        (twist("0", 1.0, 1.0), true),
        (twist("0", 0.0, 1.0), false),
        (twist(RE_T_FAMILY, 1.0, 1.0), true),
        (twist("0.3*abs2(t)*cosm(1,0) + 0.1*im(t)*sinm(0,1)", 1.0, 1.0), true),
        (twist("0.5*abs2(t) + 0.08*re(t)*cosm(1,1) - 0.05*abs2(t)*sinm(2,0)", 0.5, 1.0), true),
        (twist("0.02*re(t)*sinm(1,2)", 1.0, 1.0), true),
        (twist("0.009*re(t)*cosm(3,1)", 1.0, 1.0), true),
    ]
}

fn corpus_base() -> Vec<Complex64> {
    vec![c(0.0, 0.0), c(0.2, 0.0), c(0.0, 0.4), c(0.3, -0.2)]
}

#[test]
fn rho_is_positive_on_the_corpus() {
    let g = grid(32);
    for (tw, strict) in corpus() {
        let sp = tw.check_semipositive(&corpus_base(), g, 1e-10).unwrap();
        assert!(sp.is_semipositive());
        assert_eq!(sp.min_eigenvalue > 0.0, strict);
        let report = verify_family(&tw, &corpus_base(), g, &GeometryOptions::default());
        assert!(report.all_ok());
        assert!(report.min_eig_rho() >= -1e-10);
        if strict {
            assert!(report.min_eig_rho() > 0.0);
        }
        assert!(report.argmin_bound_gap() >= -1e-8);
        for row in report.rows.iter().map(|r| r.as_ref().unwrap()) {
            assert!(row.argmin_gap >= -10.0 * row.residual_sup.max(1e-12), "{row:?}");
            assert!(row.conservation_error <= 1e-10);
        }
    }
}

#[test]
fn positivity_equivalence() {
    let g = grid(32);
    let check = |rho: &HermitianField| {
        let c = geodesic_curvature(rho);
        let lhs = rho.min_eigenvalue() > 1e-12;
        let rhs = rho.zz.min_real() > 1e-12 && c.min_real() > 1e-12;
        assert_eq!(lhs, rhs);
        lhs
    };
    for (tw, strict) in corpus() {
        for t in corpus_base() {
            let f = analyze_fiber(&tw, t, g, &GeometryOptions::default()).unwrap();
            assert_eq!(check(&f.rho), strict);
        }
    }
    // the other direction: an off-diagonal large enough to make c negative
    let rho = HermitianField::new(
        Field::constant(g, 1.0),
        Field::sample_complex(g, |x, _| c(1.5 * (2.0 * PI * x).sin(), 0.0)),
        Field::constant(g, 1.0),
    );
    assert!(!check(&rho));
}

#[test]
fn derived_fields_are_real_and_consistent() {
    let g = grid(32);
    let opts = GeometryOptions::default();
    for (tw, _) in corpus() {
        let f = analyze_fiber(&tw, c(0.3, -0.2), g, &opts).unwrap();
        for fld in [&f.report.c, &f.report.dbar_v_sq, &f.report.beta_vv, &f.derivs.psi_tt, &f.rho.tt, &f.rho.zz] {
            assert!(fld.max_imag() <= 1e-12);
        }
        assert!((f.beta.zt().sub(&f.beta.tz().conj())).sup_norm() == 0.0);
        let lap = spectral_derivative(&f.solution.psi, Derivative::DzDzBar).unwrap();
        assert!(f.rho.zz.sub(&f.beta.zz().add(&lap)).sup_norm() <= 10.0 * opts.solver.tol);
        assert!(f.report.beta_vv.min_real() >= -1e-12);
        let tz = spectral_derivative(&f.derivs.psi_t, Derivative::DzBar).unwrap();
        assert_eq!(tz, f.derivs.psi_tz);
    }
}

#[test]
fn alternative_lift_norm_breaks_the_identity() {
    // |∂̄v|² weighted by g_zz̄ = e^ψ instead of the bare |∂z̄a|²
    let g = grid(32);
    let tw = twist("0.3*abs2(t)*cosm(1,0) + 0.1*im(t)*sinm(0,1)", 1.0, 1.0);
    let f = analyze_fiber(&tw, c(0.2, 0.1), g, &GeometryOptions::default()).unwrap();
    let psi = &f.solution.psi;
    let bare = check_fiber_identity(&f.report.c, &f.report.dbar_v_sq, &f.report.beta_vv, psi).unwrap();
    let weighted = f.report.dbar_v_sq.mul(&psi.exp());
    let alt = check_fiber_identity(&f.report.c, &weighted, &f.report.beta_vv, psi).unwrap();
    assert!(bare.sup <= 1e-10, "{}", bare.sup);
    assert!(alt.sup >= 1e4 * bare.sup.max(1e-12), "{} vs {}", alt.sup, bare.sup);
}
