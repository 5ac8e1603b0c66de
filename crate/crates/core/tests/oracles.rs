//! Closed-form flows compared with the integrator.

use vbflow::flow::{dual_flow, integrate_base, integrate_linear, pullback_section, IntegratorConfig};
use vbflow::geometry::{BoxDomain, DerivationSpec, SectionSpec, VectorFieldSpec};
use vbflow::linalg::{max_abs_diff, vec_max_abs_diff, Matrix};
use vbflow::odesolve::expm;

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn constant_data_gives_translation_and_exponential() {
    // X = (1, -0.5), A constant: phi_t(x) = x + tX, F_t = exp(-tA)
    let base = BoxDomain::cube(2, -2.0, 2.0).unwrap();
    let d = DerivationSpec::parse(base, &["1", "-0.5"], &[["0.2", "1.5"], ["-0.7", "0.1"]]).unwrap();
    let a = Matrix::from_row_slice(2, 2, &[0.2, 1.5, -0.7, 0.1]);
    for t in [-0.9, -0.3, 0.4, 1.1] {
        let r = integrate_linear(&d, &[0.1, 0.2], t, &cfg()).unwrap().complete(t).unwrap();
        assert!(vec_max_abs_diff(&r.base_point, &[0.1 + t, 0.2 - 0.5 * t]) < 1e-10);
        let want = expm(&(a.clone() * -t)).unwrap();
        assert!(max_abs_diff(&r.fundamental, &want) < 1e-8, "t={t}");
    }
}

#[test]
fn scalar_bundle_flow_is_exponential_of_an_integral() {
    // X = 1, A = x1: along phi_s(x) = x + s, F_t = exp(-(x t + t^2/2))
    let base = BoxDomain::new(vec![-3.0], vec![3.0]).unwrap();
    let d = DerivationSpec::parse(base, &["1"], &[["x1"]]).unwrap();
    for (x, t) in [(0.5, 1.0), (-1.0, 2.0), (1.2, -1.5)] {
        let f = integrate_linear(&d, &[x], t, &cfg()).unwrap().complete(t).unwrap().fundamental[(0, 0)];
        let want = (-(x * t + t * t / 2.0)).exp();
        assert!((f - want).abs() < 1e-8 * want.max(1.0), "x={x} t={t}: {f} vs {want}");
    }
}

#[test]
fn linear_base_field_escape_time() {
    // x' = x leaves (-1, 2) from x0 = 0.5 at t = ln 4
    let base = BoxDomain::new(vec![-1.0], vec![2.0]).unwrap();
    let x = VectorFieldSpec::parse(&["x1"]).unwrap();
    let r = integrate_base(&x, &base, &[0.5], 5.0, &cfg()).unwrap();
    let te = r.escape_time.expect("escapes");
    assert!((te - 4f64.ln()).abs() < 1e-8, "{te}");
}

#[test]
fn rotation_flow_pulls_back_rotated_sections() {
    // X = d/dx1, A = J: F_t = exp(-tJ), and e = (cos x1, sin x1) is invariant
    let base = BoxDomain::cube(2, -2.0, 2.0).unwrap();
    let d = DerivationSpec::parse(base, &["1", "0"], &[["0", "1"], ["-1", "0"]]).unwrap();
    let e = SectionSpec::parse(&["cos(x1)", "sin(x1)"], 2).unwrap();
    for t in [-1.0, 0.3, 1.4] {
        let p = pullback_section(&d, &e, t, &[0.2, 0.0], &cfg()).unwrap();
        assert!(vec_max_abs_diff(&p, &[0.2f64.cos(), 0.2f64.sin()]) < 1e-8);
    }
}

#[test]
fn dual_flow_is_inverse_transpose() {
    let base = BoxDomain::cube(2, -2.0, 2.0).unwrap();
    let d = DerivationSpec::parse(base, &["0.5", "x1"], &[["x2", "1"], ["0", "-x1"]]).unwrap();
    let f = integrate_linear(&d, &[0.1, 0.1], 0.7, &cfg()).unwrap().fundamental;
    let g = dual_flow(&d, &[0.1, 0.1], 0.7, &cfg()).unwrap();
    assert!(max_abs_diff(&(g.transpose() * f), &Matrix::identity(2, 2)) < 1e-9);
}

#[test]
fn expm_of_rotation_generator() {
    let j = Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    for th in [0.1, 1.0, 3.0, 10.0] {
        let e = expm(&(j.clone() * th)).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        assert!(max_abs_diff(&e, &want) < 1e-12 * th.max(1.0), "theta={th}");
    }
}
