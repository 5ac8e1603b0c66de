//! Flows of base vector fields and of linear vector fields.
//!
//! The flow of `D̂` is computed as a pair `(φ_t(x), F_t(x))`: the base flow of
//! the symbol and the fundamental matrix solving `Ḟ = −A(φ_s(x)) F`,
//! `F_0 = I`. Both are integrated as one system so they share a step
//! sequence, and only the base component can leave the domain.

mod dopri;

pub use dopri::IntegratorConfig;
pub(crate) use dopri::{integrate, Outcome};

use crate::error::{Error, Result};
use crate::expr::EvalError;
use crate::geometry::{tensor_derivation, BoxDomain, DerivationSpec, PointDerivation, SectionSpec, TotalField, VectorFieldSpec};
use crate::linalg::{invert, kron, Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowStatus {
    Complete,
    Escaped,
}

/// Base flow `φ_t(x0)`, or the time at which the trajectory left the box.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseFlowResult {
    pub status: FlowStatus,
    pub escape_time: Option<f64>,
    /// `φ_t(x0)` when complete; the last point inside the box otherwise.
    pub point: Vec<f64>,
}

/// Flow of a linear vector field restricted to one fiber.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearFlowResult {
    pub status: FlowStatus,
    pub escape_time: Option<f64>,
    pub base_point: Vec<f64>,
    pub fundamental: Matrix,
    pub condition_estimate: f64,
}

impl LinearFlowResult {
    /// Errors with [`Error::Escaped`] unless the flow reached time `t`.
    pub fn complete(self, t: f64) -> Result<LinearFlowResult> {
        match self.status {
            FlowStatus::Complete => Ok(self),
            FlowStatus::Escaped => Err(Error::Escaped { escape_time: self.escape_time.unwrap_or(f64::NAN), target: t }),
        }
    }
}

/// Integral curve of `D̂` through a single point `(x0, v0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFlow {
    pub status: FlowStatus,
    pub escape_time: Option<f64>,
    pub base_point: Vec<f64>,
    pub fiber: Vec<f64>,
}

fn base_inside(domain: &BoxDomain) -> impl Fn(&[f64]) -> bool + '_ {
    let m = domain.dim();
    move |y: &[f64]| domain.contains(&y[..m])
}

fn to_eval<T>(r: Result<T>) -> Result<T, EvalError> {
    r.map_err(|e| match e {
        Error::Eval(ev) => ev,
        other => EvalError::Domain { node: other.to_string(), reason: "evaluation failed", argument: f64::NAN },
    })
}

/// Integrates `ẋ = X(x)` for time `t` starting at `x0`.
pub fn integrate_base(
    field: &VectorFieldSpec,
    domain: &BoxDomain,
    x0: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<BaseFlowResult> {
    if field.dim() != domain.dim() {
        return Err(Error::Dimension(format!("field of dimension {} on a box of dimension {}", field.dim(), domain.dim())));
    }
    domain.require(x0)?;
    let rhs = |y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
        for (d, c) in dy.iter_mut().zip(field.components()) {
            *d = c.eval(y, None)?;
        }
        Ok(())
    };
    Ok(match integrate(&rhs, x0, t, base_inside(domain), cfg)? {
        Outcome::Complete(point) => BaseFlowResult { status: FlowStatus::Complete, escape_time: None, point },
        Outcome::Escaped { time, state } => {
            BaseFlowResult { status: FlowStatus::Escaped, escape_time: Some(time), point: state }
        }
    })
}

/// Joint integration of the base flow and the fundamental matrix of `D̂`.
pub fn integrate_linear(d: &DerivationSpec, x0: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<LinearFlowResult> {
    let (m, k) = (d.dim(), d.rank());
    d.base().require(x0)?;
    let rhs = |y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
        let x = &y[..m];
        let xdot = to_eval(d.symbol_at(x))?;
        dy[..m].copy_from_slice(&xdot);
        let a = to_eval(d.matrix_at(x))?;
        // F is stored column-major after the base coordinates
        let f = nalgebra::DMatrixView::from_slice(&y[m..], k, k);
        let fdot = -(a * f);
        dy[m..].copy_from_slice(fdot.as_slice());
        Ok(())
    };
    let mut y0 = x0.to_vec();
    y0.extend(Matrix::identity(k, k).as_slice());
    let (status, escape_time, state) = match integrate(&rhs, &y0, t, base_inside(d.base()), cfg)? {
        Outcome::Complete(y) => (FlowStatus::Complete, None, y),
        Outcome::Escaped { time, state } => (FlowStatus::Escaped, Some(time), state),
    };
    let fundamental = Matrix::from_column_slice(k, k, &state[m..]);
    let condition_estimate = invert(&fundamental).map(|inv| inv.condition).unwrap_or(f64::INFINITY);
    if status == FlowStatus::Complete && !(condition_estimate <= cfg.max_condition) {
        return Err(Error::IllConditioned { condition: condition_estimate, bound: cfg.max_condition });
    }
    Ok(LinearFlowResult { status, escape_time, base_point: state[..m].to_vec(), fundamental, condition_estimate })
}

/// Integrates the `(m + k)`-dimensional system `(ẋ, v̇) = (X(x), −A(x) v)`
/// directly, without using the linear structure.
pub fn flow_pointwise(d: &DerivationSpec, x0: &[f64], v0: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<PointFlow> {
    let (m, k) = (d.dim(), d.rank());
    if v0.len() != k {
        return Err(Error::Dimension(format!("fiber vector has length {}, rank is {k}", v0.len())));
    }
    d.base().require(x0)?;
    let hat = d.hat();
    let rhs = |y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
        let v = to_eval(hat.eval(y))?;
        dy.copy_from_slice(&v);
        Ok(())
    };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(v0);
    Ok(match integrate(&rhs, &y0, t, base_inside(d.base()), cfg)? {
        Outcome::Complete(y) => {
            PointFlow { status: FlowStatus::Complete, escape_time: None, base_point: y[..m].to_vec(), fiber: y[m..].to_vec() }
        }
        Outcome::Escaped { time, state } => PointFlow {
            status: FlowStatus::Escaped,
            escape_time: Some(time),
            base_point: state[..m].to_vec(),
            fiber: state[m..].to_vec(),
        },
    })
}

fn checked_inverse(f: &Matrix, cfg: &IntegratorConfig) -> Result<Matrix> {
    let inv = invert(f).ok_or(Error::Singular)?;
    if !(inv.condition <= cfg.max_condition) {
        return Err(Error::IllConditioned { condition: inv.condition, bound: cfg.max_condition });
    }
    Ok(inv.inverse)
}

/// `(Φ_t^⋆ e)(x) = Φ_{−t}(e(φ_t(x))) = F_t(x)⁻¹ e(φ_t(x))`.
pub fn pullback_section(
    d: &DerivationSpec,
    e: &SectionSpec,
    t: f64,
    x: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    if e.rank() != d.rank() || e.dim() != d.dim() {
        return Err(Error::Dimension("section does not match the derivation's bundle".into()));
    }
    if t == 0.0 {
        d.base().require(x)?;
        return e.eval(x);
    }
    let flow = integrate_linear(d, x, t, cfg)?.complete(t)?;
    let inv = checked_inverse(&flow.fundamental, cfg)?;
    let value = Vector::from_vec(e.eval(&flow.base_point)?);
    Ok((inv * value).iter().copied().collect())
}

/// Fiber matrix `G_t(x) = (F_t(x)ᵀ)⁻¹` of the dual flow `ε ↦ ε ∘ Φ_{−t}`.
pub fn dual_flow(d: &DerivationSpec, x: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Matrix> {
    let flow = integrate_linear(d, x, t, cfg)?.complete(t)?;
    checked_inverse(&flow.fundamental.transpose(), cfg)
}

/// Fiber matrix `F^E_t(x) ⊗ F^F_t(x)` of the tensor product flow.
pub fn tensor_flow(
    de: &DerivationSpec,
    df: &DerivationSpec,
    x: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Matrix> {
    // validates base and symbol agreement
    tensor_derivation(de, df)?;
    let fe = integrate_linear(de, x, t, cfg)?.complete(t)?;
    let ff = integrate_linear(df, x, t, cfg)?.complete(t)?;
    Ok(kron(&fe.fundamental, &ff.fundamental))
}

/// Lie bracket `[Y, Z](p) = J_Z(p) Y(p) − J_Y(p) Z(p)` of total-space fields.
pub fn bracket_vf(y: &dyn TotalField, z: &dyn TotalField, p: &[f64]) -> Result<Vec<f64>> {
    if y.base_dim() != z.base_dim() || y.rank() != z.rank() {
        return Err(Error::Dimension("vector fields live on different total spaces".into()));
    }
    let yv = Vector::from_vec(y.eval(p)?);
    let zv = Vector::from_vec(z.eval(p)?);
    let out = z.jacobian(p)? * yv - y.jacobian(p)? * zv;
    Ok(out.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{apply_derivation, commutator, core_lift, dual_derivation, point_hat, vertical};
    use crate::linalg::{max_abs_diff, vec_max_abs_diff};
    use crate::odesolve::expm;

    fn line(lo: f64, hi: f64) -> BoxDomain {
        BoxDomain::new(vec![lo], vec![hi]).unwrap()
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn base_flow_examples() {
        let shift = VectorFieldSpec::parse(&["1"]).unwrap();
        let j = line(-10.0, 10.0);
        let r = integrate_base(&shift, &j, &[2.0], 3.5, &cfg()).unwrap();
        assert_eq!(r.status, FlowStatus::Complete);
        assert!((r.point[0] - 5.5).abs() < 1e-12);

        let zero = VectorFieldSpec::parse(&["0", "0"]).unwrap();
        let b = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let r = integrate_base(&zero, &b, &[0.3, -0.2], 7.0, &cfg()).unwrap();
        assert_eq!(r.point, vec![0.3, -0.2]);

        let growth = VectorFieldSpec::parse(&["x1"]).unwrap();
        let r = integrate_base(&growth, &line(-10.0, 10.0), &[1.0], 1.0, &cfg()).unwrap();
        assert!((r.point[0] - std::f64::consts::E).abs() / std::f64::consts::E < 1e-8);
    }

    #[test]
    fn base_flow_escape() {
        let shift = VectorFieldSpec::parse(&["1"]).unwrap();
        let r = integrate_base(&shift, &line(-10.0, 10.0), &[8.0], 5.0, &cfg()).unwrap();
        assert_eq!(r.status, FlowStatus::Escaped);
        assert!((r.escape_time.unwrap() - 2.0).abs() < 1e-9);
        assert!(integrate_base(&shift, &line(-1.0, 1.0), &[3.0], 1.0, &cfg()).is_err());
    }

    #[test]
    fn fundamental_of_zero_matrix_is_identity() {
        let d = DerivationSpec::parse(BoxDomain::cube(2, -5.0, 5.0).unwrap(), &["x2", "-x1"], &[["0", "0"], ["0", "0"]])
            .unwrap();
        let r = integrate_linear(&d, &[1.0, 0.0], 1.3, &cfg()).unwrap();
        assert_eq!(r.fundamental, Matrix::identity(2, 2));
        assert!((r.base_point[0] - 1.3f64.cos()).abs() < 1e-8);
        assert!((r.base_point[1] + 1.3f64.sin()).abs() < 1e-8);
    }

    #[test]
    fn constant_matrix_gives_exponential() {
        let d = DerivationSpec::parse(
            BoxDomain::cube(2, -1.0, 1.0).unwrap(),
            &["0", "0"],
            &[["0.5", "1", "0"], ["-1", "0.2", "0.3"], ["0", "0.1", "-0.4"]],
        )
        .unwrap();
        let a = d.matrix_at(&[0.0, 0.0]).unwrap();
        for t in [0.7, -1.2, 2.0] {
            let r = integrate_linear(&d, &[0.1, 0.1], t, &cfg()).unwrap();
            let expected = expm(&(a.clone() * -t)).unwrap();
            assert!(max_abs_diff(&r.fundamental, &expected) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn commuting_family_closed_form() {
        // X = ∂_1, A(x) = x1 J with J = [[0,1],[-1,0]]: F_t = exp(-(x0 t + t²/2) J)
        let d = DerivationSpec::parse(line(-10.0, 10.0), &["1"], &[["0", "x1"], ["-x1", "0"]]).unwrap();
        let x0: f64 = 0.4;
        for t in [0.5, 1.5, -2.0] {
            let phi: f64 = x0 * t + t * t / 2.0;
            let expected = Matrix::from_row_slice(2, 2, &[phi.cos(), -phi.sin(), phi.sin(), phi.cos()]);
            let r = integrate_linear(&d, &[x0], t, &cfg()).unwrap();
            assert!(max_abs_diff(&r.fundamental, &expected) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn linear_flow_escapes_with_the_base() {
        let d = DerivationSpec::parse(line(-1.0, 1.0), &["1"], &[["x1"]]).unwrap();
        let r = integrate_linear(&d, &[0.0], 3.0, &cfg()).unwrap();
        assert_eq!(r.status, FlowStatus::Escaped);
        assert!((r.escape_time.unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(r.complete(3.0), Err(Error::Escaped { .. })));
    }

    #[test]
    fn pointwise_flow_agrees_with_fundamental_matrix() {
        let d = DerivationSpec::parse(
            BoxDomain::cube(2, -3.0, 3.0).unwrap(),
            &["x2", "-sin(x1)"],
            &[["x1*x2", "1"], ["-1", "cos(x2)"]],
        )
        .unwrap();
        let x0 = [0.3, -0.2];
        let v0 = [1.0, -2.0];
        let lin = integrate_linear(&d, &x0, 1.1, &cfg()).unwrap();
        let pt = flow_pointwise(&d, &x0, &v0, 1.1, &cfg()).unwrap();
        let fv = &lin.fundamental * Vector::from_column_slice(&v0);
        assert!(vec_max_abs_diff(&pt.fiber, fv.as_slice()) < 1e-6 * 3.0);
        assert!(vec_max_abs_diff(&pt.base_point, &lin.base_point) < 1e-9);

        let zero = flow_pointwise(&d, &x0, &[0.0, 0.0], 1.1, &cfg()).unwrap();
        assert!(zero.fiber.iter().all(|v| v.abs() <= 1e-10));
    }

    #[test]
    fn stationary_pointwise_flow() {
        let d = DerivationSpec::parse(BoxDomain::cube(1, -1.0, 1.0).unwrap(), &["0"], &[["0", "0"], ["0", "0"]]).unwrap();
        let r = flow_pointwise(&d, &[0.5], &[1.0, 2.0], 4.0, &cfg()).unwrap();
        assert_eq!(r.base_point, vec![0.5]);
        assert_eq!(r.fiber, vec![1.0, 2.0]);
    }

    #[test]
    fn pullback_at_time_zero_is_identity() {
        let d = DerivationSpec::parse(line(-1.0, 1.0), &["1"], &[["x1"]]).unwrap();
        let e = SectionSpec::parse(&["exp(x1)"], 1).unwrap();
        assert_eq!(pullback_section(&d, &e, 0.0, &[0.25], &cfg()).unwrap(), vec![0.25f64.exp()]);
    }

    #[test]
    fn flat_section_is_pullback_invariant() {
        // X = ∂_1, A = [[0, 1], [-1, 0]]; e(x) = exp(-A x1) c is flat
        let d = DerivationSpec::parse(line(-2.0, 2.0), &["1"], &[["0", "1"], ["-1", "0"]]).unwrap();
        // exp(-x A) = [[cos x, -sin x], [sin x, cos x]], c = (1, 2)
        let e = SectionSpec::parse(&["cos(x1) - 2*sin(x1)", "sin(x1) + 2*cos(x1)"], 1).unwrap();
        let x = [0.1];
        let de = apply_derivation(&d, &e, &x).unwrap();
        assert!(de.iter().all(|v| v.abs() < 1e-14));
        for t in [-1.5, -0.3, 0.4, 1.8] {
            let p = pullback_section(&d, &e, t, &x, &cfg()).unwrap();
            assert!(vec_max_abs_diff(&p, &e.eval(&x).unwrap()) < 1e-7, "t={t}");
        }
    }

    #[test]
    fn pullback_derivative_recovers_d() {
        let d = DerivationSpec::parse(
            BoxDomain::cube(2, -2.0, 2.0).unwrap(),
            &["x2 + 1", "x1^2"],
            &[["x1", "sin(x2)"], ["1 - x2", "x1*x2"]],
        )
        .unwrap();
        let e = SectionSpec::parse(&["cos(x1)", "x1*x2 + 2"], 2).unwrap();
        let x = [0.2, -0.3];
        let exact = apply_derivation(&d, &e, &x).unwrap();
        let cd = |h: f64| -> f64 {
            let p = pullback_section(&d, &e, h, &x, &cfg()).unwrap();
            let m = pullback_section(&d, &e, -h, &x, &cfg()).unwrap();
            let approx: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            vec_max_abs_diff(&approx, &exact)
        };
        let e1 = cd(1e-2);
        let e2 = cd(5e-3);
        assert!(e1 < 1e-3 && e2 < e1);
        // second-order decay: halving h divides the error by about four
        assert!((e1 / e2 - 4.0).abs() < 0.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn dual_flow_routes_agree() {
        let d = DerivationSpec::parse(
            BoxDomain::cube(2, -3.0, 3.0).unwrap(),
            &["x2", "-x1"],
            &[["x1", "1"], ["x2^2", "-x1"]],
        )
        .unwrap();
        let x = [0.5, 0.1];
        let t = 0.9;
        let g = dual_flow(&d, &x, t, &cfg()).unwrap();
        let g2 = integrate_linear(&dual_derivation(&d), &x, t, &cfg()).unwrap().fundamental;
        assert!(max_abs_diff(&g, &g2) < 1e-7);
        let f = integrate_linear(&d, &x, t, &cfg()).unwrap().fundamental;
        let eps = Vector::from_vec(vec![0.3, -1.2]);
        let v = Vector::from_vec(vec![2.0, 0.7]);
        let lhs = (&g * &eps).dot(&(&f * &v));
        assert!((lhs - eps.dot(&v)).abs() < 1e-9);
    }

    #[test]
    fn tensor_flow_routes_agree() {
        let b = BoxDomain::cube(2, -3.0, 3.0).unwrap();
        let de = DerivationSpec::parse(b.clone(), &["1", "x1"], &[["x2", "1"], ["0", "-1"]]).unwrap();
        let df = DerivationSpec::parse(b, &["1", "x1"], &[["0", "x1"], ["-x1", "0.5"]]).unwrap();
        let x = [0.0, 0.2];
        let t = 0.8;
        let k = tensor_flow(&de, &df, &x, t, &cfg()).unwrap();
        let integrated = integrate_linear(&tensor_derivation(&de, &df).unwrap(), &x, t, &cfg()).unwrap();
        assert!(max_abs_diff(&k, &integrated.fundamental) < 1e-7);
    }

    #[test]
    fn brackets_of_lifts() {
        let b = BoxDomain::cube(2, -2.0, 2.0).unwrap();
        let d1 = DerivationSpec::parse(b.clone(), &["x2", "sin(x1)"], &[["x1", "x2^2"], ["1", "0"]]).unwrap();
        let d2 = DerivationSpec::parse(b, &["exp(x1)", "x1*x2"], &[["0", "x1"], ["cos(x2)", "x1"]]).unwrap();
        let e1 = SectionSpec::parse(&["x1", "x2^2"], 2).unwrap();
        let e2 = SectionSpec::parse(&["sin(x2)", "1"], 2).unwrap();
        let p = [0.3, -0.4, 1.2, 0.5];
        let c = commutator(&d1, &d2).unwrap();
        let lhs = bracket_vf(&d1.hat(), &d2.hat(), &p).unwrap();
        let rhs = point_hat(&c).eval(&p).unwrap();
        assert!(vec_max_abs_diff(&lhs, &rhs) < 1e-12);

        let lhs = bracket_vf(&d1.hat(), &core_lift(&e1), &p).unwrap();
        let rhs = vertical(2, &apply_derivation(&d1, &e1, &p[..2]).unwrap());
        assert!(vec_max_abs_diff(&lhs, &rhs) < 1e-12);

        let z = bracket_vf(&core_lift(&e1), &core_lift(&e2), &p).unwrap();
        assert!(z.iter().all(|v| *v == 0.0));
        let yy = bracket_vf(&d1.hat(), &d1.hat(), &p).unwrap();
        assert!(yy.iter().all(|v| *v == 0.0));
    }
}
