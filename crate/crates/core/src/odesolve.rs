//! Non-autonomous linear ODEs `v̇ = A(t) v` solved through their suspension:
//! the linear vector field `(s, v) ↦ (1, A(s) v)` over `∂_s` on `J × R^n`.

use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::flow::{flow_pointwise, integrate_linear, IntegratorConfig};
use crate::geometry::{BoxDomain, DerivationSpec, ExprMatrix, VectorFieldSpec};
use crate::linalg::{norm1, Matrix};

/// Matrix-valued function `A: J → R^{n×n}` of the single variable `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeMatrixSpec {
    interval: (f64, f64),
    /// `A` with `t` renamed to `x1`.
    matrix: ExprMatrix,
    suspension: DerivationSpec,
}

impl TimeMatrixSpec {
    pub fn new(interval: (f64, f64), entries: Vec<ScalarExpr>, n: usize) -> Result<TimeMatrixSpec> {
        if entries.len() != n * n || n == 0 {
            return Err(Error::Dimension(format!("{} entries for an {n}×{n} matrix", entries.len())));
        }
        if let Some(e) = entries.iter().find(|e| e.dim() != 0) {
            return Err(Error::Dimension(format!("entry `{e}` may only depend on t")));
        }
        let base = BoxDomain::new(vec![interval.0], vec![interval.1])?;
        let suspended: Vec<ScalarExpr> = entries.iter().map(ScalarExpr::suspend).collect();
        let matrix = ExprMatrix::new(n, n, suspended, 1)?;
        // derivation convention Ḟ = −A_der F, so A_der = −A realizes v̇ = A v
        let a_der = matrix.map(ScalarExpr::negated);
        let suspension = DerivationSpec::new(base, VectorFieldSpec::parse(&["1"])?, a_der)?;
        Ok(TimeMatrixSpec { interval, matrix, suspension })
    }

    /// Parses rows of expressions in `t`.
    pub fn parse<R, S>(interval: (f64, f64), rows: &[R]) -> Result<TimeMatrixSpec>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::Dimension(format!("row {} has {} entries, expected {n}", i + 1, row.len())));
            }
            for s in row {
                entries.push(ScalarExpr::parse(s.as_ref(), 0, true)?);
            }
        }
        TimeMatrixSpec::new(interval, entries, n)
    }

    pub fn n(&self) -> usize {
        self.matrix.shape().0
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn eval(&self, t: f64) -> Result<Matrix> {
        self.matrix.eval(&[t])
    }

    /// The suspension derivation on `J × R^n` (symbol `∂_s`, matrix `−A(s)`).
    pub fn suspension(&self) -> &DerivationSpec {
        &self.suspension
    }

    /// True when no entry depends on `t`.
    pub fn is_constant(&self) -> bool {
        self.matrix.entries().iter().all(|e| e.root().is_constant())
    }

    fn require(&self, t: f64, name: &str) -> Result<()> {
        let (a, b) = self.interval;
        if !(a < t && t < b) {
            return Err(Error::Invalid(format!("{name} = {t} lies outside the interval ({a}, {b})")));
        }
        Ok(())
    }
}

/// Value at `t` of the solution of `v̇ = A(t) v`, `v(t0) = v0`.
pub fn solve_nonautonomous(
    a: &TimeMatrixSpec,
    t0: f64,
    v0: &[f64],
    t: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    a.require(t0, "t0")?;
    a.require(t, "t")?;
    if v0.len() != a.n() {
        return Err(Error::Dimension(format!("v0 has length {}, expected {}", v0.len(), a.n())));
    }
    let r = flow_pointwise(a.suspension(), &[t0], v0, t - t0, cfg)?;
    match r.status {
        crate::flow::FlowStatus::Complete => Ok(r.fiber),
        crate::flow::FlowStatus::Escaped => {
            Err(Error::Escaped { escape_time: r.escape_time.unwrap_or(f64::NAN), target: t - t0 })
        }
    }
}

/// Propagator `P(t, t0)`: `v(t) = P(t, t0) v(t0)` for every solution.
pub fn propagator(a: &TimeMatrixSpec, t0: f64, t: f64, cfg: &IntegratorConfig) -> Result<Matrix> {
    a.require(t0, "t0")?;
    a.require(t, "t")?;
    let r = integrate_linear(a.suspension(), &[t0], t - t0, cfg)?.complete(t - t0)?;
    Ok(r.fundamental)
}

const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.539398330063230e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential by scaling and squaring with diagonal Padé
/// approximants of degree 3, 5, 7, 9 or 13.
pub fn expm(m: &Matrix) -> Result<Matrix> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Dimension(format!("expm of a {}×{} matrix", n, m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("expm of a matrix with non-finite entries".into()));
    }
    let ident = Matrix::identity(n, n);
    let norm = norm1(m);
    let a2 = m * m;
    for (degree, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let mut u = Matrix::zeros(n, n);
            let mut v = Matrix::zeros(n, n);
            let mut power = ident.clone();
            for j in 0..=degree / 2 {
                v += &power * coeffs[2 * j];
                u += &power * coeffs[2 * j + 1];
                power = &power * &a2;
            }
            let u = m * u;
            return pade_solve(&u, &v);
        }
    }
    let s = if norm > THETA_13 { (norm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    if s > 1000 {
        return Err(Error::Invalid(format!("expm overflow: norm {norm:e} too large")));
    }
    let scale = 2f64.powi(-s);
    let a = m * scale;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &B13;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("expm overflow: norm {norm:e} too large")));
    }
    Ok(r)
}

fn pade_solve(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).ok_or(Error::Singular)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn quadrature(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn recurse(
        f: &dyn Fn(f64) -> Result<f64>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm)?;
        let frm = f(rm)?;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let fm = f(0.5 * (a + b))?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}
