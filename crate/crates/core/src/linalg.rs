//! Small dense matrix helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Kronecker product `a ⊗ b`; row `(i, k)` maps to `i * b.nrows() + k`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors, same ordering as [`kron`].
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn norm1(a: &Matrix) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    max_abs(&(a - b))
}

pub fn vec_max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// LU-based inverse together with a 1-norm condition estimate.
#[derive(Clone, Debug)]
pub struct Inverse {
    pub inverse: Matrix,
    pub condition: f64,
}

/// Inverts a square matrix by LU with partial pivoting.
///
/// Returns `None` when the factorization is exactly singular. The condition
/// number is `‖A‖₁` times a Hager–Higham estimate of `‖A⁻¹‖₁`.
pub fn invert(a: &Matrix) -> Option<Inverse> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "invert requires a square matrix");
    if n == 0 {
        return Some(Inverse { inverse: Matrix::zeros(0, 0), condition: 1.0 });
    }
    let lu = a.clone().lu();
    let inverse = lu.try_inverse()?;
    let lu_t = a.transpose().lu();
    let est = inverse_norm1_estimate(n, |x| lu.solve(x), |x| lu_t.solve(x))?;
    Some(Inverse { inverse, condition: norm1(a) * est })
}

/// Estimates `‖A⁻¹‖₁` from solves with `A` and `Aᵀ`.
fn inverse_norm1_estimate(
    n: usize,
    solve: impl Fn(&Vector) -> Option<Vector>,
    solve_t: impl Fn(&Vector) -> Option<Vector>,
) -> Option<f64> {
    let mut x = Vector::from_element(n, 1.0 / n as f64);
    let mut est = 0.0;
    let mut last_j = usize::MAX;
    for iter in 0..5 {
        let y = solve(&x)?;
        est = y.iter().map(|v| v.abs()).sum::<f64>();
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = solve_t(&xi)?;
        let (j, zmax) = z
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bj, bm), (j, v)| if v.abs() > bm { (j, v.abs()) } else { (bj, bm) });
        if iter > 0 && (zmax <= z.dot(&x) || j == last_j) {
            break;
        }
        last_j = j;
        x = Vector::zeros(n);
        x[j] = 1.0;
    }
    // alternating test vector guards against the estimator's known blind spots
    let b = Vector::from_fn(n, |i, _| {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * (1.0 + i as f64 / (n.max(2) - 1) as f64)
    });
    let alt = solve(&b)?.iter().map(|v| v.abs()).sum::<f64>() * 2.0 / (3.0 * n as f64);
    Some(est.max(alt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kron_of_identity_blocks() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let i2 = Matrix::identity(2, 2);
        let k = kron(&a, &i2);
        assert_eq!(k[(0, 2)], 2.0);
        assert_eq!(k[(1, 3)], 2.0);
        assert_eq!(k[(0, 3)], 0.0);
        assert_eq!(k[(3, 1)], 3.0);
        let v = kron_vec(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        assert_eq!(v, vec![3.0, 4.0, 5.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn condition_estimate_matches_exact_for_diagonal() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 1e-3, 10.0]));
        let inv = invert(&a).unwrap();
        assert!((inv.condition - 1e4).abs() < 1e-6);
        assert!(invert(&Matrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn condition_estimate_is_a_lower_bound_close_to_exact() {
        let a = Matrix::from_row_slice(3, 3, &[4.0, -2.0, 1.0, 3.0, 6.0, -4.0, 2.0, 1.0, 8.0]);
        let inv = invert(&a).unwrap();
        let exact = norm1(&a) * norm1(&inv.inverse);
        assert!(inv.condition <= exact * (1.0 + 1e-12));
        assert!(inv.condition >= exact / 3.0);
        assert!(max_abs_diff(&(&a * &inv.inverse), &Matrix::identity(3, 3)) < 1e-14);
    }
}
