//! Kernel data of a transitive Lie algebroid over a box, and its
//! certification as a Lie algebra bundle.
//!
//! The kernel `K` has frame `k_1..k_r` with `[k_i, k_j] = Σ_l C^l_ij k_l`.
//! Lifts `a_i` of the coordinate fields act on `K` by `∇_{a_i} k_j =
//! Σ_l A^(i)_lj k_l`, so each direction gives a derivation `(∂_i, A^(i))`.
//! Transporting along these derivations on a broken coordinate path gives
//! the fiber maps `Ψ_{x→y}`; when the bracket is parallel they are Lie
//! algebra isomorphisms.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::flow::{integrate_linear, pullback_section, IntegratorConfig};
use crate::geometry::{
    apply_derivation, dual_derivation, tensor_derivation, BoxDomain, DerivationSpec, ExprMatrix, SectionSpec,
    VectorFieldSpec,
};
use crate::linalg::Matrix;
use crate::report::{CheckRecord, Worst, MACHINE_HEADER};

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebroidSpec {
    base: BoxDomain,
    rank: usize,
    /// `C^l_ij` at index `(i * r + j) * r + l`, i.e. the components of the
    /// bracket as a section of `K* ⊗ K* ⊗ K`.
    structure: Vec<ScalarExpr>,
    connections: Vec<DerivationSpec>,
}

impl AlgebroidSpec {
    pub fn new(base: BoxDomain, rank: usize, structure: Vec<ScalarExpr>, connections: Vec<ExprMatrix>) -> Result<AlgebroidSpec> {
        let m = base.dim();
        if rank == 0 {
            return Err(Error::Dimension("kernel rank must be positive".into()));
        }
        if structure.len() != rank * rank * rank {
            return Err(Error::Dimension(format!("{} structure functions for rank {rank}", structure.len())));
        }
        if let Some(c) = structure.iter().find(|c| c.dim() != m || c.is_time_dependent()) {
            return Err(Error::Dimension(format!("structure function `{c}` is not a function of x1..x{m}")));
        }
        if connections.len() != m {
            return Err(Error::Dimension(format!("{} connection matrices for base dimension {m}", connections.len())));
        }
        let connections = connections
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                if a.shape() != (rank, rank) {
                    return Err(Error::Dimension(format!("connection {} must be {rank}×{rank}", i + 1)));
                }
                DerivationSpec::new(base.clone(), VectorFieldSpec::coordinate(i, m), a)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AlgebroidSpec { base, rank, structure, connections })
    }

    /// Structure functions from a sparse list `(i, j, l, C^l_ij)` with
    /// 0-based indices; unlisted entries are zero.
    pub fn from_sparse(
        base: BoxDomain,
        rank: usize,
        entries: &[(usize, usize, usize, ScalarExpr)],
        connections: Vec<ExprMatrix>,
    ) -> Result<AlgebroidSpec> {
        let m = base.dim();
        let mut structure = vec![ScalarExpr::constant(0.0, m); rank * rank * rank];
        for (i, j, l, c) in entries {
            if *i >= rank || *j >= rank || *l >= rank {
                return Err(Error::Dimension(format!("structure index ({i}, {j}, {l}) out of range for rank {rank}")));
            }
            structure[(i * rank + j) * rank + l] = c.clone();
        }
        AlgebroidSpec::new(base, rank, structure, connections)
    }

    pub fn base(&self) -> &BoxDomain {
        &self.base
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `(∂_i, A^(i))`, 0-based direction.
    pub fn connection(&self, i: usize) -> &DerivationSpec {
        &self.connections[i]
    }

    pub fn structure(&self) -> &[ScalarExpr] {
        &self.structure
    }

    /// The bracket as a section of `K* ⊗ K* ⊗ K`.
    pub fn bracket_section(&self) -> SectionSpec {
        SectionSpec::new(self.structure.clone(), self.dim()).expect("structure is nonempty")
    }

    /// `C(x)` flattened as `(i * r + j) * r + l`.
    pub fn structure_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.structure.iter().map(|c| Ok(c.eval(x, None)?)).collect()
    }

    /// `[u, w]` in the fiber with structure constants `c`.
    pub fn bracket(&self, c: &[f64], u: &[f64], w: &[f64]) -> Vec<f64> {
        let r = self.rank;
        let mut out = vec![0.0; r];
        for i in 0..r {
            for j in 0..r {
                let uw = u[i] * w[j];
                if uw == 0.0 {
                    continue;
                }
                for (l, o) in out.iter_mut().enumerate() {
                    *o += uw * c[(i * r + j) * r + l];
                }
            }
        }
        out
    }

    /// Connection on `K* ⊗ K* ⊗ K` along direction `i`.
    pub fn tensor_connection(&self, i: usize) -> Result<DerivationSpec> {
        let d = &self.connections[i];
        let dual = dual_derivation(d);
        tensor_derivation(&tensor_derivation(&dual, &dual)?, d)
    }

    fn require(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("point has length {}, base dimension is {}", x.len(), self.dim())));
        }
        if !self.base.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }
}

/// Antisymmetry residuals `C^l_ij + C^l_ji`, flattened like the structure.
pub fn antisymmetry_residual(s: &AlgebroidSpec, c: &[f64]) -> Vec<f64> {
    let r = s.rank;
    let mut out = Vec::with_capacity(r * r * r);
    for i in 0..r {
        for j in 0..r {
            for l in 0..r {
                out.push(c[(i * r + j) * r + l] + c[(j * r + i) * r + l]);
            }
        }
    }
    out
}

/// Jacobi residuals `[k_i,[k_j,k_k]] + [k_j,[k_k,k_i]] + [k_k,[k_i,k_j]]`,
/// flattened as `((i * r + j) * r + k) * r + l`.
pub fn jacobi_residual(s: &AlgebroidSpec, c: &[f64]) -> Vec<f64> {
    let r = s.rank;
    let at = |i: usize, j: usize, l: usize| c[(i * r + j) * r + l];
    let mut out = Vec::with_capacity(r * r * r * r);
    for i in 0..r {
        for j in 0..r {
            for k in 0..r {
                for l in 0..r {
                    let mut sum = 0.0;
                    for u in 0..r {
                        sum += at(j, k, u) * at(i, u, l) + at(k, i, u) * at(j, u, l) + at(i, j, u) * at(k, u, l);
                    }
                    out.push(sum);
                }
            }
        }
    }
    out
}

/// `(∇_{a_i} B)(k_j, k_k)` computed from the formula
/// `∂_i C_jk + A C_jk − Σ_l A_lj C_lk − Σ_l A_lk C_jl`; flattened like the structure.
pub fn flatness_residual(s: &AlgebroidSpec, i: usize, x: &[f64]) -> Result<Vec<f64>> {
    s.require(x)?;
    let r = s.rank;
    let mut c = Vec::with_capacity(r * r * r);
    let mut dc = Vec::with_capacity(r * r * r);
    for e in &s.structure {
        let jet = e.eval_jet(x, None)?;
        c.push(jet.value);
        dc.push(jet.partials[i]);
    }
    let a = s.connections[i].matrix().eval(x)?;
    let at = |j: usize, k: usize, l: usize| c[(j * r + k) * r + l];
    let mut out = Vec::with_capacity(r * r * r);
    for j in 0..r {
        for k in 0..r {
            for l in 0..r {
                let mut v = dc[(j * r + k) * r + l];
                for u in 0..r {
                    v += a[(l, u)] * at(j, k, u) - a[(u, j)] * at(u, k, l) - a[(u, k)] * at(j, u, l);
                }
                out.push(v);
            }
        }
    }
    Ok(out)
}

/// Same quantity through the derivation induced on `K* ⊗ K* ⊗ K`.
pub fn flatness_via_tensor(s: &AlgebroidSpec, i: usize, x: &[f64]) -> Result<Vec<f64>> {
    apply_derivation(&s.tensor_connection(i)?, &s.bracket_section(), x)
}

/// Same quantity as the derivative at `t = 0` of the pullback `Φ_t^⋆B`
/// along direction `i`, by a Richardson-extrapolated central difference.
pub fn flatness_via_pullback(s: &AlgebroidSpec, i: usize, x: &[f64], h: f64, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let d = s.tensor_connection(i)?;
    let b = s.bracket_section();
    let central = |h: f64| -> Result<Vec<f64>> {
        let plus = pullback_section(&d, &b, h, x, cfg)?;
        let minus = pullback_section(&d, &b, -h, x, cfg)?;
        Ok(plus.iter().zip(&minus).map(|(p, q)| (p - q) / (2.0 * h)).collect())
    };
    let coarse = central(h)?;
    let fine = central(h / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Fiber map `Ψ_{x→y}` along the broken path visiting the axes in `order`.
fn transport(s: &AlgebroidSpec, x: &[f64], y: &[f64], order: impl Iterator<Item = usize>, cfg: &IntegratorConfig) -> Result<Matrix> {
    s.require(x)?;
    s.require(y)?;
    let mut p = x.to_vec();
    let mut psi = Matrix::identity(s.rank, s.rank);
    for i in order {
        let len = y[i] - p[i];
        if len == 0.0 {
            continue;
        }
        let f = integrate_linear(&s.connections[i], &p, len, cfg)?.complete(len)?;
        psi = f.fundamental * psi;
        p[i] = y[i];
    }
    Ok(psi)
}

/// `Ψ_{x→y}`: transport along direction 1 first, direction m last.
pub fn fiber_isomorphism(s: &AlgebroidSpec, x: &[f64], y: &[f64], cfg: &IntegratorConfig) -> Result<Matrix> {
    transport(s, x, y, 0..s.dim(), cfg)
}

/// Transport from `y` back to `x` along the reversed segments in reversed
/// order, i.e. the inverse of [`fiber_isomorphism`] along the same path.
pub fn fiber_isomorphism_back(s: &AlgebroidSpec, x: &[f64], y: &[f64], cfg: &IntegratorConfig) -> Result<Matrix> {
    transport(s, y, x, (0..s.dim()).rev(), cfg)
}

/// Bracket-preservation residual data for `Ψ = Ψ_{x→y}`: the stacked vectors
/// `Ψ [k_i, k_j]_x` and `[Ψ k_i, Ψ k_j]_y` over all frame pairs.
pub fn bracket_preservation(s: &AlgebroidSpec, x: &[f64], y: &[f64], psi: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = s.rank;
    let cx = s.structure_at(x)?;
    let cy = s.structure_at(y)?;
    let mut lhs = Vec::with_capacity(r * r * r);
    let mut rhs = Vec::with_capacity(r * r * r);
    let cols: Vec<Vec<f64>> = (0..r).map(|j| psi.column(j).iter().copied().collect()).collect();
    for i in 0..r {
        for j in 0..r {
            let bx: Vec<f64> = (0..r).map(|l| cx[(i * r + j) * r + l]).collect();
            let mapped = psi * crate::linalg::Vector::from_vec(bx);
            lhs.extend(mapped.iter());
            rhs.extend(s.bracket(&cy, &cols[i], &cols[j]));
        }
    }
    Ok((lhs, rhs))
}

/// Tolerances for certification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertTolerances {
    pub structure: f64,
    pub flatness: f64,
    pub bracket: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        CertTolerances { structure: 1e-9, flatness: 1e-9, bracket: 1e-6 }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CertReport {
    pub checks: Vec<CheckRecord>,
}

impl CertReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.check == name)
    }

    pub fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        for c in &self.checks {
            c.write_text(w)?;
        }
        writeln!(w, "overall: {}", if self.pass() { "PASS" } else { "FAIL" })
    }

    pub fn write_machine(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "{MACHINE_HEADER}")?;
        for c in &self.checks {
            writeln!(w, "{}", c.machine_line())?;
        }
        writeln!(w, "overall\t{}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

const SUITE: &str = "algebroid";

fn collect_worst(per_point: Vec<Result<Worst>>) -> Result<Worst> {
    let mut w = Worst::new();
    for p in per_point {
        w.merge(p?);
    }
    Ok(w)
}

/// Antisymmetry and Jacobi residuals of the fiber brackets.
pub fn check_fiber_structure(s: &AlgebroidSpec, samples: &[Vec<f64>], tol: f64) -> Result<CertReport> {
    let per: Vec<Result<(Worst, Worst)>> = samples
        .par_iter()
        .map(|x| {
            let c = s.structure_at(x)?;
            let mut anti = Worst::new();
            let ra = antisymmetry_residual(s, &c);
            anti.compare(x, &vec![0.0; ra.len()], &ra);
            let mut jac = Worst::new();
            let rj = jacobi_residual(s, &c);
            jac.compare(x, &vec![0.0; rj.len()], &rj);
            Ok((anti, jac))
        })
        .collect();
    let (mut anti, mut jac) = (Worst::new(), Worst::new());
    for p in per {
        let (a, j) = p?;
        anti.merge(a);
        jac.merge(j);
    }
    Ok(CertReport { checks: vec![anti.finish(SUITE, "antisymmetry", tol), jac.finish(SUITE, "jacobi", tol)] })
}

/// `∇_{a_i} B = 0` for every direction.
pub fn check_flatness(s: &AlgebroidSpec, samples: &[Vec<f64>], tol: f64) -> Result<CertReport> {
    let per: Vec<Result<Worst>> = samples
        .par_iter()
        .map(|x| {
            let mut w = Worst::new();
            for i in 0..s.dim() {
                let r = flatness_residual(s, i, x)?;
                w.compare(x, &vec![0.0; r.len()], &r);
            }
            Ok(w)
        })
        .collect();
    Ok(CertReport { checks: vec![collect_worst(per)?.finish(SUITE, "flatness", tol)] })
}

fn gate(report: &CertReport) -> Result<()> {
    match report.checks.iter().find(|c| !c.pass) {
        None => Ok(()),
        Some(c) => Err(Error::Precondition {
            check: c.check.clone(),
            detail: format!(
                "max residual {:.3e} exceeds {:.1e} at {:?}",
                c.max_error, c.tolerance, c.worst_point
            ),
        }),
    }
}

/// Certifies that the kernel is a Lie algebra bundle at sample resolution:
/// checks the fiber structure and flatness (refusing to continue if either
/// fails), then that `Ψ_{basepoint→y}` preserves brackets at every sample.
pub fn certify_lab(
    s: &AlgebroidSpec,
    basepoint: &[f64],
    samples: &[Vec<f64>],
    tol: &CertTolerances,
    cfg: &IntegratorConfig,
) -> Result<CertReport> {
    s.require(basepoint)?;
    let mut points = vec![basepoint.to_vec()];
    points.extend_from_slice(samples);
    let structure = check_fiber_structure(s, &points, tol.structure)?;
    gate(&structure)?;
    let flat = check_flatness(s, &points, tol.flatness)?;
    gate(&flat)?;
    let per: Vec<Result<Worst>> = samples
        .par_iter()
        .map(|y| {
            let psi = fiber_isomorphism(s, basepoint, y, cfg)?;
            let (lhs, rhs) = bracket_preservation(s, basepoint, y, &psi)?;
            let mut w = Worst::new();
            w.compare(y, &rhs, &lhs);
            Ok(w)
        })
        .collect();
    let mut checks = structure.checks;
    checks.extend(flat.checks);
    checks.push(collect_worst(per)?.finish(SUITE, "bracket-preservation", tol.bracket));
    Ok(CertReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, vec_max_abs_diff};
    use crate::sampling::sample_points;

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    fn so3_entries(m: usize) -> Vec<(usize, usize, usize, ScalarExpr)> {
        let one = ScalarExpr::constant(1.0, m);
        let neg = ScalarExpr::constant(-1.0, m);
        let mut v = Vec::new();
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            v.push((i, j, k, one.clone()));
            v.push((j, i, k, neg.clone()));
        }
        v
    }

    /// `ad_ξ` for `ξ` given by three expressions.
    fn ad(xi: [&str; 3], m: usize) -> ExprMatrix {
        let [a, b, c] = xi;
        ExprMatrix::parse(
            &[
                ["0".to_string(), format!("-({c})"), format!("{b}")],
                [format!("{c}"), "0".to_string(), format!("-({a})")],
                [format!("-({b})"), format!("{a}"), "0".to_string()],
            ],
            m,
        )
        .unwrap()
    }

    fn so3_inner() -> AlgebroidSpec {
        let base = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        AlgebroidSpec::from_sparse(
            base,
            3,
            &so3_entries(2),
            vec![ad(["sin(x2)", "x1*x2", "0.5"], 2), ad(["cos(x1)", "1", "x1 - x2^2"], 2)],
        )
        .unwrap()
    }

    fn abelian(m: usize, r: usize) -> AlgebroidSpec {
        let base = BoxDomain::cube(m, -1.0, 1.0).unwrap();
        let a = (0..m).map(|_| ExprMatrix::zeros(r, r, m)).collect();
        AlgebroidSpec::from_sparse(base, r, &[], a).unwrap()
    }

    #[test]
    fn abelian_kernel_is_trivially_certified() {
        let s = abelian(2, 2);
        let pts = sample_points(s.base(), 16, 1, 0);
        let rep = certify_lab(&s, &[0.0, 0.0], &pts, &CertTolerances::default(), &cfg()).unwrap();
        assert!(rep.pass());
        assert!(rep.checks.iter().all(|c| c.max_error == 0.0));
        assert_eq!(fiber_isomorphism(&s, &[0.1, 0.2], &[-0.5, 0.7], &cfg()).unwrap(), Matrix::identity(2, 2));
    }

    #[test]
    fn so3_structure_and_inner_flatness() {
        let s = so3_inner();
        let pts = sample_points(s.base(), 32, 3, 0);
        let fs = check_fiber_structure(&s, &pts, 1e-9).unwrap();
        assert!(fs.pass());
        assert!(fs.check("jacobi").unwrap().max_error < 1e-15);
        let fl = check_flatness(&s, &pts, 1e-9).unwrap();
        assert!(fl.pass(), "{:?}", fl);
    }

    #[test]
    fn broken_antisymmetry_is_reported() {
        let base = BoxDomain::cube(1, -1.0, 1.0).unwrap();
        let s = AlgebroidSpec::from_sparse(base, 3, &[(0, 1, 0, ScalarExpr::constant(1.0, 1))], vec![ExprMatrix::zeros(3, 3, 1)]).unwrap();
        let rep = check_fiber_structure(&s, &[vec![0.0]], 1e-9).unwrap();
        assert!(!rep.check("antisymmetry").unwrap().pass);
        assert_eq!(rep.check("antisymmetry").unwrap().max_error, 1.0);
    }

    #[test]
    fn non_derivation_connection_breaks_flatness_and_gates_certification() {
        let base = BoxDomain::cube(1, -1.0, 1.0).unwrap();
        let a = ExprMatrix::parse(&[["1", "0", "0"], ["0", "0", "0"], ["0", "0", "0"]], 1).unwrap();
        let s = AlgebroidSpec::from_sparse(base, 3, &so3_entries(1), vec![a]).unwrap();
        let fl = check_flatness(&s, &[vec![0.2]], 1e-9).unwrap();
        assert!(!fl.pass());
        let err = certify_lab(&s, &[0.0], &[vec![0.5]], &CertTolerances::default(), &cfg()).unwrap_err();
        assert!(matches!(err, Error::Precondition { ref check, .. } if check == "flatness"), "{err}");
    }

    #[test]
    fn scaled_bracket_with_matching_connection_is_flat() {
        // C = e^{x1} ε, A^(1) = I, A^(2) = 0
        let base = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let entries: Vec<_> = so3_entries(2).into_iter().map(|(i, j, l, c)| (i, j, l, ScalarExpr::parse(&format!("({c}) * exp(x1)"), 2, false).unwrap())).collect();
        let s = AlgebroidSpec::from_sparse(
            base,
            3,
            &entries,
            vec![ExprMatrix::constant(&Matrix::identity(3, 3), 2), ExprMatrix::zeros(3, 3, 2)],
        )
        .unwrap();
        let pts = sample_points(s.base(), 16, 5, 0);
        let rep = certify_lab(&s, &[0.0, 0.0], &pts, &CertTolerances::default(), &cfg()).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn certify_so3_inner() {
        let s = so3_inner();
        let pts = sample_points(s.base(), 24, 11, 0);
        let rep = certify_lab(&s, &[0.1, -0.2], &pts, &CertTolerances::default(), &cfg()).unwrap();
        let b = rep.check("bracket-preservation").unwrap();
        assert!(b.pass && b.max_error < 1e-6, "{b:?}");
    }

    #[test]
    fn psi_identity_inverse_and_composition() {
        let s = so3_inner();
        let x = [0.3, -0.4];
        let y = [-0.6, 0.5];
        assert_eq!(fiber_isomorphism(&s, &x, &x, &cfg()).unwrap(), Matrix::identity(3, 3));
        let psi = fiber_isomorphism(&s, &x, &y, &cfg()).unwrap();
        let back = fiber_isomorphism_back(&s, &x, &y, &cfg()).unwrap();
        assert!(max_abs_diff(&(&back * &psi), &Matrix::identity(3, 3)) < 1e-7);
        // split at a point on the canonical path
        let z = [y[0], 0.1];
        let composed = fiber_isomorphism(&s, &z, &y, &cfg()).unwrap() * fiber_isomorphism(&s, &x, &z, &cfg()).unwrap();
        assert!(max_abs_diff(&composed, &psi) < 1e-7);
    }

    #[test]
    fn three_routes_to_the_flatness_residual_agree() {
        let base = BoxDomain::cube(2, -1.0, 1.0).unwrap();
        let a1 = ExprMatrix::parse(&[["x2", "1", "0"], ["0", "0", "x1"], ["0.5", "0", "0"]], 2).unwrap();
        let entries: Vec<_> = so3_entries(2)
            .into_iter()
            .map(|(i, j, l, c)| (i, j, l, ScalarExpr::parse(&format!("({c}) * (1 + x1*x2/3)"), 2, false).unwrap()))
            .collect();
        let s = AlgebroidSpec::from_sparse(base, 3, &entries, vec![a1, ad(["x1", "0", "1"], 2)]).unwrap();
        let x = [0.2, -0.3];
        for i in 0..2 {
            let direct = flatness_residual(&s, i, &x).unwrap();
            let tensor = flatness_via_tensor(&s, i, &x).unwrap();
            let fd = flatness_via_pullback(&s, i, &x, 1e-2, &cfg()).unwrap();
            assert!(vec_max_abs_diff(&direct, &tensor) < 1e-12);
            assert!(vec_max_abs_diff(&direct, &fd) < 1e-6, "{}", vec_max_abs_diff(&direct, &fd));
            assert!(direct.iter().any(|v| v.abs() > 1e-3));
        }
    }
}
