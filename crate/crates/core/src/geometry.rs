//! Bundles in a fixed local frame over a box, derivations of them, and the
//! algebra of derivations.
//!
//! Frame convention, used everywhere in the crate: a derivation `D` with
//! matrix `A` acts on the frame by `D(e_j) = Σ_i A_ij e_i`, so on a section
//! with component vector `s(x)`
//!
//! ```text
//! (D s)(x) = J_s(x) X(x) + A(x) s(x)
//! ```
//!
//! The associated linear vector field on `U × R^k` is `(x, v) ↦ (X(x), −A(x) v)`
//! and the dual derivation in the dual frame has matrix `−Aᵀ`.

use crate::error::{Error, Result};
use crate::expr::{BinaryOp, Node, ScalarExpr};
use crate::linalg::Matrix;

/// Open axis-aligned box `(lower, upper) ⊂ R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<BoxDomain> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension(format!(
                "box bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::Invalid(format!("box lower {lower:?} must be below upper {upper:?}")));
        }
        Ok(BoxDomain { lower, upper })
    }

    /// The box `(lo, hi)^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<BoxDomain> {
        BoxDomain::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (a, b))| *a < *v && *v < *b)
    }

    /// Smallest normalized distance to the boundary: 0 on the boundary, 1 at the center.
    pub fn depth(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (a, b))| 1.0 - ((2.0 * v - a - b) / (b - a)).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Copy shrunk by `fraction` of each side length on both ends.
    pub fn shrink(&self, fraction: f64) -> BoxDomain {
        let (lower, upper) = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| {
                let m = fraction * (b - a);
                (a + m, b - m)
            })
            .unzip();
        BoxDomain { lower, upper }
    }

    /// Maps `u ∈ [0,1]^m` affinely onto the closed box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(self.lower.iter().zip(&self.upper)).map(|(s, (a, b))| a + s * (b - a)).collect()
    }

    pub(crate) fn require(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("point has length {}, base dimension is {}", x.len(), self.dim())));
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }
}

fn parse_all<S: AsRef<str>>(texts: &[S], dim: usize) -> Result<Vec<ScalarExpr>> {
    texts.iter().map(|s| ScalarExpr::parse(s.as_ref(), dim, false).map_err(Error::from)).collect()
}

fn check_dim(exprs: &[ScalarExpr], dim: usize) -> Result<()> {
    match exprs.iter().find(|e| e.dim() != dim || e.is_time_dependent()) {
        Some(e) => Err(Error::Dimension(format!("expression `{e}` is not a function of x1..x{dim}"))),
        None => Ok(()),
    }
}

fn jacobian_of(exprs: &[ScalarExpr], x: &[f64]) -> Result<Matrix> {
    let m = x.len();
    let mut jac = Matrix::zeros(exprs.len(), m);
    for (i, e) in exprs.iter().enumerate() {
        let jet = e.eval_jet(x, None)?;
        for j in 0..m {
            jac[(i, j)] = jet.partials[j];
        }
    }
    Ok(jac)
}

fn eval_all(exprs: &[ScalarExpr], x: &[f64]) -> Result<Vec<f64>> {
    exprs.iter().map(|e| e.eval(x, None).map_err(Error::from)).collect()
}

/// Vector field `X = Σ X_i ∂_i` on a box.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorFieldSpec {
    components: Vec<ScalarExpr>,
}

impl VectorFieldSpec {
    pub fn new(components: Vec<ScalarExpr>) -> Result<VectorFieldSpec> {
        let dim = components.len();
        check_dim(&components, dim)?;
        Ok(VectorFieldSpec { components })
    }

    pub fn parse<S: AsRef<str>>(components: &[S]) -> Result<VectorFieldSpec> {
        VectorFieldSpec::new(parse_all(components, components.len())?)
    }

    /// Coordinate field `∂_i` (zero-based `i`) in dimension `dim`.
    pub fn coordinate(i: usize, dim: usize) -> VectorFieldSpec {
        let components = (0..dim).map(|j| ScalarExpr::constant(if i == j { 1.0 } else { 0.0 }, dim)).collect();
        VectorFieldSpec { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.components, x)
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        jacobian_of(&self.components, x)
    }
}

/// Section of a rank-`k` bundle, by components in the frame (or in the dual
/// frame for sections of the dual bundle).
#[derive(Clone, Debug, PartialEq)]
pub struct SectionSpec {
    dim: usize,
    components: Vec<ScalarExpr>,
}

impl SectionSpec {
    pub fn new(components: Vec<ScalarExpr>, dim: usize) -> Result<SectionSpec> {
        if components.is_empty() {
            return Err(Error::Dimension("a section needs at least one component".into()));
        }
        check_dim(&components, dim)?;
        Ok(SectionSpec { dim, components })
    }

    pub fn parse<S: AsRef<str>>(components: &[S], dim: usize) -> Result<SectionSpec> {
        SectionSpec::new(parse_all(components, dim)?, dim)
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        eval_all(&self.components, x)
    }

    /// `k × m` Jacobian of the component functions.
    pub fn jacobian(&self, x: &[f64]) -> Result<Matrix> {
        jacobian_of(&self.components, x)
    }

    /// `e ⊗ f` with components ordered lexicographically in `(i, j)`.
    pub fn tensor(&self, other: &SectionSpec) -> Result<SectionSpec> {
        if self.dim != other.dim {
            return Err(Error::BaseMismatch);
        }
        let components = self
            .components
            .iter()
            .flat_map(|a| {
                other.components.iter().map(move |b| {
                    ScalarExpr::from_node(Node::binary(BinaryOp::Mul, a.root().clone(), b.root().clone()), a.dim(), false)
                })
            })
            .collect();
        Ok(SectionSpec { dim: self.dim, components })
    }
}

/// Pointwise pairing of a dual-frame section with a frame section.
pub fn pairing(eps: &[f64], e: &[f64]) -> f64 {
    eps.iter().zip(e).map(|(a, b)| a * b).sum()
}

/// Matrix of scalar expressions, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    dim: usize,
    entries: Vec<ScalarExpr>,
}

/// Section of `End(E)`.
pub type EndoField = ExprMatrix;

impl ExprMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<ScalarExpr>, dim: usize) -> Result<ExprMatrix> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!("{} entries for a {rows}×{cols} matrix", entries.len())));
        }
        check_dim(&entries, dim)?;
        Ok(ExprMatrix { rows, cols, dim, entries })
    }

    /// Parses a matrix given as rows of expression strings.
    pub fn parse<R, S>(rows: &[R], dim: usize) -> Result<ExprMatrix>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let n = rows.len();
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut entries = Vec::with_capacity(n * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::Dimension(format!("row {} has {} entries, expected {cols}", i + 1, row.len())));
            }
            entries.extend(parse_all(row, dim)?);
        }
        ExprMatrix::new(n, cols, entries, dim)
    }

    pub fn zeros(rows: usize, cols: usize, dim: usize) -> ExprMatrix {
        ExprMatrix { rows, cols, dim, entries: vec![ScalarExpr::constant(0.0, dim); rows * cols] }
    }

    /// Constant matrix.
    pub fn constant(m: &Matrix, dim: usize) -> ExprMatrix {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| ScalarExpr::constant(m[(i, j)], dim))
            .collect();
        ExprMatrix { rows: m.nrows(), cols: m.ncols(), dim, entries }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[ScalarExpr] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&ScalarExpr) -> ScalarExpr) -> ExprMatrix {
        ExprMatrix { entries: self.entries.iter().map(f).collect(), ..self.clone() }
    }

    pub fn transpose(&self) -> ExprMatrix {
        let entries = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| (i, j)))
            .map(|(i, j)| self.entry(i, j).clone())
            .collect();
        ExprMatrix { rows: self.cols, cols: self.rows, dim: self.dim, entries }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Matrix> {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self.entry(i, j).eval(x, None)?;
            }
        }
        Ok(m)
    }

    /// Value and all first partials: `(A(x), [∂_1 A(x), …, ∂_m A(x)])`.
    pub fn eval_with_partials(&self, x: &[f64]) -> Result<(Matrix, Vec<Matrix>)> {
        let m = x.len();
        let mut value = Matrix::zeros(self.rows, self.cols);
        let mut partials = vec![Matrix::zeros(self.rows, self.cols); m];
        for i in 0..self.rows {
            for j in 0..self.cols {
                let jet = self.entry(i, j).eval_jet(x, None)?;
                value[(i, j)] = jet.value;
                for (d, p) in partials.iter_mut().enumerate() {
                    p[(i, j)] = jet.partials[d];
                }
            }
        }
        Ok((value, partials))
    }

    /// Entrywise directional derivative `Y(A)(x)`.
    pub fn directional(&self, x: &[f64], direction: &[f64]) -> Result<Matrix> {
        let (_, partials) = self.eval_with_partials(x)?;
        let mut out = Matrix::zeros(self.rows, self.cols);
        for (p, d) in partials.iter().zip(direction) {
            out += p * *d;
        }
        Ok(out)
    }
}

/// Pointwise data of a derivation: its symbol and matrix at a base point.
pub trait PointDerivation {
    fn dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn symbol_at(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn matrix_at(&self, x: &[f64]) -> Result<Matrix>;

    /// `(De)(x) = J_e(x) X(x) + A(x) e(x)`.
    fn apply(&self, e: &SectionSpec, x: &[f64]) -> Result<Vec<f64>> {
        if e.rank() != self.rank() || e.dim() != self.dim() {
            return Err(Error::Dimension(format!(
                "section of rank {} over dim {} applied to a rank {} derivation over dim {}",
                e.rank(),
                e.dim(),
                self.rank(),
                self.dim()
            )));
        }
        let symbol = crate::linalg::Vector::from_vec(self.symbol_at(x)?);
        let value = crate::linalg::Vector::from_vec(e.eval(x)?);
        let out = e.jacobian(x)? * symbol + self.matrix_at(x)? * value;
        Ok(out.iter().copied().collect())
    }
}

/// A derivation `D` of the trivial bundle `U × R^k`, given by its symbol `X`
/// and matrix field `A`.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivationSpec {
    base: BoxDomain,
    symbol: VectorFieldSpec,
    matrix: ExprMatrix,
}

impl DerivationSpec {
    pub fn new(base: BoxDomain, symbol: VectorFieldSpec, matrix: ExprMatrix) -> Result<DerivationSpec> {
        if symbol.dim() != base.dim() {
            return Err(Error::Dimension(format!(
                "symbol has {} components over a base of dimension {}",
                symbol.dim(),
                base.dim()
            )));
        }
        let (r, c) = matrix.shape();
        if r != c || r == 0 {
            return Err(Error::Dimension(format!("derivation matrix must be square and nonempty, got {r}×{c}")));
        }
        if matrix.dim() != base.dim() {
            return Err(Error::Dimension("matrix entries are over the wrong base dimension".into()));
        }
        Ok(DerivationSpec { base, symbol, matrix })
    }

    /// Convenience constructor from expression strings.
    pub fn parse<S, R, T>(base: BoxDomain, symbol: &[S], matrix: &[R]) -> Result<DerivationSpec>
    where
        S: AsRef<str>,
        R: AsRef<[T]>,
        T: AsRef<str>,
    {
        if symbol.len() != base.dim() {
            return Err(Error::Dimension(format!(
                "symbol has {} components over a base of dimension {}",
                symbol.len(),
                base.dim()
            )));
        }
        let dim = base.dim();
        let matrix = ExprMatrix::parse(matrix, dim)?;
        DerivationSpec::new(base, VectorFieldSpec::parse(symbol)?, matrix)
    }

    pub fn base(&self) -> &BoxDomain {
        &self.base
    }

    pub fn symbol(&self) -> &VectorFieldSpec {
        &self.symbol
    }

    pub fn matrix(&self) -> &ExprMatrix {
        &self.matrix
    }

    /// Linear vector field `D̂(x, v) = (X(x), −A(x) v)` on `U × R^k`.
    pub fn hat(&self) -> HatField<'_> {
        HatField { derivation: self }
    }
}

impl PointDerivation for DerivationSpec {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn rank(&self) -> usize {
        self.matrix.shape().0
    }

    fn symbol_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.symbol.eval(x)
    }

    fn matrix_at(&self, x: &[f64]) -> Result<Matrix> {
        self.matrix.eval(x)
    }
}

fn negate(e: &ScalarExpr) -> ScalarExpr {
    match e.root() {
        Node::Unary(crate::expr::UnaryOp::Neg, inner) => ScalarExpr::from_node((**inner).clone(), e.dim(), false),
        _ => e.negated(),
    }
}

/// Dual derivation `D*` on `E*`: same symbol, matrix `−Aᵀ` in the dual frame.
pub fn dual_derivation(d: &DerivationSpec) -> DerivationSpec {
    DerivationSpec { base: d.base.clone(), symbol: d.symbol.clone(), matrix: d.matrix.transpose().map(negate) }
}

/// Derivation of `E ⊗ F` with `D(e⊗f) = (D_E e)⊗f + e⊗(D_F f)`; its matrix
/// is the Kronecker sum `A_E ⊗ I + I ⊗ A_F`.
pub fn tensor_derivation(de: &DerivationSpec, df: &DerivationSpec) -> Result<DerivationSpec> {
    if de.base != df.base {
        return Err(Error::BaseMismatch);
    }
    if de.symbol != df.symbol {
        return Err(Error::SymbolMismatch);
    }
    let (ke, kf) = (de.rank(), df.rank());
    let dim = de.base.dim();
    let n = ke * kf;
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..ke {
        for k in 0..kf {
            for j in 0..ke {
                for l in 0..kf {
                    let left = (k == l).then(|| de.matrix.entry(i, j).root().clone());
                    let right = (i == j).then(|| df.matrix.entry(k, l).root().clone());
                    let node = match (left, right) {
                        (Some(a), Some(b)) => Node::binary(BinaryOp::Add, a, b),
                        (Some(a), None) | (None, Some(a)) => a,
                        (None, None) => Node::Const(0.0),
                    };
                    entries.push(ScalarExpr::from_node(node, dim, false));
                }
            }
        }
    }
    DerivationSpec::new(de.base.clone(), de.symbol.clone(), ExprMatrix::new(n, n, entries, dim)?)
}

/// Commutator `[D1, D2] = D1∘D2 − D2∘D1`, evaluated pointwise.
#[derive(Clone, Debug)]
pub struct Commutator<'a> {
    d1: &'a DerivationSpec,
    d2: &'a DerivationSpec,
}

pub fn commutator<'a>(d1: &'a DerivationSpec, d2: &'a DerivationSpec) -> Result<Commutator<'a>> {
    if d1.base != d2.base {
        return Err(Error::BaseMismatch);
    }
    if d1.rank() != d2.rank() {
        return Err(Error::Dimension(format!("ranks {} and {} differ", d1.rank(), d2.rank())));
    }
    Ok(Commutator { d1, d2 })
}

impl PointDerivation for Commutator<'_> {
    fn dim(&self) -> usize {
        self.d1.dim()
    }

    fn rank(&self) -> usize {
        self.d1.rank()
    }

    /// `[X1, X2] = J_{X2} X1 − J_{X1} X2`.
    fn symbol_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let x1 = crate::linalg::Vector::from_vec(self.d1.symbol.eval(x)?);
        let x2 = crate::linalg::Vector::from_vec(self.d2.symbol.eval(x)?);
        let v = self.d2.symbol.jacobian(x)? * &x1 - self.d1.symbol.jacobian(x)? * &x2;
        Ok(v.iter().copied().collect())
    }

    /// `X1(A2) − X2(A1) + [A1, A2]`.
    fn matrix_at(&self, x: &[f64]) -> Result<Matrix> {
        let x1 = self.d1.symbol.eval(x)?;
        let x2 = self.d2.symbol.eval(x)?;
        let a1 = self.d1.matrix.eval(x)?;
        let a2 = self.d2.matrix.eval(x)?;
        Ok(self.d2.matrix.directional(x, &x1)? - self.d1.matrix.directional(x, &x2)? + &a1 * &a2 - &a2 * &a1)
    }
}

/// `(De)(x)`, checking that `x` lies in the base domain.
pub fn apply_derivation(d: &DerivationSpec, e: &SectionSpec, x: &[f64]) -> Result<Vec<f64>> {
    d.base.require(x)?;
    d.apply(e, x)
}

/// A vector field on the total space `U × R^k`, points written `(x, v)`.
pub trait TotalField {
    fn base_dim(&self) -> usize;
    fn rank(&self) -> usize;
    fn eval(&self, p: &[f64]) -> Result<Vec<f64>>;

    /// Jacobian at `p`; central differences with step `1e-5` unless overridden.
    fn jacobian(&self, p: &[f64]) -> Result<Matrix> {
        let n = p.len();
        let h = 1e-5;
        let mut jac = Matrix::zeros(n, n);
        let mut q = p.to_vec();
        for j in 0..n {
            q[j] = p[j] + h;
            let plus = self.eval(&q)?;
            q[j] = p[j] - h;
            let minus = self.eval(&q)?;
            q[j] = p[j];
            for i in 0..n {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

fn split(p: &[f64], m: usize, k: usize) -> Result<(&[f64], &[f64])> {
    if p.len() != m + k {
        return Err(Error::Dimension(format!("total-space point has length {}, expected {}", p.len(), m + k)));
    }
    Ok(p.split_at(m))
}

/// The linear vector field `D̂` of a derivation.
#[derive(Clone, Copy, Debug)]
pub struct HatField<'a> {
    derivation: &'a DerivationSpec,
}

impl TotalField for HatField<'_> {
    fn base_dim(&self) -> usize {
        self.derivation.dim()
    }

    fn rank(&self) -> usize {
        self.derivation.rank()
    }

    fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (x, v) = split(p, self.base_dim(), self.rank())?;
        let mut out = self.derivation.symbol.eval(x)?;
        let fiber = self.derivation.matrix.eval(x)? * crate::linalg::Vector::from_column_slice(v);
        out.extend(fiber.iter().map(|c| -c));
        Ok(out)
    }

    fn jacobian(&self, p: &[f64]) -> Result<Matrix> {
        let (m, k) = (self.base_dim(), self.rank());
        let (x, v) = split(p, m, k)?;
        let mut jac = Matrix::zeros(m + k, m + k);
        jac.view_mut((0, 0), (m, m)).copy_from(&self.derivation.symbol.jacobian(x)?);
        let (a, partials) = self.derivation.matrix.eval_with_partials(x)?;
        let v = crate::linalg::Vector::from_column_slice(v);
        for (j, dj) in partials.iter().enumerate() {
            let col = -(dj * &v);
            jac.view_mut((m, j), (k, 1)).copy_from(&col);
        }
        jac.view_mut((m, m), (k, k)).copy_from(&(-a));
        Ok(jac)
    }
}

/// Linear vector field of any point-evaluable derivation; Jacobian by
/// central differences.
#[derive(Clone, Copy, Debug)]
pub struct PointHat<'a, D: PointDerivation> {
    derivation: &'a D,
}

pub fn point_hat<D: PointDerivation>(derivation: &D) -> PointHat<'_, D> {
    PointHat { derivation }
}

impl<D: PointDerivation> TotalField for PointHat<'_, D> {
    fn base_dim(&self) -> usize {
        self.derivation.dim()
    }

    fn rank(&self) -> usize {
        self.derivation.rank()
    }

    fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (x, v) = split(p, self.base_dim(), self.rank())?;
        let mut out = self.derivation.symbol_at(x)?;
        let fiber = self.derivation.matrix_at(x)? * crate::linalg::Vector::from_column_slice(v);
        out.extend(fiber.iter().map(|c| -c));
        Ok(out)
    }
}

/// Vertical (core) lift `e↑(x, v) = (0, e(x))`.
#[derive(Clone, Copy, Debug)]
pub struct CoreLift<'a> {
    section: &'a SectionSpec,
}

pub fn core_lift(e: &SectionSpec) -> CoreLift<'_> {
    CoreLift { section: e }
}

impl CoreLift<'_> {
    /// Exact flow: `(x, v) ↦ (x, v + t e(x))`.
    pub fn flow(&self, t: f64, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let e = self.section.eval(x)?;
        Ok((x.to_vec(), v.iter().zip(&e).map(|(a, b)| a + t * b).collect()))
    }
}

impl TotalField for CoreLift<'_> {
    fn base_dim(&self) -> usize {
        self.section.dim()
    }

    fn rank(&self) -> usize {
        self.section.rank()
    }

    fn eval(&self, p: &[f64]) -> Result<Vec<f64>> {
        let (x, _) = split(p, self.base_dim(), self.rank())?;
        let mut out = vec![0.0; self.base_dim()];
        out.extend(self.section.eval(x)?);
        Ok(out)
    }

    fn jacobian(&self, p: &[f64]) -> Result<Matrix> {
        let (m, k) = (self.base_dim(), self.rank());
        let (x, _) = split(p, m, k)?;
        let mut jac = Matrix::zeros(m + k, m + k);
        jac.view_mut((m, 0), (k, m)).copy_from(&self.section.jacobian(x)?);
        Ok(jac)
    }
}

/// Vertical lift of pointwise values, used to compare against `(De)↑`.
pub fn vertical(m: usize, values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m];
    out.extend_from_slice(values);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn plane() -> BoxDomain {
        BoxDomain::cube(2, -1.0, 1.0).unwrap()
    }

    #[test]
    fn box_validation_and_membership() {
        assert!(BoxDomain::new(vec![0.0], vec![0.0]).is_err());
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let b = plane();
        assert!(b.contains(&[0.0, 0.99]));
        assert!(!b.contains(&[0.0, 1.0]));
        assert_eq!(b.depth(&[0.0, 0.0]), 1.0);
        assert_eq!(b.shrink(0.05).lower(), &[-0.9, -0.9]);
    }

    #[test]
    fn dual_of_zero_and_nilpotent() {
        let d = DerivationSpec::parse(plane(), &["x2", "1"], &[["0", "0"], ["0", "0"]]).unwrap();
        let dd = dual_derivation(&d);
        assert_eq!(dd.symbol(), d.symbol());
        assert_eq!(dd.matrix_at(&[0.3, 0.2]).unwrap(), Matrix::zeros(2, 2));

        let d = DerivationSpec::parse(plane(), &["0", "0"], &[["0", "1"], ["0", "0"]]).unwrap();
        let b = dual_derivation(&d).matrix_at(&[0.0, 0.0]).unwrap();
        assert_eq!(b, Matrix::from_row_slice(2, 2, &[0.0, 0.0, -1.0, 0.0]));
    }

    #[test]
    fn double_dual_is_exact() {
        let d = DerivationSpec::parse(plane(), &["x2", "-x1"], &[["x1", "sin(x2)"], ["-x1*x2", "2"]]).unwrap();
        let dd = dual_derivation(&dual_derivation(&d));
        assert_eq!(dd, d);
        let x = [0.3, -0.7];
        assert_eq!(dd.matrix_at(&x).unwrap(), d.matrix_at(&x).unwrap());
    }

    #[test]
    fn tensor_matrix_is_kronecker_sum() {
        let de = DerivationSpec::parse(plane(), &["1", "0"], &[["1", "0"], ["0", "2"]]).unwrap();
        let df = DerivationSpec::parse(plane(), &["1", "0"], &[["0", "1"], ["0", "0"]]).unwrap();
        let t = tensor_derivation(&de, &df).unwrap();
        let got = t.matrix_at(&[0.0, 0.0]).unwrap();
        // hand-evaluated A_E ⊗ I + I ⊗ A_F with ordering e_i⊗f_j
        #[rustfmt::skip]
        let expected = Matrix::from_row_slice(4, 4, &[
            1.0, 1.0, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 2.0, 1.0,
            0.0, 0.0, 0.0, 2.0,
        ]);
        assert_eq!(got, expected);
    }

    #[test]
    fn tensor_of_scalars_adds() {
        let de = DerivationSpec::parse(plane(), &["x2", "0"], &[["3", "0"], ["0", "3"]]).unwrap();
        let df = DerivationSpec::parse(
            plane(),
            &["x2", "0"],
            &[["-1", "0", "0"], ["0", "-1", "0"], ["0", "0", "-1"]],
        )
        .unwrap();
        let t = tensor_derivation(&de, &df).unwrap();
        assert_eq!(t.matrix_at(&[0.1, 0.1]).unwrap(), Matrix::identity(6, 6) * 2.0);
        let zero = DerivationSpec::parse(plane(), &["x2", "0"], &[["0"]]).unwrap();
        let z = tensor_derivation(&zero, &zero).unwrap();
        assert_eq!(z.matrix_at(&[0.0, 0.0]).unwrap(), Matrix::zeros(1, 1));
    }

    #[test]
    fn tensor_rejects_mismatched_symbols() {
        let a = DerivationSpec::parse(plane(), &["1", "0"], &[["0"]]).unwrap();
        let b = DerivationSpec::parse(plane(), &["0", "1"], &[["0"]]).unwrap();
        assert_eq!(tensor_derivation(&a, &b).unwrap_err(), Error::SymbolMismatch);
        let other = DerivationSpec::parse(BoxDomain::cube(2, -2.0, 2.0).unwrap(), &["1", "0"], &[["0"]]).unwrap();
        assert_eq!(tensor_derivation(&a, &other).unwrap_err(), Error::BaseMismatch);
    }

    #[test]
    fn commutator_examples() {
        let d = DerivationSpec::parse(plane(), &["x2", "x1^2"], &[["x1", "1"], ["0", "x2"]]).unwrap();
        let c = commutator(&d, &d).unwrap();
        let x = [0.4, -0.3];
        assert_eq!(c.symbol_at(&x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(c.matrix_at(&x).unwrap(), Matrix::zeros(2, 2));

        // [∂_1, x1 ∂_2] = ∂_2
        let d1 = DerivationSpec::parse(plane(), &["1", "0"], &[["0"]]).unwrap();
        let d2 = DerivationSpec::parse(plane(), &["0", "x1"], &[["0"]]).unwrap();
        let c = commutator(&d1, &d2).unwrap();
        assert_eq!(c.symbol_at(&x).unwrap(), vec![0.0, 1.0]);
        assert_eq!(c.matrix_at(&x).unwrap(), Matrix::zeros(1, 1));

        let a1 = DerivationSpec::parse(plane(), &["0", "0"], &[["0", "1"], ["0", "0"]]).unwrap();
        let a2 = DerivationSpec::parse(plane(), &["0", "0"], &[["0", "0"], ["1", "0"]]).unwrap();
        let c = commutator(&a1, &a2).unwrap();
        assert_eq!(c.matrix_at(&x).unwrap(), Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert_eq!(c.symbol_at(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn commutator_is_antisymmetric() {
        let d1 = DerivationSpec::parse(plane(), &["x2", "sin(x1)"], &[["x1", "x2^2"], ["1", "0"]]).unwrap();
        let d2 = DerivationSpec::parse(plane(), &["exp(x1)", "x1*x2"], &[["0", "x1"], ["cos(x2)", "x1"]]).unwrap();
        let c12 = commutator(&d1, &d2).unwrap();
        let c21 = commutator(&d2, &d1).unwrap();
        let x = [0.2, 0.6];
        let s12 = c12.symbol_at(&x).unwrap();
        let s21 = c21.symbol_at(&x).unwrap();
        for (a, b) in s12.iter().zip(&s21) {
            assert!((a + b).abs() < 1e-15);
        }
        assert!(max_abs_diff(&c12.matrix_at(&x).unwrap(), &(-c21.matrix_at(&x).unwrap())) < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let d = DerivationSpec::parse(plane(), &["x2", "1"], &[["0", "0"], ["0", "0"]]).unwrap();
        let e = SectionSpec::parse(&["3", "-2"], 2).unwrap();
        assert_eq!(apply_derivation(&d, &e, &[0.1, 0.2]).unwrap(), vec![0.0, 0.0]);

        let d = DerivationSpec::parse(plane(), &["1", "0"], &[["0"]]).unwrap();
        let e = SectionSpec::parse(&["x1"], 2).unwrap();
        assert_eq!(apply_derivation(&d, &e, &[0.5, 0.5]).unwrap(), vec![1.0]);
        assert!(matches!(apply_derivation(&d, &e, &[2.0, 0.0]), Err(Error::OutsideDomain { .. })));
        let wrong = SectionSpec::parse(&["x1", "x2"], 2).unwrap();
        assert!(matches!(apply_derivation(&d, &wrong, &[0.0, 0.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn pairing_leibniz_identity() {
        // X<ε, e> = <D*ε, e> + <ε, De>
        let d = DerivationSpec::parse(plane(), &["x2 + 1", "x1^2"], &[["x1", "sin(x2)"], ["1 - x2", "x1*x2"]]).unwrap();
        let ds = dual_derivation(&d);
        let e = SectionSpec::parse(&["cos(x1)", "x1*x2 + 2"], 2).unwrap();
        let eps = SectionSpec::parse(&["exp(x2)", "x1 - x2^3"], 2).unwrap();
        for x in [[0.1, 0.2], [-0.5, 0.7], [0.9, -0.9]] {
            let pair = ScalarExpr::from_node(
                Node::binary(
                    BinaryOp::Add,
                    Node::binary(BinaryOp::Mul, eps.components()[0].root().clone(), e.components()[0].root().clone()),
                    Node::binary(BinaryOp::Mul, eps.components()[1].root().clone(), e.components()[1].root().clone()),
                ),
                2,
                false,
            );
            let lhs = pair.eval_jet(&x, None).unwrap().directional(&d.symbol_at(&x).unwrap());
            let rhs = pairing(&apply_derivation(&ds, &eps, &x).unwrap(), &e.eval(&x).unwrap())
                + pairing(&eps.eval(&x).unwrap(), &apply_derivation(&d, &e, &x).unwrap());
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn hat_jacobian_matches_finite_differences() {
        let d = DerivationSpec::parse(plane(), &["x2", "-x1"], &[["x1", "x2^2"], ["sin(x1)", "1"]]).unwrap();
        let hat = d.hat();
        let p = [0.2, -0.4, 1.5, -0.5];
        let exact = hat.jacobian(&p).unwrap();
        let fd = point_hat(&d).jacobian(&p).unwrap();
        assert!(max_abs_diff(&exact, &fd) < 1e-8);
        assert_eq!(hat.eval(&p).unwrap(), point_hat(&d).eval(&p).unwrap());
    }

    #[test]
    fn core_lift_flow_and_zero() {
        let e = SectionSpec::parse(&["x1", "1"], 2).unwrap();
        let lift = core_lift(&e);
        let (x, v) = lift.flow(2.0, &[0.5, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(x, vec![0.5, 0.0]);
        assert_eq!(v, vec![2.0, 3.0]);
        let zero = SectionSpec::parse(&["0", "0"], 2).unwrap();
        assert_eq!(core_lift(&zero).eval(&[0.1, 0.2, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
    }
}
