//! Explicit trivializations.
//!
//! * Over a cylinder `I × U`, any linear lift of `∂_t` gives the bundle
//!   isomorphism `Θ(e_(t,x)) = Φ_{t0−t}(e_(t,x))` onto `I × E|_{t0}`.
//! * A bundle presented by transition functions on a cover of boxes gets a
//!   connection glued from the local trivial ones with a bump-function
//!   partition of unity, and then a global frame by transporting a frame at a
//!   basepoint along broken coordinate paths.
//!
//! Transition convention: `v_α = g_αβ(x) v_β`, so `g_αβ g_βγ = g_αγ`.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{EvalError, Jet1, ScalarExpr};
use crate::flow::{integrate, integrate_linear, IntegratorConfig, Outcome};
use crate::geometry::{BoxDomain, DerivationSpec, ExprMatrix, VectorFieldSpec};
use crate::linalg::{invert, max_abs_diff, Matrix};

/// Rank-`k` bundle over `I × U` with a linear lift of `∂_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CylinderBundle {
    interval: (f64, f64),
    base: BoxDomain,
    derivation: DerivationSpec,
}

impl CylinderBundle {
    /// `lift` holds expressions in `t, x1..xm`; `None` means the zero lift.
    pub fn new(interval: (f64, f64), base: BoxDomain, rank: usize, lift: Option<Vec<ScalarExpr>>) -> Result<CylinderBundle> {
        let m = base.dim();
        let mut lower = vec![interval.0];
        lower.extend_from_slice(base.lower());
        let mut upper = vec![interval.1];
        upper.extend_from_slice(base.upper());
        let total = BoxDomain::new(lower, upper)?;
        let matrix = match lift {
            None => ExprMatrix::zeros(rank, rank, m + 1),
            Some(entries) => {
                if entries.len() != rank * rank {
                    return Err(Error::Dimension(format!("{} lift entries for rank {rank}", entries.len())));
                }
                if let Some(e) = entries.iter().find(|e| e.dim() != m) {
                    return Err(Error::Dimension(format!("lift entry `{e}` is not a function of t, x1..x{m}")));
                }
                let suspended = entries.iter().map(|e| e.suspend());
                ExprMatrix::new(rank, rank, suspended.collect(), m + 1)?
            }
        };
        let derivation = DerivationSpec::new(total, VectorFieldSpec::coordinate(0, m + 1), matrix)?;
        Ok(CylinderBundle { interval, base, derivation })
    }

    pub fn parse<R, S>(interval: (f64, f64), base: BoxDomain, lift: &[R]) -> Result<CylinderBundle>
    where
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let m = base.dim();
        let rank = lift.len();
        let mut entries = Vec::with_capacity(rank * rank);
        for (i, row) in lift.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != rank {
                return Err(Error::Dimension(format!("lift row {} has {} entries, expected {rank}", i + 1, row.len())));
            }
            for s in row {
                entries.push(ScalarExpr::parse(s.as_ref(), m, true)?);
            }
        }
        CylinderBundle::new(interval, base, rank, Some(entries))
    }

    pub fn rank(&self) -> usize {
        self.derivation.matrix().shape().0
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn base(&self) -> &BoxDomain {
        &self.base
    }

    /// The lift as a derivation on `I × U` with coordinates `(t, x1..xm)`.
    pub fn derivation(&self) -> &DerivationSpec {
        &self.derivation
    }

    fn point(&self, t: f64, x: &[f64]) -> Result<Vec<f64>> {
        let (a, b) = self.interval;
        if !(a < t && t < b) {
            return Err(Error::Invalid(format!("time {t} lies outside ({a}, {b})")));
        }
        self.base.require(x)?;
        let mut p = vec![t];
        p.extend_from_slice(x);
        Ok(p)
    }
}

/// Fiber matrix of `Θ` at `(t, x)`: the fundamental matrix of the lift from
/// `(t, x)` for time `t0 − t`.
pub fn trivialize_cylinder(b: &CylinderBundle, t0: f64, t: f64, x: &[f64], cfg: &IntegratorConfig) -> Result<Matrix> {
    b.point(t0, x)?;
    let p = b.point(t, x)?;
    Ok(integrate_linear(b.derivation(), &p, t0 - t, cfg)?.complete(t0 - t)?.fundamental)
}

/// Fiber matrix of `Θ⁻¹` at `(t, x)`, integrated independently from `(t0, x)`.
pub fn trivialize_cylinder_inverse(
    b: &CylinderBundle,
    t0: f64,
    t: f64,
    x: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Matrix> {
    b.point(t, x)?;
    let p = b.point(t0, x)?;
    Ok(integrate_linear(b.derivation(), &p, t - t0, cfg)?.complete(t - t0)?.fundamental)
}

/// Bundle given by transition matrices on a finite cover by open boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleBundle {
    patches: Vec<BoxDomain>,
    rank: usize,
    transitions: BTreeMap<(usize, usize), ExprMatrix>,
}

/// Intersection of boxes, if nonempty.
pub fn intersect(a: &BoxDomain, b: &BoxDomain) -> Option<BoxDomain> {
    let lower: Vec<f64> = a.lower().iter().zip(b.lower()).map(|(x, y)| x.max(*y)).collect();
    let upper: Vec<f64> = a.upper().iter().zip(b.upper()).map(|(x, y)| x.min(*y)).collect();
    BoxDomain::new(lower, upper).ok()
}

fn sample_grid(b: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let inner = b.shrink(0.05);
    let m = b.dim();
    let total = per_axis.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut u = vec![0.0; m];
            for slot in u.iter_mut().rev() {
                let j = idx % per_axis;
                idx /= per_axis;
                *slot = if per_axis == 1 { 0.5 } else { j as f64 / (per_axis - 1) as f64 };
            }
            inner.from_unit(&u)
        })
        .collect()
}

impl CocycleBundle {
    /// Builds and validates the bundle: every overlapping pair needs a
    /// transition (given in either order), transitions must be invertible
    /// and satisfy the cocycle condition at sample points.
    pub fn new(patches: Vec<BoxDomain>, rank: usize, transitions: BTreeMap<(usize, usize), ExprMatrix>) -> Result<CocycleBundle> {
        if patches.is_empty() {
            return Err(Error::Invalid("a cover needs at least one patch".into()));
        }
        let m = patches[0].dim();
        if patches.iter().any(|p| p.dim() != m) {
            return Err(Error::Dimension("patches have different dimensions".into()));
        }
        for (&(a, b), g) in &transitions {
            if a >= patches.len() || b >= patches.len() {
                return Err(Error::Invalid(format!("transition ({a}, {b}) refers to a missing patch")));
            }
            if g.shape() != (rank, rank) || g.dim() != m {
                return Err(Error::Dimension(format!("transition ({a}, {b}) must be {rank}×{rank} over dimension {m}")));
            }
        }
        let bundle = CocycleBundle { patches, rank, transitions };
        bundle.validate(1e-9, 1e12)?;
        Ok(bundle)
    }

    pub fn patches(&self) -> &[BoxDomain] {
        &self.patches
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.patches[0].dim()
    }

    /// Transitions as given, keyed by 0-based `(α, β)`.
    pub fn transitions(&self) -> &BTreeMap<(usize, usize), ExprMatrix> {
        &self.transitions
    }

    fn validate(&self, tol: f64, max_condition: f64) -> Result<()> {
        let n = self.patches.len();
        let ident = Matrix::identity(self.rank, self.rank);
        for a in 0..n {
            if let Some(g) = self.transitions.get(&(a, a)) {
                for x in sample_grid(&self.patches[a], 4) {
                    let r = max_abs_diff(&g.eval(&x)?, &ident);
                    if r > tol {
                        return Err(Error::Precondition {
                            check: "cocycle-identity".into(),
                            detail: format!("g_{a}{a} differs from I by {r:.3e} at {x:?}"),
                        });
                    }
                }
            }
            for b in 0..n {
                if a == b {
                    continue;
                }
                let Some(ov) = intersect(&self.patches[a], &self.patches[b]) else { continue };
                if !self.transitions.contains_key(&(a, b)) && !self.transitions.contains_key(&(b, a)) {
                    return Err(Error::Precondition {
                        check: "cocycle-transition".into(),
                        detail: format!("patches {a} and {b} overlap but no transition is given"),
                    });
                }
                if a < b {
                    for x in sample_grid(&ov, 4) {
                        let (g, _) = self.transition(a, b, &x)?;
                        let cond = invert(&g).map(|i| i.condition).unwrap_or(f64::INFINITY);
                        if !(cond < max_condition) {
                            return Err(Error::Precondition {
                                check: "cocycle-invertible".into(),
                                detail: format!("g_{a}{b} has condition {cond:.3e} at {x:?}"),
                            });
                        }
                    }
                }
                for c in 0..n {
                    if c == a || c == b {
                        continue;
                    }
                    let Some(triple) = intersect(&ov, &self.patches[c]) else { continue };
                    for x in sample_grid(&triple, 3) {
                        let (gab, _) = self.transition(a, b, &x)?;
                        let (gbc, _) = self.transition(b, c, &x)?;
                        let (gac, _) = self.transition(a, c, &x)?;
                        let r = max_abs_diff(&(gab * gbc), &gac);
                        if r > tol {
                            return Err(Error::Precondition {
                                check: "cocycle-condition".into(),
                                detail: format!("g_{a}{b} g_{b}{c} − g_{a}{c} = {r:.3e} at {x:?}"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `g_αβ(x)` with its partial derivatives. The reverse direction of a
    /// given transition is obtained by inversion.
    pub fn transition(&self, alpha: usize, beta: usize, x: &[f64]) -> Result<(Matrix, Vec<Matrix>)> {
        let m = x.len();
        if alpha == beta {
            return Ok((Matrix::identity(self.rank, self.rank), vec![Matrix::zeros(self.rank, self.rank); m]));
        }
        if let Some(g) = self.transitions.get(&(alpha, beta)) {
            return g.eval_with_partials(x);
        }
        if let Some(g) = self.transitions.get(&(beta, alpha)) {
            let (value, partials) = g.eval_with_partials(x)?;
            let inv = invert(&value).ok_or(Error::Singular)?.inverse;
            let dinv = partials.iter().map(|p| -(&inv * p * &inv)).collect();
            return Ok((inv, dinv));
        }
        Err(Error::Precondition {
            check: "cocycle-transition".into(),
            detail: format!("no transition between patches {alpha} and {beta}"),
        })
    }

    /// Bump `ψ_α(x) = Π_i exp(−1/(1 − s_i²))`, `s_i` the coordinate rescaled to `(−1, 1)`.
    fn bump(&self, alpha: usize, x: &[f64]) -> Jet1 {
        let b = &self.patches[alpha];
        let m = x.len();
        let mut acc = Jet1::constant(1.0, m);
        for i in 0..m {
            let (lo, hi) = (b.lower()[i], b.upper()[i]);
            let s = (2.0 * x[i] - lo - hi) / (hi - lo);
            if s.abs() >= 1.0 {
                return Jet1::constant(0.0, m);
            }
            let q = 1.0 - s * s;
            let value = (-1.0 / q).exp();
            let derivative = value * (-2.0 * s / (q * q)) * (2.0 / (hi - lo));
            let factor = Jet1::variable(x[i], i, m).chain(value, derivative);
            acc = &acc * &factor;
        }
        acc
    }

    /// Partition of unity `ρ_α = ψ_α / Σ_β ψ_β` with first derivatives.
    pub fn partition_of_unity(&self, x: &[f64]) -> Result<Vec<Jet1>> {
        let bumps: Vec<Jet1> = (0..self.patches.len()).map(|a| self.bump(a, x)).collect();
        let m = x.len();
        let total = bumps.iter().fold(Jet1::constant(0.0, m), |s, b| &s + b);
        if !(total.value > 0.0) {
            return Err(Error::Precondition { check: "cover".into(), detail: format!("point {x:?} is not covered") });
        }
        Ok(bumps.iter().map(|b| b.div(&total)).collect())
    }

    /// Patches containing `x`, deepest first.
    pub fn patches_containing(&self, x: &[f64]) -> Vec<usize> {
        let mut v: Vec<(usize, f64)> =
            self.patches.iter().enumerate().filter(|(_, p)| p.contains(x)).map(|(i, p)| (i, p.depth(x))).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.into_iter().map(|(i, _)| i).collect()
    }
}

/// Connection glued from the trivial connections of the patches.
#[derive(Clone, Debug)]
pub struct GluedConnection<'a> {
    bundle: &'a CocycleBundle,
}

/// Glues `∇ = Σ_β ρ_β d^β`; in the frame of patch `α` its matrix along
/// `∂_i` is `A^(i)_α = −Σ_β ρ_β ∂_i g_αβ · g_αβ⁻¹`, with
/// `∇_{∂_i} s = ∂_i s + A^(i) s`.
pub fn connection_from_cocycle(bundle: &CocycleBundle) -> GluedConnection<'_> {
    GluedConnection { bundle }
}

impl GluedConnection<'_> {
    pub fn bundle(&self) -> &CocycleBundle {
        self.bundle
    }

    /// `[A^(1)_α(x), …, A^(m)_α(x)]` for `x` in patch `α`.
    pub fn matrices(&self, alpha: usize, x: &[f64]) -> Result<Vec<Matrix>> {
        let b = self.bundle;
        if !b.patches[alpha].contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        let k = b.rank;
        let rho = b.partition_of_unity(x)?;
        let mut out = vec![Matrix::zeros(k, k); x.len()];
        for (beta, r) in rho.iter().enumerate() {
            if r.value == 0.0 || beta == alpha {
                continue;
            }
            let (g, dg) = b.transition(alpha, beta, x)?;
            let ginv = invert(&g).ok_or(Error::Singular)?.inverse;
            for (a, d) in out.iter_mut().zip(&dg) {
                *a -= d * &ginv * r.value;
            }
        }
        Ok(out)
    }

    /// Parallel transport of the columns of `h` (frame of patch `alpha`)
    /// along `∂_axis` for signed length `length`. Stops at the patch
    /// boundary.
    fn transport_in_patch(
        &self,
        alpha: usize,
        x: &[f64],
        axis: usize,
        length: f64,
        h: &Matrix,
        cfg: &IntegratorConfig,
    ) -> Result<Outcome> {
        let m = x.len();
        let k = self.bundle.rank;
        let rhs = |y: &[f64], dy: &mut [f64]| -> Result<(), EvalError> {
            let pos = &y[..m];
            let a = self.matrices(alpha, pos).map_err(|e| EvalError::Domain {
                node: "glued connection".into(),
                reason: "evaluation failed",
                argument: if let Error::OutsideDomain { .. } = e { f64::NAN } else { f64::INFINITY },
            })?;
            dy[..m].iter_mut().enumerate().for_each(|(i, d)| *d = if i == axis { 1.0 } else { 0.0 });
            let hm = nalgebra::DMatrixView::from_slice(&y[m..], k, k);
            let hdot = -(&a[axis] * hm);
            dy[m..].copy_from_slice(hdot.as_slice());
            Ok(())
        };
        let mut y0 = x.to_vec();
        y0.extend_from_slice(h.as_slice());
        let patch = &self.bundle.patches[alpha];
        integrate(&rhs, &y0, length, |y: &[f64]| patch.contains(&y[..m]), cfg)
    }

    /// Transports the frame `h` (in patch `alpha` at `x`) along `∂_axis` by
    /// `length`, switching patches when the path leaves one. Returns the
    /// final patch, point and frame.
    pub fn transport_segment(
        &self,
        alpha: usize,
        x: &[f64],
        axis: usize,
        length: f64,
        h: &Matrix,
        prefer: Option<usize>,
        cfg: &IntegratorConfig,
    ) -> Result<(usize, Vec<f64>, Matrix)> {
        let m = x.len();
        let k = self.bundle.rank;
        let (mut patch, mut pos, mut frame) = (alpha, x.to_vec(), h.clone());
        let mut remaining = length;
        let mut switches = 0;
        while remaining != 0.0 {
            match self.transport_in_patch(patch, &pos, axis, remaining, &frame, cfg)? {
                Outcome::Complete(y) => {
                    pos = y[..m].to_vec();
                    frame = Matrix::from_column_slice(k, k, &y[m..]);
                    remaining = 0.0;
                }
                Outcome::Escaped { time, state } => {
                    pos = state[..m].to_vec();
                    frame = Matrix::from_column_slice(k, k, &state[m..]);
                    remaining -= time;
                    let candidates = self.bundle.patches_containing(&pos);
                    let next = match prefer {
                        Some(p) if p != patch && candidates.contains(&p) => p,
                        _ => *candidates.iter().find(|&&c| c != patch).ok_or_else(|| Error::Precondition {
                            check: "cover".into(),
                            detail: format!("transport path leaves the cover near {pos:?}"),
                        })?,
                    };
                    frame = self.bundle.transition(next, patch, &pos)?.0 * frame;
                    patch = next;
                    switches += 1;
                    if switches > 10_000 {
                        return Err(Error::Precondition {
                            check: "cover".into(),
                            detail: "transport keeps switching patches".into(),
                        });
                    }
                }
            }
        }
        Ok((patch, pos, frame))
    }
}

/// Frame of a bundle given on a cover, sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalFrame {
    pub rank: usize,
    pub patches: Vec<BoxDomain>,
    pub basepoint: Vec<f64>,
    pub basepoint_patch: usize,
    pub grid: usize,
    pub target: BoxDomain,
    /// `h_α` at the basepoint for every patch containing it.
    pub base_values: Vec<(usize, Matrix)>,
    /// `(patch, grid point, h_α(point))`, patches ascending then grid points lexicographic.
    pub records: Vec<(usize, Vec<f64>, Matrix)>,
    pub max_overlap_residual: f64,
    /// Grid point where the overlap residual is largest (empty without overlaps).
    pub worst_overlap_point: Vec<f64>,
    pub abs_tol: f64,
    pub rel_tol: f64,
}

const PIECES: usize = 8;

fn broken_path_frame(
    conn: &GluedConnection<'_>,
    start_patch: usize,
    basepoint: &[f64],
    y: &[f64],
    target: usize,
    cfg: &IntegratorConfig,
) -> Result<Matrix> {
    let b = conn.bundle;
    let k = b.rank;
    let mut patch = start_patch;
    let mut pos = basepoint.to_vec();
    let mut frame = Matrix::identity(k, k);
    for axis in 0..y.len() {
        let length = y[axis] - pos[axis];
        if length == 0.0 {
            continue;
        }
        let piece = length / PIECES as f64;
        for j in 0..PIECES {
            if patch != target && b.patches[target].contains(&pos) && b.patches[target].depth(&pos) > 1e-3 {
                frame = b.transition(target, patch, &pos)?.0 * frame;
                patch = target;
            }
            let len = if j + 1 == PIECES { y[axis] - pos[axis] } else { piece };
            let (p, x, h) = conn.transport_segment(patch, &pos, axis, len, &frame, Some(target), cfg)?;
            patch = p;
            pos = x;
            frame = h;
        }
        pos[axis] = y[axis];
    }
    if patch != target {
        frame = b.transition(target, patch, y)?.0 * frame;
    }
    Ok(frame)
}

/// Parallel-transports the identity frame at `basepoint` to every point of
/// an `n^m` grid over `target` along the broken path moving coordinate 1
/// first, then 2, and so on. Each patch's frame is computed by its own
/// transport, so the overlap residual `max ‖h_α − g_αβ h_β‖` measures the
/// consistency of the glued connection.
pub fn global_frame(
    bundle: &CocycleBundle,
    basepoint: &[f64],
    target: &BoxDomain,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<GlobalFrame> {
    let m = bundle.dim();
    if basepoint.len() != m || target.dim() != m {
        return Err(Error::Dimension("basepoint or target box has the wrong dimension".into()));
    }
    if n < 2 {
        return Err(Error::Invalid("grid needs at least 2 points per axis".into()));
    }
    let start = *bundle.patches_containing(basepoint).first().ok_or_else(|| Error::Precondition {
        check: "cover".into(),
        detail: format!("basepoint {basepoint:?} lies in no patch"),
    })?;
    let conn = connection_from_cocycle(bundle);
    let total = n.pow(m as u32);
    let points: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut u = vec![0.0; m];
            for slot in u.iter_mut().rev() {
                *slot = (idx % n) as f64 / (n - 1) as f64;
                idx /= n;
            }
            target.from_unit(&u)
        })
        .collect();
    let per_point: Vec<Result<Vec<(usize, Matrix)>>> = points
        .par_iter()
        .map(|y| {
            let owners = bundle.patches_containing(y);
            if owners.is_empty() {
                return Err(Error::Precondition {
                    check: "cover".into(),
                    detail: format!("grid point {y:?} lies in no patch"),
                });
            }
            let mut sorted = owners;
            sorted.sort_unstable();
            sorted.into_iter().map(|a| Ok((a, broken_path_frame(&conn, start, basepoint, y, a, cfg)?))).collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut residual = 0.0f64;
    let mut worst = Vec::new();
    for (y, frames) in points.iter().zip(per_point) {
        let frames = frames?;
        for (a, ha) in &frames {
            for (b, hb) in &frames {
                if a < b {
                    let g = bundle.transition(*a, *b, y)?.0;
                    let r = max_abs_diff(ha, &(g * hb));
                    if worst.is_empty() || r > residual {
                        residual = r;
                        worst = y.clone();
                    }
                }
            }
        }
        for (a, h) in frames {
            records.push((a, y.clone(), h));
        }
    }
    records.sort_by(|x, y| x.0.cmp(&y.0));
    let mut base_values = Vec::new();
    let mut owners = bundle.patches_containing(basepoint);
    owners.sort_unstable();
    for a in owners {
        let h = if a == start { Matrix::identity(bundle.rank, bundle.rank) } else { bundle.transition(a, start, basepoint)?.0 };
        base_values.push((a, h));
    }
    Ok(GlobalFrame {
        rank: bundle.rank,
        patches: bundle.patches.clone(),
        basepoint: basepoint.to_vec(),
        basepoint_patch: start,
        grid: n,
        target: target.clone(),
        base_values,
        records,
        max_overlap_residual: residual,
        worst_overlap_point: worst,
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
    })
}

/// Fixed-width decimal with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(" ")
}

fn row_major(h: &Matrix) -> Vec<f64> {
    (0..h.nrows()).flat_map(|i| (0..h.ncols()).map(move |j| h[(i, j)])).collect()
}

impl GlobalFrame {
    /// Writes the frame document: `key = value` header lines, a `---`
    /// separator, then one tab-separated record per (patch, grid point).
    /// Patch ids are 1-based.
    pub fn write_document(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "# vbflow global frame")?;
        writeln!(w, "schema_version = 1")?;
        writeln!(w, "kind = global-frame")?;
        writeln!(w, "rank = {}", self.rank)?;
        writeln!(w, "dim = {}", self.basepoint.len())?;
        writeln!(w, "patches = {}", self.patches.len())?;
        for (i, p) in self.patches.iter().enumerate() {
            writeln!(w, "patch.{}.lower = {}", i + 1, join(p.lower()))?;
            writeln!(w, "patch.{}.upper = {}", i + 1, join(p.upper()))?;
        }
        writeln!(w, "basepoint = {}", join(&self.basepoint))?;
        writeln!(w, "basepoint_patch = {}", self.basepoint_patch + 1)?;
        for (a, h) in &self.base_values {
            writeln!(w, "basepoint_frame.{} = {}", a + 1, join(&row_major(h)))?;
        }
        writeln!(w, "grid = {}", self.grid)?;
        writeln!(w, "target.lower = {}", join(self.target.lower()))?;
        writeln!(w, "target.upper = {}", join(self.target.upper()))?;
        writeln!(w, "abs_tol = {}", fmt17(self.abs_tol))?;
        writeln!(w, "rel_tol = {}", fmt17(self.rel_tol))?;
        writeln!(w, "max_overlap_residual = {}", fmt17(self.max_overlap_residual))?;
        writeln!(w, "records = {}", self.records.len())?;
        writeln!(w, "---")?;
        for (a, y, h) in &self.records {
            writeln!(w, "{}\t{}\t{}", a + 1, join(y), join(&row_major(h)))?;
        }
        Ok(())
    }
}

/// Samples of `Θ` on an `n × n^m` grid over the cylinder, with the residual
/// of `Θ⁻¹ Θ − I` at each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSamples {
    pub t0: f64,
    pub rank: usize,
    pub interval: (f64, f64),
    pub base: BoxDomain,
    pub grid: usize,
    pub records: Vec<(f64, Vec<f64>, Matrix, f64)>,
    pub max_inverse_residual: f64,
}

pub fn sample_cylinder(b: &CylinderBundle, t0: f64, n: usize, cfg: &IntegratorConfig) -> Result<ThetaSamples> {
    if n < 2 {
        return Err(Error::Invalid("grid needs at least 2 points per axis".into()));
    }
    let full = b.derivation().base().shrink(0.05);
    let m = b.base.dim() + 1;
    let total = n.pow(m as u32);
    let samples: Vec<Result<(f64, Vec<f64>, Matrix, f64)>> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut u = vec![0.0; m];
            for slot in u.iter_mut().rev() {
                *slot = (idx % n) as f64 / (n - 1) as f64;
                idx /= n;
            }
            let p = full.from_unit(&u);
            let theta = trivialize_cylinder(b, t0, p[0], &p[1..], cfg)?;
            let inv = trivialize_cylinder_inverse(b, t0, p[0], &p[1..], cfg)?;
            let r = max_abs_diff(&(&inv * &theta), &Matrix::identity(b.rank(), b.rank()));
            Ok((p[0], p[1..].to_vec(), theta, r))
        })
        .collect();
    let records = samples.into_iter().collect::<Result<Vec<_>>>()?;
    let max_inverse_residual = records.iter().map(|r| r.3).fold(0.0, f64::max);
    Ok(ThetaSamples { t0, rank: b.rank(), interval: b.interval, base: b.base.clone(), grid: n, records, max_inverse_residual })
}

impl ThetaSamples {
    pub fn write_document(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "# vbflow cylinder trivialization")?;
        writeln!(w, "schema_version = 1")?;
        writeln!(w, "kind = cylinder-theta")?;
        writeln!(w, "rank = {}", self.rank)?;
        writeln!(w, "interval = {} {}", fmt17(self.interval.0), fmt17(self.interval.1))?;
        writeln!(w, "base.lower = {}", join(self.base.lower()))?;
        writeln!(w, "base.upper = {}", join(self.base.upper()))?;
        writeln!(w, "t0 = {}", fmt17(self.t0))?;
        writeln!(w, "grid = {}", self.grid)?;
        writeln!(w, "max_inverse_residual = {}", fmt17(self.max_inverse_residual))?;
        writeln!(w, "records = {}", self.records.len())?;
        writeln!(w, "---")?;
        for (t, x, theta, r) in &self.records {
            writeln!(w, "{}\t{}\t{}\t{}", fmt17(*t), join(x), join(&row_major(theta)), fmt17(*r))?;
        }
        Ok(())
    }
}
