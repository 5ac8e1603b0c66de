//! Verification suites run over seeded sample points of a scene.
//!
//! Suites always run in registry order ([`SUITES`]) and each draws its
//! samples from its own stream, so a suite's records do not depend on which
//! other suites were requested. Worst points list the sample coordinates:
//! the base point followed by any sampled times or fiber coordinates.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebroid::{
    check_fiber_structure, check_flatness, fiber_isomorphism, fiber_isomorphism_back, flatness_residual,
    flatness_via_pullback, flatness_via_tensor, bracket_preservation,
};
use crate::error::{Error, Result};
use crate::expr::ScalarExpr;
use crate::flow::{
    bracket_vf, dual_flow, flow_pointwise, integrate_base, integrate_linear, pullback_section, tensor_flow, FlowStatus,
    IntegratorConfig,
};
use crate::geometry::{
    apply_derivation, commutator, core_lift, pairing, point_hat, vertical, BoxDomain, DerivationSpec, PointDerivation,
    SectionSpec,
};
use crate::linalg::{invert, kron_vec, max_abs, max_abs_diff, Matrix, Vector};
use crate::odesolve::{expm, propagator, quadrature, solve_nonautonomous};
use crate::report::{num, nums, CheckRecord, Worst, MACHINE_HEADER};
use crate::sampling::{Sampler, MARGIN};
use crate::scene::Scene;
use crate::trivialize::{connection_from_cocycle, global_frame, intersect, trivialize_cylinder, trivialize_cylinder_inverse};

/// Suite registry; reports follow this order.
pub const SUITES: [&str; 12] = [
    "expr",
    "linearity",
    "flow-domain",
    "cocycle",
    "brackets",
    "derivative",
    "flat-section",
    "ode",
    "dual",
    "tensor",
    "trivialize",
    "algebroid",
];

/// Default for flow-identity checks.
pub const FLOW_TOL: f64 = 1e-7;
/// Default for finite-difference checks.
pub const FD_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub suites: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    /// Replaces every residual tolerance when set.
    pub tol: Option<f64>,
    pub cfg: IntegratorConfig,
}

impl VerifyOptions {
    pub fn from_scene(scene: &Scene) -> VerifyOptions {
        VerifyOptions {
            suites: scene.verify.suites.clone(),
            samples: scene.verify.samples,
            seed: scene.verify.seed,
            tol: None,
            cfg: IntegratorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyReport {
    pub scene: String,
    pub seed: u64,
    pub samples: usize,
    pub suites: Vec<String>,
    pub records: Vec<CheckRecord>,
    pub runtime: Duration,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    /// Machine document without the runtime line.
    pub fn machine_body(&self) -> String {
        let mut s = String::new();
        s.push_str("# vbflow verify report\n");
        s.push_str("schema_version\t1\n");
        s.push_str(&format!("scene\t{}\n", self.scene));
        s.push_str(&format!("seed\t{}\n", self.seed));
        s.push_str(&format!("samples\t{}\n", self.samples));
        s.push_str(&format!("suites\t{}\n", self.suites.join(",")));
        s.push_str(MACHINE_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.machine_line());
            s.push('\n');
        }
        s.push_str(&format!("overall\t{}\n", if self.pass() { "PASS" } else { "FAIL" }));
        s
    }

    pub fn write_machine(&self, w: &mut dyn Write) -> io::Result<()> {
        w.write_all(self.machine_body().as_bytes())?;
        writeln!(w, "runtime_seconds\t{:.3}", self.runtime.as_secs_f64())
    }

    pub fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "scene {}  seed {}  samples {}", self.scene, self.seed, self.samples)?;
        for r in &self.records {
            r.write_text(w)?;
        }
        let failed = self.records.iter().filter(|r| !r.pass).count();
        writeln!(
            w,
            "overall: {} ({} checks, {} failed, {:.2}s)",
            if self.pass() { "PASS" } else { "FAIL" },
            self.records.len(),
            failed,
            self.runtime.as_secs_f64()
        )
    }
}

/// Whether `suite` has anything to check in `scene`.
pub fn applicable(scene: &Scene, suite: &str) -> bool {
    let has_derivations = !scene.derivations.is_empty();
    match suite {
        "expr" => !expression_sites(scene).is_empty(),
        "linearity" | "flow-domain" | "cocycle" | "brackets" => has_derivations,
        "derivative" => scene.sections.values().any(|s| !scene.derivations_for(s).is_empty()),
        "flat-section" => scene.sections.values().any(|s| s.derivation.is_some()),
        "ode" => scene.ode.is_some(),
        "dual" => !scene.duals.is_empty(),
        "tensor" => !scene.tensors.is_empty(),
        "trivialize" => scene.cylinder.is_some() || scene.cocycle.is_some(),
        "algebroid" => scene.algebroid.is_some(),
        _ => false,
    }
}

fn requirement(suite: &str) -> &'static str {
    match suite {
        "expr" => "at least one expression",
        "linearity" | "flow-domain" | "cocycle" | "brackets" => "a derivation",
        "derivative" => "a section with a derivation on its bundle",
        "flat-section" => "a section with a `derivation` key",
        "ode" => "an [ode] table",
        "dual" => "[duals] declarations",
        "tensor" => "[tensors] declarations",
        "trivialize" => "a [cylinder] or [cocycle] table",
        "algebroid" => "an [algebroid] table",
        _ => "nothing",
    }
}

/// Expands `all` and checks applicability; result is in registry order.
pub fn resolve_suites(scene: &Scene, requested: &[String]) -> Result<Vec<&'static str>> {
    let all = requested.iter().any(|s| s == "all");
    for s in requested {
        if s == "all" {
            continue;
        }
        if !SUITES.contains(&s.as_str()) {
            return Err(Error::Invalid(format!("unknown suite `{s}` (known: all, {})", SUITES.join(", "))));
        }
        if !applicable(scene, s) {
            return Err(Error::Invalid(format!("suite `{s}` is not applicable: it needs {}", requirement(s))));
        }
    }
    let chosen: Vec<&'static str> = SUITES
        .iter()
        .copied()
        .filter(|s| if all { applicable(scene, s) } else { requested.iter().any(|r| r == s) })
        .collect();
    if chosen.is_empty() {
        return Err(Error::Invalid("no applicable suites".into()));
    }
    Ok(chosen)
}

pub fn run_verify(scene: &Scene, opts: &VerifyOptions) -> Result<VerifyReport> {
    opts.cfg.validate()?;
    if opts.samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let start = Instant::now();
    let suites = resolve_suites(scene, &opts.suites)?;
    let ctx = Ctx::new(scene, opts);
    let mut records = Vec::new();
    for suite in &suites {
        let idx = SUITES.iter().position(|s| s == suite).expect("registered suite") as u64;
        let mut out = match *suite {
            "expr" => suite_expr(&ctx, idx)?,
            "linearity" => suite_linearity(&ctx, idx)?,
            "flow-domain" => suite_flow_domain(&ctx, idx)?,
            "cocycle" => suite_cocycle(&ctx, idx)?,
            "brackets" => suite_brackets(&ctx, idx)?,
            "derivative" => suite_derivative(&ctx, idx)?,
            "flat-section" => suite_flat_section(&ctx, idx)?,
            "ode" => suite_ode(&ctx, idx)?,
            "dual" => suite_dual(&ctx, idx)?,
            "tensor" => suite_tensor(&ctx, idx)?,
            "trivialize" => suite_trivialize(&ctx, idx)?,
            "algebroid" => suite_algebroid(&ctx, idx)?,
            _ => unreachable!(),
        };
        records.append(&mut out);
    }
    Ok(VerifyReport {
        scene: scene.name.clone(),
        seed: opts.seed,
        samples: opts.samples,
        suites: suites.iter().map(|s| s.to_string()).collect(),
        records,
        runtime: start.elapsed(),
    })
}

struct Ctx<'a> {
    scene: &'a Scene,
    n: usize,
    seed: u64,
    tol: Option<f64>,
    cfg: IntegratorConfig,
    /// Tighter settings for finite-difference quotients of integrated maps.
    fd_cfg: IntegratorConfig,
}

impl<'a> Ctx<'a> {
    fn new(scene: &'a Scene, opts: &VerifyOptions) -> Ctx<'a> {
        let mut fd_cfg = opts.cfg.clone();
        fd_cfg.abs_tol = opts.cfg.abs_tol.min(1e-13);
        fd_cfg.rel_tol = opts.cfg.rel_tol.min(1e-12);
        Ctx { scene, n: opts.samples, seed: opts.seed, tol: opts.tol, cfg: opts.cfg.clone(), fd_cfg }
    }

    /// Residual tolerance: command line, then scene override, then default.
    fn tol(&self, suite: &str, default: f64) -> f64 {
        self.tol.or_else(|| self.scene.verify.tolerance.get(suite).copied()).unwrap_or(default)
    }

    fn sampler(&self, suite: u64, sub: u64, dim: usize) -> Sampler {
        Sampler::new(dim, self.seed, suite * 1000 + sub)
    }

    fn rng(&self, suite: u64, sub: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_5eed);
        r.set_stream(suite * 1000 + sub);
        r
    }

    fn time(&self) -> f64 {
        self.scene.verify.time
    }

    /// `n` samples `(x, t)` with `x` in the shrunk base and `t ∈ [−span, span]`.
    fn point_times(&self, suite: u64, sub: u64, span: f64) -> Vec<(Vec<f64>, f64)> {
        let base = &self.scene.base;
        let m = base.dim();
        let inner = base.shrink(MARGIN);
        let mut s = self.sampler(suite, sub, m + 1);
        (0..self.n)
            .map(|_| {
                let u = s.next_unit();
                (inner.from_unit(&u[..m]), (2.0 * u[m] - 1.0) * span)
            })
            .collect()
    }

    fn points(&self, domain: &BoxDomain, suite: u64, sub: u64) -> Vec<Vec<f64>> {
        self.sampler(suite, sub, domain.dim()).points(domain, self.n)
    }
}

fn random_vec(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn with_time(x: &[f64], t: &[f64]) -> Vec<f64> {
    let mut p = x.to_vec();
    p.extend_from_slice(t);
    p
}

fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    (a * Vector::from_column_slice(v)).iter().copied().collect()
}

fn flat(a: &Matrix) -> Vec<f64> {
    (0..a.nrows()).flat_map(|i| (0..a.ncols()).map(move |j| a[(i, j)])).collect()
}

fn merge_all(parts: Vec<Result<Worst>>) -> Result<Worst> {
    let mut w = Worst::new();
    for p in parts {
        w.merge(p?);
    }
    Ok(w)
}

/// Like [`merge_all`] for tasks producing several trackers.
fn merge_many<const N: usize>(parts: Vec<Result<[Worst; N]>>) -> Result<[Worst; N]> {
    let mut out: [Worst; N] = std::array::from_fn(|_| Worst::new());
    for p in parts {
        for (o, w) in out.iter_mut().zip(p?) {
            o.merge(w);
        }
    }
    Ok(out)
}

fn richardson(f: impl Fn(f64) -> Result<Vec<f64>>, h: f64) -> Result<Vec<f64>> {
    let coarse = f(h)?;
    let fine = f(h / 2.0)?;
    Ok(fine.iter().zip(&coarse).map(|(a, b)| (4.0 * a - b) / 3.0).collect())
}

// ---------------------------------------------------------------- expr

struct ExprSite {
    label: String,
    expr: ScalarExpr,
    domain: BoxDomain,
}

fn expression_sites(scene: &Scene) -> Vec<ExprSite> {
    let mut out = Vec::new();
    let base = &scene.base;
    let derived: Vec<&str> =
        scene.duals.iter().map(|d| d.name.as_str()).chain(scene.tensors.iter().map(|t| t.name.as_str())).collect();
    for (name, d) in &scene.derivations {
        if derived.contains(&name.as_str()) {
            continue;
        }
        for (i, e) in d.spec.symbol().components().iter().enumerate() {
            out.push(ExprSite { label: format!("{name}.symbol[{i}]"), expr: e.clone(), domain: base.clone() });
        }
        let k = d.spec.rank();
        for (n, e) in d.spec.matrix().entries().iter().enumerate() {
            out.push(ExprSite { label: format!("{name}.matrix[{}][{}]", n / k, n % k), expr: e.clone(), domain: base.clone() });
        }
    }
    for (name, s) in &scene.sections {
        for (i, e) in s.spec.components().iter().enumerate() {
            out.push(ExprSite { label: format!("{name}[{i}]"), expr: e.clone(), domain: base.clone() });
        }
    }
    if let Some(o) = &scene.ode {
        let d = o.spec.suspension();
        let n = o.spec.n();
        for (i, e) in d.matrix().entries().iter().enumerate() {
            out.push(ExprSite { label: format!("ode[{}][{}]", i / n, i % n), expr: e.clone(), domain: d.base().clone() });
        }
    }
    if let Some(c) = &scene.cylinder {
        let d = c.bundle.derivation();
        let k = d.rank();
        for (i, e) in d.matrix().entries().iter().enumerate() {
            out.push(ExprSite { label: format!("cylinder[{}][{}]", i / k, i % k), expr: e.clone(), domain: d.base().clone() });
        }
    }
    if let Some(c) = &scene.cocycle {
        let patches = c.bundle.patches();
        let k = c.bundle.rank();
        for (&(a, b), g) in c.bundle.transitions() {
            let Some(ov) = intersect(&patches[a], &patches[b]) else { continue };
            for (i, e) in g.entries().iter().enumerate() {
                out.push(ExprSite {
                    label: format!("g{}{}[{}][{}]", a + 1, b + 1, i / k, i % k),
                    expr: e.clone(),
                    domain: ov.clone(),
                });
            }
        }
    }
    if let Some(a) = &scene.algebroid {
        let r = a.spec.rank();
        for (n, e) in a.spec.structure().iter().enumerate() {
            if e.root().is_constant() {
                continue;
            }
            out.push(ExprSite {
                label: format!("C[{}][{}][{}]", n / (r * r) + 1, (n / r) % r + 1, n % r + 1),
                expr: e.clone(),
                domain: base.clone(),
            });
        }
        for i in 0..a.spec.dim() {
            for (n, e) in a.spec.connection(i).matrix().entries().iter().enumerate() {
                out.push(ExprSite { label: format!("A{}[{}][{}]", i + 1, n / r, n % r), expr: e.clone(), domain: base.clone() });
            }
        }
    }
    out
}

/// Richardson-extrapolated central differences of `e` at `x`.
pub fn fd_gradient(e: &ScalarExpr, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let d = |h: f64| -> Result<Vec<f64>> {
            let mut p = x.to_vec();
            p[i] = x[i] + h;
            let a = e.eval(&p, None)?;
            p[i] = x[i] - h;
            let b = e.eval(&p, None)?;
            Ok(vec![(a - b) / (2.0 * h)])
        };
        out.push(richardson(d, h)?[0]);
    }
    Ok(out)
}

fn suite_expr(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let sites = expression_sites(ctx.scene);
    let tol = ctx.tol("expr", FD_TOL);
    let per: Vec<Result<Worst>> = sites
        .par_iter()
        .enumerate()
        .map(|(si, site)| {
            let mut w = Worst::new();
            for x in ctx.points(&site.domain, idx, si as u64) {
                match (site.expr.eval_jet(&x, None), fd_gradient(&site.expr, &x, 1e-3)) {
                    (Ok(jet), Ok(fd)) => {
                        let r = jet.partials.iter().zip(&fd).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max);
                        w.add(&x, r, &jet.partials, &fd);
                    }
                    _ => w.add(&x, f64::INFINITY, &[], &[]),
                }
            }
            Ok(w)
        })
        .collect();
    let ad = merge_all(per)?.finish("expr", "ad-vs-fd", tol);
    let mut rt = Worst::new();
    for site in &sites {
        let printed = site.expr.to_string();
        let same = ScalarExpr::parse(&printed, site.expr.dim(), site.expr.is_time_dependent())
            .map(|p| p.root() == site.expr.root())
            .unwrap_or(false);
        rt.add(&[], if same { 0.0 } else { 1.0 }, &[], &[]);
        if !same {
            eprintln!("print round trip failed for {}: `{printed}`", site.label);
        }
    }
    Ok(vec![ad, rt.finish("expr", "print-roundtrip", 0.0)])
}

// ---------------------------------------------------------------- flows

/// `t / 2^j` for the first `j < 12` at which the flow from `x` stays inside.
fn complete_time(d: &DerivationSpec, x: &[f64], t: f64, cfg: &IntegratorConfig) -> Result<Option<f64>> {
    let mut t = t;
    for _ in 0..12 {
        if integrate_linear(d, x, t, cfg)?.status == FlowStatus::Complete {
            return Ok(Some(t));
        }
        t *= 0.5;
    }
    Ok(None)
}

fn suite_linearity(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let tol = ctx.tol("linearity", FD_TOL);
    let mut out = Vec::new();
    for (sub, (name, nd)) in ctx.scene.derivations.iter().enumerate() {
        let d = &nd.spec;
        let k = d.rank();
        let mut rng = ctx.rng(idx, sub as u64);
        let inputs: Vec<_> = ctx
            .point_times(idx, sub as u64, ctx.time())
            .into_iter()
            .map(|(x, t)| {
                let v = random_vec(&mut rng, k);
                let w = random_vec(&mut rng, k);
                let ab = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                (x, t, v, w, ab)
            })
            .collect();
        let per: Vec<Result<[Worst; 2]>> = inputs
            .par_iter()
            .map(|(x, t, v, w, (a, b))| {
                let mut ws = [Worst::new(), Worst::new()];
                let Some(t) = complete_time(d, x, *t, &ctx.cfg)? else { return Ok(ws) };
                let p = with_time(x, &[t]);
                let f = integrate_linear(d, x, t, &ctx.cfg)?.fundamental;
                let fv = mat_vec(&f, v);
                let pv = flow_pointwise(d, x, v, t, &ctx.cfg)?.fiber;
                let norm = 1.0 + v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
                ws[0].add(&p, crate::linalg::vec_max_abs_diff(&fv, &pv) / norm, &fv, &pv);
                let pw = flow_pointwise(d, x, w, t, &ctx.cfg)?.fiber;
                let combo: Vec<f64> = v.iter().zip(w).map(|(p, q)| a * p + b * q).collect();
                let pc = flow_pointwise(d, x, &combo, t, &ctx.cfg)?.fiber;
                let lin: Vec<f64> = pv.iter().zip(&pw).map(|(p, q)| a * p + b * q).collect();
                ws[1].compare(&p, &lin, &pc);
                Ok(ws)
            })
            .collect();
        let [fund, lin] = merge_many(per)?;
        out.push(fund.finish("linearity", &format!("{name}:pointwise-vs-fundamental"), tol));
        out.push(lin.finish("linearity", &format!("{name}:fiber-linearity"), tol));
    }
    Ok(out)
}

fn suite_flow_domain(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let tol = ctx.tol("flow-domain", FLOW_TOL);
    let zero_tol = ctx.tol("flow-domain", 1e-10);
    let mut out = Vec::new();
    for (sub, (name, nd)) in ctx.scene.derivations.iter().enumerate() {
        let d = &nd.spec;
        let k = d.rank();
        let mut rng = ctx.rng(idx, sub as u64);
        // a wider time range so that some trajectories leave the box
        let inputs: Vec<_> = ctx
            .point_times(idx, sub as u64, 4.0 * ctx.time())
            .into_iter()
            .map(|(x, t)| (x, t, random_vec(&mut rng, k)))
            .collect();
        let per: Vec<Result<[Worst; 3]>> = inputs
            .par_iter()
            .map(|(x, t, v)| {
                let mut ws = [Worst::new(), Worst::new(), Worst::new()];
                let p = with_time(x, &[*t]);
                let base = integrate_base(d.symbol(), d.base(), x, *t, &ctx.cfg)?;
                let pf = flow_pointwise(d, x, v, *t, &ctx.cfg)?;
                let lf = integrate_linear(d, x, *t, &ctx.cfg)?;
                let end = |status: FlowStatus, escape: Option<f64>| match status {
                    FlowStatus::Complete => *t,
                    FlowStatus::Escaped => escape.unwrap_or(f64::NAN),
                };
                let tb = end(base.status, base.escape_time);
                for (w, (status, escape)) in ws.iter_mut().zip([(pf.status, pf.escape_time), (lf.status, lf.escape_time)]) {
                    let tf = end(status, escape);
                    let r = if status != base.status { f64::INFINITY } else { (tb - tf).abs() };
                    w.add(&p, r, &[tb], &[tf]);
                }
                let z = flow_pointwise(d, x, &vec![0.0; k], *t, &ctx.cfg)?;
                ws[2].compare(&p, &vec![0.0; k], &z.fiber);
                Ok(ws)
            })
            .collect();
        let [pw, lin, zero] = merge_many(per)?;
        out.push(pw.finish("flow-domain", &format!("{name}:pointwise-domain"), tol));
        out.push(lin.finish("flow-domain", &format!("{name}:linear-domain"), tol));
        out.push(zero.finish("flow-domain", &format!("{name}:zero-section"), zero_tol));
    }
    Ok(out)
}

fn suite_cocycle(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let tol = ctx.tol("cocycle", FLOW_TOL);
    let mut out = Vec::new();
    for (sub, (name, nd)) in ctx.scene.derivations.iter().enumerate() {
        let d = &nd.spec;
        let k = d.rank();
        let m = d.dim();
        let inner = d.base().shrink(MARGIN);
        let span = ctx.time();
        let mut s = ctx.sampler(idx, sub as u64, m + 2);
        let inputs: Vec<(Vec<f64>, f64, f64)> = (0..ctx.n)
            .map(|_| {
                let u = s.next_unit();
                (inner.from_unit(&u[..m]), (2.0 * u[m] - 1.0) * span, (2.0 * u[m + 1] - 1.0) * span)
            })
            .collect();
        let per: Vec<Result<[Worst; 2]>> = inputs
            .par_iter()
            .map(|(x, t, s)| {
                let mut ws = [Worst::new(), Worst::new()];
                // shrink (t, s) together until every flow involved completes
                let (t0, s0) = (*t, *s);
                let (mut t, mut s) = (t0, s0);
                for _ in 0..12 {
                    let fs = integrate_linear(d, x, s, &ctx.cfg)?;
                    let fts = integrate_linear(d, x, t + s, &ctx.cfg)?;
                    if fs.status == FlowStatus::Complete && fts.status == FlowStatus::Complete {
                        let ft = integrate_linear(d, &fs.base_point, t, &ctx.cfg)?;
                        if ft.status == FlowStatus::Complete {
                            let mut expected = fts.base_point.clone();
                            expected.extend(flat(&fts.fundamental));
                            let mut observed = ft.base_point.clone();
                            observed.extend(flat(&(&ft.fundamental * &fs.fundamental)));
                            let r =
                                crate::linalg::vec_max_abs_diff(&expected, &observed) / (1.0 + max_abs(&fts.fundamental));
                            ws[0].add(&with_time(x, &[t, s]), r, &expected, &observed);
                            break;
                        }
                    }
                    t *= 0.5;
                    s *= 0.5;
                }
                if let Some(t) = complete_time(d, x, t0, &ctx.cfg)? {
                    let ft = integrate_linear(d, x, t, &ctx.cfg)?;
                    let back = integrate_linear(d, &ft.base_point, -t, &ctx.cfg)?;
                    if back.status == FlowStatus::Complete {
                        let prod = &back.fundamental * &ft.fundamental;
                        ws[1].compare(&with_time(x, &[t]), &flat(&Matrix::identity(k, k)), &flat(&prod));
                    }
                }
                Ok(ws)
            })
            .collect();
        let [comp, inv] = merge_many(per)?;
        out.push(comp.finish("cocycle", &format!("{name}:composition"), tol));
        out.push(inv.finish("cocycle", &format!("{name}:inverse"), tol));
    }
    Ok(out)
}

// ---------------------------------------------------------------- brackets

fn total_points(ctx: &Ctx, idx: u64, sub: u64, k: usize) -> Vec<Vec<f64>> {
    let base = &ctx.scene.base;
    let m = base.dim();
    let inner = base.shrink(MARGIN);
    let mut s = ctx.sampler(idx, sub, m + k);
    (0..ctx.n)
        .map(|_| {
            let u = s.next_unit();
            let mut p = inner.from_unit(&u[..m]);
            p.extend(u[m..].iter().map(|c| 2.0 * c - 1.0));
            p
        })
        .collect()
}

fn suite_brackets(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let tol = ctx.tol("brackets", FD_TOL);
    let scene = ctx.scene;
    let m = scene.base.dim();
    let mut out = Vec::new();
    let mut sub = 0u64;
    for (bundle, info) in &scene.bundles {
        let ders: Vec<(&String, &DerivationSpec)> =
            scene.derivations.iter().filter(|(_, d)| &d.bundle == bundle).map(|(n, d)| (n, &d.spec)).collect();
        let secs: Vec<(&String, &SectionSpec)> =
            scene.sections.iter().filter(|(_, s)| &s.bundle == bundle).map(|(n, s)| (n, &s.spec)).collect();
        let k = info.rank;
        let mut pairs = Vec::new();
        for i in 0..ders.len() {
            for j in i + 1..ders.len() {
                pairs.push((ders[i], ders[j]));
            }
        }
        if ders.len() == 1 {
            pairs.push((ders[0], ders[0]));
        }
        for ((n1, d1), (n2, d2)) in pairs {
            let pts = total_points(ctx, idx, sub, k);
            sub += 1;
            let c = commutator(d1, d2)?;
            let lifted = point_hat(&c);
            let per: Vec<Result<Worst>> = pts
                .par_iter()
                .map(|p| {
                    let mut w = Worst::new();
                    let lhs = bracket_vf(&d1.hat(), &d2.hat(), p)?;
                    let rhs = crate::geometry::TotalField::eval(&lifted, p)?;
                    w.compare(p, &rhs, &lhs);
                    Ok(w)
                })
                .collect();
            out.push(merge_all(per)?.finish("brackets", &format!("[{n1},{n2}]:hat-commutator"), tol));
        }
        for (dn, d) in &ders {
            for (sn, e) in &secs {
                let pts = total_points(ctx, idx, sub, k);
                sub += 1;
                let per: Vec<Result<Worst>> = pts
                    .par_iter()
                    .map(|p| {
                        let mut w = Worst::new();
                        let lhs = bracket_vf(&d.hat(), &core_lift(e), p)?;
                        let rhs = vertical(m, &apply_derivation(d, e, &p[..m])?);
                        w.compare(p, &rhs, &lhs);
                        Ok(w)
                    })
                    .collect();
                out.push(merge_all(per)?.finish("brackets", &format!("[{dn},{sn}]:hat-core"), tol));
            }
        }
        for i in 0..secs.len() {
            for j in i..secs.len() {
                let ((n1, e1), (n2, e2)) = (secs[i], secs[j]);
                let pts = total_points(ctx, idx, sub, k);
                sub += 1;
                let per: Vec<Result<Worst>> = pts
                    .par_iter()
                    .map(|p| {
                        let mut w = Worst::new();
                        let lhs = bracket_vf(&core_lift(e1), &core_lift(e2), p)?;
                        w.compare(p, &vec![0.0; lhs.len()], &lhs);
                        Ok(w)
                    })
                    .collect();
                out.push(merge_all(per)?.finish("brackets", &format!("[{n1},{n2}]:core-core"), tol));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- sections

fn pullback_derivative(d: &DerivationSpec, e: &SectionSpec, x: &[f64], h: f64, cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let plus = pullback_section(d, e, h, x, cfg)?;
    let minus = pullback_section(d, e, -h, x, cfg)?;
    Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

/// `F_t(x)⁻¹ (De)(φ_t x)`.
fn pullback_of_derivative(d: &DerivationSpec, e: &SectionSpec, t: f64, x: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let f = integrate_linear(d, x, t, cfg)?.complete(t)?;
    let de = apply_derivation(d, e, &f.base_point)?;
    let inv = invert(&f.fundamental).ok_or(Error::Singular)?.inverse;
    Ok(mat_vec(&inv, &de))
}

/// `D(Φ_t^⋆e)(x)` by a directional difference of the pullback along `X(x)`.
fn derivative_of_pullback(d: &DerivationSpec, e: &SectionSpec, t: f64, x: &[f64], cfg: &IntegratorConfig) -> Result<Vec<f64>> {
    let xv = d.symbol().eval(x)?;
    let at = |s: f64| -> Result<Vec<f64>> {
        let y: Vec<f64> = x.iter().zip(&xv).map(|(a, b)| a + s * b).collect();
        pullback_section(d, e, t, &y, cfg)
    };
    let dir = richardson(
        |h| {
            let p = at(h)?;
            let q = at(-h)?;
            Ok(p.iter().zip(&q).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        },
        1e-3,
    )?;
    let here = at(0.0)?;
    let a = d.matrix().eval(x)?;
    Ok(dir.iter().zip(mat_vec(&a, &here)).map(|(p, q)| p + q).collect())
}

fn suite_derivative(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let tol = ctx.tol("derivative", FD_TOL);
    let scene = ctx.scene;
    let mut out = Vec::new();
    let mut sub = 0u64;
    for (sn, sec) in &scene.sections {
        for dn in scene.derivations_for(sec) {
            let d = &scene.derivations[dn].spec;
            let e = &sec.spec;
            let inputs = ctx.point_times(idx, sub, ctx.time());
            sub += 1;
            let per: Vec<Result<[Worst; 3]>> = inputs
                .par_iter()
                .map(|(x, t)| {
                    let mut ws = [Worst::new(), Worst::new(), Worst::new()];
                    let de = apply_derivation(d, e, x)?;
                    let cd = richardson(|h| pullback_derivative(d, e, x, h, &ctx.fd_cfg), 1e-4)?;
                    ws[0].compare(x, &de, &cd);
                    // observed order of the plain central difference
                    let h0 = 0.05;
                    let e1 = crate::linalg::vec_max_abs_diff(&de, &pullback_derivative(d, e, x, h0, &ctx.fd_cfg)?);
                    let e2 = crate::linalg::vec_max_abs_diff(&de, &pullback_derivative(d, e, x, h0 / 2.0, &ctx.fd_cfg)?);
                    if e1 > 1e-9 {
                        let order = (e1 / e2).log2();
                        ws[1].add(x, (order - 2.0).abs(), &[2.0], &[order]);
                    }
                    // halve t until the flow, and its neighbours, stay inside
                    let mut t = *t;
                    for _ in 0..12 {
                        if integrate_linear(d, x, t, &ctx.cfg)?.status == FlowStatus::Complete {
                            let lhs = pullback_of_derivative(d, e, t, x, &ctx.fd_cfg);
                            let rhs = derivative_of_pullback(d, e, t, x, &ctx.fd_cfg);
                            if let (Ok(l), Ok(r)) = (lhs, rhs) {
                                ws[2].compare(&with_time(x, &[t]), &l, &r);
                                break;
                            }
                        }
                        t *= 0.5;
                    }
                    Ok(ws)
                })
                .collect();
            let [cd, order, two] = merge_many(per)?;
            out.push(cd.finish("derivative", &format!("{dn}({sn}):central-difference"), tol));
            out.push(order.finish("derivative", &format!("{dn}({sn}):fd-order"), 0.25));
            out.push(two.finish("derivative", &format!("{dn}({sn}):pullback-commutes"), tol));
        }
    }
    Ok(out)
}

fn suite_flat_section(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let tol = ctx.tol("flat-section", FLOW_TOL);
    let scene = ctx.scene;
    let mut out = Vec::new();
    for (sub, (sn, sec)) in scene.sections.iter().filter(|(_, s)| s.derivation.is_some()).enumerate() {
        let dn = sec.derivation.as_deref().expect("filtered");
        let d = &scene.derivations[dn].spec;
        let e = &sec.spec;
        let inputs = ctx.point_times(idx, sub as u64, ctx.time());
        let per: Vec<Result<[Worst; 2]>> = inputs
            .par_iter()
            .map(|(x, t)| {
                let mut ws = [Worst::new(), Worst::new()];
                let de = apply_derivation(d, e, x)?;
                ws[0].compare(x, &vec![0.0; de.len()], &de);
                if let Some(t) = complete_time(d, x, *t, &ctx.cfg)? {
                    let pulled = pullback_section(d, e, t, x, &ctx.cfg)?;
                    ws[1].compare(&with_time(x, &[t]), &e.eval(x)?, &pulled);
                }
                Ok(ws)
            })
            .collect();
        let [de, inv] = merge_many(per)?;
        let (de_max, inv_max) = (de.max_error(), inv.max_error());
        let label = |c: &str| format!("{sn}:{c}");
        let (de_rec, inv_rec) = match sec.flat {
            Some(false) => (
                de.finish("flat-section", &label("De-nonzero"), tol).expect_failure(),
                inv.finish("flat-section", &label("pullback-moves"), tol).expect_failure(),
            ),
            _ => (de.finish("flat-section", &label("De-zero"), tol), inv.finish("flat-section", &label("pullback-invariance"), tol)),
        };
        let agree = (de_max <= tol) == (inv_max <= tol);
        let mut eq = Worst::new();
        eq.add(&[], if agree { 0.0 } else { 1.0 }, &[de_max], &[inv_max]);
        out.push(de_rec);
        out.push(inv_rec);
        out.push(eq.finish("flat-section", &label("equivalence"), 0.0));
    }
    Ok(out)
}

// ---------------------------------------------------------------- ode

fn suite_ode(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let o = ctx.scene.ode.as_ref().expect("applicable");
    let a = &o.spec;
    let n = a.n();
    let t0 = o.t0;
    let (lo, hi) = a.interval();
    let width = hi - lo;
    let (lo, hi) = (lo + MARGIN * width, hi - MARGIN * width);
    let tol = ctx.tol("ode", FLOW_TOL);
    let mut s = ctx.sampler(idx, 0, 3);
    let mut rng = ctx.rng(idx, 0);
    let inputs: Vec<_> = (0..ctx.n)
        .map(|_| {
            let u = s.next_unit();
            let ts: Vec<f64> = u.iter().map(|c| lo + c * (hi - lo)).collect();
            let v = random_vec(&mut rng, n);
            let w = random_vec(&mut rng, n);
            (ts, v, w, (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        })
        .collect();
    let constant = a.is_constant();
    // commuting family: A(t) A(s) = A(s) A(t) at sample pairs
    let commuting = !constant && {
        let mut ok = true;
        for (ts, _, _, _) in inputs.iter().take(8) {
            let (x, y) = (a.eval(ts[0])?, a.eval(ts[1])?);
            ok &= max_abs(&(&x * &y - &y * &x)) <= 1e-12 * (1.0 + max_abs(&x) * max_abs(&y));
        }
        ok
    };
    let mut tight = ctx.cfg.clone();
    tight.abs_tol = ctx.cfg.abs_tol * 1e-2;
    tight.rel_tol = ctx.cfg.rel_tol * 1e-2;
    let probe_tol = 10.0 * ctx.cfg.abs_tol.max(ctx.cfg.rel_tol);
    let per: Vec<Result<[Worst; 8]>> = inputs
        .par_iter()
        .map(|(ts, v, w, (al, be))| {
            let mut ws: [Worst; 8] = std::array::from_fn(|_| Worst::new());
            let (t, t1, t2) = (ts[0], ts[1], ts[2]);
            let sol = solve_nonautonomous(a, t0, v, t, &ctx.cfg)?;
            let p = propagator(a, t0, t, &ctx.cfg)?;
            ws[0].compare(&[t], &mat_vec(&p, v), &sol);
            let combo: Vec<f64> = v.iter().zip(w).map(|(x, y)| al * x + be * y).collect();
            let sw = solve_nonautonomous(a, t0, w, t, &ctx.cfg)?;
            let sc = solve_nonautonomous(a, t0, &combo, t, &ctx.cfg)?;
            let lin: Vec<f64> = sol.iter().zip(&sw).map(|(x, y)| al * x + be * y).collect();
            ws[1].compare(&[t], &lin, &sc);
            let p10 = propagator(a, t0, t1, &ctx.cfg)?;
            let p21 = propagator(a, t1, t2, &ctx.cfg)?;
            let p20 = propagator(a, t0, t2, &ctx.cfg)?;
            ws[2].compare(&[t1, t2], &flat(&p20), &flat(&(&p21 * &p10)));
            let back = propagator(a, t, t0, &ctx.cfg)?;
            ws[3].compare(&[t], &flat(&Matrix::identity(n, n)), &flat(&(&back * &p)));
            let trace = |s: f64| -> Result<f64> { Ok(a.eval(s)?.trace()) };
            let expected = quadrature(&trace, t0, t, 1e-13)?.exp();
            let det = p.determinant();
            ws[4].add(&[t], (det - expected).abs() / expected.abs().max(f64::MIN_POSITIVE), &[expected], &[det]);
            if constant {
                let reference = mat_vec(&expm(&(a.eval(t0)? * (t - t0)))?, v);
                let scale = reference.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
                ws[5].add(&[t], crate::linalg::vec_max_abs_diff(&reference, &sol) / scale, &reference, &sol);
            }
            if commuting {
                let mut integral = Matrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let entry = |s: f64| -> Result<f64> { Ok(a.eval(s)?[(i, j)]) };
                        integral[(i, j)] = quadrature(&entry, t0, t, 1e-13)?;
                    }
                }
                let reference = mat_vec(&expm(&integral)?, v);
                ws[6].compare(&[t], &reference, &sol);
            }
            let fine = solve_nonautonomous(a, t0, v, t, &tight)?;
            let norm = 1.0 + v.iter().fold(0.0f64, |m, c| m.max(c.abs()));
            ws[7].add(&[t], crate::linalg::vec_max_abs_diff(&fine, &sol) / norm, &fine, &sol);
            Ok(ws)
        })
        .collect();
    let [sp, lin, comp, inv, liou, cst, comm, probe] = merge_many(per)?;
    let mut out = vec![
        sp.finish("ode", "solve-vs-propagator", tol),
        lin.finish("ode", "linearity", ctx.tol("ode", 1e-8)),
        comp.finish("ode", "propagator-composition", tol),
        inv.finish("ode", "propagator-inverse", tol),
        liou.finish("ode", "liouville", ctx.tol("ode", FD_TOL)),
    ];
    if constant {
        out.push(cst.finish("ode", "expm-closed-form", ctx.tol("ode", 1e-8)));
    }
    if commuting {
        out.push(comm.finish("ode", "commuting-closed-form", tol));
    }
    out.push(probe.finish("ode", "tolerance-probe", ctx.tol("ode", probe_tol)));
    Ok(out)
}

// ---------------------------------------------------------------- dual / tensor

fn suite_dual(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let scene = ctx.scene;
    let mut out = Vec::new();
    for (sub, decl) in scene.duals.iter().enumerate() {
        let orig = &scene.derivations[&decl.of];
        let d = &orig.spec;
        let dd = &scene.derivations[&decl.name].spec;
        let k = d.rank();
        let mut rng = ctx.rng(idx, sub as u64);
        let inputs: Vec<_> = ctx
            .point_times(idx, sub as u64, ctx.time())
            .into_iter()
            .map(|(x, t)| (x, t, random_vec(&mut rng, k), random_vec(&mut rng, k)))
            .collect();
        let per: Vec<Result<[Worst; 2]>> = inputs
            .par_iter()
            .map(|(x, t, eps, v)| {
                let mut ws = [Worst::new(), Worst::new()];
                let Some(t) = complete_time(d, x, *t, &ctx.cfg)? else { return Ok(ws) };
                let p = with_time(x, &[t]);
                let f = integrate_linear(d, x, t, &ctx.cfg)?.fundamental;
                let g = dual_flow(d, x, t, &ctx.cfg)?;
                let lhs = pairing(&mat_vec(&g, eps), &mat_vec(&f, v));
                let rhs = pairing(eps, v);
                ws[0].add(&p, (lhs - rhs).abs(), &[rhs], &[lhs]);
                let gi = integrate_linear(dd, x, t, &ctx.cfg)?.fundamental;
                ws[1].compare(&p, &flat(&g), &flat(&gi));
                Ok(ws)
            })
            .collect();
        let [pair, two] = merge_many(per)?;
        out.push(pair.finish("dual", &format!("{}:pairing", decl.name), ctx.tol("dual", 1e-9)));
        out.push(two.finish("dual", &format!("{}:two-route", decl.name), ctx.tol("dual", FLOW_TOL)));

        // X⟨ε,e⟩ = ⟨D*ε, e⟩ + ⟨ε, De⟩ for declared sections of E* and E
        let dual_bundle = &scene.derivations[&decl.name].bundle;
        let eps_secs: Vec<_> = scene.sections.iter().filter(|(_, s)| &s.bundle == dual_bundle).collect();
        let e_secs: Vec<_> = scene.sections.iter().filter(|(_, s)| s.bundle == orig.bundle).collect();
        let mut leib = Worst::new();
        let pts = ctx.points(&scene.base, idx, 100 + sub as u64);
        for (_, eps) in &eps_secs {
            for (_, e) in &e_secs {
                for x in &pts {
                    let xv = d.symbol().eval(x)?;
                    let (ev, je) = (e.spec.eval(x)?, e.spec.jacobian(x)?);
                    let (pv, jp) = (eps.spec.eval(x)?, eps.spec.jacobian(x)?);
                    let dx = Vector::from_vec(xv);
                    let lhs = pairing(&mat_vec(&jp, dx.as_slice()), &ev) + pairing(&pv, &mat_vec(&je, dx.as_slice()));
                    let rhs = pairing(&apply_derivation(dd, &eps.spec, x)?, &ev) + pairing(&pv, &apply_derivation(d, &e.spec, x)?);
                    leib.add(x, (lhs - rhs).abs(), &[lhs], &[rhs]);
                }
            }
        }
        if !eps_secs.is_empty() && !e_secs.is_empty() {
            out.push(leib.finish("dual", &format!("{}:pairing-leibniz", decl.name), ctx.tol("dual", 1e-9)));
        }
    }
    Ok(out)
}

fn suite_tensor(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let scene = ctx.scene;
    let mut out = Vec::new();
    for (sub, decl) in scene.tensors.iter().enumerate() {
        let le = &scene.derivations[&decl.left];
        let ri = &scene.derivations[&decl.right];
        let dt = &scene.derivations[&decl.name].spec;
        let (ke, kf) = (le.spec.rank(), ri.spec.rank());
        let mut rng = ctx.rng(idx, sub as u64);
        let inputs: Vec<_> = ctx
            .point_times(idx, sub as u64, ctx.time())
            .into_iter()
            .map(|(x, t)| (x, t, random_vec(&mut rng, ke), random_vec(&mut rng, kf)))
            .collect();
        let per: Vec<Result<[Worst; 2]>> = inputs
            .par_iter()
            .map(|(x, t, v, w)| {
                let mut ws = [Worst::new(), Worst::new()];
                let Some(t) = complete_time(dt, x, *t, &ctx.cfg)? else { return Ok(ws) };
                let p = with_time(x, &[t]);
                let fi = integrate_linear(dt, x, t, &ctx.cfg)?.fundamental;
                let fe = integrate_linear(&le.spec, x, t, &ctx.cfg)?.fundamental;
                let ff = integrate_linear(&ri.spec, x, t, &ctx.cfg)?.fundamental;
                let lhs = mat_vec(&fi, &kron_vec(v, w));
                let rhs = kron_vec(&mat_vec(&fe, v), &mat_vec(&ff, w));
                ws[0].compare(&p, &rhs, &lhs);
                let kr = tensor_flow(&le.spec, &ri.spec, x, t, &ctx.cfg)?;
                ws[1].compare(&p, &flat(&kr), &flat(&fi));
                Ok(ws)
            })
            .collect();
        let [fac, two] = merge_many(per)?;
        out.push(fac.finish("tensor", &format!("{}:kronecker-factorization", decl.name), ctx.tol("tensor", 1e-8)));
        out.push(two.finish("tensor", &format!("{}:two-route", decl.name), ctx.tol("tensor", FLOW_TOL)));

        let e_secs: Vec<_> = scene.sections.values().filter(|s| s.bundle == le.bundle).collect();
        let f_secs: Vec<_> = scene.sections.values().filter(|s| s.bundle == ri.bundle).collect();
        let mut leib = Worst::new();
        let pts = ctx.points(&scene.base, idx, 100 + sub as u64);
        for e in &e_secs {
            for f in &f_secs {
                let ef = e.spec.tensor(&f.spec)?;
                for x in &pts {
                    let lhs = apply_derivation(dt, &ef, x)?;
                    let (ev, fv) = (e.spec.eval(x)?, f.spec.eval(x)?);
                    let a = kron_vec(&apply_derivation(&le.spec, &e.spec, x)?, &fv);
                    let b = kron_vec(&ev, &apply_derivation(&ri.spec, &f.spec, x)?);
                    let rhs: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
                    leib.compare(x, &rhs, &lhs);
                }
            }
        }
        if !e_secs.is_empty() && !f_secs.is_empty() {
            out.push(leib.finish("tensor", &format!("{}:leibniz", decl.name), ctx.tol("tensor", 1e-9)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------- trivialize

fn suite_trivialize(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let scene = ctx.scene;
    let mut out = Vec::new();
    if let Some(c) = &scene.cylinder {
        let b = &c.bundle;
        let total = b.derivation().base();
        let pts = ctx.points(total, idx, 0);
        let k = b.rank();
        let ident = flat(&Matrix::identity(k, k));
        let per: Vec<Result<[Worst; 3]>> = pts
            .par_iter()
            .map(|p| {
                let mut ws = [Worst::new(), Worst::new(), Worst::new()];
                let (t, x) = (p[0], &p[1..]);
                let at_t0 = trivialize_cylinder(b, c.t0, c.t0, x, &ctx.cfg)?;
                ws[0].compare(&with_time(&[c.t0], x), &ident, &flat(&at_t0));
                let th = trivialize_cylinder(b, c.t0, t, x, &ctx.cfg)?;
                let inv = trivialize_cylinder_inverse(b, c.t0, t, x, &ctx.cfg)?;
                let r1 = max_abs_diff(&(&inv * &th), &Matrix::identity(k, k));
                let r2 = max_abs_diff(&(&th * &inv), &Matrix::identity(k, k));
                ws[1].add(p, r1.max(r2), &ident, &flat(&(&inv * &th)));
                let direct = mat_vec(&th, &c.section.eval(p)?);
                let mut q = vec![c.t0];
                q.extend_from_slice(x);
                let pulled = pullback_section(b.derivation(), &c.section, t - c.t0, &q, &ctx.cfg)?;
                ws[2].compare(p, &pulled, &direct);
                Ok(ws)
            })
            .collect();
        let [id, inv, pb] = merge_many(per)?;
        out.push(id.finish("trivialize", "cylinder:theta-t0-identity", 0.0));
        out.push(inv.finish("trivialize", "cylinder:theta-inverse", ctx.tol("trivialize", 1e-8)));
        out.push(pb.finish("trivialize", "cylinder:theta-pullback", ctx.tol("trivialize", FLOW_TOL)));
    }
    if let Some(c) = &scene.cocycle {
        let b = &c.bundle;
        let m = b.dim();
        let patches = b.patches();
        let covered = |y: &[f64]| patches.iter().any(|p| p.contains(y));
        let pts: Vec<Vec<f64>> = ctx.points(&c.target, idx, 1).into_iter().filter(|y| covered(y)).collect();

        let mut sum = Worst::new();
        for y in &pts {
            let rho = b.partition_of_unity(y)?;
            let s: f64 = rho.iter().map(|r| r.value).sum();
            sum.add(y, (s - 1.0).abs(), &[1.0], &[s]);
        }
        out.push(sum.finish("trivialize", "cocycle:partition-sum", 1e-12));

        let mut edge = Worst::new();
        for (n, y) in pts.iter().enumerate() {
            for (a, pa) in patches.iter().enumerate() {
                let i = n % m;
                let w = pa.upper()[i] - pa.lower()[i];
                let (face, inward) = if (n / m) % 2 == 0 { (pa.lower()[i], 1.0) } else { (pa.upper()[i], -1.0) };
                let mut z = y.clone();
                z[i] = face + inward * 1e-3 * w;
                // only faces inside the cover, where another patch takes over
                let mut beyond = z.clone();
                beyond[i] = face - inward * 1e-3 * w;
                if !pa.contains(&z) || !covered(&beyond) {
                    continue;
                }
                let rho = &b.partition_of_unity(&z)?[a];
                let r = rho.partials.iter().fold(rho.value.abs(), |acc, d| acc.max(d.abs()));
                let mut observed = vec![rho.value];
                observed.extend_from_slice(&rho.partials);
                edge.add(&z, r, &vec![0.0; m + 1], &observed);
            }
        }
        out.push(edge.finish("trivialize", "cocycle:partition-boundary", 1e-6));

        let conn = connection_from_cocycle(b);
        let mut two = Worst::new();
        let k = b.rank();
        let mut sub = 2u64;
        for a in 0..patches.len() {
            for bb in a + 1..patches.len() {
                let Some(ov) = intersect(&patches[a], &patches[bb]) else { continue };
                let centre = ov.center();
                for (n, x) in ctx.points(&ov, idx, sub).into_iter().enumerate() {
                    let axis = n % m;
                    let len = centre[axis] - x[axis];
                    let h_a = b.transition(a, bb, &x)?.0;
                    let (pa, ya, fa) = conn.transport_segment(a, &x, axis, len, &h_a, Some(a), &ctx.cfg)?;
                    let (pb, _, fb) = conn.transport_segment(bb, &x, axis, len, &Matrix::identity(k, k), Some(bb), &ctx.cfg)?;
                    if pa != a || pb != bb {
                        continue;
                    }
                    let g = b.transition(a, bb, &ya)?.0;
                    two.compare(&x, &flat(&(g * fb)), &flat(&fa));
                }
                sub += 1;
            }
        }
        out.push(two.finish("trivialize", "cocycle:transport-two-frames", ctx.tol("trivialize", FLOW_TOL)));

        let frame = global_frame(b, &c.basepoint, &c.target, c.grid, &ctx.cfg)?;
        let mut ov = Worst::new();
        ov.add(&frame.worst_overlap_point, frame.max_overlap_residual, &[0.0], &[frame.max_overlap_residual]);
        let mut rec = ov.finish("trivialize", "cocycle:overlap-compat", ctx.tol("trivialize", FD_TOL));
        rec.samples = frame.records.len();
        out.push(rec);
        let mut basepoint = Worst::new();
        let h = frame.base_values.iter().find(|(a, _)| *a == frame.basepoint_patch).map(|(_, h)| h.clone());
        let observed = h.map(|h| flat(&h)).unwrap_or_default();
        basepoint.compare(&c.basepoint, &flat(&Matrix::identity(k, k)), &observed);
        out.push(basepoint.finish("trivialize", "cocycle:basepoint-identity", 0.0));
    }
    Ok(out)
}

// ---------------------------------------------------------------- algebroid

fn suite_algebroid(ctx: &Ctx, idx: u64) -> Result<Vec<CheckRecord>> {
    let a = ctx.scene.algebroid.as_ref().expect("applicable");
    let s = &a.spec;
    let m = s.dim();
    let pts = ctx.points(s.base(), idx, 0);
    let structure_tol = ctx.tol("algebroid", 1e-9);
    let mut out = Vec::new();
    let fs = check_fiber_structure(s, &pts, structure_tol)?;
    let fl = check_flatness(s, &pts, structure_tol)?;
    let gate = fs.pass() && fl.pass();
    out.extend(fs.checks);
    out.extend(fl.checks);

    let per: Vec<Result<[Worst; 2]>> = pts
        .par_iter()
        .map(|x| {
            let mut ws = [Worst::new(), Worst::new()];
            for i in 0..m {
                let direct = flatness_residual(s, i, x)?;
                ws[0].compare(x, &direct, &flatness_via_tensor(s, i, x)?);
                ws[1].compare(x, &direct, &flatness_via_pullback(s, i, x, 1e-2, &ctx.fd_cfg)?);
            }
            Ok(ws)
        })
        .collect();
    let [tensor, pullback] = merge_many(per)?;
    out.push(tensor.finish("algebroid", "flatness-tensor-route", structure_tol));
    out.push(pullback.finish("algebroid", "flatness-pullback-route", ctx.tol("algebroid", FD_TOL)));

    let r = s.rank();
    let ident = flat(&Matrix::identity(r, r));
    let base = &a.basepoint;
    let per: Vec<Result<[Worst; 3]>> = pts
        .par_iter()
        .map(|y| {
            let mut ws = [Worst::new(), Worst::new(), Worst::new()];
            let psi = fiber_isomorphism(s, base, y, &ctx.cfg)?;
            let back = fiber_isomorphism_back(s, base, y, &ctx.cfg)?;
            ws[0].compare(y, &ident, &flat(&(&back * &psi)));
            // split the canonical path after its first segment
            let mut z = base.clone();
            z[0] = y[0];
            let composed = fiber_isomorphism(s, &z, y, &ctx.cfg)? * fiber_isomorphism(s, base, &z, &ctx.cfg)?;
            ws[1].compare(y, &flat(&psi), &flat(&composed));
            if gate {
                let (lhs, rhs) = bracket_preservation(s, base, y, &psi)?;
                ws[2].compare(y, &rhs, &lhs);
            }
            Ok(ws)
        })
        .collect();
    let [inv, comp, bracket] = merge_many(per)?;
    out.push(inv.finish("algebroid", "psi-inverse", ctx.tol("algebroid", FLOW_TOL)));
    out.push(comp.finish("algebroid", "psi-composition", ctx.tol("algebroid", FLOW_TOL)));
    let mut rec = bracket.finish("algebroid", "bracket-preservation", ctx.tol("algebroid", FD_TOL));
    if !gate {
        // certification refused: the preconditions above failed
        rec.pass = false;
        rec.max_error = f64::INFINITY;
    }
    out.push(rec);
    Ok(out)
}

/// Formats `v` with 17 significant digits, comma separated.
pub fn format_point(v: &[f64]) -> String {
    nums(v)
}

/// Formats one number with 17 significant digits.
pub fn format_number(v: f64) -> String {
    num(v)
}
