//! Scene files: TOML documents declaring bundles, derivations, sections and
//! the optional ODE, cylinder, cocycle and algebroid data used by the
//! commands and verification suites.
//!
//! Expressions are strings (plain numbers are accepted too). Frame, patch
//! and bracket indices are 1-based; array positions in error locations are
//! 0-based as in the document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::algebroid::AlgebroidSpec;
use crate::error::{Error, Result, SceneErrorKind};
use crate::expr::ScalarExpr;
use crate::geometry::{
    dual_derivation, tensor_derivation, BoxDomain, DerivationSpec, ExprMatrix, PointDerivation, SectionSpec, VectorFieldSpec,
};
use crate::odesolve::TimeMatrixSpec;
use crate::trivialize::{CocycleBundle, CylinderBundle};
use crate::verify::SUITES;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize, Clone, Debug)]
#[serde(untagged)]
enum RawExpr {
    Text(String),
    Int(i64),
    Float(f64),
}

impl RawExpr {
    fn text(&self) -> String {
        match self {
            RawExpr::Text(s) => s.clone(),
            RawExpr::Int(i) => i.to_string(),
            RawExpr::Float(f) => format!("{f:?}"),
        }
    }
}

type RawMatrix = Vec<Vec<RawExpr>>;

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawScene {
    schema_version: u32,
    name: Option<String>,
    description: Option<String>,
    base: RawBase,
    #[serde(default)]
    bundles: BTreeMap<String, RawBundle>,
    #[serde(default)]
    derivations: BTreeMap<String, RawDerivation>,
    #[serde(default)]
    duals: BTreeMap<String, RawDual>,
    #[serde(default)]
    tensors: BTreeMap<String, RawTensor>,
    #[serde(default)]
    sections: BTreeMap<String, RawSection>,
    ode: Option<RawOde>,
    cylinder: Option<RawCylinder>,
    cocycle: Option<RawCocycle>,
    algebroid: Option<RawAlgebroid>,
    verify: Option<RawVerify>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawBase {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    interval: Option<[f64; 2]>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawBundle {
    rank: usize,
    frame: Option<Vec<String>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawDerivation {
    bundle: String,
    symbol: Vec<RawExpr>,
    matrix: RawMatrix,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawDual {
    of: String,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawTensor {
    left: String,
    right: String,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawSection {
    bundle: String,
    components: Vec<RawExpr>,
    derivation: Option<String>,
    flat: Option<bool>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawOde {
    interval: Option<[f64; 2]>,
    matrix: RawMatrix,
    t0: Option<f64>,
    v0: Option<Vec<f64>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawCylinder {
    interval: Option<[f64; 2]>,
    rank: usize,
    lift: Option<RawMatrix>,
    t0: Option<f64>,
    section: Option<Vec<RawExpr>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawTransition {
    pair: [usize; 2],
    matrix: RawMatrix,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawCocycle {
    rank: usize,
    patches: Vec<RawBox>,
    #[serde(default)]
    transitions: Vec<RawTransition>,
    basepoint: Option<Vec<f64>>,
    target: Option<RawBox>,
    grid: Option<usize>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawBracket {
    i: usize,
    j: usize,
    l: usize,
    value: RawExpr,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawAlgebroid {
    rank: usize,
    #[serde(default)]
    bracket: Vec<RawBracket>,
    connections: Vec<RawMatrix>,
    basepoint: Option<Vec<f64>>,
}

#[derive(Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    suites: Option<Vec<String>>,
    samples: Option<usize>,
    seed: Option<u64>,
    time: Option<f64>,
    #[serde(default)]
    tolerance: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub rank: usize,
    pub frame: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedDerivation {
    pub bundle: String,
    pub spec: DerivationSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedSection {
    pub bundle: String,
    pub spec: SectionSpec,
    /// Derivation the flat-section suite tests this section against.
    pub derivation: Option<String>,
    /// Declared expectation: `Some(true)` for `De = 0`, `Some(false)` for a
    /// section known not to be flat.
    pub flat: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualDecl {
    pub name: String,
    pub of: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorDecl {
    pub name: String,
    pub left: String,
    pub right: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdeScene {
    pub spec: TimeMatrixSpec,
    pub t0: f64,
    pub v0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CylinderScene {
    pub bundle: CylinderBundle,
    pub t0: f64,
    /// Test section over `I × U` in coordinates `(t, x)`.
    pub section: SectionSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CocycleScene {
    pub bundle: CocycleBundle,
    pub basepoint: Vec<f64>,
    pub target: BoxDomain,
    pub grid: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlgebroidScene {
    pub spec: AlgebroidSpec,
    pub basepoint: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifySettings {
    pub suites: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    /// Flow times are sampled from `[−time, time]`.
    pub time: f64,
    /// Per-suite tolerance overrides.
    pub tolerance: BTreeMap<String, f64>,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { suites: vec!["all".into()], samples: 64, seed: 0, time: 0.5, tolerance: BTreeMap::new() }
    }
}

/// A fully validated scene.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub name: String,
    pub description: String,
    pub base: BoxDomain,
    pub interval: Option<(f64, f64)>,
    pub bundles: BTreeMap<String, Bundle>,
    /// Declared derivations together with the declared duals and tensors.
    pub derivations: BTreeMap<String, NamedDerivation>,
    pub duals: Vec<DualDecl>,
    pub tensors: Vec<TensorDecl>,
    pub sections: BTreeMap<String, NamedSection>,
    pub ode: Option<OdeScene>,
    pub cylinder: Option<CylinderScene>,
    pub cocycle: Option<CocycleScene>,
    pub algebroid: Option<AlgebroidScene>,
    pub verify: VerifySettings,
}

fn err(kind: SceneErrorKind, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scene { kind, location: location.into(), message: message.into() }
}

/// Re-labels a library error with a scene location.
fn at(location: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Scene { .. } => e,
        Error::Dimension(msg) => err(SceneErrorKind::Dimension, location, msg),
        Error::Parse(p) => err(SceneErrorKind::Expression, location, p.to_string()),
        other => err(SceneErrorKind::Invalid, location, other.to_string()),
    }
}

fn parse_expr(raw: &RawExpr, dim: usize, time: bool, loc: &str) -> Result<ScalarExpr> {
    ScalarExpr::parse(&raw.text(), dim, time).map_err(|e| err(SceneErrorKind::Expression, loc, e.to_string()))
}

fn parse_list(raw: &[RawExpr], dim: usize, time: bool, loc: &str) -> Result<Vec<ScalarExpr>> {
    raw.iter().enumerate().map(|(i, r)| parse_expr(r, dim, time, &format!("{loc}[{i}]"))).collect()
}

fn parse_matrix(raw: &RawMatrix, rows: usize, cols: usize, dim: usize, time: bool, loc: &str) -> Result<Vec<ScalarExpr>> {
    if raw.len() != rows {
        return Err(err(SceneErrorKind::Dimension, loc, format!("expected {rows} rows, found {}", raw.len())));
    }
    let mut out = Vec::with_capacity(rows * cols);
    for (i, row) in raw.iter().enumerate() {
        if row.len() != cols {
            return Err(err(
                SceneErrorKind::Dimension,
                format!("{loc}[{i}]"),
                format!("expected {cols} entries, found {}", row.len()),
            ));
        }
        out.extend(parse_list(row, dim, time, &format!("{loc}[{i}]"))?);
    }
    Ok(out)
}

fn make_box(lower: &[f64], upper: &[f64], dim: usize, loc: &str) -> Result<BoxDomain> {
    if lower.len() != dim || upper.len() != dim {
        return Err(err(
            SceneErrorKind::Dimension,
            loc,
            format!("box bounds have lengths {} and {}, base dimension is {dim}", lower.len(), upper.len()),
        ));
    }
    BoxDomain::new(lower.to_vec(), upper.to_vec()).map_err(at(loc))
}

fn interval(raw: Option<[f64; 2]>, fallback: Option<(f64, f64)>, loc: &str) -> Result<(f64, f64)> {
    let (a, b) = match raw {
        Some([a, b]) => (a, b),
        None => fallback.ok_or_else(|| err(SceneErrorKind::Syntax, loc, "missing key `interval` (and no base.interval)"))?,
    };
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(err(SceneErrorKind::Invalid, loc, format!("interval ({a}, {b}) is empty")));
    }
    Ok((a, b))
}

fn point(raw: Option<Vec<f64>>, fallback: Vec<f64>, dim: usize, loc: &str) -> Result<Vec<f64>> {
    let p = raw.unwrap_or(fallback);
    if p.len() != dim {
        return Err(err(SceneErrorKind::Dimension, loc, format!("point has length {}, expected {dim}", p.len())));
    }
    Ok(p)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, col)
}

/// Reads and validates a scene file.
pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scene(&text)
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let raw: RawScene = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("line {line}, column {col} (offset {})", span.start)
            }
            None => "document".to_string(),
        };
        err(SceneErrorKind::Syntax, location, e.message().trim().to_string())
    })?;
    build(raw)
}

fn build(raw: RawScene) -> Result<Scene> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(err(
            SceneErrorKind::Invalid,
            "schema_version",
            format!("unsupported schema version {} (expected {SCHEMA_VERSION})", raw.schema_version),
        ));
    }
    let m = raw.base.dim;
    if m == 0 {
        return Err(err(SceneErrorKind::Dimension, "base.dim", "base dimension must be positive"));
    }
    let base = make_box(&raw.base.lower, &raw.base.upper, m, "base")?;
    let base_interval = match raw.base.interval {
        Some(iv) => Some(interval(Some(iv), None, "base.interval")?),
        None => None,
    };

    let mut bundles = BTreeMap::new();
    for (name, b) in &raw.bundles {
        let loc = format!("bundles.{name}");
        if b.rank == 0 {
            return Err(err(SceneErrorKind::Dimension, format!("{loc}.rank"), "rank must be positive"));
        }
        let frame = match &b.frame {
            Some(f) if f.len() != b.rank => {
                return Err(err(
                    SceneErrorKind::Dimension,
                    format!("{loc}.frame"),
                    format!("{} frame names for rank {}", f.len(), b.rank),
                ))
            }
            Some(f) => f.clone(),
            None => (1..=b.rank).map(|i| format!("{name}{i}")).collect(),
        };
        bundles.insert(name.clone(), Bundle { rank: b.rank, frame });
    }

    let mut derivations: BTreeMap<String, NamedDerivation> = BTreeMap::new();
    for (name, d) in &raw.derivations {
        let loc = format!("derivations.{name}");
        let bundle = bundles
            .get(&d.bundle)
            .ok_or_else(|| err(SceneErrorKind::Resolution, format!("{loc}.bundle"), format!("unknown bundle `{}`", d.bundle)))?;
        let k = bundle.rank;
        if d.symbol.len() != m {
            return Err(err(
                SceneErrorKind::Dimension,
                format!("{loc}.symbol"),
                format!("symbol has {} components, base dimension is {m}", d.symbol.len()),
            ));
        }
        let symbol = VectorFieldSpec::new(parse_list(&d.symbol, m, false, &format!("{loc}.symbol"))?).map_err(at(&loc))?;
        let entries = parse_matrix(&d.matrix, k, k, m, false, &format!("{loc}.matrix"))?;
        let matrix = ExprMatrix::new(k, k, entries, m).map_err(at(&loc))?;
        let spec = DerivationSpec::new(base.clone(), symbol, matrix).map_err(at(&loc))?;
        derivations.insert(name.clone(), NamedDerivation { bundle: d.bundle.clone(), spec });
    }

    let mut duals = Vec::new();
    for (name, d) in &raw.duals {
        let loc = format!("duals.{name}");
        if derivations.contains_key(name) {
            return Err(err(SceneErrorKind::Invalid, loc, format!("name `{name}` is already a derivation")));
        }
        let of = derivations
            .get(&d.of)
            .ok_or_else(|| err(SceneErrorKind::Resolution, format!("{loc}.of"), format!("unknown derivation `{}`", d.of)))?;
        let bundle = format!("{}*", of.bundle);
        let rank = of.spec.rank();
        let spec = dual_derivation(&of.spec);
        bundles.entry(bundle.clone()).or_insert_with(|| Bundle { rank, frame: (1..=rank).map(|i| format!("{bundle}{i}")).collect() });
        derivations.insert(name.clone(), NamedDerivation { bundle, spec });
        duals.push(DualDecl { name: name.clone(), of: d.of.clone() });
    }

    let mut tensors = Vec::new();
    for (name, t) in &raw.tensors {
        let loc = format!("tensors.{name}");
        if derivations.contains_key(name) {
            return Err(err(SceneErrorKind::Invalid, loc, format!("name `{name}` is already a derivation")));
        }
        let find = |key: &str, n: &str| {
            derivations
                .get(n)
                .ok_or_else(|| err(SceneErrorKind::Resolution, format!("{loc}.{key}"), format!("unknown derivation `{n}`")))
        };
        let left = find("left", &t.left)?;
        let right = find("right", &t.right)?;
        let spec = tensor_derivation(&left.spec, &right.spec).map_err(at(&loc))?;
        let bundle = format!("{}⊗{}", left.bundle, right.bundle);
        let rank = spec.rank();
        bundles.entry(bundle.clone()).or_insert_with(|| Bundle { rank, frame: (1..=rank).map(|i| format!("{bundle}{i}")).collect() });
        derivations.insert(name.clone(), NamedDerivation { bundle, spec });
        tensors.push(TensorDecl { name: name.clone(), left: t.left.clone(), right: t.right.clone() });
    }

    let mut sections = BTreeMap::new();
    for (name, s) in &raw.sections {
        let loc = format!("sections.{name}");
        let bundle = bundles
            .get(&s.bundle)
            .ok_or_else(|| err(SceneErrorKind::Resolution, format!("{loc}.bundle"), format!("unknown bundle `{}`", s.bundle)))?;
        if s.components.len() != bundle.rank {
            return Err(err(
                SceneErrorKind::Dimension,
                format!("{loc}.components"),
                format!("{} components for bundle `{}` of rank {}", s.components.len(), s.bundle, bundle.rank),
            ));
        }
        let spec = SectionSpec::new(parse_list(&s.components, m, false, &format!("{loc}.components"))?, m).map_err(at(&loc))?;
        if let Some(d) = &s.derivation {
            let nd = derivations
                .get(d)
                .ok_or_else(|| err(SceneErrorKind::Resolution, format!("{loc}.derivation"), format!("unknown derivation `{d}`")))?;
            if nd.bundle != s.bundle {
                return Err(err(
                    SceneErrorKind::Dimension,
                    format!("{loc}.derivation"),
                    format!("derivation `{d}` acts on `{}`, not on `{}`", nd.bundle, s.bundle),
                ));
            }
        } else if s.flat.is_some() {
            return Err(err(SceneErrorKind::Syntax, format!("{loc}.flat"), "`flat` needs a `derivation` key"));
        }
        sections.insert(
            name.clone(),
            NamedSection { bundle: s.bundle.clone(), spec, derivation: s.derivation.clone(), flat: s.flat },
        );
    }

    let ode = match raw.ode {
        None => None,
        Some(o) => {
            let iv = interval(o.interval, base_interval, "ode.interval")?;
            let n = o.matrix.len();
            if n == 0 {
                return Err(err(SceneErrorKind::Dimension, "ode.matrix", "matrix is empty"));
            }
            let entries = parse_matrix(&o.matrix, n, n, 0, true, "ode.matrix")?;
            let spec = TimeMatrixSpec::new(iv, entries, n).map_err(at("ode"))?;
            let t0 = o.t0.unwrap_or(0.5 * (iv.0 + iv.1));
            if !(iv.0 < t0 && t0 < iv.1) {
                return Err(err(SceneErrorKind::Invalid, "ode.t0", format!("t0 = {t0} lies outside the interval")));
            }
            if let Some(v) = &o.v0 {
                if v.len() != n {
                    return Err(err(SceneErrorKind::Dimension, "ode.v0", format!("v0 has length {}, expected {n}", v.len())));
                }
            }
            Some(OdeScene { spec, t0, v0: o.v0 })
        }
    };

    let cylinder = match raw.cylinder {
        None => None,
        Some(c) => {
            let iv = interval(c.interval, base_interval, "cylinder.interval")?;
            if c.rank == 0 {
                return Err(err(SceneErrorKind::Dimension, "cylinder.rank", "rank must be positive"));
            }
            let lift = match &c.lift {
                None => None,
                Some(rows) => Some(parse_matrix(rows, c.rank, c.rank, m, true, "cylinder.lift")?),
            };
            let bundle = CylinderBundle::new(iv, base.clone(), c.rank, lift).map_err(at("cylinder"))?;
            let t0 = c.t0.unwrap_or(0.5 * (iv.0 + iv.1));
            if !(iv.0 < t0 && t0 < iv.1) {
                return Err(err(SceneErrorKind::Invalid, "cylinder.t0", format!("t0 = {t0} lies outside the interval")));
            }
            // test section in (t, x) coordinates, i.e. x1 = t
            let section = match &c.section {
                Some(raw) => {
                    if raw.len() != c.rank {
                        return Err(err(
                            SceneErrorKind::Dimension,
                            "cylinder.section",
                            format!("{} components for rank {}", raw.len(), c.rank),
                        ));
                    }
                    let comps = parse_list(raw, m, true, "cylinder.section")?.iter().map(ScalarExpr::suspend).collect();
                    SectionSpec::new(comps, m + 1).map_err(at("cylinder.section"))?
                }
                None => {
                    let comps: Vec<String> = (0..c.rank)
                        .map(|i| format!("cos({}*x1) + x{} / {}", i + 1, (i % m) + 2, i + 2))
                        .collect();
                    SectionSpec::parse(&comps, m + 1).map_err(at("cylinder.section"))?
                }
            };
            Some(CylinderScene { bundle, t0, section })
        }
    };

    let cocycle = match raw.cocycle {
        None => None,
        Some(c) => {
            let patches = c
                .patches
                .iter()
                .enumerate()
                .map(|(i, p)| make_box(&p.lower, &p.upper, m, &format!("cocycle.patches[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let mut transitions = BTreeMap::new();
            for (n, t) in c.transitions.iter().enumerate() {
                let loc = format!("cocycle.transitions[{n}]");
                let [a, b] = t.pair;
                if a == 0 || b == 0 || a > patches.len() || b > patches.len() {
                    return Err(err(
                        SceneErrorKind::Resolution,
                        format!("{loc}.pair"),
                        format!("patch ids are 1..{}, found [{a}, {b}]", patches.len()),
                    ));
                }
                let entries = parse_matrix(&t.matrix, c.rank, c.rank, m, false, &format!("{loc}.matrix"))?;
                transitions.insert((a - 1, b - 1), ExprMatrix::new(c.rank, c.rank, entries, m).map_err(at(&loc))?);
            }
            let bundle = CocycleBundle::new(patches, c.rank, transitions).map_err(at("cocycle"))?;
            let target = match &c.target {
                Some(t) => make_box(&t.lower, &t.upper, m, "cocycle.target")?,
                None => base.clone(),
            };
            let basepoint = point(c.basepoint, target.center(), m, "cocycle.basepoint")?;
            let grid = c.grid.unwrap_or(8);
            if grid < 2 {
                return Err(err(SceneErrorKind::Invalid, "cocycle.grid", "grid needs at least 2 points per axis"));
            }
            Some(CocycleScene { bundle, basepoint, target, grid })
        }
    };

    let algebroid = match raw.algebroid {
        None => None,
        Some(a) => {
            let r = a.rank;
            if r == 0 {
                return Err(err(SceneErrorKind::Dimension, "algebroid.rank", "rank must be positive"));
            }
            let mut entries = Vec::new();
            for (n, b) in a.bracket.iter().enumerate() {
                let loc = format!("algebroid.bracket[{n}]");
                for (key, v) in [("i", b.i), ("j", b.j), ("l", b.l)] {
                    if v == 0 || v > r {
                        return Err(err(SceneErrorKind::Dimension, format!("{loc}.{key}"), format!("index {v} outside 1..{r}")));
                    }
                }
                entries.push((b.i - 1, b.j - 1, b.l - 1, parse_expr(&b.value, m, false, &format!("{loc}.value"))?));
            }
            if a.connections.len() != m {
                return Err(err(
                    SceneErrorKind::Dimension,
                    "algebroid.connections",
                    format!("{} connection matrices for base dimension {m}", a.connections.len()),
                ));
            }
            let conns = a
                .connections
                .iter()
                .enumerate()
                .map(|(i, rows)| {
                    let loc = format!("algebroid.connections[{i}]");
                    ExprMatrix::new(r, r, parse_matrix(rows, r, r, m, false, &loc)?, m).map_err(at(&loc))
                })
                .collect::<Result<Vec<_>>>()?;
            let spec = AlgebroidSpec::from_sparse(base.clone(), r, &entries, conns).map_err(at("algebroid"))?;
            let basepoint = point(a.basepoint, base.center(), m, "algebroid.basepoint")?;
            if !base.contains(&basepoint) {
                return Err(err(SceneErrorKind::Invalid, "algebroid.basepoint", "basepoint lies outside the base box"));
            }
            Some(AlgebroidScene { spec, basepoint })
        }
    };

    let mut verify = VerifySettings::default();
    if let Some(v) = raw.verify {
        if let Some(s) = v.suites {
            for name in &s {
                if name != "all" && !SUITES.contains(&name.as_str()) {
                    return Err(err(SceneErrorKind::Resolution, "verify.suites", format!("unknown suite `{name}`")));
                }
            }
            verify.suites = s;
        }
        if let Some(n) = v.samples {
            if n == 0 {
                return Err(err(SceneErrorKind::Invalid, "verify.samples", "sample count must be positive"));
            }
            verify.samples = n;
        }
        verify.seed = v.seed.unwrap_or(verify.seed);
        if let Some(t) = v.time {
            if !(t > 0.0) {
                return Err(err(SceneErrorKind::Invalid, "verify.time", "time range must be positive"));
            }
            verify.time = t;
        }
        for (k, tol) in &v.tolerance {
            if !SUITES.contains(&k.as_str()) {
                return Err(err(SceneErrorKind::Resolution, format!("verify.tolerance.{k}"), format!("unknown suite `{k}`")));
            }
            if !(*tol > 0.0) {
                return Err(err(SceneErrorKind::Invalid, format!("verify.tolerance.{k}"), "tolerance must be positive"));
            }
        }
        verify.tolerance = v.tolerance;
    }

    Ok(Scene {
        name: raw.name.unwrap_or_else(|| "scene".into()),
        description: raw.description.unwrap_or_default(),
        base,
        interval: base_interval,
        bundles,
        derivations,
        duals,
        tensors,
        sections,
        ode,
        cylinder,
        cocycle,
        algebroid,
        verify,
    })
}

impl Scene {
    pub fn derivation(&self, name: &str) -> Result<&NamedDerivation> {
        self.derivations.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.derivations.keys().map(String::as_str).collect();
            err(SceneErrorKind::Resolution, "--deriv", format!("unknown derivation `{name}` (known: {})", known.join(", ")))
        })
    }

    /// Derivations acting on the bundle of `section`: the declared one, or
    /// every derivation on the same bundle.
    pub fn derivations_for<'a>(&'a self, section: &'a NamedSection) -> Vec<&'a str> {
        match &section.derivation {
            Some(d) => vec![d.as_str()],
            None => self.derivations.iter().filter(|(_, d)| d.bundle == section.bundle).map(|(n, _)| n.as_str()).collect(),
        }
    }
}
