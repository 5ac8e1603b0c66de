//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 usage or scene error, 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::algebroid::{certify_lab, check_fiber_structure, check_flatness, CertReport, CertTolerances};
use crate::error::{Error, ErrorClass, Result};
use crate::flow::{integrate_linear, IntegratorConfig};
use crate::geometry::PointDerivation;
use crate::linalg::Matrix;
use crate::odesolve::{propagator, solve_nonautonomous};
use crate::report::num;
use crate::sampling::sample_points;
use crate::scene::{load_scene, Scene};
use crate::trivialize::{global_frame, sample_cylinder};
use crate::verify::{run_verify, VerifyOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "vbflow", version, about = "Flows of linear vector fields on vector bundles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TrivialKind {
    Cylinder,
    Cocycle,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Flow of a derivation: base point, fundamental matrix, optionally F·v.
    Flow {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        deriv: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        vector: Option<Vec<f64>>,
    },
    /// Solve v' = A(t) v from the scene's [ode] table.
    Ode {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        v0: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
    },
    /// Write a trivialization sample document (cylinder Θ or global frame).
    Trivialize {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        t0: Option<f64>,
        #[arg(long, default_value_t = 16)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to whichever table the scene has, cylinder first.
        #[arg(long, value_enum)]
        kind: Option<TrivialKind>,
    },
    /// Lie algebra bundle checks: structure, flatness, certify (or all).
    Algebroid {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "all")]
        check: Vec<String>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        basepoint: Option<Vec<f64>>,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run verification suites.
    Verify {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_delimiter = ',')]
        suite: Option<Vec<String>>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides every residual tolerance.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Verification => EXIT_VERIFY,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io_err(e: io::Error) -> Error {
    Error::Io(e.to_string())
}

fn csv(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

fn write_matrix(out: &mut dyn Write, label: &str, a: &Matrix) -> io::Result<()> {
    writeln!(out, "{label}")?;
    for i in 0..a.nrows() {
        let row: Vec<f64> = (0..a.ncols()).map(|j| a[(i, j)]).collect();
        writeln!(out, "  {}", csv(&row))?;
    }
    Ok(())
}

fn execute(cmd: &Command, out: &mut dyn Write) -> Result<i32> {
    let cfg = IntegratorConfig::default();
    match cmd {
        Command::Flow { scene, deriv, x, t, vector } => {
            let scene = load_scene(scene)?;
            let d = &scene.derivation(deriv)?.spec;
            let r = integrate_linear(d, x, *t, &cfg)?.complete(*t)?;
            writeln!(out, "phi = {}", csv(&r.base_point)).map_err(io_err)?;
            write_matrix(out, "F =", &r.fundamental).map_err(io_err)?;
            writeln!(out, "condition = {}", num(r.condition_estimate)).map_err(io_err)?;
            if let Some(v) = vector {
                if v.len() != PointDerivation::rank(d) {
                    return Err(Error::Dimension(format!("--vector has length {}, rank is {}", v.len(), PointDerivation::rank(d))));
                }
                let fv = &r.fundamental * crate::linalg::Vector::from_column_slice(v);
                writeln!(out, "Fv = {}", csv(fv.as_slice())).map_err(io_err)?;
            }
            Ok(EXIT_OK)
        }
        Command::Ode { scene, t0, v0, t } => {
            let scene = load_scene(scene)?;
            let o = scene.ode.as_ref().ok_or_else(|| Error::Invalid("the scene has no [ode] table".into()))?;
            let t0 = t0.unwrap_or(o.t0);
            let v0 = v0
                .clone()
                .or_else(|| o.v0.clone())
                .ok_or_else(|| Error::Invalid("no --v0 given and the scene has no ode.v0".into()))?;
            let v = solve_nonautonomous(&o.spec, t0, &v0, *t, &cfg)?;
            let p = propagator(&o.spec, t0, *t, &cfg)?;
            writeln!(out, "v = {}", csv(&v)).map_err(io_err)?;
            write_matrix(out, "P =", &p).map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Trivialize { scene, t0, grid, out: path, kind } => {
            let scene = load_scene(scene)?;
            let kind = match kind {
                Some(k) => *k,
                None if scene.cylinder.is_some() => TrivialKind::Cylinder,
                None if scene.cocycle.is_some() => TrivialKind::Cocycle,
                None => return Err(Error::Invalid("the scene has neither [cylinder] nor [cocycle]".into())),
            };
            let file = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let mut w = BufWriter::new(file);
            match kind {
                TrivialKind::Cylinder => {
                    let c = scene.cylinder.as_ref().ok_or_else(|| Error::Invalid("the scene has no [cylinder] table".into()))?;
                    let samples = sample_cylinder(&c.bundle, t0.unwrap_or(c.t0), *grid, &cfg)?;
                    samples.write_document(&mut w).map_err(io_err)?;
                    writeln!(out, "wrote {} cylinder samples to {}", samples.records.len(), path.display()).map_err(io_err)?;
                }
                TrivialKind::Cocycle => {
                    let c = scene.cocycle.as_ref().ok_or_else(|| Error::Invalid("the scene has no [cocycle] table".into()))?;
                    let frame = global_frame(&c.bundle, &c.basepoint, &c.target, *grid, &cfg)?;
                    frame.write_document(&mut w).map_err(io_err)?;
                    writeln!(
                        out,
                        "wrote {} frame records to {} (overlap residual {})",
                        frame.records.len(),
                        path.display(),
                        num(frame.max_overlap_residual)
                    )
                    .map_err(io_err)?;
                }
            }
            w.flush().map_err(io_err)?;
            Ok(EXIT_OK)
        }
        Command::Algebroid { scene, check, basepoint, samples, seed, format } => {
            let scene = load_scene(scene)?;
            let report = algebroid_checks(&scene, check, basepoint.as_deref(), *samples, *seed, &cfg)?;
            match format {
                Format::Text => report.write_text(out),
                Format::Machine => report.write_machine(out),
            }
            .map_err(io_err)?;
            Ok(if report.pass() { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Verify { scene, suite, samples, seed, tol, format } => {
            let scene = load_scene(scene)?;
            let mut opts = VerifyOptions::from_scene(&scene);
            if let Some(s) = suite {
                opts.suites = s.clone();
            }
            opts.samples = samples.unwrap_or(opts.samples);
            opts.seed = seed.unwrap_or(opts.seed);
            if let Some(t) = tol {
                if !(*t > 0.0) {
                    return Err(Error::Invalid("--tol must be positive".into()));
                }
                opts.tol = Some(*t);
            }
            let report = run_verify(&scene, &opts)?;
            match format {
                Format::Text => report.write_text(out),
                Format::Machine => report.write_machine(out),
            }
            .map_err(io_err)?;
            Ok(if report.pass() { EXIT_OK } else { EXIT_VERIFY })
        }
    }
}

/// Runs the requested algebroid checks. `certify` gates on structure and
/// flatness and fails with a precondition error naming the failed check.
pub fn algebroid_checks(
    scene: &Scene,
    checks: &[String],
    basepoint: Option<&[f64]>,
    samples: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<CertReport> {
    let a = scene.algebroid.as_ref().ok_or_else(|| Error::Invalid("the scene has no [algebroid] table".into()))?;
    if samples == 0 {
        return Err(Error::Invalid("sample count must be positive".into()));
    }
    let tol = CertTolerances::default();
    let pts = sample_points(a.spec.base(), samples, seed, 0);
    let base = basepoint.map(<[f64]>::to_vec).unwrap_or_else(|| a.basepoint.clone());
    let mut want = Vec::new();
    for c in checks {
        match c.as_str() {
            "all" => want.extend(["structure", "flatness", "certify"]),
            "structure" | "flatness" | "certify" => want.push(c.as_str()),
            other => {
                return Err(Error::Invalid(format!("unknown check `{other}` (known: structure, flatness, certify, all)")))
            }
        }
    }
    if want.contains(&"certify") {
        // certification already contains the structure and flatness checks
        return certify_lab(&a.spec, &base, &pts, &tol, cfg);
    }
    let mut report = CertReport { checks: Vec::new() };
    if want.contains(&"structure") {
        report.checks.extend(check_fiber_structure(&a.spec, &pts, tol.structure)?.checks);
    }
    if want.contains(&"flatness") {
        report.checks.extend(check_flatness(&a.spec, &pts, tol.flatness)?.checks);
    }
    Ok(report)
}
