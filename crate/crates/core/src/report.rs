//! Check records shared by certification and verification reports.

use std::io::{self, Write};

/// Outcome of one numerical check over a set of sample points.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub suite: String,
    pub check: String,
    pub samples: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Sample point with the largest residual (empty if there were no samples).
    pub worst_point: Vec<f64>,
    /// The two compared values at the worst point.
    pub expected: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Tracks the worst residual while samples are fed in.
#[derive(Clone, Debug)]
pub struct Worst {
    samples: usize,
    max_error: f64,
    point: Vec<f64>,
    expected: Vec<f64>,
    observed: Vec<f64>,
}

impl Default for Worst {
    fn default() -> Self {
        Worst::new()
    }
}

impl Worst {
    pub fn new() -> Worst {
        Worst { samples: 0, max_error: 0.0, point: Vec::new(), expected: Vec::new(), observed: Vec::new() }
    }

    /// Records a sample. A NaN residual counts as infinitely bad.
    pub fn add(&mut self, point: &[f64], residual: f64, expected: &[f64], observed: &[f64]) {
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        if self.samples == 0 || r > self.max_error {
            self.max_error = r;
            self.point = point.to_vec();
            self.expected = expected.to_vec();
            self.observed = observed.to_vec();
        }
        self.samples += 1;
    }

    /// Compares two vectors by max-abs difference.
    pub fn compare(&mut self, point: &[f64], expected: &[f64], observed: &[f64]) {
        let r = if expected.len() != observed.len() {
            f64::INFINITY
        } else {
            expected.iter().zip(observed).map(|(a, b)| (a - b).abs()).fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) })
        };
        self.add(point, r, expected, observed);
    }

    pub fn merge(&mut self, other: Worst) {
        if other.samples == 0 {
            return;
        }
        let n = self.samples + other.samples;
        if self.samples == 0 || other.max_error > self.max_error {
            *self = other;
        }
        self.samples = n;
    }

    pub fn max_error(&self) -> f64 {
        self.max_error
    }

    pub fn finish(self, suite: &str, check: &str, tolerance: f64) -> CheckRecord {
        CheckRecord {
            suite: suite.to_string(),
            check: check.to_string(),
            samples: self.samples,
            pass: self.max_error <= tolerance,
            max_error: self.max_error,
            tolerance,
            worst_point: self.point,
            expected: self.expected,
            observed: self.observed,
        }
    }
}

/// 17 significant digits, fixed layout.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

impl CheckRecord {
    /// Negated check: passes when the residual is *above* the tolerance.
    pub fn expect_failure(mut self) -> CheckRecord {
        self.pass = self.max_error > self.tolerance;
        self
    }

    /// Tab-separated machine record: suite, check, samples, max_error,
    /// tolerance, pass, worst_point.
    pub fn machine_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.suite,
            self.check,
            self.samples,
            num(self.max_error),
            num(self.tolerance),
            if self.pass { "PASS" } else { "FAIL" },
            nums(&self.worst_point)
        )
    }

    pub fn write_text(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(
            w,
            "{:<5} {:<14} {:<34} n={:<5} max={:.3e} tol={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.suite,
            self.check,
            self.samples,
            self.max_error,
            self.tolerance
        )?;
        if !self.pass {
            writeln!(w, "      worst point: [{}]", short(&self.worst_point))?;
            writeln!(w, "      expected:    [{}]", short(&self.expected))?;
            writeln!(w, "      observed:    [{}]", short(&self.observed))?;
        }
        Ok(())
    }
}

fn short(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(", ")
}

pub const MACHINE_HEADER: &str = "suite\tcheck\tsamples\tmax_error\ttolerance\tpass\tworst_point";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_tracks_maximum_and_nan() {
        let mut w = Worst::new();
        w.compare(&[0.0], &[1.0], &[1.5]);
        w.compare(&[1.0], &[1.0], &[1.1]);
        let r = w.clone().finish("s", "c", 1.0);
        assert_eq!((r.samples, r.max_error, r.worst_point.clone(), r.pass), (2, 0.5, vec![0.0], true));
        w.add(&[2.0], f64::NAN, &[], &[]);
        let r = w.finish("s", "c", 1.0);
        assert!(!r.pass);
        assert_eq!(r.worst_point, vec![2.0]);
    }

    #[test]
    fn machine_line_layout() {
        let mut w = Worst::new();
        w.compare(&[0.5, -1.0], &[0.0], &[0.25]);
        let line = w.finish("flow", "cocycle", 1e-7).machine_line();
        assert_eq!(
            line,
            "flow\tcocycle\t1\t2.5000000000000000e-1\t9.9999999999999995e-8\tFAIL\t5.0000000000000000e-1,-1.0000000000000000e0"
        );
    }
}
