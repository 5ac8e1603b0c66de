//! Adaptive Dormand–Prince 5(4) stepping for autonomous systems, with
//! escape detection against an open domain.

use crate::error::{Error, Result};
use crate::expr::EvalError;

/// Tolerances and limits shared by every integration in the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_steps: usize,
    /// First trial step; chosen automatically when `None`.
    pub initial_step: Option<f64>,
    /// Fundamental matrices with a larger condition estimate are rejected.
    pub max_condition: f64,
    /// Width of the bracket around a boundary crossing.
    pub escape_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_steps: 1_000_000,
            initial_step: None,
            max_condition: 1e12,
            escape_tol: 1e-10,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        IntegratorConfig { abs_tol, rel_tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0 && self.escape_tol > 0.0) {
            return Err(Error::Invalid("integrator tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Invalid("max_steps must be positive".into()));
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Invalid("initial_step must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Outcome {
    Complete(Vec<f64>),
    /// Left the domain; `state` is the last bracketed state still inside.
    Escaped { time: f64, state: Vec<f64> },
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between the 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'a, R> {
    rhs: &'a R,
    n: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a, R> Stepper<'a, R>
where
    R: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
{
    fn new(rhs: &'a R, n: usize) -> Self {
        Stepper { rhs, n, k: std::array::from_fn(|_| vec![0.0; n]), tmp: vec![0.0; n] }
    }

    fn stage(&mut self, y: &[f64], h: f64, coeffs: &[f64], out: usize) -> Result<(), EvalError> {
        for i in 0..self.n {
            let mut acc = 0.0;
            for (j, c) in coeffs.iter().enumerate() {
                if *c != 0.0 {
                    acc += c * self.k[j][i];
                }
            }
            self.tmp[i] = y[i] + h * acc;
        }
        let (tmp, k) = (&self.tmp, &mut self.k[out]);
        (self.rhs)(tmp, k)
    }

    /// One step of size `h` from `y` whose derivative is already in `k[0]`.
    /// Writes the 5th order solution into `y_new` and returns the local error vector.
    fn step(&mut self, y: &[f64], h: f64, y_new: &mut [f64], err: &mut [f64]) -> Result<(), EvalError> {
        self.stage(y, h, &[A21], 1)?;
        self.stage(y, h, &[A31, A32], 2)?;
        self.stage(y, h, &[A41, A42, A43], 3)?;
        self.stage(y, h, &[A51, A52, A53, A54], 4)?;
        self.stage(y, h, &[A61, A62, A63, A64, A65], 5)?;
        for i in 0..self.n {
            y_new[i] = y[i]
                + h * (B1 * self.k[0][i]
                    + B3 * self.k[2][i]
                    + B4 * self.k[3][i]
                    + B5 * self.k[4][i]
                    + B6 * self.k[5][i]);
        }
        (self.rhs)(y_new, &mut self.k[6])?;
        for i in 0..self.n {
            err[i] = h
                * (E1 * self.k[0][i]
                    + E3 * self.k[2][i]
                    + E4 * self.k[3][i]
                    + E5 * self.k[4][i]
                    + E6 * self.k[5][i]
                    + E7 * self.k[6][i]);
        }
        Ok(())
    }
}

fn rms_norm(v: &[f64], y: &[f64], y_new: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = v.len().max(1) as f64;
    let s: f64 = v
        .iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| {
            let sc = cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<R>(rhs: &R, y0: &[f64], f0: &[f64], span: f64, cfg: &IntegratorConfig) -> f64
where
    R: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
{
    if let Some(h) = cfg.initial_step {
        return h.min(span);
    }
    let scale: Vec<f64> = y0.iter().map(|v| cfg.abs_tol + cfg.rel_tol * v.abs()).collect();
    let n = y0.len().max(1) as f64;
    let d0 = (y0.iter().zip(&scale).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().zip(&scale).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    if rhs(&y1, &mut f1).is_err() {
        return h0;
    }
    let d2 = (f1.iter().zip(f0).zip(&scale).map(|((a, b), s)| ((a - b) / s).powi(2)).sum::<f64>() / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / 5.0)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `y' = rhs(y)` from time 0 to `t_end` (either sign).
///
/// `inside` decides membership of the open domain. When an accepted step
/// leaves it, the crossing is bracketed by bisection on the step length to
/// `cfg.escape_tol` and reported as [`Outcome::Escaped`].
pub(crate) fn integrate<R, I>(rhs: &R, y0: &[f64], t_end: f64, inside: I, cfg: &IntegratorConfig) -> Result<Outcome>
where
    R: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
    I: Fn(&[f64]) -> bool,
{
    cfg.validate()?;
    if !inside(y0) {
        return Err(Error::OutsideDomain { point: y0.to_vec() });
    }
    let n = y0.len();
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok(Outcome::Complete(y));
    }
    let dir = t_end.signum();
    let span = t_end.abs();
    let mut stepper = Stepper::new(rhs, n);
    rhs(&y, &mut stepper.k[0])?;
    let mut h = initial_step(rhs, &y, &stepper.k[0], span, cfg);
    let mut t = 0.0f64; // elapsed |time|
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut steps = 0usize;
    let mut last_eval_error: Option<EvalError> = None;

    while t < span {
        if steps >= cfg.max_steps {
            return Err(Error::MaxSteps { steps, time: dir * t });
        }
        steps += 1;
        let remaining = span - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        if h <= 1e-14 * t.max(1.0) {
            if let Some(e) = last_eval_error {
                return Err(Error::Eval(e));
            }
            return Err(Error::StepUnderflow { time: dir * t, step: h });
        }
        let k0 = stepper.k[0].clone();
        match stepper.step(&y, dir * h, &mut y_new, &mut err) {
            Ok(()) => {}
            Err(e) => {
                last_eval_error = Some(e);
                stepper.k[0] = k0;
                h *= 0.5;
                continue;
            }
        }
        let e = rms_norm(&err, &y, &y_new, cfg);
        if !e.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            stepper.k[0] = k0;
            h *= 0.25;
            continue;
        }
        if e <= 1.0 {
            last_eval_error = None;
            if !inside(&y_new) {
                let (dt, state) = bracket_escape(&mut stepper, &y, &k0, dir, h, &inside, cfg);
                return Ok(Outcome::Escaped { time: dir * (t + dt), state });
            }
            t = if last { span } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            // FSAL: the last stage is the derivative at the new point
            stepper.k[0] = stepper.k[6].clone();
            let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            stepper.k[0] = k0;
            h *= (0.9 * e.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(Outcome::Complete(y))
}

/// Bisects the step length in `(0, h]` for the first exit from the domain.
fn bracket_escape<R, I>(
    stepper: &mut Stepper<'_, R>,
    y: &[f64],
    k0: &[f64],
    dir: f64,
    h: f64,
    inside: &I,
    cfg: &IntegratorConfig,
) -> (f64, Vec<f64>)
where
    R: Fn(&[f64], &mut [f64]) -> Result<(), EvalError>,
    I: Fn(&[f64]) -> bool,
{
    let n = y.len();
    let mut lo = 0.0;
    let mut hi = h;
    let mut best = y.to_vec();
    let mut trial = vec![0.0; n];
    let mut err = vec![0.0; n];
    while hi - lo > cfg.escape_tol {
        let mid = 0.5 * (lo + hi);
        stepper.k[0].copy_from_slice(k0);
        let ok = stepper.step(y, dir * mid, &mut trial, &mut err).is_ok() && inside(&trial);
        if ok {
            lo = mid;
            best.copy_from_slice(&trial);
        } else {
            hi = mid;
        }
    }
    (lo, best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(_: &[f64]) -> bool {
        true
    }

    #[test]
    fn exponential_growth_matches_closed_form() {
        let rhs = |y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0];
            Ok(())
        };
        let out = integrate(&rhs, &[1.0], 1.0, all, &IntegratorConfig::default()).unwrap();
        match out {
            Outcome::Complete(y) => assert!((y[0] - 1f64.exp()).abs() / 1f64.exp() < 1e-8),
            other => panic!("{other:?}"),
        }
        let back = integrate(&rhs, &[1.0], -2.0, all, &IntegratorConfig::default()).unwrap();
        match back {
            Outcome::Complete(y) => assert!((y[0] - (-2f64).exp()).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn harmonic_oscillator_returns_after_full_period() {
        let rhs = |y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        };
        let out = integrate(&rhs, &[1.0, 0.0], 2.0 * std::f64::consts::PI, all, &IntegratorConfig::default())
            .unwrap();
        let Outcome::Complete(y) = out else { panic!() };
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
    }

    #[test]
    fn escape_time_is_bracketed() {
        // x' = 1 from 0 leaves (-1, 0.5) at time 0.5
        let rhs = |_: &[f64], dy: &mut [f64]| {
            dy[0] = 1.0;
            Ok(())
        };
        let inside = |y: &[f64]| y[0] > -1.0 && y[0] < 0.5;
        let out = integrate(&rhs, &[0.0], 3.0, inside, &IntegratorConfig::default()).unwrap();
        match out {
            Outcome::Escaped { time, state } => {
                assert!((time - 0.5).abs() <= 2e-10, "{time}");
                assert!(state[0] < 0.5);
            }
            other => panic!("{other:?}"),
        }
        let out = integrate(&rhs, &[0.0], -3.0, inside, &IntegratorConfig::default()).unwrap();
        let Outcome::Escaped { time, .. } = out else { panic!() };
        assert!((time + 1.0).abs() <= 2e-10, "{time}");
    }

    #[test]
    fn finite_time_blowup_is_reported_as_escape() {
        // x' = x^2 from 1 blows up at t = 1
        let rhs = |y: &[f64], dy: &mut [f64]| {
            dy[0] = y[0] * y[0];
            Ok(())
        };
        let inside = |y: &[f64]| y[0].abs() < 1e6;
        let out = integrate(&rhs, &[1.0], 2.0, inside, &IntegratorConfig::default()).unwrap();
        let Outcome::Escaped { time, .. } = out else { panic!() };
        assert!((time - (1.0 - 1e-6)).abs() < 1e-7, "{time}");
    }

    #[test]
    fn max_steps_and_bad_config_are_errors() {
        let rhs = |y: &[f64], dy: &mut [f64]| {
            dy[0] = -y[0];
            Ok(())
        };
        let cfg = IntegratorConfig { max_steps: 2, initial_step: Some(1e-3), ..Default::default() };
        assert!(matches!(integrate(&rhs, &[1.0], 1.0, all, &cfg), Err(Error::MaxSteps { .. })));
        let bad = IntegratorConfig { abs_tol: 0.0, ..Default::default() };
        assert!(matches!(integrate(&rhs, &[1.0], 1.0, all, &bad), Err(Error::Invalid(_))));
        let start_outside = integrate(&rhs, &[5.0], 1.0, |y| y[0] < 1.0, &IntegratorConfig::default());
        assert!(matches!(start_outside, Err(Error::OutsideDomain { .. })));
    }
}
