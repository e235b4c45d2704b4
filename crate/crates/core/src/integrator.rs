//! Adaptive Dormand–Prince 5(4) integrator with 4th-order dense output.
//!
//! Step-size control follows Hairer, Nørsett & Wanner (DOPRI5), including the
//! PI stabilisation and the initial step heuristic. Output is either every
//! accepted step, or samples at caller-chosen times taken from the continuous
//! extension, so sampling never forces steps to align with sample times.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Failure reason reported when the wall-clock deadline passes.
pub const TIME_BUDGET_EXCEEDED: &str = "time budget exceeded";

/// Right-hand side of an autonomous system `y' = f(y)`.
pub trait System {
    fn dim(&self) -> usize;
    fn rhs(&self, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rel: 1e-9,
            abs: 1e-11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegratorOptions {
    pub tol: Tolerances,
    /// Smallest admissible step before the run is declared failed.
    pub h_min: f64,
    pub h_max: Option<f64>,
    pub max_steps: usize,
    /// Wall-clock deadline; exceeding it fails the run with partial output.
    pub deadline: Option<Instant>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            tol: Tolerances::default(),
            h_min: 1e-12,
            h_max: None,
            max_steps: 50_000_000,
            deadline: None,
        }
    }
}

impl IntegratorOptions {
    pub fn with_tol(tol: Tolerances) -> Self {
        IntegratorOptions {
            tol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.times.last()?, self.states.last()?.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// What the integrator records.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Initial point plus every accepted step.
    Steps,
    /// Samples at these times (must be increasing and inside the span).
    Times(Vec<f64>),
    /// Only the end state.
    Final,
}

impl Output {
    /// `t0, t0 + dt, ..., t_end` (the end point is always included).
    pub fn uniform(t0: f64, t_end: f64, dt: f64) -> Output {
        let n = ((t_end - t0) / dt + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|i| t0 + i as f64 * dt).collect();
        if let Some(last) = times.last_mut() {
            if (t_end - *last).abs() < 1e-9 * dt {
                *last = t_end;
            } else {
                times.push(t_end);
            }
        }
        Output::Times(times)
    }
}

// Butcher tableau (Dormand & Prince 1980).
// The nodes c_i are not needed: every system here is autonomous.
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
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

/// Continuous extension over the last accepted step.
struct Dense {
    t_old: f64,
    h: f64,
    r: [Vec<f64>; 5],
}

impl Dense {
    fn eval(&self, t: f64, out: &mut Vec<f64>) {
        let theta = (t - self.t_old) / self.h;
        let theta1 = 1.0 - theta;
        out.clear();
        out.extend((0..self.r[0].len()).map(|i| {
            self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + theta1 * (self.r[2][i] + theta * (self.r[3][i] + theta1 * self.r[4][i])))
        }));
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let sc = tol.abs + tol.rel * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<S: System + ?Sized>(
    sys: &S,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    tol: &Tolerances,
    h_max: f64,
) -> f64 {
    let n = y0.len().max(1) as f64;
    let sc: Vec<f64> = y0.iter().map(|y| tol.abs + tol.rel * y.abs()).collect();
    let dnf = (f0.iter().zip(&sc).map(|(f, s)| (f / s).powi(2)).sum::<f64>() / n).sqrt();
    let dny = (y0.iter().zip(&sc).map(|(y, s)| (y / s).powi(2)).sum::<f64>() / n).sqrt();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(h_max).min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(&y1, &mut f1);
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = dnf.max(der2);
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    (100.0 * h).min(h1).min(h_max).min(span)
}

/// Integrates `sys` from `(t0, y0)` to `t_end`.
///
/// On failure the error carries the partial trajectory recorded so far.
pub fn integrate<S: System + ?Sized>(
    sys: &S,
    y0: &[f64],
    t0: f64,
    t_end: f64,
    output: &Output,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::invalid(format!(
            "initial state has length {}, system has dimension {n}",
            y0.len()
        )));
    }
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::invalid(format!("need t_end > t0, got [{t0}, {t_end}]")));
    }
    if !(opts.tol.rel > 0.0 && opts.tol.abs > 0.0) {
        return Err(Error::invalid("tolerances must be positive"));
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial state is not finite"));
    }
    let samples: &[f64] = match output {
        Output::Times(ts) => {
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid("sample times must be strictly increasing"));
            }
            if ts.first().is_some_and(|&t| t < t0) || ts.last().is_some_and(|&t| t > t_end) {
                return Err(Error::invalid("sample times must lie inside the span"));
            }
            ts
        }
        _ => &[],
    };

    let mut traj = Trajectory::default();
    let mut next_sample = 0;
    match output {
        Output::Steps => {
            traj.times.push(t0);
            traj.states.push(y0.to_vec());
        }
        Output::Times(_) => {
            while next_sample < samples.len() && samples[next_sample] <= t0 {
                traj.times.push(samples[next_sample]);
                traj.states.push(y0.to_vec());
                next_sample += 1;
            }
        }
        Output::Final => {}
    }

    let span = t_end - t0;
    let h_max = opts.h_max.unwrap_or(span).min(span);
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut sample_buf = Vec::with_capacity(n);

    sys.rhs(&y, &mut k1);
    traj.stats.rhs_evals += 1;
    let mut h = initial_step(sys, &y, &k1, span, &opts.tol, h_max);
    traj.stats.rhs_evals += 1;
    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;
    let expo1 = 0.2 - BETA * 0.75;

    let fail = |traj: Trajectory, t: f64, reason: String| Error::Integration {
        t,
        reason,
        partial: Box::new(traj),
    };

    loop {
        if traj.stats.accepted + traj.stats.rejected >= opts.max_steps {
            return Err(fail(traj, t, "step limit reached".into()));
        }
        if let Some(deadline) = opts.deadline {
            if (traj.stats.accepted + traj.stats.rejected) % 256 == 0 && Instant::now() > deadline
            {
                return Err(fail(traj, t, TIME_BUDGET_EXCEEDED.into()));
            }
        }
        if h < opts.h_min {
            return Err(fail(traj, t, format!("step size underflow (h = {h:e})")));
        }
        let last_step = t + 1.01 * h >= t_end;
        if last_step {
            h = t_end - t;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(&ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(&ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(&ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(&ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(&ytmp, &mut k6);
        for i in 0..n {
            ynew[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(&ynew, &mut k7);
        traj.stats.rhs_evals += 6;
        for i in 0..n {
            err[i] = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let mut e = error_norm(&err, &y, &ynew, &opts.tol);
        if !e.is_finite() {
            e = f64::INFINITY;
        }

        if e <= 1.0 {
            let fac11 = e.powf(expo1);
            let fac = (fac11 / facold.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            facold = e.max(1e-4);
            traj.stats.accepted += 1;
            let t_new = if last_step { t_end } else { t + h };

            if next_sample < samples.len() && samples[next_sample] <= t_new {
                let mut r = [
                    y.clone(),
                    vec![0.0; n],
                    vec![0.0; n],
                    vec![0.0; n],
                    vec![0.0; n],
                ];
                for i in 0..n {
                    let ydiff = ynew[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - h * k7[i] - bspl;
                    r[4][i] = h
                        * (D1 * k1[i]
                            + D3 * k3[i]
                            + D4 * k4[i]
                            + D5 * k5[i]
                            + D6 * k6[i]
                            + D7 * k7[i]);
                }
                let dense = Dense { t_old: t, h, r };
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let ts = samples[next_sample];
                    if ts == t_new {
                        sample_buf.clear();
                        sample_buf.extend_from_slice(&ynew);
                    } else {
                        dense.eval(ts, &mut sample_buf);
                    }
                    traj.times.push(ts);
                    traj.states.push(sample_buf.clone());
                    next_sample += 1;
                }
            }

            std::mem::swap(&mut y, &mut ynew);
            std::mem::swap(&mut k1, &mut k7);
            t = t_new;
            if matches!(output, Output::Steps) {
                traj.times.push(t);
                traj.states.push(y.clone());
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(fail(traj, t, "state became non-finite".into()));
            }
            if last_step {
                break;
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new.min(h_max);
        } else {
            let fac11 = if e.is_finite() { e.powf(expo1) } else { FAC_MAX };
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
            traj.stats.rejected += 1;
            last_rejected = true;
        }
    }

    if matches!(output, Output::Final) {
        traj.times.push(t);
        traj.states.push(y);
    }
    Ok(traj)
}
