//! Divergence of nearby trajectories on the attractor.
//!
//! The system is first run long enough to settle onto its attractor. From a
//! handful of late-time anchor states, eight small displacements are applied
//! and each displaced orbit is propagated next to the unperturbed one. The
//! mean late-time separation, normalised by the typical initial one, tells a
//! fixed point (separation decays), a limit cycle (a phase offset survives)
//! and chaos (separation grows to the attractor size) apart. The early slope
//! of `log |Δx|` gives a rough maximal Lyapunov exponent.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::integrator::{self, IntegratorOptions, Output, System, Tolerances};
use crate::meanfield::{evolve_to_attractor, Model, DEFAULT_ANCHORS};
use crate::{fmt as numfmt, Error, Result};

/// The eight displacement directions, before scaling by ε.
pub const DIRECTIONS: [[f64; 3]; 8] = [
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
    [1.0, 1.0, 1.0],
    [-1.0, -1.0, -1.0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparationConfig {
    pub epsilon: f64,
    /// Length of the initial settling run (γ0 t).
    pub settle_time: f64,
    /// Times along the settling run whose states seed the trials.
    pub anchors: Vec<f64>,
    /// How long each trial pair is propagated.
    pub horizon: f64,
    /// `d_end` is the mean separation over `[tail_start, horizon]`.
    pub tail_start: f64,
    pub sample_dt: f64,
    pub tolerances: Tolerances,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            epsilon: 1e-5,
            settle_time: 2000.0,
            anchors: DEFAULT_ANCHORS.to_vec(),
            horizon: 200.0,
            tail_start: 180.0,
            sample_dt: 0.1,
            tolerances: Tolerances::default(),
        }
    }
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if !(self.horizon.is_finite() && self.tail_start >= 0.0 && self.horizon > self.tail_start) {
            return Err(Error::invalid("need 0 <= tail_start < horizon"));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt <= self.horizon - self.tail_start) {
            return Err(Error::invalid("sample_dt must be positive and fit in the tail window"));
        }
        if self.anchors.is_empty() {
            return Err(Error::invalid("at least one anchor time is required"));
        }
        let increasing = self.anchors.windows(2).all(|w| w[0] < w[1]);
        if !increasing || self.anchors[0] <= 0.0 || *self.anchors.last().unwrap() > self.settle_time {
            return Err(Error::invalid(
                "anchor times must increase and lie in (0, settle_time]",
            ));
        }
        if !(self.tolerances.rel > 0.0 && self.tolerances.abs > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NumericRegime {
    SteadyState,
    LimitCycle,
    Chaos,
}

impl NumericRegime {
    pub fn label(self) -> &'static str {
        match self {
            NumericRegime::SteadyState => "SteadyState",
            NumericRegime::LimitCycle => "LimitCycle",
            NumericRegime::Chaos => "Chaos",
        }
    }

    pub fn from_ratio(d_avg_ratio: f64) -> Self {
        if d_avg_ratio <= 1e-1 {
            NumericRegime::SteadyState
        } else if d_avg_ratio > 1.0 {
            NumericRegime::Chaos
        } else {
            NumericRegime::LimitCycle
        }
    }
}

impl fmt::Display for NumericRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub anchor: f64,
    /// Index into [`DIRECTIONS`].
    pub vector: usize,
    pub d_init: f64,
    pub d_end: f64,
    pub lyapunov: f64,
    pub t_fit: f64,
    /// The separation never reached the fit threshold; λ used the whole run.
    pub fit_full_horizon: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTrial {
    pub anchor: f64,
    pub vector: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationOutcome {
    pub d_avg_ratio: f64,
    pub lyapunov: f64,
    pub d0: f64,
    pub n_atoms: usize,
    pub trials: Vec<TrialRecord>,
    pub dropped: Vec<DroppedTrial>,
    /// Distance curves, one per entry of `trials`, sampled at `sample_times`.
    #[serde(skip)]
    pub curves: Vec<Vec<f64>>,
    #[serde(skip)]
    pub sample_times: Vec<f64>,
}

impl SeparationOutcome {
    pub fn effective_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn regime(&self) -> NumericRegime {
        classify_numeric(self)
    }

    pub fn to_json(&self, config: Option<&serde_json::Value>) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        let obj = v.as_object_mut().expect("struct serialises to an object");
        obj.insert("regime".into(), self.regime().label().into());
        obj.insert("effective_trials".into(), self.effective_trials().into());
        if let Some(c) = config {
            obj.insert("config".into(), c.clone());
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// `time,trial_0,...` with one column per completed trial.
    pub fn write_curves_csv<W: Write>(&self, header_lines: &[String], mut w: W) -> Result<()> {
        for line in header_lines {
            writeln!(w, "# {line}")?;
        }
        let mut cols = vec!["time".to_string()];
        cols.extend(
            self.trials
                .iter()
                .map(|t| format!("anchor{}_v{}", t.anchor, t.vector)),
        );
        writeln!(w, "{}", cols.join(","))?;
        for (i, t) in self.sample_times.iter().enumerate() {
            let mut line = numfmt::float(*t);
            for c in &self.curves {
                line.push(',');
                line.push_str(&numfmt::float(c[i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub fn classify_numeric(outcome: &SeparationOutcome) -> NumericRegime {
    NumericRegime::from_ratio(outcome.d_avg_ratio)
}

/// Normalisation of the late-time separation: `√N (2+√3)/3 · ε`.
pub fn d0(epsilon: f64, n_atoms: usize) -> f64 {
    (n_atoms as f64).sqrt() * (2.0 + 3f64.sqrt()) / 3.0 * epsilon
}

/// The eight displacements as flat states, each direction applied to the
/// matching component of every atom.
pub fn displacement_vectors(epsilon: f64, n_atoms: usize) -> Result<Vec<Vec<f64>>> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if n_atoms == 0 {
        return Err(Error::invalid("need at least one atom"));
    }
    Ok(DIRECTIONS
        .iter()
        .map(|dir| {
            dir.iter()
                .flat_map(|&c| std::iter::repeat_n(c * epsilon, n_atoms))
                .collect()
        })
        .collect())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Least-squares slope of `ln d` against `t`, skipping non-positive `d`.
fn log_slope(t: &[f64], d: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(d)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in &pts {
        sxy += (x - mt) * (y - my);
        sxx += (x - mt) * (x - mt);
    }
    sxy / sxx
}

/// Summary of one distance curve `d(t)` with `d[0]` the initial separation.
///
/// Returns `(d_end, λ, t_fit, fit_full_horizon)`.
pub fn analyse_curve(times: &[f64], d: &[f64], tail_start: f64) -> (f64, f64, f64, bool) {
    let tail: Vec<f64> = times
        .iter()
        .zip(d)
        .filter(|(t, _)| **t >= tail_start - 1e-9)
        .map(|(_, v)| *v)
        .collect();
    let d_end = tail.iter().sum::<f64>() / tail.len() as f64;
    let target = 0.5 * (d_end - d[0]).abs();
    let above0 = d[0] > target;
    let crossing = (1..d.len()).find(|&i| d[i] == target || (d[i] > target) != above0);
    let (end, full) = match crossing {
        Some(i) => (i, false),
        None => (d.len() - 1, true),
    };
    let lambda = log_slope(&times[..=end], &d[..=end]);
    (d_end, lambda, times[end], full)
}

fn opts_for(cfg: &SeparationConfig, deadline: Option<Instant>) -> IntegratorOptions {
    IntegratorOptions {
        deadline,
        ..IntegratorOptions::with_tol(cfg.tolerances)
    }
}

/// Propagates `base` and `base + displacement` and returns the distance curve.
pub fn separation_curve(
    model: &Model,
    base: &[f64],
    displacement: &[f64],
    cfg: &SeparationConfig,
    deadline: Option<Instant>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let out = Output::uniform(0.0, cfg.horizon, cfg.sample_dt);
    let opts = opts_for(cfg, deadline);
    let perturbed: Vec<f64> = base.iter().zip(displacement).map(|(a, b)| a + b).collect();
    let a = integrator::integrate(model, base, 0.0, cfg.horizon, &out, &opts)?;
    let b = integrator::integrate(model, &perturbed, 0.0, cfg.horizon, &out, &opts)?;
    let d = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| distance(x, y))
        .collect();
    Ok((a.times, d))
}

type TrialResult = std::result::Result<(TrialRecord, Vec<f64>, Vec<f64>), DroppedTrial>;

fn run_trials(
    model: &Model,
    anchors: &[(f64, Vec<f64>)],
    vectors: &[Vec<f64>],
    cfg: &SeparationConfig,
    deadline: Option<Instant>,
) -> Vec<TrialResult> {
    let jobs: Vec<(usize, usize)> = (0..anchors.len())
        .flat_map(|a| (0..vectors.len()).map(move |v| (a, v)))
        .collect();
    let one = |&(ai, vi): &(usize, usize)| -> TrialResult {
        let (anchor, state) = &anchors[ai];
        match separation_curve(model, state, &vectors[vi], cfg, deadline) {
            Ok((times, d)) => {
                let (d_end, lyapunov, t_fit, fit_full_horizon) = analyse_curve(&times, &d, cfg.tail_start);
                let rec = TrialRecord {
                    anchor: *anchor,
                    vector: vi,
                    d_init: d[0],
                    d_end,
                    lyapunov,
                    t_fit,
                    fit_full_horizon,
                };
                Ok((rec, times, d))
            }
            Err(e) => Err(DroppedTrial {
                anchor: *anchor,
                vector: vi,
                reason: e.to_string(),
            }),
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        jobs.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.iter().map(one).collect()
    }
}

/// Full separation protocol from `initial`.
pub fn separation_analysis(model: &Model, initial: &[f64], cfg: &SeparationConfig) -> Result<SeparationOutcome> {
    separation_analysis_until(model, initial, cfg, None)
}

/// [`separation_analysis`] with a wall-clock deadline shared by every run.
pub fn separation_analysis_until(
    model: &Model,
    initial: &[f64],
    cfg: &SeparationConfig,
    deadline: Option<Instant>,
) -> Result<SeparationOutcome> {
    cfg.validate()?;
    if initial.len() != model.dim() {
        return Err(Error::invalid(format!(
            "initial state has length {}, model needs {}",
            initial.len(),
            model.dim()
        )));
    }
    let n = model.n_atoms();
    let settled = evolve_to_attractor(model, initial, cfg.settle_time, &cfg.anchors, &opts_for(cfg, deadline))?;
    let vectors = displacement_vectors(cfg.epsilon, n)?;
    let results = run_trials(model, &settled.anchors, &vectors, cfg, deadline);

    let mut trials = Vec::new();
    let mut curves = Vec::new();
    let mut dropped = Vec::new();
    let mut sample_times = Vec::new();
    for r in results {
        match r {
            Ok((rec, times, d)) => {
                trials.push(rec);
                curves.push(d);
                sample_times = times;
            }
            Err(d) => dropped.push(d),
        }
    }
    if trials.is_empty() {
        return Err(Error::Domain(format!(
            "all {} separation trials failed; first: {}",
            dropped.len(),
            dropped.first().map(|d| d.reason.as_str()).unwrap_or("")
        )));
    }
    let count = trials.len() as f64;
    let d_avg = trials.iter().map(|t| t.d_end).sum::<f64>() / count;
    let lyapunov = trials.iter().map(|t| t.lyapunov).sum::<f64>() / count;
    let d0 = d0(cfg.epsilon, n);
    Ok(SeparationOutcome {
        d_avg_ratio: d_avg / d0,
        lyapunov,
        d0,
        n_atoms: n,
        trials,
        dropped,
        curves,
        sample_times,
    })
}
