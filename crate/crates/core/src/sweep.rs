//! Parameter-plane scans and curves.
//!
//! A sweep is a grid of independent cells. Rows (one value of the first axis)
//! are computed in parallel and appended to the output CSV as soon as the row
//! is complete, so an interrupted sweep can resume from the last finished row.
//! Cell values are formatted once and kept as strings, which makes the CSV
//! body a pure function of the spec regardless of worker count.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::chaos::{separation_analysis_until, SeparationConfig, SeparationOutcome};
use crate::couplings::{
    coupling_matrices, thermodynamic_effective_couplings, EffectiveCouplings, LatticeSumOptions,
    ThermodynamicCouplings,
};
use crate::equilibria::{bistable_width, classify_regime, default_omega_range, BistableWidth};
use crate::geometry::{Geometry, LatticeKind};
use crate::integrator::TIME_BUDGET_EXCEEDED;
use crate::meanfield::{DriveParams, Model, Preset};
use crate::{fmt as numfmt, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Plane {
    /// Γ_eff × Ω for the symmetric model at fixed J_eff.
    SymmetricOmegaGamma,
    /// spacing × Ω for a finite array of `n_atoms`.
    FiniteOmegaSpacing,
    /// Bistable width of the infinite lattice against spacing.
    BistableWidthVsSpacing,
    /// Infinite-lattice J_eff and Γ_eff against spacing.
    EffectiveCouplingsVsSpacing,
}

impl Plane {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Plane::SymmetricOmegaGamma => &[
                "gamma_eff",
                "omega",
                "analytic_regime",
                "d_avg_ratio",
                "lyapunov",
                "regime",
                "flags",
            ],
            Plane::FiniteOmegaSpacing => &["spacing", "omega", "d_avg_ratio", "lyapunov", "regime", "flags"],
            Plane::BistableWidthVsSpacing => &[
                "spacing",
                "width",
                "omega_lo",
                "omega_hi",
                "j_eff",
                "gamma_eff",
                "flags",
            ],
            Plane::EffectiveCouplingsVsSpacing => &["spacing", "j_eff", "gamma_eff", "convergence", "flags"],
        }
    }

    pub fn is_curve(self) -> bool {
        matches!(self, Plane::BistableWidthVsSpacing | Plane::EffectiveCouplingsVsSpacing)
    }
}

impl fmt::Display for Plane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, points: usize) -> Self {
        Axis { min, max, points }
    }

    /// Grid value `i`. Multiplying before dividing keeps factor-two
    /// refinements bit-exact supersets of the coarse grid.
    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            return self.max;
        }
        self.min + (self.max - self.min) * i as f64 / (self.points - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.value(i)).collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.points < 2 {
            return Err(Error::invalid(format!("{name}: need at least 2 points")));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::invalid(format!("{name}: need min < max")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub plane: Plane,
    /// Γ_eff for the symmetric plane, spacing otherwise.
    pub x: Axis,
    /// Ω; ignored by curve planes.
    #[serde(default)]
    pub y: Option<Axis>,
    #[serde(default = "default_j_eff")]
    pub j_eff: f64,
    #[serde(default = "default_n_atoms")]
    pub n_atoms: usize,
    #[serde(default = "default_kind")]
    pub kind: LatticeKind,
    #[serde(default = "default_preset")]
    pub preset: Preset,
    /// Drive range scanned for the bistable width; defaults per spacing.
    #[serde(default)]
    pub omega_range: Option<(f64, f64)>,
    #[serde(default)]
    pub separation: SeparationConfig,
    #[serde(default)]
    pub lattice: LatticeSumOptions,
    /// Wall-clock budget per cell (seconds).
    #[serde(default = "default_budget")]
    pub cell_budget_secs: f64,
}

fn default_j_eff() -> f64 {
    3.0
}
fn default_n_atoms() -> usize {
    36
}
fn default_kind() -> LatticeKind {
    LatticeKind::Square
}
fn default_preset() -> Preset {
    Preset::Ground
}
fn default_budget() -> f64 {
    120.0
}

impl SweepSpec {
    /// Spec with every optional field at its default.
    pub fn new(plane: Plane, x: Axis, y: Option<Axis>) -> Self {
        SweepSpec {
            plane,
            x,
            y,
            j_eff: default_j_eff(),
            n_atoms: default_n_atoms(),
            kind: default_kind(),
            preset: default_preset(),
            omega_range: None,
            separation: SeparationConfig::default(),
            lattice: LatticeSumOptions::default(),
            cell_budget_secs: default_budget(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate("x axis")?;
        if self.plane.is_curve() {
            if self.y.is_some() {
                return Err(Error::invalid(format!("{} takes no y axis", self.plane)));
            }
            if self.kind == LatticeKind::Ring {
                return Err(Error::invalid("infinite-lattice curves need kind chain or square"));
            }
            if self.x.min <= 0.0 {
                return Err(Error::invalid("spacings must be positive"));
            }
        } else {
            match &self.y {
                Some(y) => y.validate("y axis")?,
                None => return Err(Error::invalid(format!("{} needs a y axis", self.plane))),
            }
            if self.y.unwrap().min < 0.0 {
                return Err(Error::invalid("omega must be non-negative"));
            }
            self.separation.validate()?;
        }
        if self.plane == Plane::FiniteOmegaSpacing {
            if self.x.min <= 0.0 {
                return Err(Error::invalid("spacings must be positive"));
            }
            // surfaces the perfect-square check before any work starts
            Geometry::build(self.kind, self.n_atoms, 1.0)?;
        }
        if !self.j_eff.is_finite() {
            return Err(Error::invalid("j_eff must be finite"));
        }
        if !(self.cell_budget_secs > 0.0) {
            return Err(Error::invalid("cell_budget_secs must be positive"));
        }
        if let Some((lo, hi)) = self.omega_range {
            if !(lo < hi) {
                return Err(Error::invalid("omega_range must be ordered"));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.x.points
    }

    pub fn row_len(&self) -> usize {
        self.y.map(|y| y.points).unwrap_or(1)
    }

    pub fn cell_count(&self) -> usize {
        self.rows() * self.row_len()
    }
}

/// One grid cell with its CSV fields (same order as the plane's columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub fields: Vec<String>,
}

impl Cell {
    fn csv_line(&self) -> String {
        self.fields.join(",")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub columns: Vec<String>,
    /// Row-major: cell `(ix, iy)` sits at `ix * row_len + iy`.
    pub cells: Vec<Cell>,
    pub wall_time: Duration,
    /// Rows read back from an existing checkpoint rather than recomputed.
    pub resumed_rows: usize,
}

impl SweepResult {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.column_index(name)?;
        Some(self.cells.iter().map(|c| c.fields[i].as_str()).collect())
    }

    /// CSV body (column header plus data), without `#` provenance lines.
    pub fn csv_body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for c in &self.cells {
            s.push_str(&c.csv_line());
            s.push('\n');
        }
        s
    }

    /// JSON mirror: echoed spec, provenance, and one object per cell.
    pub fn to_json(&self) -> Result<String> {
        let cells: Vec<serde_json::Value> = self
            .cells
            .iter()
            .map(|c| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(&c.fields)
                    .map(|(k, v)| {
                        let val = match v.parse::<f64>() {
                            Ok(x) if x.is_finite() && k != "flags" => serde_json::json!(x),
                            _ => serde_json::json!(v),
                        };
                        (k.clone(), val)
                    })
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let v = serde_json::json!({
            "spec": self.spec,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_secs": self.wall_time.as_secs_f64(),
            "resumed_rows": self.resumed_rows,
            "columns": self.columns,
            "cells": cells,
        });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

fn clean(s: &str) -> String {
    s.replace([',', '\n', ';'], " ")
}

fn separation_fields(
    model: &Model,
    spec: &SweepSpec,
    started: Instant,
    flags: &mut Vec<String>,
) -> [String; 3] {
    let init = model.uniform_state(spec.preset.state());
    let deadline = started + Duration::from_secs_f64(spec.cell_budget_secs);
    match separation_analysis_until(model, &init, &spec.separation, Some(deadline)) {
        Ok(out) => {
            outcome_flags(&out, flags);
            [
                numfmt::float(out.d_avg_ratio),
                numfmt::float(out.lyapunov),
                out.regime().label().to_string(),
            ]
        }
        Err(e) => {
            flags.push(failure_flag(&e));
            [String::new(), String::new(), "Failed".to_string()]
        }
    }
}

fn outcome_flags(out: &SeparationOutcome, flags: &mut Vec<String>) {
    if !out.dropped.is_empty() {
        flags.push(format!("dropped_trials={}", out.dropped.len()));
        if out.dropped.iter().any(|d| d.reason.contains(TIME_BUDGET_EXCEEDED)) {
            flags.push("over_budget".into());
        }
    }
    let full = out.trials.iter().filter(|t| t.fit_full_horizon).count();
    if full > 0 {
        flags.push(format!("fit_full_horizon={full}"));
    }
}

fn failure_flag(e: &Error) -> String {
    match e {
        Error::Integration { reason, .. } if reason == TIME_BUDGET_EXCEEDED => "over_budget".into(),
        other => format!("failed: {}", clean(&other.to_string())),
    }
}

fn lattice_flags(t: &ThermodynamicCouplings, flags: &mut Vec<String>) {
    if t.near_divergent {
        flags.push("near_divergent".into());
    }
    if t.window_clipped {
        flags.push("window_clipped".into());
    }
}

/// Computes one cell; never fails, problems become flags.
pub fn compute_cell(spec: &SweepSpec, ix: usize, iy: usize) -> Cell {
    let started = Instant::now();
    let x = spec.x.value(ix);
    let mut flags = Vec::new();
    let mut fields = vec![numfmt::float(x)];
    match spec.plane {
        Plane::SymmetricOmegaGamma => {
            let omega = spec.y.unwrap().value(iy);
            let eff = EffectiveCouplings::new(spec.j_eff, x);
            let drive = DriveParams::new(omega);
            fields.push(numfmt::float(omega));
            fields.push(classify_regime(&eff, &drive).label().to_string());
            let model = Model::symmetric(eff, drive);
            fields.extend(separation_fields(&model, spec, started, &mut flags));
        }
        Plane::FiniteOmegaSpacing => {
            let omega = spec.y.unwrap().value(iy);
            fields.push(numfmt::float(omega));
            let built = Geometry::build(spec.kind, spec.n_atoms, x).and_then(|g| coupling_matrices(&g));
            match built {
                Ok(m) => {
                    let model = Model::full(&m, DriveParams::new(omega));
                    fields.extend(separation_fields(&model, spec, started, &mut flags));
                }
                Err(e) => {
                    flags.push(failure_flag(&e));
                    fields.extend([String::new(), String::new(), "Failed".to_string()]);
                }
            }
        }
        Plane::BistableWidthVsSpacing => match width_point(spec.kind, x, &spec.lattice, spec.omega_range) {
            Ok(p) => {
                lattice_flags(&p.lattice, &mut flags);
                fields.extend([
                    numfmt::float(p.width.width),
                    numfmt::float(p.width.omega_lo),
                    numfmt::float(p.width.omega_hi),
                    numfmt::float(p.lattice.couplings.j_eff),
                    numfmt::float(p.lattice.couplings.gamma_eff),
                ]);
            }
            Err(e) => {
                flags.push(failure_flag(&e));
                fields.extend(std::iter::repeat_n(String::new(), 5));
            }
        },
        Plane::EffectiveCouplingsVsSpacing => {
            match thermodynamic_effective_couplings(spec.kind, x, &spec.lattice) {
                Ok(t) => {
                    lattice_flags(&t, &mut flags);
                    fields.extend([
                        numfmt::float(t.couplings.j_eff),
                        numfmt::float(t.couplings.gamma_eff),
                        numfmt::float(t.convergence),
                    ]);
                }
                Err(e) => {
                    flags.push(failure_flag(&e));
                    fields.extend(std::iter::repeat_n(String::new(), 3));
                }
            }
        }
    }
    fields.push(flags.join(";"));
    Cell { fields }
}

fn compute_row(spec: &SweepSpec, ix: usize) -> Vec<Cell> {
    let iys: Vec<usize> = (0..spec.row_len()).collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        iys.par_iter().map(|&iy| compute_cell(spec, ix, iy)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        iys.iter().map(|&iy| compute_cell(spec, ix, iy)).collect()
    }
}

fn spec_line(spec: &SweepSpec) -> Result<String> {
    Ok(format!("spec: {}", serde_json::to_string(spec)?))
}

/// Reads complete rows from an existing checkpoint written for `spec`.
fn read_checkpoint(path: &Path, spec: &SweepSpec, columns: &str) -> Result<Vec<Cell>> {
    let expected_spec = format!("# {}", spec_line(spec)?);
    let reader = BufReader::new(File::open(path)?);
    let mut saw_spec = false;
    let mut saw_columns = false;
    let mut cells = Vec::new();
    let width = spec.plane.columns().len();
    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            if rest.starts_with(" spec: ") {
                if line != expected_spec {
                    return Err(Error::invalid(format!(
                        "{} was written for a different sweep spec",
                        path.display()
                    )));
                }
                saw_spec = true;
            }
            continue;
        }
        if !saw_columns {
            if line != columns {
                return Err(Error::invalid(format!("{}: unexpected column header", path.display())));
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<String> = line.split(',').map(String::from).collect();
        if fields.len() != width {
            // a torn final line from an interrupted write
            break;
        }
        cells.push(Cell { fields });
    }
    if !saw_spec {
        return Err(Error::invalid(format!("{}: no spec header found", path.display())));
    }
    let complete = cells.len() / spec.row_len() * spec.row_len();
    cells.truncate(complete);
    Ok(cells)
}

fn timestamp() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("started: {secs} (unix seconds)")
}

/// Runs the sweep, optionally streaming rows to `out` (CSV).
///
/// With `resume`, complete rows already present in `out` are kept and the
/// sweep continues from there; the file must have been written for an
/// identical spec.
pub fn run_sweep(spec: &SweepSpec, out: Option<&Path>, resume: bool) -> Result<SweepResult> {
    spec.validate()?;
    let begin = Instant::now();
    let columns: Vec<String> = spec.plane.columns().iter().map(|s| s.to_string()).collect();
    let header = columns.join(",");

    let mut cells = Vec::with_capacity(spec.cell_count());
    let mut sink = None;
    if let Some(path) = out {
        if resume && path.exists() {
            cells = read_checkpoint(path, spec, &header)?;
            // rewrite so a torn tail never survives
            let mut f = File::create(path)?;
            write_preamble(&mut f, spec, &header)?;
            for c in &cells {
                writeln!(f, "{}", c.csv_line())?;
            }
            f.flush()?;
            sink = Some(f);
        } else {
            let mut f = File::create(path)?;
            write_preamble(&mut f, spec, &header)?;
            f.flush()?;
            sink = Some(f);
        }
    }
    let resumed_rows = cells.len() / spec.row_len();

    for ix in resumed_rows..spec.rows() {
        let row = compute_row(spec, ix);
        if let Some(f) = sink.as_mut() {
            let mut block = String::new();
            for c in &row {
                block.push_str(&c.csv_line());
                block.push('\n');
            }
            f.write_all(block.as_bytes())?;
            f.flush()?;
        }
        cells.extend(row);
    }
    Ok(SweepResult {
        spec: spec.clone(),
        columns,
        cells,
        wall_time: begin.elapsed(),
        resumed_rows,
    })
}

fn write_preamble<W: Write>(w: &mut W, spec: &SweepSpec, header: &str) -> Result<()> {
    writeln!(w, "# spin-array sweep {} v{}", spec.plane, env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "# {}", spec_line(spec)?)?;
    writeln!(w, "# {}", timestamp())?;
    writeln!(w, "{header}")?;
    Ok(())
}

/// Bistable width of the infinite lattice at one spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthPoint {
    pub lattice: ThermodynamicCouplings,
    pub width: BistableWidth,
}

pub fn width_point(
    kind: LatticeKind,
    spacing: f64,
    opts: &LatticeSumOptions,
    omega_range: Option<(f64, f64)>,
) -> Result<WidthPoint> {
    let lattice = thermodynamic_effective_couplings(kind, spacing, opts)?;
    let (lo, hi) = omega_range.unwrap_or_else(|| default_omega_range(&lattice.couplings, 1.0));
    let width = bistable_width(&lattice.couplings, 1.0, lo, hi)?;
    Ok(WidthPoint { lattice, width })
}

/// Bistable width against spacing.
pub fn sweep_bistable_width(
    kind: LatticeKind,
    spacings: &[f64],
    opts: &LatticeSumOptions,
) -> Result<Vec<WidthPoint>> {
    map_points(spacings, |a| width_point(kind, a, opts, None))
}

/// J_eff and Γ_eff against spacing.
pub fn effective_coupling_curve(
    kind: LatticeKind,
    spacings: &[f64],
    opts: &LatticeSumOptions,
) -> Result<Vec<ThermodynamicCouplings>> {
    map_points(spacings, |a| thermodynamic_effective_couplings(kind, a, opts))
}

fn map_points<T: Send>(xs: &[f64], f: impl Fn(f64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        xs.par_iter().map(|&a| f(a)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        xs.iter().map(|&a| f(a)).collect()
    }
}
