//! Mean-field equations of motion.
//!
//! Each atom carries a Bloch vector `(s_x, s_y, s_z)`. The full model couples
//! N of them through the J and Γ matrices; the symmetric model is the
//! one-atom reduction that is exact when every atom sees the same
//! surroundings (rings, infinite lattices).
//!
//! Full-model states are stored flat as `(s_x^0..s_x^{N-1}, s_y^0.., s_z^0..)`,
//! which is also the vector whose Euclidean distance the chaos analysis uses.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::couplings::{CouplingMatrices, EffectiveCouplings};
use crate::integrator::{self, IntegratorOptions, IntegratorStats, Output, System, Trajectory};
use crate::{fmt as numfmt, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Rabi frequency Ω (units of γ0).
    pub omega: f64,
    /// Single-atom decay rate.
    pub gamma0: f64,
}

impl DriveParams {
    pub fn new(omega: f64) -> Self {
        DriveParams { omega, gamma0: 1.0 }
    }

    /// `gamma0 > 0`, `omega >= 0`, both finite.
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return Err(Error::invalid(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(Error::invalid(format!("omega must be non-negative, got {}", self.omega)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymmetricState {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl SymmetricState {
    pub const fn new(sx: f64, sy: f64, sz: f64) -> Self {
        SymmetricState { sx, sy, sz }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        match s {
            [sx, sy, sz] => Ok(SymmetricState::new(*sx, *sy, *sz)),
            _ => Err(Error::invalid(format!("expected 3 components, got {}", s.len()))),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }
}

/// Named initial states, applied identically to every atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ground,
    Excited,
    /// `(-0.9, 0.1, -0.6)`: an off-axis start that lands in the second basin
    /// of the bistable symmetric model. Also accepted as `fig2e`.
    #[serde(alias = "fig2e")]
    Tilted,
}

impl Preset {
    pub fn state(self) -> SymmetricState {
        match self {
            Preset::Ground => SymmetricState::new(0.0, 0.0, -1.0),
            Preset::Excited => SymmetricState::new(0.0, 0.0, 1.0),
            Preset::Tilted => SymmetricState::new(-0.9, 0.1, -0.6),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ground" => Ok(Preset::Ground),
            "excited" => Ok(Preset::Excited),
            "tilted" | "fig2e" => Ok(Preset::Tilted),
            other => Err(Error::invalid(format!("unknown preset '{other}'"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Ground => "ground",
            Preset::Excited => "excited",
            Preset::Tilted => "tilted",
        })
    }
}

/// Bloch vectors of N atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinConfig {
    n: usize,
    data: Vec<f64>,
}

impl SpinConfig {
    pub fn uniform(n: usize, s: SymmetricState) -> Self {
        let mut data = vec![s.sx; n];
        data.extend(std::iter::repeat_n(s.sy, n));
        data.extend(std::iter::repeat_n(s.sz, n));
        SpinConfig { n, data }
    }

    pub fn from_flat(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 3 * n {
            return Err(Error::invalid(format!(
                "flat state of length {} does not describe {n} atoms",
                data.len()
            )));
        }
        Ok(SpinConfig { n, data })
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sx(&self) -> &[f64] {
        &self.data[..self.n]
    }

    pub fn sy(&self) -> &[f64] {
        &self.data[self.n..2 * self.n]
    }

    pub fn sz(&self) -> &[f64] {
        &self.data[2 * self.n..]
    }

    pub fn atom(&self, k: usize) -> SymmetricState {
        SymmetricState::new(self.data[k], self.data[self.n + k], self.data[2 * self.n + k])
    }

    pub fn mean(&self) -> SymmetricState {
        mean_spin(&self.data, self.n)
    }

    pub fn max_bloch_norm(&self) -> f64 {
        max_bloch_norm(&self.data, self.n)
    }
}

/// Average Bloch vector of a flat N-atom state.
pub fn mean_spin(flat: &[f64], n: usize) -> SymmetricState {
    let avg = |s: &[f64]| s.iter().sum::<f64>() / n as f64;
    SymmetricState::new(avg(&flat[..n]), avg(&flat[n..2 * n]), avg(&flat[2 * n..3 * n]))
}

/// Largest per-atom Bloch norm. Stays ≤ 1 along physical trajectories started
/// inside the ball; the gain terms are not proven to preserve that, so this is
/// reported, not enforced.
pub fn max_bloch_norm(flat: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|k| {
            let (x, y, z) = (flat[k], flat[n + k], flat[2 * n + k]);
            (x * x + y * y + z * z).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Time derivative of the symmetric one-atom model.
pub fn rhs_symmetric(
    s: &SymmetricState,
    eff: &EffectiveCouplings,
    drive: &DriveParams,
) -> SymmetricState {
    let (j, g, w, g0) = (eff.j_eff, eff.gamma_eff, drive.omega, drive.gamma0);
    // transverse damping; positive values mean gain
    let alpha = -0.5 * (g0 - g * s.sz);
    SymmetricState::new(
        j * s.sy * s.sz + alpha * s.sx,
        -w * s.sz - j * s.sx * s.sz + alpha * s.sy,
        w * s.sy - g0 * (s.sz + 1.0) - 0.5 * g * (s.sx * s.sx + s.sy * s.sy),
    )
}

/// Time derivative of the full N-atom model.
pub fn rhs_full(
    state: &SpinConfig,
    m: &CouplingMatrices,
    drive: &DriveParams,
) -> Result<SpinConfig> {
    if state.n_atoms() != m.len() {
        return Err(Error::invalid(format!(
            "state has {} atoms, coupling matrices have {}",
            state.n_atoms(),
            m.len()
        )));
    }
    let model = FullModel::new(m, *drive);
    let mut out = vec![0.0; state.as_slice().len()];
    model.rhs(state.as_slice(), &mut out);
    SpinConfig::from_flat(state.n_atoms(), out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricModel {
    pub eff: EffectiveCouplings,
    pub drive: DriveParams,
}

impl System for SymmetricModel {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let d = rhs_symmetric(&SymmetricState::new(y[0], y[1], y[2]), &self.eff, &self.drive);
        dy[0] = d.sx;
        dy[1] = d.sy;
        dy[2] = d.sz;
    }
}

/// Full model with row-major copies of J and the off-diagonal part of Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct FullModel {
    n: usize,
    j: Vec<f64>,
    gamma_off: Vec<f64>,
    pub drive: DriveParams,
}

impl FullModel {
    pub fn new(m: &CouplingMatrices, drive: DriveParams) -> Self {
        let n = m.len();
        let mut j = Vec::with_capacity(n * n);
        let mut gamma_off = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                j.push(if r == c { 0.0 } else { m.j[(r, c)] });
                gamma_off.push(if r == c { 0.0 } else { m.gamma[(r, c)] });
            }
        }
        FullModel {
            n,
            j,
            gamma_off,
            drive,
        }
    }

    pub fn n_atoms(&self) -> usize {
        self.n
    }
}

impl System for FullModel {
    fn dim(&self) -> usize {
        3 * self.n
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let n = self.n;
        let (sx, rest) = y.split_at(n);
        let (sy, sz) = rest.split_at(n);
        let (w, g0) = (self.drive.omega, self.drive.gamma0);
        for k in 0..n {
            let jrow = &self.j[k * n..(k + 1) * n];
            let grow = &self.gamma_off[k * n..(k + 1) * n];
            let (mut jx, mut jy, mut gx, mut gy) = (0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                jx += jrow[i] * sx[i];
                jy += jrow[i] * sy[i];
                gx += grow[i] * sx[i];
                gy += grow[i] * sy[i];
            }
            let (x, yk, z) = (sx[k], sy[k], sz[k]);
            dy[k] = -0.5 * g0 * x + jy * z + 0.5 * gx * z;
            dy[n + k] = -w * z - 0.5 * g0 * yk - jx * z + 0.5 * gy * z;
            dy[2 * n + k] =
                w * yk - g0 * (z + 1.0) - (jy * x - jx * yk) - 0.5 * (gx * x + gy * yk);
        }
    }
}

/// Either flavour of the equations, behind one [`System`] implementation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Symmetric(SymmetricModel),
    Full(FullModel),
}

impl Model {
    pub fn symmetric(eff: EffectiveCouplings, drive: DriveParams) -> Self {
        Model::Symmetric(SymmetricModel { eff, drive })
    }

    pub fn full(m: &CouplingMatrices, drive: DriveParams) -> Self {
        Model::Full(FullModel::new(m, drive))
    }

    /// 1 for the symmetric model.
    pub fn n_atoms(&self) -> usize {
        match self {
            Model::Symmetric(_) => 1,
            Model::Full(f) => f.n,
        }
    }

    pub fn drive(&self) -> DriveParams {
        match self {
            Model::Symmetric(s) => s.drive,
            Model::Full(f) => f.drive,
        }
    }

    /// Flat initial state with every atom set to `s`.
    pub fn uniform_state(&self, s: SymmetricState) -> Vec<f64> {
        SpinConfig::uniform(self.n_atoms(), s).into_vec()
    }
}

impl System for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Symmetric(s) => s.dim(),
            Model::Full(f) => f.dim(),
        }
    }

    fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        match self {
            Model::Symmetric(s) => s.rhs(y, dy),
            Model::Full(f) => f.rhs(y, dy),
        }
    }
}

/// Integrates from t = 0 to `t_end`, recording every accepted step.
pub fn integrate(model: &Model, initial: &[f64], t_end: f64, opts: &IntegratorOptions) -> Result<Trajectory> {
    integrator::integrate(model, initial, 0.0, t_end, &Output::Steps, opts)
}

/// Integrates from t = 0 to `t_end`, sampling every `dt`.
pub fn integrate_sampled(
    model: &Model,
    initial: &[f64],
    t_end: f64,
    dt: f64,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("sample spacing must be positive, got {dt}")));
    }
    integrator::integrate(model, initial, 0.0, t_end, &Output::uniform(0.0, t_end, dt), opts)
}

/// Late-time anchor states used by the divergence analysis.
pub const DEFAULT_ANCHORS: [f64; 5] = [1600.0, 1700.0, 1800.0, 1900.0, 2000.0];

#[derive(Debug, Clone, PartialEq)]
pub struct Attractor {
    pub final_state: Vec<f64>,
    pub anchors: Vec<(f64, Vec<f64>)>,
    pub stats: IntegratorStats,
}

/// Runs to `horizon` and returns the end state plus interpolated states at
/// `anchor_times`.
pub fn evolve_to_attractor(
    model: &Model,
    initial: &[f64],
    horizon: f64,
    anchor_times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Attractor> {
    let mut times: Vec<f64> = anchor_times.to_vec();
    if times.last() != Some(&horizon) {
        times.push(horizon);
    }
    let tr = integrator::integrate(model, initial, 0.0, horizon, &Output::Times(times), opts)?;
    let final_state = tr.states.last().cloned().unwrap_or_default();
    let anchors = tr
        .times
        .iter()
        .zip(&tr.states)
        .take(anchor_times.len())
        .map(|(t, s)| (*t, s.clone()))
        .collect();
    Ok(Attractor {
        final_state,
        anchors,
        stats: tr.stats,
    })
}

/// Writes `time,sx_0..,sy_0..,sz_0..` or, with `mean`, `time,sx_mean,sy_mean,sz_mean`.
pub fn write_trajectory_csv<W: Write>(
    traj: &Trajectory,
    n_atoms: usize,
    mean: bool,
    header_lines: &[String],
    mut w: W,
) -> Result<()> {
    for line in header_lines {
        writeln!(w, "# {line}")?;
    }
    let mut cols = vec!["time".to_string()];
    if mean {
        cols.extend(["sx_mean", "sy_mean", "sz_mean"].map(String::from));
    } else {
        for c in ["sx", "sy", "sz"] {
            cols.extend((0..n_atoms).map(|k| format!("{c}_{k}")));
        }
    }
    writeln!(w, "{}", cols.join(","))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut line = numfmt::float(*t);
        if mean {
            let m = mean_spin(s, n_atoms);
            for v in m.to_array() {
                line.push(',');
                line.push_str(&numfmt::float(v));
            }
        } else {
            for v in s {
                line.push(',');
                line.push_str(&numfmt::float(*v));
            }
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
