//! Run configuration: one JSON document per run, every field defaulted.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spin_array::chaos::SeparationConfig;
use spin_array::couplings::LatticeSumOptions;
use spin_array::geometry::LatticeKind;
use spin_array::integrator::Tolerances;
use spin_array::meanfield::Preset;
use spin_array::sweep::SweepSpec;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Three-variable permutation-symmetric model driven by (J_eff, Γ_eff).
    Symmetric,
    /// N-atom model built from the geometry.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub kind: LatticeKind,
    pub n: usize,
    pub spacing: f64,
    /// Use infinite-lattice sums instead of a finite array.
    pub thermodynamic: bool,
    /// Reference atom for effective couplings; `None` picks the central atom.
    pub reference: Option<usize>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            kind: LatticeKind::Square,
            n: 36,
            spacing: 0.1,
            thermodynamic: false,
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub model: ModelKind,
    pub j_eff: f64,
    pub gamma_eff: f64,
    pub omega: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: ModelKind::Symmetric,
            j_eff: 3.0,
            gamma_eff: 0.5,
            omega: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub preset: Preset,
    /// Explicit flat state `(s_x.., s_y.., s_z..)`; overrides the preset.
    pub state: Option<Vec<f64>>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            preset: Preset::Ground,
            state: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub t_end: f64,
    /// Sample spacing; `None` records every accepted step.
    pub dt: Option<f64>,
    /// Write the array-averaged Bloch vector instead of every atom.
    pub mean: bool,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            t_end: 200.0,
            dt: Some(0.1),
            mean: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthConfig {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub evolve: EvolveConfig,
    /// Integrator tolerances for `evolve`; separation runs use their own.
    pub tolerances: Tolerances,
    pub separation: SeparationConfig,
    pub lattice: LatticeSumOptions,
    pub width: WidthConfig,
    pub sweep: Option<SweepSpec>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serialisable")
    }

    pub fn to_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serialisable")
    }
}
