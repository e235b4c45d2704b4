//! Dipole–dipole couplings from the free-space Green's tensor.
//!
//! The transition dipole is fixed along z, perpendicular to the array plane.
//! With `d = ẑ` the complex coupling between two atoms separated by `r` is
//!
//! ```text
//! J − iΓ/2 = −(3π γ0 / k) · G_zz(r)
//! ```
//!
//! so that Γ → γ0 as r → 0.

mod lattice;

pub use lattice::{
    divergence_distance, thermodynamic_effective_couplings, LatticeSumOptions,
    ThermodynamicCouplings, DIVERGENCE_GUARD,
};

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::Geometry;
use crate::{fmt, Error, Result, WAVENUMBER};

/// Free-space Green's tensor of a point dipole, without the contact term.
pub fn greens_tensor(r: [f64; 3], k: f64) -> Result<Matrix3<Complex64>> {
    let dist = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    if dist == 0.0 || !dist.is_finite() {
        return Err(Error::Domain(format!(
            "Green's tensor needs a finite non-zero separation, got |r| = {dist}"
        )));
    }
    let kr = k * dist;
    let i = Complex64::i();
    let prefactor = Complex64::from_polar(1.0, kr) / (4.0 * PI * dist);
    let isotropic = 1.0 + i / kr - 1.0 / (kr * kr);
    let radial = -1.0 - 3.0 * i / kr + 3.0 / (kr * kr);
    Ok(Matrix3::from_fn(|a, b| {
        let delta = if a == b { 1.0 } else { 0.0 };
        prefactor * (isotropic * delta + radial * (r[a] * r[b] / (dist * dist)))
    }))
}

/// Pair couplings `(J, Γ)` for z-polarised dipoles separated by `r`.
pub fn pair_coupling(r: [f64; 3], gamma0: f64) -> Result<(f64, f64)> {
    let g = greens_tensor(r, WAVENUMBER)?;
    let c = -(3.0 * PI * gamma0 / WAVENUMBER) * g[(2, 2)];
    Ok((c.re, -2.0 * c.im))
}

/// Closed-form `(J, Γ)` for separations lying in the array plane (r ⊥ z).
///
/// Equivalent to [`pair_coupling`] for in-plane vectors; used by the lattice
/// sums where millions of pairs are evaluated.
pub fn in_plane_coupling(dist: f64, gamma0: f64) -> (f64, f64) {
    let x = WAVENUMBER * dist;
    let (s, c) = x.sin_cos();
    let x2 = x * x;
    let gamma = 1.5 * gamma0 * (s / x + c / x2 - s / (x2 * x));
    let j = -0.75 * gamma0 / x * (c * (1.0 - 1.0 / x2) - s / x);
    (j, gamma)
}

/// Coherent and dissipative coupling matrices of a finite array.
///
/// `j` has zero diagonal (the Lamb shift is absorbed into the resonance);
/// `gamma` carries the single-atom rate `gamma0` on its diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrices {
    pub j: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EffectiveCouplings {
    pub j_eff: f64,
    pub gamma_eff: f64,
}

impl EffectiveCouplings {
    pub fn new(j_eff: f64, gamma_eff: f64) -> Self {
        EffectiveCouplings { j_eff, gamma_eff }
    }
}

/// Assembles J and Γ for every pair of atoms in `geometry` (γ0 = 1).
pub fn coupling_matrices(geometry: &Geometry) -> Result<CouplingMatrices> {
    geometry.validate()?;
    let gamma0 = 1.0;
    let n = geometry.len();
    let mut j = DMatrix::zeros(n, n);
    let mut gamma = DMatrix::zeros(n, n);
    for a in 0..n {
        gamma[(a, a)] = gamma0;
        for b in (a + 1)..n {
            let pa = geometry.positions[a];
            let pb = geometry.positions[b];
            let (jab, gab) = pair_coupling([pa[0] - pb[0], pa[1] - pb[1], pa[2] - pb[2]], gamma0)?;
            j[(a, b)] = jab;
            j[(b, a)] = jab;
            gamma[(a, b)] = gab;
            gamma[(b, a)] = gab;
        }
    }
    Ok(CouplingMatrices { j, gamma, gamma0 })
}

/// Off-diagonal row sums seen by atom `reference`.
///
/// Only meaningful for permutationally symmetric geometries; elsewhere the
/// result depends on which atom is chosen.
pub fn effective_couplings(m: &CouplingMatrices, reference: usize) -> Result<EffectiveCouplings> {
    let n = m.len();
    if reference >= n {
        return Err(Error::invalid(format!(
            "reference atom {reference} out of range for {n} atoms"
        )));
    }
    let mut out = EffectiveCouplings::default();
    for i in (0..n).filter(|&i| i != reference) {
        out.j_eff += m.j[(reference, i)];
        out.gamma_eff += m.gamma[(reference, i)];
    }
    Ok(out)
}

/// Smallest eigenvalue of Γ. Non-negative (up to round-off) for any physical
/// geometry.
pub fn check_psd(m: &CouplingMatrices) -> f64 {
    m.gamma
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[derive(Serialize)]
struct MatricesJson<'a> {
    n: usize,
    gamma0: f64,
    j: Vec<Vec<f64>>,
    gamma: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_gamma_eigenvalue: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a serde_json::Value>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

impl CouplingMatrices {
    pub fn len(&self) -> usize {
        self.j.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_symmetric(&self) -> bool {
        self.j == self.j.transpose() && self.gamma == self.gamma.transpose()
    }

    /// `row,col,J,Gamma` for every entry, row-major.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,J,Gamma")?;
        for r in 0..self.len() {
            for c in 0..self.len() {
                writeln!(
                    w,
                    "{r},{c},{},{}",
                    fmt::float(self.j[(r, c)]),
                    fmt::float(self.gamma[(r, c)])
                )?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self, with_psd: bool, config: Option<&serde_json::Value>) -> Result<String> {
        let doc = MatricesJson {
            n: self.len(),
            gamma0: self.gamma0,
            j: rows(&self.j),
            gamma: rows(&self.gamma),
            min_gamma_eigenvalue: with_psd.then(|| check_psd(self)),
            config,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}
