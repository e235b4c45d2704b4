//! Atomic position sets in the x–y plane, lengths in units of λ0.
//!
//! Orderings are deterministic: lattices are row-major (rows along y, columns
//! along x), rings run counterclockwise starting on the +x axis. Every
//! geometry is centred on the origin.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatticeKind {
    Chain,
    Square,
    Ring,
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatticeKind::Chain => "chain",
            LatticeKind::Square => "square",
            LatticeKind::Ring => "ring",
        })
    }
}

impl FromStr for LatticeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "chain" => Ok(LatticeKind::Chain),
            "square" => Ok(LatticeKind::Square),
            "ring" => Ok(LatticeKind::Ring),
            other => Err(Error::invalid(format!("unknown lattice kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub kind: LatticeKind,
    pub spacing: f64,
    pub count: usize,
    pub positions: Vec<[f64; 3]>,
}

fn check_spacing(spacing: f64) -> Result<()> {
    if spacing.is_finite() && spacing > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("spacing must be positive, got {spacing}")))
    }
}

/// `n_side × n_side` atoms on a square grid, row-major, centred on the origin.
pub fn build_square_lattice(n_side: usize, spacing: f64) -> Result<Geometry> {
    check_spacing(spacing)?;
    if n_side == 0 {
        return Err(Error::invalid("square lattice needs n_side >= 1"));
    }
    let offset = (n_side as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(n_side * n_side);
    for row in 0..n_side {
        for col in 0..n_side {
            positions.push([
                (col as f64 - offset) * spacing,
                (row as f64 - offset) * spacing,
                0.0,
            ]);
        }
    }
    Ok(Geometry {
        kind: LatticeKind::Square,
        spacing,
        count: n_side * n_side,
        positions,
    })
}

/// `n` atoms along the x axis, centred on the origin.
pub fn build_chain(n: usize, spacing: f64) -> Result<Geometry> {
    check_spacing(spacing)?;
    if n == 0 {
        return Err(Error::invalid("chain needs n >= 1"));
    }
    let offset = (n as f64 - 1.0) / 2.0;
    let positions = (0..n)
        .map(|i| [(i as f64 - offset) * spacing, 0.0, 0.0])
        .collect();
    Ok(Geometry {
        kind: LatticeKind::Chain,
        spacing,
        count: n,
        positions,
    })
}

/// `n` atoms on a circle with chord length `spacing` between neighbours.
pub fn build_ring(n: usize, spacing: f64) -> Result<Geometry> {
    check_spacing(spacing)?;
    if n < 2 {
        return Err(Error::invalid(format!("ring needs n >= 2, got {n}")));
    }
    let radius = ring_radius(n, spacing);
    let positions = (0..n)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / n as f64;
            [radius * theta.cos(), radius * theta.sin(), 0.0]
        })
        .collect();
    Ok(Geometry {
        kind: LatticeKind::Ring,
        spacing,
        count: n,
        positions,
    })
}

/// Circumradius of a regular `n`-gon with side `chord`.
pub fn ring_radius(n: usize, chord: f64) -> f64 {
    chord / (2.0 * (PI / n as f64).sin())
}

impl Geometry {
    /// Builds a geometry from a total atom count. Square lattices need `count`
    /// to be a perfect square.
    pub fn build(kind: LatticeKind, count: usize, spacing: f64) -> Result<Geometry> {
        match kind {
            LatticeKind::Chain => build_chain(count, spacing),
            LatticeKind::Ring => build_ring(count, spacing),
            LatticeKind::Square => {
                let side = (count as f64).sqrt().round() as usize;
                if side * side != count {
                    return Err(Error::invalid(format!(
                        "square lattice needs a perfect-square atom count, got {count}"
                    )));
                }
                build_square_lattice(side, spacing)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Rejects empty sets, non-finite coordinates and coincident atoms.
    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() || self.count != self.positions.len() {
            return Err(Error::invalid("geometry has no atoms or a stale count"));
        }
        if self.positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("geometry has non-finite coordinates"));
        }
        for i in 0..self.len() {
            for k in (i + 1)..self.len() {
                if distance(&self.positions[i], &self.positions[k]) == 0.0 {
                    return Err(Error::invalid(format!("atoms {i} and {k} coincide")));
                }
            }
        }
        Ok(())
    }

    pub fn centroid(&self) -> [f64; 3] {
        let n = self.len().max(1) as f64;
        let mut c = [0.0; 3];
        for p in &self.positions {
            for (ci, pi) in c.iter_mut().zip(p) {
                *ci += pi;
            }
        }
        c.map(|v| v / n)
    }

    /// Index of the atom closest to the centroid (lowest index on ties).
    pub fn central_atom(&self) -> usize {
        let c = self.centroid();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.positions.iter().enumerate() {
            let d = distance(p, &c);
            if d < best_d - 1e-12 {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn translated(&self, shift: [f64; 3]) -> Geometry {
        let mut g = self.clone();
        for p in &mut g.positions {
            for (pi, si) in p.iter_mut().zip(shift) {
                *pi += si;
            }
        }
        g
    }

    /// All pairwise distances `|r_i - r_k|`, `i < k`, sorted ascending.
    pub fn sorted_pair_distances(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.len() * self.len().saturating_sub(1) / 2);
        for i in 0..self.len() {
            for k in (i + 1)..self.len() {
                d.push(distance(&self.positions[i], &self.positions[k]));
            }
        }
        d.sort_by(f64::total_cmp);
        d
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
