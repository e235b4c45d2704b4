//! Infinite-lattice effective couplings.
//!
//! The far-field part of the pair coupling falls off as `e^{ikr}/r`, so the
//! lattice sums are only conditionally convergent: the partial sums keep
//! oscillating with period λ0 in the cutoff radius. We sum whole shells and
//! average the partial sums over trailing windows of the cutoff. A window of
//! one oscillation period cancels the `e^{ikR}` term exactly; repeating the
//! average `order` times smooths the taper so the discreteness error of the
//! lattice (beats at the reciprocal-lattice frequencies) dies off too.
//!
//! Averaging the partial sums `order` times over windows of width `W` is the
//! same as weighting each site by the survival function of a sum of `order`
//! uniform variables, stretched over `[R - order·W, R]`.
//!
//! Near `a = |n| λ0` (n a reciprocal-lattice index) a diffraction order
//! grazes the plane and the sums genuinely diverge. The window width grows
//! as the spacing approaches one of those points, and results inside
//! [`DIVERGENCE_GUARD`] are flagged.

use serde::{Deserialize, Serialize};

use super::{in_plane_coupling, EffectiveCouplings};
use crate::geometry::LatticeKind;
use crate::{Error, Result};

/// Spacings within this distance (λ0) of a divergence point are flagged.
pub const DIVERGENCE_GUARD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSumOptions {
    /// Truncation radius in λ0. `None` picks 400 for chains and 200 for squares.
    pub radius: Option<f64>,
    /// Number of repeated shell averages. 1 is a plain one-window average.
    pub averaging_order: u32,
}

impl Default for LatticeSumOptions {
    fn default() -> Self {
        LatticeSumOptions {
            radius: None,
            averaging_order: 4,
        }
    }
}

impl LatticeSumOptions {
    pub fn radius_for(&self, kind: LatticeKind) -> f64 {
        self.radius.unwrap_or(match kind {
            LatticeKind::Chain => 400.0,
            _ => 200.0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermodynamicCouplings {
    pub kind: LatticeKind,
    pub spacing: f64,
    pub radius: f64,
    #[serde(flatten)]
    pub couplings: EffectiveCouplings,
    /// Largest change in J_eff or Γ_eff between radius and radius/2.
    pub convergence: f64,
    /// Width of each averaging window (λ0).
    pub window: f64,
    pub near_divergent: bool,
    /// The window had to be clipped to fit inside the radius.
    pub window_clipped: bool,
}

/// Reciprocal-lattice indices `|n|` with `|n| <= limit`, excluding zero.
fn reciprocal_norms(kind: LatticeKind, limit: f64) -> Vec<f64> {
    let m = limit.ceil() as i64;
    let mut out = Vec::new();
    match kind {
        LatticeKind::Chain => out.extend((1..=m).map(|n| n as f64)),
        _ => {
            for n1 in 0..=m {
                for n2 in 0..=n1 {
                    if n1 == 0 && n2 == 0 {
                        continue;
                    }
                    let norm = ((n1 * n1 + n2 * n2) as f64).sqrt();
                    if norm <= limit {
                        out.push(norm);
                    }
                }
            }
        }
    }
    out
}

/// Distance (λ0) from `spacing` to the nearest divergence point.
pub fn divergence_distance(kind: LatticeKind, spacing: f64) -> f64 {
    reciprocal_norms(kind, spacing + 1.0)
        .into_iter()
        .map(|n| (spacing - n).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Smallest relative detuning `| |n|/a - 1 |` of a diffraction order from the
/// light cone; sets the slowest beat in the partial sums.
fn beat_detuning(kind: LatticeKind, spacing: f64) -> f64 {
    reciprocal_norms(kind, 2.0 * spacing + 1.0)
        .into_iter()
        .map(|n| (n / spacing - 1.0).abs())
        .fold(f64::INFINITY, f64::min)
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `P(U_1 + ... + U_p > u)` for independent uniforms on [0, 1].
fn irwin_hall_survival(u: f64, p: u32) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if u >= p as f64 {
        return 0.0;
    }
    let factorial: f64 = (1..=p).map(f64::from).product();
    let mut cdf = 0.0;
    let mut sign = 1.0;
    for j in 0..=(u.floor() as u32) {
        cdf += sign * binomial(p, j) * (u - j as f64).powi(p as i32);
        sign = -sign;
    }
    1.0 - cdf / factorial
}

struct Taper {
    radius: f64,
    window: f64,
    order: u32,
}

impl Taper {
    fn weight(&self, r: f64) -> f64 {
        let start = self.radius - self.order as f64 * self.window;
        irwin_hall_survival((r - start) / self.window, self.order)
    }
}

fn chain_sum(spacing: f64, taper: &Taper) -> EffectiveCouplings {
    let mut out = EffectiveCouplings::default();
    let last = (taper.radius / spacing).floor() as u64;
    for n in 1..=last {
        let r = n as f64 * spacing;
        let w = 2.0 * taper.weight(r);
        if w == 0.0 {
            continue;
        }
        let (j, g) = in_plane_coupling(r, 1.0);
        out.j_eff += w * j;
        out.gamma_eff += w * g;
    }
    out
}

fn square_sum(spacing: f64, taper: &Taper) -> EffectiveCouplings {
    // One octant (0 <= q <= p) with multiplicities; fixed loop order keeps the
    // rounding reproducible.
    let mut out = EffectiveCouplings::default();
    let last = (taper.radius / spacing).floor() as u64;
    for p in 1..=last {
        let pf = p as f64;
        for q in 0..=p {
            let qf = q as f64;
            let r = spacing * (pf * pf + qf * qf).sqrt();
            if r > taper.radius {
                break;
            }
            let mult = if q == 0 || q == p { 4.0 } else { 8.0 };
            let w = mult * taper.weight(r);
            if w == 0.0 {
                continue;
            }
            let (j, g) = in_plane_coupling(r, 1.0);
            out.j_eff += w * j;
            out.gamma_eff += w * g;
        }
    }
    out
}

/// Effective couplings of one atom in an infinite chain or square lattice.
pub fn thermodynamic_effective_couplings(
    kind: LatticeKind,
    spacing: f64,
    opts: &LatticeSumOptions,
) -> Result<ThermodynamicCouplings> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::invalid(format!("spacing must be positive, got {spacing}")));
    }
    if kind == LatticeKind::Ring {
        return Err(Error::invalid(
            "thermodynamic sums are defined for chains and square lattices only",
        ));
    }
    if opts.averaging_order == 0 {
        return Err(Error::invalid("averaging_order must be at least 1"));
    }
    let radius = opts.radius_for(kind);
    let order = opts.averaging_order;
    if !(radius.is_finite() && radius > 4.0 * order as f64 * spacing.max(1.0)) {
        return Err(Error::invalid(format!(
            "truncation radius {radius} too small for spacing {spacing}"
        )));
    }

    // Window: whole oscillation periods, wide enough to span two beat periods.
    let wanted = (2.0 / beat_detuning(kind, spacing)).ceil().max(1.0);
    let max_window = (radius / (4.0 * order as f64)).floor().max(1.0);
    let window = wanted.min(max_window);
    let window_clipped = wanted > max_window;

    let run = |r: f64| {
        let taper = Taper {
            radius: r,
            window,
            order,
        };
        match kind {
            LatticeKind::Chain => chain_sum(spacing, &taper),
            _ => square_sum(spacing, &taper),
        }
    };
    let full = run(radius);
    let half = run(radius / 2.0);
    let convergence = (full.j_eff - half.j_eff)
        .abs()
        .max((full.gamma_eff - half.gamma_eff).abs());

    Ok(ThermodynamicCouplings {
        kind,
        spacing,
        radius,
        couplings: full,
        convergence,
        window,
        near_divergent: divergence_distance(kind, spacing) < DIVERGENCE_GUARD,
        window_clipped,
    })
}
