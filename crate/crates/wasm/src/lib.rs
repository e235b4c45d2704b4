//! Browser bindings for the interactive demo page.
//!
//! Everything returns flat `Float64Array`/`Uint8Array` buffers so the page can
//! draw straight onto a canvas without any JSON round trips.

use spin_array::couplings::{thermodynamic_effective_couplings, EffectiveCouplings, LatticeSumOptions};
use spin_array::equilibria::{bistable_width, classify_regime, default_omega_range, symmetric_equilibria, AnalyticRegime, PHYSICAL_TOL};
use spin_array::geometry::LatticeKind;
use spin_array::integrator::IntegratorOptions;
use spin_array::meanfield::{integrate_sampled, DriveParams, Model, SymmetricState};
use wasm_bindgen::prelude::*;

fn js_err(e: spin_array::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn regime_code(r: AnalyticRegime) -> u8 {
    match r {
        AnalyticRegime::Mono => 0,
        AnalyticRegime::Bi => 1,
        AnalyticRegime::LcCh => 2,
        AnalyticRegime::LcChMono => 3,
        AnalyticRegime::Unclassified => 4,
    }
}

/// Analytic regime over a Γ_eff × Ω grid, row-major with Ω varying fastest.
/// Codes: 0 Mono, 1 Bi, 2 LcCh, 3 LcChMono, 4 unclassified.
#[wasm_bindgen]
pub fn regime_map(j_eff: f64, gamma_min: f64, gamma_max: f64, nx: usize, omega_min: f64, omega_max: f64, ny: usize) -> Vec<u8> {
    let step = |lo: f64, hi: f64, n: usize, i: usize| lo + (hi - lo) * i as f64 / (n.max(2) - 1) as f64;
    let mut out = Vec::with_capacity(nx * ny);
    for ix in 0..nx {
        let g = step(gamma_min, gamma_max, nx, ix);
        for iy in 0..ny {
            let w = step(omega_min, omega_max, ny, iy);
            out.push(regime_code(classify_regime(&EffectiveCouplings::new(j_eff, g), &DriveParams::new(w))));
        }
    }
    out
}

/// Symmetric-model trajectory as `[t, sx, sy, sz]` quadruples.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn symmetric_trajectory(
    j_eff: f64,
    gamma_eff: f64,
    omega: f64,
    sx: f64,
    sy: f64,
    sz: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<f64>, JsError> {
    let model = Model::symmetric(EffectiveCouplings::new(j_eff, gamma_eff), DriveParams::new(omega));
    let init = SymmetricState::new(sx, sy, sz).to_array();
    let opts = IntegratorOptions {
        tol: spin_array::integrator::Tolerances { rel: 1e-7, abs: 1e-9 },
        ..Default::default()
    };
    let tr = integrate_sampled(&model, &init, t_end, dt, &opts).map_err(js_err)?;
    Ok(tr
        .times
        .iter()
        .zip(&tr.states)
        .flat_map(|(t, s)| [*t, s[0], s[1], s[2]])
        .collect())
}

/// Physical steady-state `s_z` values against Ω: three slots per drive
/// value, unused slots are NaN. Layout `[omega, s1, s2, s3]` per point.
#[wasm_bindgen]
pub fn steady_state_curve(j_eff: f64, gamma_eff: f64, omega_min: f64, omega_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    let eff = EffectiveCouplings::new(j_eff, gamma_eff);
    let mut out = Vec::with_capacity(points * 4);
    for i in 0..points {
        let w = omega_min + (omega_max - omega_min) * i as f64 / (points.max(2) - 1) as f64;
        let eqs = symmetric_equilibria(&eff, &DriveParams::new(w), PHYSICAL_TOL).map_err(js_err)?;
        let mut slots = [f64::NAN; 3];
        for (slot, e) in slots.iter_mut().zip(eqs.iter().filter(|e| e.physical)) {
            *slot = e.state.sz;
        }
        out.push(w);
        out.extend(slots);
    }
    Ok(out)
}

/// Infinite-lattice `[J_eff, Γ_eff, L, Ω_lo, Ω_hi, convergence]` for
/// `kind` = "chain" or "square".
#[wasm_bindgen]
pub fn lattice_point(kind: &str, spacing: f64) -> Result<Vec<f64>, JsError> {
    let kind: LatticeKind = kind.parse().map_err(js_err)?;
    // a smaller radius than the library default keeps the page responsive
    let opts = LatticeSumOptions {
        radius: Some(if kind == LatticeKind::Chain { 200.0 } else { 80.0 }),
        ..Default::default()
    };
    let t = thermodynamic_effective_couplings(kind, spacing, &opts).map_err(js_err)?;
    let (lo, hi) = default_omega_range(&t.couplings, 1.0);
    let w = bistable_width(&t.couplings, 1.0, lo, hi).map_err(js_err)?;
    Ok(vec![
        t.couplings.j_eff,
        t.couplings.gamma_eff,
        w.width,
        w.omega_lo,
        w.omega_hi,
        t.convergence,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_shape_and_known_cells() {
        let m = regime_map(3.0, -1.8, 0.5, 2, 2.06, 2.5, 2);
        assert_eq!(m.len(), 4);
        assert_eq!(m[0], 1); // (-1.8, 2.06) bistable
        assert_eq!(m[3], 0); // (0.5, 2.5) monostable
    }

    #[test]
    fn trajectory_layout() {
        let t = symmetric_trajectory(3.0, 0.5, 2.5, 0.0, 0.0, -1.0, 1.0, 0.5).unwrap();
        assert_eq!(t.len(), 12);
        assert_eq!(&t[..4], &[0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn curve_has_three_roots_when_bistable() {
        let c = steady_state_curve(3.0, -1.8, 2.06, 2.06, 1).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c[1..].iter().all(|v| v.is_finite()));
    }

    #[test]
    fn lattice_point_values() {
        let p = lattice_point("square", 0.12).unwrap();
        assert!((p[1] + 1.0).abs() < 1e-4);
        assert!(p[2] > 0.0);
    }
}
