use nalgebra::Matrix3;
use num_complex::Complex64;
use proptest::prelude::*;
use spin_array::couplings::{check_psd, coupling_matrices, greens_tensor, in_plane_coupling, pair_coupling, CouplingMatrices, EffectiveCouplings};
use spin_array::equilibria::{jacobian_symmetric, steady_state_cubic, symmetric_equilibria, PHYSICAL_TOL};
use spin_array::geometry::{Geometry, LatticeKind};
use spin_array::integrator::{IntegratorOptions, Tolerances};
use spin_array::meanfield::{integrate_sampled, max_bloch_norm, rhs_symmetric, DriveParams, Model, SymmetricState};
use spin_array::WAVENUMBER;

fn finite_difference_jacobian(s: &SymmetricState, eff: &EffectiveCouplings, drive: &DriveParams) -> Matrix3<f64> {
    let x = s.to_array();
    let mut jac = Matrix3::zeros();
    for c in 0..3 {
        let h = 1e-6 * x[c].abs().max(1.0);
        let mut up = x;
        let mut dn = x;
        up[c] += h;
        dn[c] -= h;
        let fu = rhs_symmetric(&SymmetricState::new(up[0], up[1], up[2]), eff, drive).to_array();
        let fd = rhs_symmetric(&SymmetricState::new(dn[0], dn[1], dn[2]), eff, drive).to_array();
        for r in 0..3 {
            jac[(r, c)] = (fu[r] - fd[r]) / (2.0 * h);
        }
    }
    jac
}

/// Random atoms in a 2λ0 box, rejecting sets with pairs closer than 0.02λ0.
fn random_positions(n: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
    prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), n).prop_filter("atoms too close", |p| {
        (0..p.len()).all(|i| {
            ((i + 1)..p.len()).all(|k| spin_array::geometry::distance(&p[i], &p[k]) > 0.02)
        })
    })
}

fn free_geometry(positions: Vec<[f64; 3]>) -> Geometry {
    // the lattice kind is only a label; couplings depend on positions alone
    Geometry {
        kind: LatticeKind::Chain,
        spacing: 0.0,
        count: positions.len(),
        positions,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn jacobian_matches_finite_differences(
        j in -6.0f64..6.0,
        g in -3.0f64..4.0,
        w in 0.0f64..8.0,
        sx in -1.0f64..1.0,
        sy in -1.0f64..1.0,
        sz in -1.0f64..1.0,
    ) {
        let eff = EffectiveCouplings::new(j, g);
        let drive = DriveParams::new(w);
        let s = SymmetricState::new(sx, sy, sz);
        let a = jacobian_symmetric(&s, &eff, &drive);
        let f = finite_difference_jacobian(&s, &eff, &drive);
        let scale = a.abs().max().max(1.0);
        prop_assert!((a - f).abs().max() <= 1e-5 * scale, "{a} vs {f}");
    }

    #[test]
    fn cubic_roots_satisfy_vieta(j in -6.0f64..6.0, g in -3.0f64..4.0, w in 0.01f64..8.0) {
        let eff = EffectiveCouplings::new(j, g);
        let drive = DriveParams::new(w);
        let p = steady_state_cubic(&eff, &drive);
        let eqs = symmetric_equilibria(&eff, &drive, PHYSICAL_TOL).unwrap();
        prop_assert_eq!(eqs.len(), 3);
        let r: Vec<Complex64> = eqs.iter().map(|e| e.sz_root).collect();
        let e1 = r[0] + r[1] + r[2];
        let e2 = r[0] * r[1] + r[0] * r[2] + r[1] * r[2];
        let e3 = r[0] * r[1] * r[2];
        prop_assert!((e1 + p[1] / p[0]).norm() < 1e-9);
        prop_assert!((e2 - p[2] / p[0]).norm() < 1e-9);
        prop_assert!((e3 + p[3] / p[0]).norm() < 1e-9);
    }

    #[test]
    fn physical_equilibria_are_stationary(j in -6.0f64..6.0, g in -3.0f64..4.0, w in 0.01f64..8.0) {
        let eff = EffectiveCouplings::new(j, g);
        let drive = DriveParams::new(w);
        for e in symmetric_equilibria(&eff, &drive, PHYSICAL_TOL).unwrap().iter().filter(|e| e.physical) {
            let d = rhs_symmetric(&e.state, &eff, &drive).to_array();
            prop_assert!(d.iter().all(|v| v.abs() < 1e-9), "{:?}", d);
        }
    }

    #[test]
    fn in_plane_reduction_matches_tensor(x in -3.0f64..3.0, y in -3.0f64..3.0) {
        prop_assume!(x.hypot(y) > 1e-3);
        let (j, g) = pair_coupling([x, y, 0.0], 1.0).unwrap();
        let (js, gs) = in_plane_coupling(x.hypot(y), 1.0);
        prop_assert!((j - js).abs() <= 1e-12 * js.abs().max(1e-3));
        prop_assert!((g - gs).abs() <= 1e-12 * gs.abs().max(1e-3));
    }

    #[test]
    fn greens_tensor_is_symmetric(x in -2.0f64..2.0, y in -2.0f64..2.0, z in -2.0f64..2.0) {
        prop_assume!((x * x + y * y + z * z).sqrt() > 1e-3);
        let t = greens_tensor([x, y, z], WAVENUMBER).unwrap();
        let scale = t.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let asym = (t - t.transpose()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        prop_assert!(asym <= 1e-12 * scale, "{asym} vs {scale}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gamma_matrix_is_psd(positions in random_positions(12)) {
        let m = coupling_matrices(&free_geometry(positions)).unwrap();
        prop_assert!(m.is_symmetric());
        prop_assert!(check_psd(&m) >= -1e-8);
    }

    #[test]
    fn couplings_are_translation_invariant(positions in random_positions(6), shift in prop::array::uniform3(-5.0f64..5.0)) {
        let g = free_geometry(positions);
        let a = coupling_matrices(&g).unwrap();
        let b = coupling_matrices(&g.translated(shift)).unwrap();
        prop_assert!((a.j - b.j).abs().max() < 1e-9);
        prop_assert!((a.gamma - b.gamma).abs().max() < 1e-9);
    }

    #[test]
    fn hamiltonian_limit_conserves_bloch_norms(
        spacing in 0.05f64..0.5,
        w in 0.0f64..5.0,
        sx in -0.6f64..0.6,
        sy in -0.6f64..0.6,
    ) {
        // no decay and no dissipative coupling: every atom precesses rigidly.
        // DOPRI5 norm drift grows linearly with the number of precession
        // cycles, so the horizon is a fixed phase budget rather than a time.
        let g = Geometry::build(LatticeKind::Chain, 4, spacing).unwrap();
        let full = coupling_matrices(&g).unwrap();
        let m = CouplingMatrices {
            j: full.j.clone(),
            gamma: full.gamma.map(|_| 0.0),
            gamma0: 0.0,
        };
        let model = Model::full(&m, DriveParams { omega: w, gamma0: 0.0 });
        let sz = -(1.0 - sx * sx - sy * sy).sqrt();
        let init = model.uniform_state(SymmetricState::new(sx, sy, sz));
        let rate = w + (0..4).map(|i| m.j.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let t_end = 40.0 / rate.max(1.0);
        let tol = Tolerances::default();
        let tr = integrate_sampled(&model, &init, t_end, t_end / 20.0, &IntegratorOptions::with_tol(tol)).unwrap();
        for s in &tr.states {
            for k in 0..4 {
                let a = spin_array::meanfield::SpinConfig::from_flat(4, s.clone()).unwrap().atom(k);
                prop_assert!((a.norm() - 1.0).abs() <= 10.0 * tol.rel, "{}", a.norm());
            }
            prop_assert!(max_bloch_norm(s, 4) <= 1.0 + 10.0 * tol.rel);
        }
    }
}
