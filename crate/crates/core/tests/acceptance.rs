//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Checks listed in `KNOWN_FAILURES` reproduce behaviour that disagrees with
//! the published reference numbers; they are reported but do not fail the
//! run. Every other FAIL makes the process exit nonzero.
//!
//! The long phase-diagram sweep only runs with `SPIN_ARRAY_ACCEPT_LONG=1`.

use std::f64::consts::LN_10;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use spin_array::chaos::{separation_analysis, NumericRegime, SeparationConfig, SeparationOutcome};
use spin_array::couplings::{
    check_psd, coupling_matrices, effective_couplings, pair_coupling, CouplingMatrices, EffectiveCouplings,
    LatticeSumOptions,
};
use spin_array::equilibria::{
    classify_regime, jacobian_symmetric, steady_state_cubic, symmetric_equilibria, AnalyticRegime, PHYSICAL_TOL,
};
use spin_array::geometry::{Geometry, LatticeKind};
use spin_array::integrator::{IntegratorOptions, Tolerances};
use spin_array::meanfield::{
    evolve_to_attractor, integrate_sampled, max_bloch_norm, rhs_symmetric, DriveParams, Model, Preset, SpinConfig,
    SymmetricState,
};
use spin_array::sweep::{run_sweep, sweep_bistable_width, SweepSpec};

const KNOWN_FAILURES: &[&str] = &["3b", "3d", "7b", "7c"];

struct Report {
    unexpected: usize,
    passed: usize,
    expected: usize,
}

impl Report {
    fn check(&mut self, id: &str, what: &str, ok: bool, detail: impl AsRef<str>) {
        let detail = detail.as_ref();
        if ok {
            self.passed += 1;
            println!("PASS  [{id}] {what} | {detail}");
        } else if KNOWN_FAILURES.contains(&id) {
            self.expected += 1;
            println!("FAIL  [{id}] {what} (expected, see notes) | {detail}");
        } else {
            self.unexpected += 1;
            println!("FAIL  [{id}] {what} | {detail}");
        }
    }

    fn info(&self, id: &str, text: impl AsRef<str>) {
        println!("      [{id}] {}", text.as_ref());
    }

    fn timed(&mut self, id: &str, budget: Duration, started: Instant) {
        let t = started.elapsed();
        self.check(
            id,
            &format!("runtime within {:.0} s", budget.as_secs_f64()),
            t <= budget,
            format!("{:.1} s", t.as_secs_f64()),
        );
    }
}

fn ground() -> Vec<f64> {
    Preset::Ground.state().to_array().to_vec()
}

fn symmetric(g: f64, w: f64) -> Model {
    Model::symmetric(EffectiveCouplings::new(3.0, g), DriveParams::new(w))
}

fn square36(a: f64, w: f64) -> Model {
    let m = coupling_matrices(&Geometry::build(LatticeKind::Square, 36, a).unwrap()).unwrap();
    Model::full(&m, DriveParams::new(w))
}

fn separation(model: &Model, init: &[f64]) -> SeparationOutcome {
    separation_analysis(model, init, &SeparationConfig::default()).expect("separation analysis")
}

fn bloch_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn single_atom(r: &mut Report) {
    let started = Instant::now();
    let opts = IntegratorOptions::default();
    let mut worst: f64 = 0.0;
    for w in [0.5, 1.0, 2.0, 5.0] {
        let model = Model::symmetric(EffectiveCouplings::new(0.0, 0.0), DriveParams::new(w));
        let s = evolve_to_attractor(&model, &ground(), 200.0, &[200.0], &opts).unwrap().final_state;
        let sz = -1.0 / (1.0 + 2.0 * w * w);
        let exact = [0.0, -2.0 * w * sz, sz];
        worst = worst.max(s.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    r.check("1", "single-atom steady state matches the optical Bloch solution to 1e-6", worst < 1e-6, format!("max error {worst:.2e}"));
    r.timed("1t", Duration::from_secs(1), started);
}

fn normalisation(r: &mut Report) {
    let started = Instant::now();
    let (_, g) = pair_coupling([1e-4, 0.0, 0.0], 1.0).unwrap();
    r.check("2a", "pair Γ(r → 0) → γ0 within 1e-6", (g - 1.0).abs() < 1e-6, format!("Γ(1e-4 λ0) = {g:.10}"));

    let mut runner = TestRunner::deterministic();
    let mut worst = f64::INFINITY;
    let mut built = 0;
    while built < 20 {
        let n = sample(&mut runner, 4usize..40);
        let side = sample(&mut runner, 0.3f64..3.0);
        let pos: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let p = sample(&mut runner, proptest::array::uniform2(0.0f64..1.0));
                [side * p[0], side * p[1], 0.0]
            })
            .collect();
        let g = Geometry { kind: LatticeKind::Chain, spacing: 0.0, count: n, positions: pos };
        // reject near-coincident atoms; every accepted geometry counts
        let Ok(m) = coupling_matrices(&g) else { continue };
        if g.sorted_pair_distances().first().is_some_and(|d| *d < 0.01) {
            continue;
        }
        worst = worst.min(check_psd(&m));
        built += 1;
    }
    r.check("2b", "Γ is PSD to -1e-8 γ0 for 20 random geometries", worst >= -1e-8, format!("min eigenvalue {worst:.3e}"));
    r.timed("2t", Duration::from_secs(10), started);
}

fn symmetric_regimes(r: &mut Report) {
    let started = Instant::now();

    let m = symmetric(0.5, 2.5);
    let analytic = classify_regime(&EffectiveCouplings::new(3.0, 0.5), &DriveParams::new(2.5));
    let o = separation(&m, &ground());
    r.check(
        "3a",
        "(0.5, 2.5): analytic Mono, numeric SteadyState",
        analytic == AnalyticRegime::Mono && o.regime() == NumericRegime::SteadyState,
        format!("{analytic}, {} (d_avg/d0 = {:.2e})", o.regime(), o.d_avg_ratio),
    );

    let eff = EffectiveCouplings::new(3.0, -1.8);
    let analytic = classify_regime(&eff, &DriveParams::new(2.06));
    let m = symmetric(-1.8, 2.06);
    let opts = IntegratorOptions::default();
    let end = |p: Preset| evolve_to_attractor(&m, &p.state().to_array(), 2000.0, &[2000.0], &opts).unwrap().final_state;
    let (g, e, t) = (end(Preset::Ground), end(Preset::Excited), end(Preset::Tilted));
    let sep = bloch_distance(&g, &e);
    r.check(
        "3b",
        "(-1.8, 2.06): Bi, ground and excited endpoints more than 0.1 apart",
        analytic == AnalyticRegime::Bi && sep > 0.1,
        format!("{analytic}, separation {sep:.3e}, ground {g:.4?}, excited {e:.4?}"),
    );
    r.info("3b", format!("tilted preset ends at {t:.4?}, {:.3} from the ground endpoint", bloch_distance(&g, &t)));

    let analytic = classify_regime(&EffectiveCouplings::new(3.0, -2.41), &DriveParams::new(1.56));
    let o = separation(&symmetric(-2.41, 1.56), &ground());
    r.check(
        "3c",
        "(-2.41, 1.56): analytic LcCh, numeric Chaos",
        analytic == AnalyticRegime::LcCh && o.regime() == NumericRegime::Chaos,
        format!("{analytic}, {} (d_avg/d0 = {:.2e})", o.regime(), o.d_avg_ratio),
    );

    let m = symmetric(-1.5, 1.0);
    let og = separation(&m, &ground());
    let ot = separation(&m, &Preset::Tilted.state().to_array());
    r.check(
        "3d",
        "(-1.5, 1.0): SteadyState from ground, LimitCycle from tilted",
        og.regime() == NumericRegime::SteadyState && ot.regime() == NumericRegime::LimitCycle,
        format!(
            "ground {} ({:.3}), tilted {} ({:.3}), analytic {}",
            og.regime(),
            og.d_avg_ratio,
            ot.regime(),
            ot.d_avg_ratio,
            classify_regime(&EffectiveCouplings::new(3.0, -1.5), &DriveParams::new(1.0))
        ),
    );
    r.timed("3t", Duration::from_secs(600), started);
}

fn gamma_bound(r: &mut Report) {
    let started = Instant::now();
    let mut bad = 0;
    for i in 0..100 {
        let g = -1.0 + 5.0 * i as f64 / 99.0;
        for k in 1..=100 {
            let w = 4.0 * k as f64 / 100.0;
            let label = classify_regime(&EffectiveCouplings::new(3.0, g), &DriveParams::new(w));
            if matches!(label, AnalyticRegime::LcCh | AnalyticRegime::LcChMono) {
                bad += 1;
            }
        }
    }
    r.check("4", "no LcCh/LcChMono labels for Γ_eff ≥ -γ0 (100×100 grid)", bad == 0, format!("{bad} offending cells"));
    r.timed("4t", Duration::from_secs(120), started);
}

fn thresholds(r: &mut Report) {
    let started = Instant::now();
    let spacings: Vec<f64> = (5..=50).map(|i| i as f64 / 100.0).collect();
    for (id, kind, lo, hi) in [("5a", LatticeKind::Square, 0.25, 0.29), ("5b", LatticeKind::Chain, 0.12, 0.16)] {
        let pts = sweep_bistable_width(kind, &spacings, &LatticeSumOptions::default()).unwrap();
        let last = pts
            .iter()
            .filter(|p| p.width.width > 1e-3)
            .map(|p| p.lattice.spacing)
            .fold(f64::NAN, f64::max);
        r.check(
            id,
            &format!("{kind}: largest spacing with L > 1e-3 in [{lo}, {hi}]"),
            last >= lo - 1e-9 && last <= hi + 1e-9,
            format!("a = {last:.2}"),
        );
    }
    r.timed("5t", Duration::from_secs(1800), started);
}

fn finite_regimes(r: &mut Report) -> SeparationOutcome {
    let started = Instant::now();
    let mut chaos = None;
    for (id, a, w, want) in [
        ("6a", 0.12, 10.0, NumericRegime::SteadyState),
        ("6b", 0.09, 4.0, NumericRegime::LimitCycle),
        ("6c", 0.07, 10.0, NumericRegime::Chaos),
    ] {
        let m = square36(a, w);
        let o = separation(&m, &m.uniform_state(Preset::Ground.state()));
        r.check(
            id,
            &format!("N = 36, (a, Ω) = ({a}, {w}) is {want}"),
            o.regime() == want && o.dropped.is_empty(),
            format!("{} (d_avg/d0 = {:.3e}, {} trials)", o.regime(), o.d_avg_ratio, o.effective_trials()),
        );
        if id == "6c" {
            chaos = Some(o);
        }
    }
    r.timed("6t", Duration::from_secs(1800), started);
    chaos.unwrap()
}

fn lyapunov(r: &mut Report, chaos: SeparationOutcome) {
    let started = Instant::now();
    let runs = [
        (0.10, 10.0, -0.221),
        (0.09, 6.0, -0.080),
        (0.07, 10.0, 0.389),
    ];
    let mut outcomes = Vec::new();
    for (a, w, _) in &runs[..2] {
        let m = square36(*a, *w);
        outcomes.push(separation(&m, &m.uniform_state(Preset::Ground.state())));
    }
    outcomes.push(chaos);

    let signs_ok = outcomes[0].lyapunov < 0.0 && outcomes[1].lyapunov < 0.0 && outcomes[2].lyapunov > 0.0;
    r.check(
        "7a",
        "signs of the trial-averaged λ: (0.10, 10) < 0, (0.09, 6) < 0, (0.07, 10) > 0",
        signs_ok,
        format!("{:.4}, {:.4}, {:.4}", outcomes[0].lyapunov, outcomes[1].lyapunov, outcomes[2].lyapunov),
    );

    let within = |x: f64, reference: f64| (x - reference).abs() <= 0.5 * reference.abs();
    let single: Vec<f64> = outcomes
        .iter()
        .map(|o| {
            o.trials
                .iter()
                .find(|t| t.anchor == 1600.0 && t.vector == 0)
                .map(|t| t.lyapunov)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let averaged_ok = outcomes.iter().zip(&runs).all(|(o, (_, _, p))| within(o.lyapunov, *p));
    let single_ok = single.iter().zip(&runs).all(|(x, (_, _, p))| within(*x, *p));
    r.check(
        "7b",
        "trial-averaged λ within ±50% of -0.221, -0.080, +0.389",
        averaged_ok,
        format!("{:.4}, {:.4}, {:.4}", outcomes[0].lyapunov, outcomes[1].lyapunov, outcomes[2].lyapunov),
    );
    r.check(
        "7c",
        "single-trial λ (anchor 1600, +x displacement) within ±50% of the same values",
        single_ok,
        format!("{:.4}, {:.4}, {:.4}", single[0], single[1], single[2]),
    );
    r.info(
        "7c",
        format!(
            "the same single-trial fits read as base-10 slopes: {:.4}, {:.4}, {:.4}",
            single[0] / LN_10,
            single[1] / LN_10,
            single[2] / LN_10
        ),
    );
    r.timed("7t", Duration::from_secs(1800), started);
}

fn nine_atoms(r: &mut Report) {
    let started = Instant::now();
    let opts = IntegratorOptions::default();
    let tail = |a: f64, w: f64, p: Preset| -> (f64, f64) {
        let g = Geometry::build(LatticeKind::Square, 9, a).unwrap();
        let c = g.central_atom();
        let m = Model::full(&coupling_matrices(&g).unwrap(), DriveParams::new(w));
        let tr = integrate_sampled(&m, &m.uniform_state(p.state()), 2000.0, 0.1, &opts).unwrap();
        let xs: Vec<f64> = tr
            .times
            .iter()
            .zip(&tr.states)
            .filter(|(t, _)| **t >= 1800.0)
            .map(|(_, s)| s[c])
            .collect();
        let hi = xs.iter().cloned().fold(f64::MIN, f64::max);
        let lo = xs.iter().cloned().fold(f64::MAX, f64::min);
        (*xs.last().unwrap(), hi - lo)
    };

    let (xg, pg) = tail(0.05, 7.778, Preset::Ground);
    let (xe, pe) = tail(0.05, 7.778, Preset::Excited);
    r.check(
        "8a",
        "N = 9, (0.05, 7.778): ground and excited reach distinct steady s_x",
        pg < 1e-3 && pe < 1e-3 && (xg - xe).abs() > 1e-2,
        format!("s_x {xg:.4} vs {xe:.4}, tail peak-to-peak {pg:.1e} / {pe:.1e}"),
    );

    let (_, pg) = tail(0.0667, 8.889, Preset::Ground);
    let (_, pe) = tail(0.0667, 8.889, Preset::Excited);
    let (steady, moving) = (pg.min(pe), pg.max(pe));
    r.check(
        "8b",
        "N = 9, (0.0667, 8.889): one preset steady, the other oscillating (p2p > 0.05)",
        steady < 1e-3 && moving > 0.05,
        format!("tail peak-to-peak ground {pg:.3e}, excited {pe:.3e}"),
    );
    r.timed("8t", Duration::from_secs(300), started);
}

fn properties(r: &mut Report) {
    let started = Instant::now();
    let mut runner = TestRunner::deterministic();

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (j, g, w) = (sample(&mut runner, -6.0f64..6.0), sample(&mut runner, -3.0f64..4.0), sample(&mut runner, 0.0f64..8.0));
        let s = sample(&mut runner, proptest::array::uniform3(-1.0f64..1.0));
        let (eff, drive) = (EffectiveCouplings::new(j, g), DriveParams::new(w));
        let st = SymmetricState::new(s[0], s[1], s[2]);
        let a = jacobian_symmetric(&st, &eff, &drive);
        let mut err: f64 = 0.0;
        for c in 0..3 {
            let h = 1e-6;
            let mut up = s;
            let mut dn = s;
            up[c] += h;
            dn[c] -= h;
            let fu = rhs_symmetric(&SymmetricState::new(up[0], up[1], up[2]), &eff, &drive).to_array();
            let fd = rhs_symmetric(&SymmetricState::new(dn[0], dn[1], dn[2]), &eff, &drive).to_array();
            for row in 0..3 {
                err = err.max((a[(row, c)] - (fu[row] - fd[row]) / (2.0 * h)).abs());
            }
        }
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(err / scale);
    }
    r.check("9a", "Jacobian matches finite differences (1e-5 relative, 200 points)", worst <= 1e-5, format!("worst {worst:.2e}"));

    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let eff = EffectiveCouplings::new(sample(&mut runner, -6.0f64..6.0), sample(&mut runner, -3.0f64..4.0));
        let drive = DriveParams::new(sample(&mut runner, 0.01f64..8.0));
        let p = steady_state_cubic(&eff, &drive);
        let z: Vec<_> = symmetric_equilibria(&eff, &drive, PHYSICAL_TOL).unwrap().iter().map(|e| e.sz_root).collect();
        let e1 = z[0] + z[1] + z[2];
        let e2 = z[0] * z[1] + z[0] * z[2] + z[1] * z[2];
        let e3 = z[0] * z[1] * z[2];
        worst = worst
            .max((e1 + p[1] / p[0]).norm())
            .max((e2 - p[2] / p[0]).norm())
            .max((e3 + p[3] / p[0]).norm());
    }
    r.check("9b", "cubic roots satisfy Vieta's identities to 1e-9", worst < 1e-9, format!("worst {worst:.2e}"));

    let opts = IntegratorOptions::default();
    let mut worst: f64 = 0.0;
    for (n, a, w) in [(6, 0.1, 3.0), (10, 0.15, 6.0), (8, 0.2, 2.0)] {
        let m = coupling_matrices(&Geometry::build(LatticeKind::Ring, n, a).unwrap()).unwrap();
        let drive = DriveParams::new(w);
        let full = Model::full(&m, drive);
        let sym = Model::symmetric(effective_couplings(&m, 0).unwrap(), drive);
        let tf = integrate_sampled(&full, &full.uniform_state(Preset::Ground.state()), 100.0, 0.5, &opts).unwrap();
        let ts = integrate_sampled(&sym, &ground(), 100.0, 0.5, &opts).unwrap();
        for (f, s) in tf.states.iter().zip(&ts.states) {
            let cfg = SpinConfig::from_flat(n, f.clone()).unwrap();
            for k in 0..n {
                let x = cfg.atom(k).to_array();
                worst = worst.max(x.iter().zip(s).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
            }
        }
    }
    r.check("9c", "ring full model tracks the symmetric model to 1e-6 over [0, 100]", worst < 1e-6, format!("worst {worst:.2e}"));

    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let a = sample(&mut runner, 0.05f64..0.5);
        let w = sample(&mut runner, 0.0f64..5.0);
        let g = Geometry::build(LatticeKind::Chain, 4, a).unwrap();
        let full = coupling_matrices(&g).unwrap();
        let m = CouplingMatrices { j: full.j.clone(), gamma: full.gamma.map(|_| 0.0), gamma0: 0.0 };
        let model = Model::full(&m, DriveParams { omega: w, gamma0: 0.0 });
        // fixed phase budget: DOPRI5 drift grows with the number of cycles
        let rate = w + (0..4).map(|i| m.j.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
        let t_end = 40.0 / rate.max(1.0);
        let init = model.uniform_state(SymmetricState::new(0.3, -0.2, -(1.0f64 - 0.13).sqrt()));
        let tr = integrate_sampled(&model, &init, t_end, t_end / 20.0, &IntegratorOptions::with_tol(tol)).unwrap();
        for s in &tr.states {
            let cfg = SpinConfig::from_flat(4, s.clone()).unwrap();
            for k in 0..4 {
                worst = worst.max((cfg.atom(k).norm() - 1.0).abs());
            }
            worst = worst.max(max_bloch_norm(s, 4) - 1.0);
        }
    }
    r.check(
        "9d",
        "Hamiltonian limit conserves Bloch norms to 10× integrator tolerance",
        worst <= 10.0 * tol.rel,
        format!("worst drift {worst:.2e} (bound {:.0e})", 10.0 * tol.rel),
    );

    parallel_equivalence(r);
    r.timed("9t", Duration::from_secs(300), started);
}

#[cfg(feature = "parallel")]
fn parallel_equivalence(r: &mut Report) {
    use spin_array::sweep::{Axis, Plane};
    let mut spec = SweepSpec::new(Plane::FiniteOmegaSpacing, Axis::new(0.07, 0.12, 3), Some(Axis::new(4.0, 10.0, 3)));
    spec.n_atoms = 9;
    spec.separation = SeparationConfig {
        settle_time: 100.0,
        anchors: vec![60.0, 80.0, 100.0],
        horizon: 30.0,
        tail_start: 25.0,
        ..Default::default()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_sweep(&spec, None, false).unwrap().csv_body())
    };
    let (one, many) = (run(1), run(4));
    r.check("9e", "sweep output is byte-identical for 1 and 4 threads", one == many, format!("{} bytes", one.len()));
}

#[cfg(not(feature = "parallel"))]
fn parallel_equivalence(r: &mut Report) {
    r.info("9e", "SKIP built without the parallel feature");
}

fn phase_diagram(r: &mut Report) {
    if std::env::var("SPIN_ARRAY_ACCEPT_LONG").as_deref() != Ok("1") {
        println!("SKIP  [10] N = 36 phase diagram (set SPIN_ARRAY_ACCEPT_LONG=1; takes hours, checkpointed)");
        return;
    }
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let text = std::fs::read_to_string(root.join("configs/finite-square-n36.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    let spec: SweepSpec = serde_json::from_value(doc["sweep"].clone()).unwrap();
    let dir = root.join("target/acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let result = run_sweep(&spec, Some(&dir.join("finite-square-n36.csv")), true).unwrap();
    let spacing = result.column("spacing").unwrap();
    let regime = result.column("regime").unwrap();
    let mean_spacing = |label: &str| {
        let v: Vec<f64> = spacing
            .iter()
            .zip(&regime)
            .filter(|(_, r)| **r == label)
            .map(|(a, _)| a.parse::<f64>().unwrap())
            .collect();
        (v.len(), v.iter().sum::<f64>() / v.len().max(1) as f64)
    };
    let (ns, ms) = mean_spacing("SteadyState");
    let (nl, _) = mean_spacing("LimitCycle");
    let (nc, mc) = mean_spacing("Chaos");
    r.check(
        "10",
        "21×21 N = 36 sweep holds all three regimes, chaos at small spacing",
        ns > 0 && nl > 0 && nc > 0 && mc < ms,
        format!("{ns} steady, {nl} limit cycle, {nc} chaos; mean spacing chaos {mc:.3} vs steady {ms:.3}"),
    );
}

fn main() -> ExitCode {
    // libtest-style flags (e.g. --nocapture, filters) are ignored
    let mut r = Report { unexpected: 0, passed: 0, expected: 0 };
    single_atom(&mut r);
    normalisation(&mut r);
    symmetric_regimes(&mut r);
    gamma_bound(&mut r);
    thresholds(&mut r);
    let chaos = finite_regimes(&mut r);
    lyapunov(&mut r, chaos);
    nine_atoms(&mut r);
    properties(&mut r);
    phase_diagram(&mut r);
    println!(
        "acceptance: {} passed, {} expected failures, {} unexpected failures",
        r.passed, r.expected, r.unexpected
    );
    if r.unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
