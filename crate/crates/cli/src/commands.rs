use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};
use spin_array::chaos::separation_analysis;
use spin_array::couplings::{
    coupling_matrices, effective_couplings, thermodynamic_effective_couplings, EffectiveCouplings,
    ThermodynamicCouplings,
};
use spin_array::equilibria::{bistable_width as width, default_omega_range, equilibria_report};
use spin_array::geometry::Geometry;
use spin_array::integrator::IntegratorOptions;
use spin_array::meanfield::{self, write_trajectory_csv, DriveParams, Model};
use spin_array::sweep::run_sweep;
use spin_array::Error;

use crate::config::{ModelKind, RunConfig};
use crate::Failure;

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_json(out: Option<&Path>, v: &Value) -> Result<(), Failure> {
    let mut w = sink(out)?;
    writeln!(w, "{}", serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.into()))?)?;
    w.flush()?;
    Ok(())
}

fn config_header(cfg: &RunConfig) -> String {
    format!("config: {}", serde_json::to_string(cfg).expect("config is always serialisable"))
}

fn geometry(cfg: &RunConfig) -> Result<Geometry, Failure> {
    let g = &cfg.geometry;
    Ok(Geometry::build(g.kind, g.n, g.spacing)?)
}

/// Couplings for the symmetric model: lattice sums when requested, else the
/// configured values.
fn symmetric_couplings(cfg: &RunConfig) -> Result<(EffectiveCouplings, Option<ThermodynamicCouplings>), Failure> {
    if cfg.geometry.thermodynamic {
        let t = thermodynamic_effective_couplings(cfg.geometry.kind, cfg.geometry.spacing, &cfg.lattice)?;
        Ok((t.couplings, Some(t)))
    } else {
        Ok((EffectiveCouplings::new(cfg.model.j_eff, cfg.model.gamma_eff), None))
    }
}

fn build_model(cfg: &RunConfig) -> Result<(Model, Option<ThermodynamicCouplings>), Failure> {
    let drive = DriveParams::new(cfg.model.omega);
    drive.validate()?;
    match cfg.model.model {
        ModelKind::Symmetric => {
            let (eff, lattice) = symmetric_couplings(cfg)?;
            Ok((Model::symmetric(eff, drive), lattice))
        }
        ModelKind::Full => {
            if cfg.geometry.thermodynamic {
                return Err(Failure::Usage("the full model needs a finite array, not --thermodynamic".into()));
            }
            let m = coupling_matrices(&geometry(cfg)?)?;
            Ok((Model::full(&m, drive), None))
        }
    }
}

fn initial_state(cfg: &RunConfig, model: &Model) -> Result<Vec<f64>, Failure> {
    use spin_array::integrator::System;
    match &cfg.initial.state {
        Some(s) if s.len() != model.dim() => Err(Failure::Usage(format!(
            "initial state has {} entries, the model needs {}",
            s.len(),
            model.dim()
        ))),
        Some(s) => Ok(s.clone()),
        None => Ok(model.uniform_state(cfg.initial.preset.state())),
    }
}

fn require_symmetric(cfg: &RunConfig, what: &str) -> Result<(), Failure> {
    if cfg.model.model != ModelKind::Symmetric {
        return Err(Failure::Usage(format!("{what} is defined for the symmetric model only")));
    }
    Ok(())
}

pub fn couplings(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    if cfg.geometry.thermodynamic {
        let t = thermodynamic_effective_couplings(cfg.geometry.kind, cfg.geometry.spacing, &cfg.lattice)?;
        eprintln!(
            "J_eff = {:.9}, Gamma_eff = {:.9} (convergence {:.1e}{})",
            t.couplings.j_eff,
            t.couplings.gamma_eff,
            t.convergence,
            if t.near_divergent { ", near a divergence" } else { "" }
        );
        return emit_json(out, &json!({ "config": cfg.to_value(), "lattice": t }));
    }

    let g = geometry(cfg)?;
    let m = coupling_matrices(&g)?;
    let reference = cfg.geometry.reference.unwrap_or_else(|| g.central_atom());
    let eff = effective_couplings(&m, reference)?;
    let per_atom: Vec<EffectiveCouplings> = (0..g.len())
        .map(|k| effective_couplings(&m, k))
        .collect::<Result<_, Error>>()?;
    let min_eig = spin_array::couplings::check_psd(&m);
    eprintln!("minimum Gamma eigenvalue: {min_eig:.3e}");

    let is_csv = out.and_then(|p| p.extension()).is_some_and(|e| e == "csv");
    if is_csv {
        let mut w = sink(out)?;
        writeln!(w, "# {}", config_header(cfg))?;
        writeln!(w, "# min_gamma_eigenvalue: {}", spin_array::fmt::float(min_eig))?;
        m.write_csv(&mut w)?;
        w.flush()?;
        return Ok(());
    }
    let mut doc: Value = serde_json::from_str(&m.to_json(true, Some(&cfg.to_value()))?)
        .map_err(|e| Failure::Runtime(e.into()))?;
    let obj = doc.as_object_mut().expect("matrices serialise to an object");
    obj.insert("positions".into(), json!(g.positions));
    obj.insert("reference".into(), json!(reference));
    obj.insert("effective".into(), json!(eff));
    obj.insert("effective_per_atom".into(), json!(per_atom));
    emit_json(out, &doc)
}

pub fn evolve(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    let (model, _) = build_model(cfg)?;
    let init = initial_state(cfg, &model)?;
    let opts = IntegratorOptions::with_tol(cfg.tolerances);
    let t_end = cfg.evolve.t_end;
    let result = match cfg.evolve.dt {
        Some(dt) => meanfield::integrate_sampled(&model, &init, t_end, dt, &opts),
        None => meanfield::integrate(&model, &init, t_end, &opts),
    };
    let header = vec![config_header(cfg)];
    match result {
        Ok(traj) => {
            let w = sink(out)?;
            write_trajectory_csv(&traj, model.n_atoms(), cfg.evolve.mean, &header, w)?;
            Ok(())
        }
        Err(Error::Integration { t, reason, partial }) => {
            // keep what was computed, then report the failure
            let mut lines = header;
            lines.push(format!("integration failed at t = {t}: {reason}"));
            write_trajectory_csv(&partial, model.n_atoms(), cfg.evolve.mean, &lines, sink(out)?)?;
            Err(Failure::Runtime(anyhow::anyhow!("integration failed at t = {t}: {reason}")))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn equilibria(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    require_symmetric(cfg, "equilibria")?;
    let (eff, lattice) = symmetric_couplings(cfg)?;
    let report = equilibria_report(&eff, &DriveParams::new(cfg.model.omega))?;
    eprintln!("regime: {}", report.regime);
    emit_json(
        out,
        &json!({ "config": cfg.to_value(), "lattice": lattice, "report": report }),
    )
}

pub fn regime(cfg: &RunConfig, out: Option<&Path>, analytic_only: bool) -> Result<(), Failure> {
    require_symmetric(cfg, "regime")?;
    let (eff, lattice) = symmetric_couplings(cfg)?;
    let drive = DriveParams::new(cfg.model.omega);
    let report = equilibria_report(&eff, &drive)?;
    let mut doc = json!({
        "config": cfg.to_value(),
        "lattice": lattice,
        "analytic_regime": report.regime,
        "equilibria": report.equilibria,
    });
    eprintln!("analytic: {}", report.regime);
    if !analytic_only {
        let model = Model::symmetric(eff, drive);
        let init = initial_state(cfg, &model)?;
        let outcome = separation_analysis(&model, &init, &cfg.separation)?;
        eprintln!("numeric: {} (d_avg/d0 = {:.3e})", outcome.regime(), outcome.d_avg_ratio);
        doc["numeric_regime"] = json!(outcome.regime());
        doc["d_avg_ratio"] = json!(outcome.d_avg_ratio);
        doc["lyapunov"] = json!(outcome.lyapunov);
        doc["dropped_trials"] = json!(outcome.dropped.len());
    }
    emit_json(out, &doc)
}

pub fn separation(cfg: &RunConfig, out: Option<&Path>, curves: Option<&Path>) -> Result<(), Failure> {
    let (model, _) = build_model(cfg)?;
    let init = initial_state(cfg, &model)?;
    let outcome = separation_analysis(&model, &init, &cfg.separation)?;
    eprintln!(
        "{}: d_avg/d0 = {:.3e}, lambda = {:.4} ({} trials, {} dropped)",
        outcome.regime(),
        outcome.d_avg_ratio,
        outcome.lyapunov,
        outcome.effective_trials(),
        outcome.dropped.len()
    );
    if let Some(path) = curves {
        let w = BufWriter::new(File::create(path)?);
        outcome.write_curves_csv(&[config_header(cfg)], w)?;
    }
    let text = outcome.to_json(Some(&cfg.to_value()))?;
    let mut w = sink(out)?;
    writeln!(w, "{text}")?;
    w.flush()?;
    Ok(())
}

pub fn sweep(cfg: &RunConfig, out: Option<&Path>, resume: bool, json_out: Option<&Path>) -> Result<(), Failure> {
    let Some(spec) = &cfg.sweep else {
        return Err(Failure::Usage("the config has no `sweep` section".into()));
    };
    let Some(out) = out else {
        return Err(Failure::Usage("sweep needs --out (rows are checkpointed there)".into()));
    };
    let result = run_sweep(spec, Some(out), resume)?;
    let failed = result
        .column("regime")
        .map(|c| c.iter().filter(|r| **r == "Failed").count())
        .unwrap_or(0);
    eprintln!(
        "{} cells ({} resumed rows, {} failed) in {:.1} s",
        result.cells.len(),
        result.resumed_rows,
        failed,
        result.wall_time.as_secs_f64()
    );
    if let Some(p) = json_out {
        std::fs::write(p, result.to_json()?)?;
    }
    Ok(())
}

pub fn bistable_width(cfg: &RunConfig, out: Option<&Path>) -> Result<(), Failure> {
    require_symmetric(cfg, "bistable-width")?;
    let (eff, lattice) = symmetric_couplings(cfg)?;
    let (lo, hi) = default_omega_range(&eff, 1.0);
    let lo = cfg.width.omega_min.unwrap_or(lo);
    let hi = cfg.width.omega_max.unwrap_or(hi);
    let w = width(&eff, 1.0, lo, hi)?;
    eprintln!("L = {:.6} on [{:.6}, {:.6}]", w.width, w.omega_lo, w.omega_hi);
    emit_json(
        out,
        &json!({
            "config": cfg.to_value(),
            "couplings": eff,
            "lattice": lattice,
            "omega_range": [lo, hi],
            "width": w,
        }),
    )
}
