use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spin_array::geometry::LatticeKind;
use spin_array::meanfield::Preset;

mod commands;
mod config;

use config::{ModelKind, RunConfig};

/// Mean-field dynamics of driven atomic arrays with dipole-dipole coupling.
#[derive(Parser, Debug)]
#[command(name = "spin-array", version)]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true, env = "SPIN_ARRAY_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Coupling matrices of a finite array, or infinite-lattice effective couplings.
    Couplings {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geometry: GeometryFlags,
    },
    /// Integrate the equations of motion and write the trajectory as CSV.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geometry: GeometryFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        initial: InitialFlags,
        #[arg(long)]
        t_end: Option<f64>,
        /// Sample spacing; 0 records every accepted step.
        #[arg(long)]
        dt: Option<f64>,
        /// Write the array-averaged Bloch vector only.
        #[arg(long)]
        mean: bool,
    },
    /// Fixed points of the symmetric model and their stability.
    Equilibria {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geometry: GeometryFlags,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Analytic and numeric regime of the symmetric model.
    Regime {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geometry: GeometryFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        initial: InitialFlags,
        /// Skip the trajectory-divergence analysis.
        #[arg(long)]
        analytic_only: bool,
    },
    /// Divergence of nearby trajectories on the attractor.
    Separation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geometry: GeometryFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        initial: InitialFlags,
        /// Also write the distance-vs-time curves as CSV.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Run the parameter sweep described by the config's `sweep` section.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Keep complete rows already present in the output file.
        #[arg(long)]
        resume: bool,
        /// Also write a JSON mirror of the results.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Width of the drive interval with three physical equilibria.
    BistableWidth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        geometry: GeometryFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        omega_min: Option<f64>,
        #[arg(long)]
        omega_max: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when omitted, except for sweeps).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args, Debug)]
struct GeometryFlags {
    #[arg(long)]
    kind: Option<LatticeKind>,
    /// Number of atoms (a perfect square for square lattices).
    #[arg(long)]
    n: Option<usize>,
    /// Nearest-neighbour spacing in units of λ0.
    #[arg(long)]
    spacing: Option<f64>,
    /// Infinite-lattice sums instead of a finite array.
    #[arg(long)]
    thermodynamic: bool,
    /// Truncation radius of the lattice sums (λ0).
    #[arg(long)]
    radius: Option<f64>,
    /// Reference atom for effective couplings.
    #[arg(long)]
    reference: Option<usize>,
}

#[derive(Args, Debug)]
struct ModelFlags {
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long, allow_hyphen_values = true)]
    j_eff: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    gamma_eff: Option<f64>,
    /// Rabi frequency Ω/γ0.
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args, Debug)]
struct InitialFlags {
    /// ground, excited or tilted (alias fig2e).
    #[arg(long)]
    preset: Option<Preset>,
    /// JSON array holding the flat initial state.
    #[arg(long)]
    state: Option<PathBuf>,
}

/// Error classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or arguments: exit 2.
    Usage(String),
    /// Anything that went wrong while computing or writing: exit 1.
    Runtime(anyhow::Error),
}

impl From<spin_array::Error> for Failure {
    fn from(e: spin_array::Error) -> Self {
        match e {
            spin_array::Error::InvalidArgument(msg) => Failure::Usage(msg),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl GeometryFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let g = &mut cfg.geometry;
        if let Some(k) = self.kind {
            g.kind = k;
        }
        if let Some(n) = self.n {
            g.n = n;
        }
        if let Some(a) = self.spacing {
            g.spacing = a;
        }
        if self.thermodynamic {
            g.thermodynamic = true;
        }
        if self.reference.is_some() {
            g.reference = self.reference;
        }
        if self.radius.is_some() {
            cfg.lattice.radius = self.radius;
        }
    }
}

impl ModelFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        let m = &mut cfg.model;
        if let Some(k) = self.model {
            m.model = k;
        }
        if let Some(j) = self.j_eff {
            m.j_eff = j;
        }
        if let Some(g) = self.gamma_eff {
            m.gamma_eff = g;
        }
        if let Some(w) = self.omega {
            m.omega = w;
        }
    }
}

impl InitialFlags {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Failure> {
        if let Some(p) = self.preset {
            cfg.initial.preset = p;
            cfg.initial.state = None;
        }
        if let Some(path) = &self.state {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            let state: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: expected a JSON array of numbers ({e})", path.display())))?;
            cfg.initial.state = Some(state);
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.into()))?;
    }

    let (common, mut cfg) = match &cli.command {
        Command::Couplings { common, .. }
        | Command::Evolve { common, .. }
        | Command::Equilibria { common, .. }
        | Command::Regime { common, .. }
        | Command::Separation { common, .. }
        | Command::Sweep { common, .. }
        | Command::BistableWidth { common, .. } => (common, RunConfig::load(common.config.as_deref())?),
    };

    match &cli.command {
        Command::Couplings { geometry, .. } => geometry.apply(&mut cfg),
        Command::Evolve {
            geometry,
            model,
            initial,
            t_end,
            dt,
            mean,
            ..
        } => {
            geometry.apply(&mut cfg);
            model.apply(&mut cfg);
            initial.apply(&mut cfg)?;
            if let Some(t) = t_end {
                cfg.evolve.t_end = *t;
            }
            if let Some(dt) = dt {
                cfg.evolve.dt = (*dt > 0.0).then_some(*dt);
            }
            if *mean {
                cfg.evolve.mean = true;
            }
        }
        Command::Equilibria { geometry, model, .. } => {
            geometry.apply(&mut cfg);
            model.apply(&mut cfg);
        }
        Command::Regime {
            geometry,
            model,
            initial,
            ..
        }
        | Command::Separation {
            geometry,
            model,
            initial,
            ..
        } => {
            geometry.apply(&mut cfg);
            model.apply(&mut cfg);
            initial.apply(&mut cfg)?;
        }
        Command::Sweep { .. } => {}
        Command::BistableWidth {
            geometry,
            model,
            omega_min,
            omega_max,
            ..
        } => {
            geometry.apply(&mut cfg);
            model.apply(&mut cfg);
            if omega_min.is_some() {
                cfg.width.omega_min = *omega_min;
            }
            if omega_max.is_some() {
                cfg.width.omega_max = *omega_max;
            }
        }
    }

    if common.dry_run {
        // a closed pipe (e.g. `| head`) is not an error here
        let _ = writeln!(std::io::stdout(), "{}", cfg.to_pretty());
        return Ok(());
    }
    let out = common.out.as_deref();
    match &cli.command {
        Command::Couplings { .. } => commands::couplings(&cfg, out),
        Command::Evolve { .. } => commands::evolve(&cfg, out),
        Command::Equilibria { .. } => commands::equilibria(&cfg, out),
        Command::Regime { analytic_only, .. } => commands::regime(&cfg, out, *analytic_only),
        Command::Separation { curves, .. } => commands::separation(&cfg, out, curves.as_deref()),
        Command::Sweep { resume, json, .. } => commands::sweep(&cfg, out, *resume, json.as_deref()),
        Command::BistableWidth { .. } => commands::bistable_width(&cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
