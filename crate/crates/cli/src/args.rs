//! Command-line flags and their translation into [`Settings`].

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, RunConfig, Settings};
use crate::error::CliError;
use crate::run::Manifest;

#[derive(Debug, Parser)]
#[command(name = "bohm", version, about = "Trajectories, propagation and equivariance checks for probability currents")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Propagate a wavefunction and write field slices and norms.
    Propagate(RunArgs),
    /// Integrate trajectories from sampled initial points.
    Trajectories(RunArgs),
    /// Compare the pushed-forward ensemble with |ψ_T|² and check box transport.
    Verify(RunArgs),
    /// Evaluate the global-existence condition integrals.
    Conditions(RunArgs),
}

impl Sub {
    pub fn split(self) -> (Command, RunArgs) {
        match self {
            Sub::Propagate(a) => (Command::Propagate, a),
            Sub::Trajectories(a) => (Command::Trajectories, a),
            Sub::Verify(a) => (Command::Verify, a),
            Sub::Conditions(a) => (Command::Conditions, a),
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// Settings file (`key = value` with `[section]` headers) or a run manifest (`.json`).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    /// Settings file with a `[pde]` section naming an initial field.
    #[arg(long)]
    pub pde_spec: Option<String>,
    /// `exact` (closed-form current) or `pde` (propagated wavefunction).
    #[arg(long)]
    pub backend: Option<String>,
    /// Scenario parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Grid points per axis for PDE runs.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub dt: Option<String>,
    /// Time horizon.
    #[arg(long = "T")]
    pub horizon: Option<String>,
    /// Ensemble size.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub tol_rel: Option<String>,
    #[arg(long)]
    pub tol_abs: Option<String>,
    #[arg(long)]
    pub max_step: Option<String>,
    #[arg(long)]
    pub epsilon_node: Option<String>,
    #[arg(long)]
    pub escape_radius: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub bins: Option<String>,
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub l1_max: Option<String>,
    #[arg(long)]
    pub slice_every: Option<String>,
    /// Condition-integral ball radius.
    #[arg(long)]
    pub radius: Option<String>,
}

fn load_base(path: &Path) -> Result<Settings, CliError> {
    if path.extension().is_some_and(|e| e == "json") {
        let m = Manifest::read(path)
            .map_err(|e| CliError::Config(format!("cannot read manifest {}: {e}", path.display())))?;
        Settings::parse(&m.config.emit(), path)
    } else {
        Settings::read(path)
    }
}

impl RunArgs {
    /// File settings (if any) overridden by flags.
    pub fn settings(&self) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(p) => load_base(p)?,
            None => Settings::default(),
        };
        let flags: [(&str, &str, &Option<String>); 19] = [
            ("run", "scenario", &self.scenario),
            ("run", "pde_spec", &self.pde_spec),
            ("run", "backend", &self.backend),
            ("run", "grid", &self.grid),
            ("run", "dt", &self.dt),
            ("run", "T", &self.horizon),
            ("run", "n", &self.n),
            ("run", "seed", &self.seed),
            ("run", "tol_rel", &self.tol_rel),
            ("run", "tol_abs", &self.tol_abs),
            ("run", "max_step", &self.max_step),
            ("run", "epsilon_node", &self.epsilon_node),
            ("run", "escape_radius", &self.escape_radius),
            ("run", "delta", &self.delta),
            ("run", "out", &self.out),
            ("verify", "bins", &self.bins),
            ("verify", "mesh", &self.mesh),
            ("verify", "l1_max", &self.l1_max),
            ("conditions", "radius", &self.radius),
        ];
        for (section, key, value) in flags {
            if let Some(v) = value {
                let flag = if key == "T" { "--T".to_string() } else { format!("--{}", key.replace('_', "-")) };
                s.set_flag(section, key, v, &flag)?;
            }
        }
        if let Some(v) = &self.slice_every {
            s.set_flag("propagate", "slice_every", v, "--slice-every")?;
        }
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("flag --param: expected KEY=VALUE, found `{kv}`")))?;
            s.set_flag("scenario", k.trim(), v.trim(), &format!("--param {kv}"))?;
        }
        Ok(s)
    }

    pub fn config(&self, command: Command) -> Result<RunConfig, CliError> {
        RunConfig::from_settings(command, &self.settings()?)
    }
}
