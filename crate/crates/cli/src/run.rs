//! Subcommand execution and artifact writing.
//!
//! Every run writes into `<out>/<command>/`: the materialised `config.ini`, a
//! `manifest.json`, and the subcommand's own files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use bohm_core::propagate::io::{load_field, save_field};
use bohm_core::propagate::PdeRun;
use bohm_core::verify::BoxRegion;
use bohm_core::{
    build_provider, condition_integrals, equivariance_test, integrate, pushforward, sample_initial, scenario_by_name,
    transport_check, ConditionSpec, ConfigSpace, CurrentProvider, GridSpec, HamiltonianSpec, IntegratorConfig,
    NodePolicy, ProviderSource, ScenarioParams, Status,
};
use serde::{Deserialize, Serialize};

use crate::config::{Backend, Command, PdeSpec, RunConfig, Source};
use crate::error::CliError;

/// One acceptance check of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.into(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: Command,
    pub config: RunConfig,
    pub seed: u64,
    pub wall_time_s: f64,
    pub checks: Vec<Check>,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub passed: bool,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Decimal with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Artifacts {
    dir: PathBuf,
    outputs: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }
}

/// Materialises `cfg`, runs its subcommand and writes the manifest.
pub fn run(mut cfg: RunConfig) -> Result<Manifest, CliError> {
    cfg.materialize()?;
    let dir = cfg.out.join(cfg.command.as_str());
    fs::create_dir_all(&dir)?;
    let mut art = Artifacts { dir, outputs: Vec::new() };
    let start = Instant::now();
    let checks = match cfg.command {
        Command::Propagate => propagate(&cfg, &mut art)?,
        Command::Trajectories => trajectories(&cfg, &mut art)?,
        Command::Verify => verify(&cfg, &mut art)?,
        Command::Conditions => conditions(&mut cfg, &mut art)?,
    };
    art.write("config.ini", &cfg.emit())?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: bohm_core::VERSION.into(),
        command: cfg.command,
        seed: cfg.seed,
        wall_time_s: start.elapsed().as_secs_f64(),
        passed: checks.iter().all(|c| c.passed),
        checks,
        outputs: art.outputs.clone(),
        config: cfg,
    };
    fs::write(art.dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn horizon(cfg: &RunConfig) -> f64 {
    cfg.horizon.expect("materialized config has a horizon")
}

fn steps(cfg: &RunConfig) -> Result<usize, CliError> {
    let t = horizon(cfg);
    let n = (t / cfg.dt).round() as usize;
    if n == 0 || ((n as f64) * cfg.dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(CliError::Config(format!("T = {t} is not a positive multiple of dt = {}", cfg.dt)));
    }
    Ok(n)
}

fn integrator(cfg: &RunConfig) -> Result<IntegratorConfig, CliError> {
    Ok(IntegratorConfig {
        rel_tol: cfg.tol_rel,
        abs_tol: cfg.tol_abs,
        max_step: cfg.max_step,
        escape_radius: cfg.escape_radius.unwrap_or(f64::INFINITY),
        node_policy: NodePolicy::new(cfg.epsilon_node)?,
        ..Default::default()
    })
}

fn with_delta(space: ConfigSpace, cfg: &RunConfig) -> Result<ConfigSpace, CliError> {
    Ok(match cfg.delta {
        Some(d) => space.with_delta(d)?,
        None => space,
    })
}

/// Propagated wavefunction for the configured source.
fn pde_run(cfg: &RunConfig) -> Result<(PdeRun, ConfigSpace), CliError> {
    match &cfg.source {
        Source::Scenario { name, params, .. } => {
            let s = scenario_by_name(name, &ScenarioParams(params.clone()))?;
            let g = s.grid();
            let points = cfg.grid.unwrap_or(g.points[0]);
            let grid = GridSpec::new(g.extents.clone(), vec![points; g.dim()], g.periodic.clone())?;
            let run = PdeRun::from_scenario(s.as_ref(), &grid, cfg.dt, horizon(cfg))?;
            Ok((run, s.config_space()))
        }
        Source::PdeSpec { path } => {
            let spec = PdeSpec::read(path)?;
            let field = load_field(&spec.field)?;
            let grid = field.grid.clone();
            if cfg.grid.is_some_and(|n| grid.points.iter().any(|&p| p != n)) {
                return Err(CliError::Config(format!(
                    "grid = {} disagrees with the field in {}",
                    cfg.grid.unwrap_or(0),
                    spec.field.display()
                )));
            }
            let ham = match spec.kind.as_str() {
                "dirac1d" => HamiltonianSpec::dirac1d(grid.clone(), spec.hbar, spec.c, spec.mass),
                _ => {
                    let mut h = HamiltonianSpec::schrodinger(grid.clone());
                    h.hbar = spec.hbar;
                    h.masses = vec![spec.mass; grid.dim()];
                    h.components = field.components;
                    h
                }
            };
            let run = PdeRun::execute(field, &ham, cfg.dt, steps(cfg)?)?;
            Ok((run, ConfigSpace::euclidean(grid.dim())))
        }
    }
}

fn provider(cfg: &RunConfig) -> Result<(Arc<dyn CurrentProvider>, ConfigSpace), CliError> {
    match &cfg.source {
        Source::Scenario { name, params, backend: Backend::Exact } => {
            let s = scenario_by_name(name, &ScenarioParams(params.clone()))?;
            let space = with_delta(s.config_space(), cfg)?;
            let p = build_provider(ProviderSource::Scenario { scenario: s, horizon: horizon(cfg) })?;
            Ok((p, space))
        }
        _ => {
            let (run, space) = pde_run(cfg)?;
            let space = with_delta(space, cfg)?;
            let p = build_provider(ProviderSource::Pde { run: Arc::new(run), space: space.clone() })?;
            Ok((p, space))
        }
    }
}

fn propagate(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let (run, _) = pde_run(cfg)?;
    let norms = run.norms();
    let last = run.slices.len() - 1;
    fs::create_dir_all(art.dir.join("fields"))?;
    let mut csv = String::from("step,t,norm,written\n");
    for (k, slice) in run.slices.iter().enumerate() {
        let written = k % cfg.slice_every == 0 || k == last;
        if written {
            let name = format!("fields/slice_{k:06}.bin");
            save_field(&art.dir.join(&name), slice)?;
            art.outputs.push(name);
        }
        let _ = writeln!(csv, "{k},{},{},{}", num(k as f64 * run.dt), num(norms[k]), u8::from(written));
    }
    art.write("norms.csv", &csv)?;
    let drift = norms.iter().map(|n| (n - norms[0]).abs()).fold(0.0, f64::max);
    println!("propagated {last} steps of dt = {}; norm drift {drift:.3e}", run.dt);
    Ok(vec![Check::new("norm_drift", drift <= 1e-8, format!("max |‖ψ_t‖² − ‖ψ_0‖²| = {drift:.3e} (limit 1e-8)"))])
}

fn trajectories(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let (p, space) = provider(cfg)?;
    let icfg = integrator(cfg)?;
    icfg.validate(p.as_ref(), &space)?;
    let ens = sample_initial(p.as_ref(), cfg.n, cfg.seed)?;
    let d = p.dim();
    let k = space.singular().len();
    let mut traj = String::from("traj_id,t");
    (1..=d).for_each(|i| {
        let _ = write!(traj, ",q_{i}");
    });
    traj.push_str(",j0,status\n");
    let mut diag = String::from("traj_id,status,tau,log_density,path");
    (1..=k).for_each(|i| {
        let _ = write!(diag, ",singular_{i}");
    });
    diag.push_str(",accepted_steps,rejected_steps,error\n");
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    for (id, q0) in ens.points.iter().enumerate() {
        match integrate(p.as_ref(), &space, q0, horizon(cfg), &icfg) {
            Ok(tr) => {
                *counts.entry(tr.status.as_str()).or_default() += 1;
                for s in &tr.samples {
                    let _ = write!(traj, "{id},{}", num(s.t));
                    s.q.iter().for_each(|x| {
                        let _ = write!(traj, ",{}", num(*x));
                    });
                    let _ = writeln!(traj, ",{},{}", num(s.j0), tr.status);
                }
                let dg = &tr.diagnostics;
                let tau = tr.tau_estimate.map(num).unwrap_or_default();
                let _ = write!(diag, "{id},{},{tau},{},{}", tr.status, num(dg.log_density), num(dg.path));
                dg.singular.iter().for_each(|v| {
                    let _ = write!(diag, ",{}", num(*v));
                });
                let _ = writeln!(diag, ",{},{},", tr.accepted_steps, tr.rejected_steps);
            }
            Err(e) => {
                *counts.entry(Status::Rejected.as_str()).or_default() += 1;
                let _ = writeln!(
                    diag,
                    "{id},{},,,{},{},\"{}\"",
                    Status::Rejected,
                    ",".repeat(k),
                    0,
                    e.to_string().replace('"', "'")
                );
            }
        }
    }
    art.write("trajectories.csv", &traj)?;
    art.write("diagnostics.csv", &diag)?;
    println!("{:<14} {:>8}", "status", "count");
    for (s, c) in &counts {
        println!("{s:<14} {c:>8}");
    }
    let rejected = counts.get(Status::Rejected.as_str()).copied().unwrap_or(0);
    Ok(vec![Check::new("starts_accepted", rejected == 0, format!("{rejected} of {} starts rejected", cfg.n))])
}

/// Up to three boxes of half-width `r` centred on ensemble points whose
/// boxes stay clear of the singular set.
fn transport_boxes(points: &[Vec<f64>], space: &ConfigSpace, r: f64) -> Result<Vec<BoxRegion>, CliError> {
    let clearance = r * (points[0].len() as f64).sqrt();
    points
        .iter()
        .filter(|q| space.singular().is_empty() || space.min_distance(q) > 2.0 * clearance)
        .take(3)
        .map(|q| BoxRegion::around(q, r).map_err(CliError::from))
        .collect()
}

fn verify(cfg: &RunConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let (p, space) = provider(cfg)?;
    let icfg = integrator(cfg)?;
    let t = horizon(cfg);
    let v = &cfg.verify;
    let ens = sample_initial(p.as_ref(), cfg.n, cfg.seed)?;
    let out = pushforward(&ens, p.as_ref(), &space, t, &icfg)?;
    let r = equivariance_test(&out, p.as_ref(), t, v.bins)?;
    art.write("equivariance.json", &serde_json::to_string_pretty(&r)?)?;
    let d = p.dim();
    let mut bins = String::from("bin");
    for a in 1..=d {
        let _ = write!(bins, ",lower_{a},upper_{a}");
    }
    bins.push_str(",expected,observed\n");
    for (i, b) in r.per_bin.iter().enumerate() {
        let _ = write!(bins, "{i}");
        for (lo, hi) in b.lower.iter().zip(&b.upper) {
            let _ = write!(bins, ",{},{}", num(*lo), num(*hi));
        }
        let _ = writeln!(bins, ",{},{}", num(b.expected), num(b.observed));
    }
    art.write("bins.csv", &bins)?;
    println!("{:<22} {:>12}", "quantity", "value");
    println!("{:<22} {:>12.6}", "L1 distance", r.l1_distance);
    println!("{:<22} {:>12.6}", "KS distance", r.ks_distance);
    println!("{:<22} {:>12.6}", "cemetery fraction", r.cemetery_fraction);
    println!("{:<22} {:>12}", "dominance violations", r.dominance_violations);
    let mut checks = vec![
        Check::new(
            "equivariance_l1",
            r.l1_distance <= v.l1_max,
            format!("L1 = {:.6} (limit {})", r.l1_distance, v.l1_max),
        ),
        Check::new(
            "cemetery_fraction",
            r.cemetery_fraction <= v.cemetery_max,
            format!("cemetery = {:.6} (limit {})", r.cemetery_fraction, v.cemetery_max),
        ),
    ];
    if d <= 2 {
        let boxes = transport_boxes(&ens.points, &space, v.box_half_width)?;
        match transport_check(p.as_ref(), &space, &boxes, t, &icfg, v.mesh) {
            Ok(rows) => {
                let mut csv = String::from("box");
                for a in 1..=d {
                    let _ = write!(csv, ",lower_{a},upper_{a}");
                }
                csv.push_str(",initial_mass,transported_mass,discrepancy,mesh\n");
                for (i, (b, row)) in boxes.iter().zip(&rows).enumerate() {
                    let _ = write!(csv, "{i}");
                    for (lo, hi) in b.lower.iter().zip(&b.upper) {
                        let _ = write!(csv, ",{},{}", num(*lo), num(*hi));
                    }
                    let _ = writeln!(
                        csv,
                        ",{},{},{},{}",
                        num(row.initial_mass),
                        num(row.transported_mass),
                        num(row.discrepancy),
                        row.mesh
                    );
                }
                art.write("transport.csv", &csv)?;
                let worst = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
                println!("{:<22} {:>12.3e}", "transport discrepancy", worst);
                checks.push(Check::new(
                    "transport",
                    worst <= v.transport_max,
                    format!("max discrepancy {worst:.3e} over {} boxes (limit {})", rows.len(), v.transport_max),
                ));
            }
            Err(e) => checks.push(Check::new("transport", false, e.to_string())),
        }
    }
    Ok(checks)
}

fn conditions(cfg: &mut RunConfig, art: &mut Artifacts) -> Result<Vec<Check>, CliError> {
    let (p, space) = provider(cfg)?;
    let t = horizon(cfg);
    let d = p.dim();
    let radius = *cfg.conditions.radius.get_or_insert(1.25 * p.support().half_width() * (d as f64).sqrt());
    let cells = (200_000f64.powf(1.0 / d as f64).floor()).min(800.0);
    let h = *cfg.conditions.h.get_or_insert(2.0 * radius / cells);
    let dt = *cfg.conditions.dt.get_or_insert(t / 20.0);
    let spec = ConditionSpec { epsilon_node: cfg.epsilon_node, ..ConditionSpec::new(h, dt) };
    let r = condition_integrals(p.as_ref(), &space, radius, t, &spec)?;
    art.write("conditions.json", &serde_json::to_string_pretty(&r)?)?;
    println!("{:<16} {:>24}", "integral", "value");
    println!("{:<16} {:>24}", "I_node", num(r.i_node));
    println!("{:<16} {:>24}", "I_escape", num(r.i_escape));
    for (i, x) in r.i_singular.iter().enumerate() {
        println!("{:<16} {:>24}", format!("I_singular_{}", i + 1), num(*x));
    }
    println!("{:<16} {:>24}", "ED bound", num(r.ed_bound));
    let finite = [r.i_node, r.i_escape, r.ed_bound].iter().chain(&r.i_singular).all(|x| x.is_finite());
    Ok(vec![Check::new("integrals_finite", finite, format!("R = {radius}, T = {t}, h = {h}, dt = {dt}"))])
}
