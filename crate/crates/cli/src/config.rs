//! Run configuration: `[section]` / `key = value` files, flag overrides and
//! the materialised [`RunConfig`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bohm_core::{scenario_by_name, ScenarioParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Flag(String),
    File { path: PathBuf, line: usize },
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Flag(name) => write!(f, "flag {name}"),
            Origin::File { path, line } => write!(f, "{}:{line}", path.display()),
        }
    }
}

/// Raw settings keyed by `(section, key)`; later inserts override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    values: BTreeMap<(String, String), (String, Origin)>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "run",
        &[
            "scenario",
            "pde_spec",
            "backend",
            "grid",
            "dt",
            "T",
            "n",
            "seed",
            "tol_rel",
            "tol_abs",
            "max_step",
            "epsilon_node",
            "escape_radius",
            "delta",
            "out",
        ],
    ),
    ("scenario", &[]),
    ("verify", &["bins", "mesh", "box_half_width", "l1_max", "cemetery_max", "transport_max"]),
    ("conditions", &["radius", "h", "dt"]),
    ("propagate", &["slice_every"]),
    ("pde", &["kind", "field", "hbar", "mass", "c"]),
];

fn known_key(section: &str, key: &str) -> Option<bool> {
    SECTIONS.iter().find(|(s, _)| *s == section).map(|(s, keys)| *s == "scenario" || keys.contains(&key))
}

impl Settings {
    /// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut out = Settings::default();
        let mut section = String::from("run");
        let at = |line: usize| Origin::File { path: path.to_path_buf(), line };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config(format!("{}: unterminated section header", at(i + 1))))?
                    .trim();
                if known_key(name, "").is_none() {
                    return Err(CliError::Config(format!("{}: unknown section [{name}]", at(i + 1))));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{}: expected `key = value`, found `{line}`", at(i + 1))))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(CliError::Config(format!("{}: empty key", at(i + 1))));
            }
            if known_key(&section, key) != Some(true) {
                return Err(CliError::Config(format!("{}: unknown key `{key}` in [{section}]", at(i + 1))));
            }
            let slot = (section.clone(), key.to_string());
            if let Some((_, first)) = out.values.get(&slot) {
                return Err(CliError::Config(format!("{}: `{key}` already set at {first}", at(i + 1))));
            }
            out.values.insert(slot, (value.to_string(), at(i + 1)));
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path)
    }

    /// Sets a value from a command-line flag, overriding any file value.
    pub fn set_flag(&mut self, section: &str, key: &str, value: &str, flag: &str) -> Result<(), CliError> {
        if known_key(section, key) != Some(true) {
            return Err(CliError::Config(format!("flag {flag}: unknown key `{key}` in [{section}]")));
        }
        self.values.insert((section.into(), key.into()), (value.into(), Origin::Flag(flag.into())));
        Ok(())
    }

    fn raw(&self, section: &str, key: &str) -> Option<&(String, Origin)> {
        self.values.get(&(section.to_string(), key.to_string()))
    }

    fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some((v, origin)) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::Config(format!("{origin}: invalid value `{v}` for `{key}`: {e}"))),
        }
    }

    fn section<'a>(&'a self, section: &'a str) -> impl Iterator<Item = (&'a str, &'a str, &'a Origin)> + 'a {
        self.values.iter().filter(move |((s, _), _)| s == section).map(|((_, k), (v, o))| (k.as_str(), v.as_str(), o))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Propagate,
    Trajectories,
    Verify,
    Conditions,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Propagate => "propagate",
            Command::Trajectories => "trajectories",
            Command::Verify => "verify",
            Command::Conditions => "conditions",
        }
    }
}

/// How a scenario's current is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Closed-form current.
    Exact,
    /// Current of the propagated wavefunction.
    Pde,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exact" => Ok(Backend::Exact),
            "pde" => Ok(Backend::Pde),
            _ => Err("expected `exact` or `pde`".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Scenario { name: String, params: BTreeMap<String, f64>, backend: Backend },
    PdeSpec { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub bins: usize,
    pub mesh: usize,
    pub box_half_width: f64,
    pub l1_max: f64,
    pub cemetery_max: f64,
    pub transport_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub radius: Option<f64>,
    pub h: Option<f64>,
    pub dt: Option<f64>,
}

/// A complete, serialisable description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub source: Source,
    /// Grid points per axis for PDE runs.
    pub grid: Option<usize>,
    /// PDE time step.
    pub dt: f64,
    pub horizon: Option<f64>,
    pub n: usize,
    pub seed: u64,
    pub tol_rel: f64,
    pub tol_abs: f64,
    pub max_step: f64,
    pub epsilon_node: f64,
    pub escape_radius: Option<f64>,
    pub delta: Option<f64>,
    pub out: PathBuf,
    pub slice_every: usize,
    pub verify: VerifyOptions,
    pub conditions: ConditionOptions,
}

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_N: usize = 1000;
pub const DEFAULT_TOL_REL: f64 = 1e-8;
pub const DEFAULT_TOL_ABS: f64 = 1e-10;
pub const DEFAULT_MAX_STEP: f64 = 0.05;
pub const DEFAULT_EPSILON_NODE: f64 = 1e-9;

impl RunConfig {
    /// Builds a config from settings, filling documented defaults.
    pub fn from_settings(command: Command, s: &Settings) -> Result<Self, CliError> {
        let source = match (s.raw("run", "scenario"), s.raw("run", "pde_spec")) {
            (Some((_, a)), Some((_, b))) => {
                return Err(CliError::Config(format!(
                    "a run takes either a scenario ({a}) or a PDE spec ({b}), not both"
                )))
            }
            (Some((name, _)), None) => {
                let mut params = BTreeMap::new();
                for (k, v, origin) in s.section("scenario") {
                    let x: f64 = v
                        .parse()
                        .map_err(|e| CliError::Config(format!("{origin}: invalid scenario parameter `{k}`: {e}")))?;
                    params.insert(k.to_string(), x);
                }
                Source::Scenario {
                    name: name.clone(),
                    params,
                    backend: s.get("run", "backend")?.unwrap_or(Backend::Exact),
                }
            }
            (None, Some((path, _))) => {
                if let Some((_, o)) = s.raw("run", "backend") {
                    return Err(CliError::Config(format!("{o}: backend applies to scenarios only")));
                }
                Source::PdeSpec { path: PathBuf::from(path) }
            }
            (None, None) => return Err(CliError::Config("no scenario or PDE spec given (use --scenario)".into())),
        };
        let cfg = RunConfig {
            command,
            source,
            grid: s.get("run", "grid")?,
            dt: s.get("run", "dt")?.unwrap_or(DEFAULT_DT),
            horizon: s.get("run", "T")?,
            n: s.get("run", "n")?.unwrap_or(DEFAULT_N),
            seed: s.get("run", "seed")?.unwrap_or(0),
            tol_rel: s.get("run", "tol_rel")?.unwrap_or(DEFAULT_TOL_REL),
            tol_abs: s.get("run", "tol_abs")?.unwrap_or(DEFAULT_TOL_ABS),
            max_step: s.get("run", "max_step")?.unwrap_or(DEFAULT_MAX_STEP),
            epsilon_node: s.get("run", "epsilon_node")?.unwrap_or(DEFAULT_EPSILON_NODE),
            escape_radius: s.get("run", "escape_radius")?,
            delta: s.get("run", "delta")?,
            out: s.get::<String>("run", "out")?.map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
            slice_every: s.get("propagate", "slice_every")?.unwrap_or(10),
            verify: VerifyOptions {
                bins: s.get("verify", "bins")?.unwrap_or(64),
                mesh: s.get("verify", "mesh")?.unwrap_or(16),
                box_half_width: s.get("verify", "box_half_width")?.unwrap_or(0.25),
                l1_max: s.get("verify", "l1_max")?.unwrap_or(0.05),
                cemetery_max: s.get("verify", "cemetery_max")?.unwrap_or(0.01),
                transport_max: s.get("verify", "transport_max")?.unwrap_or(1e-3),
            },
            conditions: ConditionOptions {
                radius: s.get("conditions", "radius")?,
                h: s.get("conditions", "h")?,
                dt: s.get("conditions", "dt")?,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("dt", self.dt),
            ("tol_rel", self.tol_rel),
            ("tol_abs", self.tol_abs),
            ("max_step", self.max_step),
            ("epsilon_node", self.epsilon_node),
            ("box_half_width", self.verify.box_half_width),
        ];
        for (name, v) in positive.iter().chain(
            [("T", self.horizon), ("escape_radius", self.escape_radius), ("delta", self.delta)]
                .iter()
                .filter_map(|(n, v)| v.map(|x| (*n, x)))
                .collect::<Vec<_>>()
                .iter(),
        ) {
            if !(v.is_finite() && *v > 0.0) {
                return Err(CliError::Config(format!("`{name}` must be positive and finite, got {v}")));
            }
        }
        if self.n == 0 && self.command != Command::Propagate && self.command != Command::Conditions {
            return Err(CliError::Config("`n` must be positive".into()));
        }
        if self.slice_every == 0 || self.verify.bins == 0 || self.verify.mesh == 0 {
            return Err(CliError::Config("slice_every, bins and mesh must be positive".into()));
        }
        Ok(())
    }

    /// Fills values that depend on the scenario: horizon, PDE grid size and
    /// (for PDE backends) the escape radius.
    pub fn materialize(&mut self) -> Result<(), CliError> {
        if let Source::Scenario { name, params, backend } = &self.source {
            let s =
                scenario_by_name(name, &ScenarioParams(params.clone())).map_err(|e| CliError::Config(e.to_string()))?;
            self.horizon.get_or_insert(s.horizon());
            let grid = s.grid();
            let uses_grid = *backend == Backend::Pde || self.command == Command::Propagate;
            if uses_grid {
                self.grid.get_or_insert(grid.points[0]);
            }
            if *backend == Backend::Pde {
                self.escape_radius.get_or_insert(0.9 * grid.half_width());
            }
        }
        if self.horizon.is_none() {
            return Err(CliError::Config("`T` is required for PDE-spec runs".into()));
        }
        Ok(())
    }

    /// The config as a settings file; `parse` of the result gives it back.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("# command", &self.command.as_str());
        match &self.source {
            Source::Scenario { name, backend, .. } => {
                kv("scenario", name);
                kv("backend", &format!("{backend:?}").to_lowercase());
            }
            Source::PdeSpec { path } => kv("pde_spec", &path.display()),
        }
        if let Some(g) = self.grid {
            kv("grid", &g);
        }
        kv("dt", &self.dt);
        if let Some(t) = self.horizon {
            kv("T", &t);
        }
        kv("n", &self.n);
        kv("seed", &self.seed);
        kv("tol_rel", &self.tol_rel);
        kv("tol_abs", &self.tol_abs);
        kv("max_step", &self.max_step);
        kv("epsilon_node", &self.epsilon_node);
        if let Some(r) = self.escape_radius {
            kv("escape_radius", &r);
        }
        if let Some(d) = self.delta {
            kv("delta", &d);
        }
        kv("out", &self.out.display());
        let _ = writeln!(s, "\n[propagate]\nslice_every = {}", self.slice_every);
        let v = &self.verify;
        let _ = writeln!(
            s,
            "\n[verify]\nbins = {}\nmesh = {}\nbox_half_width = {}\nl1_max = {}\ncemetery_max = {}\ntransport_max = {}",
            v.bins, v.mesh, v.box_half_width, v.l1_max, v.cemetery_max, v.transport_max
        );
        let _ = writeln!(s, "\n[conditions]");
        for (k, x) in [("radius", self.conditions.radius), ("h", self.conditions.h), ("dt", self.conditions.dt)] {
            if let Some(x) = x {
                let _ = writeln!(s, "{k} = {x}");
            }
        }
        if let Source::Scenario { params, .. } = &self.source {
            if !params.is_empty() {
                let _ = writeln!(s, "\n[scenario]");
                for (k, x) in params {
                    let _ = writeln!(s, "{k} = {x}");
                }
            }
        }
        s
    }
}

/// Initial field and operator of a PDE-spec run.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSpec {
    pub kind: String,
    pub field: PathBuf,
    pub hbar: f64,
    pub mass: f64,
    pub c: f64,
}

impl PdeSpec {
    /// Reads the `[pde]` section of `path`; `field` is relative to the file.
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let s = Settings::read(path)?;
        let kind: String = s.get("pde", "kind")?.unwrap_or_else(|| "schrodinger".into());
        if kind != "schrodinger" && kind != "dirac1d" {
            let origin = s.raw("pde", "kind").map(|(_, o)| o.to_string()).unwrap_or_default();
            return Err(CliError::Config(format!("{origin}: kind must be `schrodinger` or `dirac1d`, got `{kind}`")));
        }
        let field: String = s
            .get("pde", "field")?
            .ok_or_else(|| CliError::Config(format!("{}: [pde] needs `field`", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(Self {
            kind,
            field: base.join(field),
            hbar: s.get("pde", "hbar")?.unwrap_or(1.0),
            mass: s.get("pde", "mass")?.unwrap_or(1.0),
            c: s.get("pde", "c")?.unwrap_or(1.0),
        })
    }
}
