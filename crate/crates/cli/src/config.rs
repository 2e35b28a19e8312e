//! Strict TOML run configuration.
//!
//! Every problem found while reading a file is collected, so one invocation
//! reports all of them. Unknown keys are errors.

use std::path::{Path, PathBuf};

use nlepi::initial::Profile;
use nlepi::kernels::{KernelSpec, WeightSpec};
use nlepi::model::{InfectionFn, ModelParams};
use nlepi::simulator::SimConfig;
use nlepi::spectral::{EigenSolver, MIN_NODES};
use nlepi::thresholds::DEFAULT_EIGEN_NODES;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Numerics {
    pub dx: f64,
    /// `None` picks half the stability limit.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub domain_cap: f64,
    pub tol_vanish: f64,
    pub tol_spread: f64,
    pub eigen_nodes: usize,
    /// Stop a run once it is classified.
    pub early_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Initial {
    pub u: Profile,
    pub v: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub record_every: usize,
    pub snapshots: bool,
    /// Repeat `simulate` at `2·dx` and report the change in the final state.
    pub refinement_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdOptions {
    pub bracket: (f64, f64),
    pub rel_width: f64,
    pub max_expansions: usize,
    pub max_horizon_doublings: usize,
    /// Diffusion direction for `d*`; defaults to the model's `(d1, d2)`.
    pub d1_0: Option<f64>,
    pub d2_0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Auto,
    Dense,
    Lanczos,
    Power,
}

impl From<SolverChoice> for EigenSolver {
    fn from(s: SolverChoice) -> Self {
        match s {
            SolverChoice::Auto => EigenSolver::Auto,
            SolverChoice::Dense => EigenSolver::Dense,
            SolverChoice::Lanczos => EigenSolver::Lanczos,
            SolverChoice::Power => EigenSolver::Power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenOptions {
    /// Interval ends; default `[-h0, h0]`.
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    /// Defaults to `numerics.eigen_nodes`.
    pub nodes: Option<usize>,
    pub solver: SolverChoice,
    /// Write `eigenvector.csv`.
    pub dump: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdeOptions {
    /// Defaults to the sup norms of the initial profiles.
    pub u0: Option<f64>,
    pub v0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelParams,
    pub numerics: Numerics,
    pub initial: Initial,
    pub output: OutputOptions,
    pub thresholds: ThresholdOptions,
    pub eigen: EigenOptions,
    pub ode: OdeOptions,
}

impl RunConfig {
    pub fn sim_config(&self) -> SimConfig {
        let n = &self.numerics;
        let mut c = SimConfig::new(&self.model, n.dx, n.t_end, n.domain_cap);
        if let Some(dt) = n.dt {
            c.dt = dt;
        }
        c.tol_vanish = n.tol_vanish;
        c.tol_spread = n.tol_spread;
        c.record_every = self.output.record_every;
        c.snapshots = self.output.snapshots;
        c
    }
}

/// Reads one table, remembering which keys were consumed.
struct Block<'t> {
    name: &'static str,
    table: Option<&'t Table>,
    seen: Vec<&'static str>,
}

impl<'t> Block<'t> {
    fn new(root: &'t Table, name: &'static str, required: bool, errs: &mut Vec<String>) -> Self {
        let table = match root.get(name) {
            Some(Value::Table(t)) => Some(t),
            Some(other) => {
                errs.push(format!("[{name}] must be a table, got {}", other.type_str()));
                None
            }
            None => {
                if required {
                    errs.push(format!("missing block [{name}]"));
                }
                None
            }
        };
        Self {
            name,
            table,
            seen: Vec::new(),
        }
    }

    fn get(&mut self, key: &'static str) -> Option<&'t Value> {
        self.seen.push(key);
        self.table.and_then(|t| t.get(key))
    }

    fn missing(&self, key: &str, errs: &mut Vec<String>) {
        if self.table.is_some() {
            errs.push(format!("{}.{key} is missing", self.name));
        }
    }

    fn number(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<f64> {
        match self.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                errs.push(format!("{}.{key} must be a number, got {}", self.name, other.type_str()));
                None
            }
        }
    }

    /// Required number; a placeholder stands in when absent so later checks still run.
    fn required_number(&mut self, key: &'static str, errs: &mut Vec<String>) -> f64 {
        let present = self.table.is_some_and(|t| t.contains_key(key));
        match self.number(key, errs) {
            Some(x) => x,
            None => {
                if !present {
                    self.missing(key, errs);
                }
                1.0
            }
        }
    }

    fn count(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<usize> {
        match self.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            other => {
                errs.push(format!(
                    "{}.{key} must be a nonnegative integer, got {other}",
                    self.name
                ));
                None
            }
        }
    }

    fn flag(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<bool> {
        match self.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                errs.push(format!("{}.{key} must be true or false, got {}", self.name, other.type_str()));
                None
            }
        }
    }

    fn text(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<&'t str> {
        match self.get(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                errs.push(format!("{}.{key} must be a string, got {}", self.name, other.type_str()));
                None
            }
        }
    }

    fn typed<T: DeserializeOwned>(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<T> {
        let v = self.get(key)?;
        match v.clone().try_into::<T>() {
            Ok(x) => Some(x),
            Err(e) => {
                errs.push(format!("{}.{key}: {}", self.name, e.message()));
                None
            }
        }
    }

    fn required_typed<T: DeserializeOwned>(&mut self, key: &'static str, errs: &mut Vec<String>) -> Option<T> {
        let present = self.table.is_some_and(|t| t.contains_key(key));
        if !present {
            self.missing(key, errs);
            self.seen.push(key);
            return None;
        }
        self.typed(key, errs)
    }

    fn finish(self, errs: &mut Vec<String>) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.seen.contains(&k.as_str()) {
                    errs.push(format!("unknown key {}.{k}", self.name));
                }
            }
        }
    }
}

const BLOCKS: [&str; 7] = ["model", "numerics", "initial", "output", "thresholds", "eigen", "ode"];

fn read_model(root: &Table, errs: &mut Vec<String>) -> ModelParams {
    let mut b = Block::new(root, "model", true, errs);
    let mut num = |key| b.required_number(key, errs);
    let (d1, d2, a, bb, e, mu, rho, h0) = (
        num("d1"),
        num("d2"),
        num("a"),
        num("b"),
        num("e"),
        num("mu"),
        num("rho"),
        num("h0"),
    );
    let placeholder = KernelSpec::Gaussian { sigma: 1.0 };
    let kernel1: KernelSpec = b.required_typed("kernel1", errs).unwrap_or(placeholder);
    let kernel2: KernelSpec = b.required_typed("kernel2", errs).unwrap_or(placeholder);
    let weight: WeightSpec = b
        .typed("weight", errs)
        .unwrap_or(WeightSpec::KernelTail { of: kernel1 });
    let infection: InfectionFn = b
        .required_typed("infection", errs)
        .unwrap_or(InfectionFn::Saturating {
            alpha: 1.0,
            lambda: 1.0,
        });
    b.finish(errs);
    let params = ModelParams {
        d1,
        d2,
        a,
        b: bb,
        e,
        mu,
        rho,
        h0,
        kernel1,
        kernel2,
        weight,
        infection,
    };
    errs.extend(params.violations());
    params
}

fn read_numerics(root: &Table, h0: f64, errs: &mut Vec<String>) -> Numerics {
    let mut b = Block::new(root, "numerics", true, errs);
    let n = Numerics {
        dx: b.required_number("dx", errs),
        dt: b.number("dt", errs),
        t_end: b.required_number("t_end", errs),
        domain_cap: b.number("domain_cap", errs).unwrap_or(10.0 * h0 + 10.0),
        tol_vanish: b.number("tol_vanish", errs).unwrap_or(1e-4),
        tol_spread: b.number("tol_spread", errs).unwrap_or(0.5),
        eigen_nodes: b.count("eigen_nodes", errs).unwrap_or(DEFAULT_EIGEN_NODES),
        early_stop: b.flag("early_stop", errs).unwrap_or(false),
    };
    b.finish(errs);
    if n.eigen_nodes < MIN_NODES {
        errs.push(format!("numerics.eigen_nodes must be >= {MIN_NODES}, got {}", n.eigen_nodes));
    }
    n
}

fn read_initial(root: &Table, errs: &mut Vec<String>) -> Initial {
    let mut b = Block::new(root, "initial", true, errs);
    let placeholder = Profile::Cosine { amplitude: 1.0 };
    let u = b.required_typed("u", errs).unwrap_or_else(|| placeholder.clone());
    let v = b.required_typed("v", errs).unwrap_or(placeholder);
    b.finish(errs);
    for (name, p) in [("u", &u), ("v", &v)] {
        if let Err(e) = p.validate() {
            errs.push(format!("initial.{name}: {e}"));
        }
    }
    Initial { u, v }
}

fn read_output(root: &Table, errs: &mut Vec<String>) -> OutputOptions {
    let mut b = Block::new(root, "output", false, errs);
    let o = OutputOptions {
        dir: PathBuf::from(b.text("dir", errs).unwrap_or("nlepi-out")),
        record_every: b.count("record_every", errs).unwrap_or(10),
        snapshots: b.flag("snapshots", errs).unwrap_or(false),
        refinement_check: b.flag("refinement_check", errs).unwrap_or(true),
    };
    b.finish(errs);
    o
}

fn read_thresholds(root: &Table, errs: &mut Vec<String>) -> ThresholdOptions {
    let mut b = Block::new(root, "thresholds", false, errs);
    let bracket = match b.typed::<Vec<f64>>("bracket", errs) {
        Some(v) if v.len() == 2 => (v[0], v[1]),
        Some(v) => {
            errs.push(format!("thresholds.bracket must have two entries, got {}", v.len()));
            (0.01, 10.0)
        }
        None => (0.01, 10.0),
    };
    let t = ThresholdOptions {
        bracket,
        rel_width: b.number("rel_width", errs).unwrap_or(1e-2),
        max_expansions: b.count("max_expansions", errs).unwrap_or(8),
        max_horizon_doublings: b.count("max_horizon_doublings", errs).unwrap_or(3),
        d1_0: b.number("d1_0", errs),
        d2_0: b.number("d2_0", errs),
    };
    b.finish(errs);
    if !(t.bracket.0 > 0.0 && t.bracket.1 > t.bracket.0) {
        errs.push(format!(
            "thresholds.bracket must satisfy 0 < lo < hi, got [{}, {}]",
            t.bracket.0, t.bracket.1
        ));
    }
    if !(t.rel_width > 0.0) {
        errs.push(format!("thresholds.rel_width must be > 0, got {}", t.rel_width));
    }
    for (name, v) in [("d1_0", t.d1_0), ("d2_0", t.d2_0)] {
        if let Some(x) = v {
            if !(x > 0.0) {
                errs.push(format!("thresholds.{name} must be > 0, got {x}"));
            }
        }
    }
    t
}

fn read_eigen(root: &Table, errs: &mut Vec<String>) -> EigenOptions {
    let mut b = Block::new(root, "eigen", false, errs);
    let e = EigenOptions {
        l1: b.number("l1", errs),
        l2: b.number("l2", errs),
        nodes: b.count("nodes", errs),
        solver: b.typed("solver", errs).unwrap_or(SolverChoice::Auto),
        dump: b.flag("dump", errs).unwrap_or(false),
    };
    b.finish(errs);
    if let Some(n) = e.nodes {
        if n < MIN_NODES {
            errs.push(format!("eigen.nodes must be >= {MIN_NODES}, got {n}"));
        }
    }
    e
}

fn read_ode(root: &Table, errs: &mut Vec<String>) -> OdeOptions {
    let mut b = Block::new(root, "ode", false, errs);
    let o = OdeOptions {
        u0: b.number("u0", errs),
        v0: b.number("v0", errs),
        t_end: b.number("t_end", errs),
        dt: b.number("dt", errs),
    };
    b.finish(errs);
    for (name, v) in [("u0", o.u0), ("v0", o.v0)] {
        if let Some(x) = v {
            if !(x >= 0.0) {
                errs.push(format!("ode.{name} must be >= 0, got {x}"));
            }
        }
    }
    for (name, v) in [("t_end", o.t_end), ("dt", o.dt)] {
        if let Some(x) = v {
            if !(x > 0.0) {
                errs.push(format!("ode.{name} must be > 0, got {x}"));
            }
        }
    }
    o
}

/// Parses and validates a configuration, collecting every violation.
pub fn parse_str(text: &str) -> Result<RunConfig, Vec<String>> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| vec![e.message().to_string()])?;
    let mut errs = Vec::new();
    for k in root.keys() {
        if !BLOCKS.contains(&k.as_str()) {
            errs.push(format!("unknown block [{k}]"));
        }
    }
    let model = read_model(&root, &mut errs);
    let cfg = RunConfig {
        numerics: read_numerics(&root, model.h0, &mut errs),
        initial: read_initial(&root, &mut errs),
        output: read_output(&root, &mut errs),
        thresholds: read_thresholds(&root, &mut errs),
        eigen: read_eigen(&root, &mut errs),
        ode: read_ode(&root, &mut errs),
        model,
    };
    if errs.is_empty() {
        errs.extend(
            cfg.sim_config()
                .violations(&cfg.model)
                .into_iter()
                .map(|v| format!("numerics: {v}")),
        );
    }
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(errs)
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(vec![format!("cannot read {}: {e}", path.display())]))?;
    parse_str(&text).map_err(CliError::Invalid)
}
