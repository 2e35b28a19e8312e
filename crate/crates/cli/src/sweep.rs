//! Parameter sweeps: one classified run per grid value, executed in parallel.

use std::path::{Path, PathBuf};

use nlepi::initial::Profile;
use nlepi::model::InfectionFn;
use nlepi::simulator::{classify, run, RunStatus};
use serde::{Deserialize, Serialize};

use crate::commands::regime;
use crate::config::{parse_config, RunConfig};
use crate::output::{float, write_atomic};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// A model constant (`d1`, `mu`, `alpha`, …) or `sigma`, which scales both initial profiles.
    pub parameter: String,
    pub values: Vec<f64>,
    /// Run configuration, relative to the spec file.
    pub template: PathBuf,
    /// Result CSV.
    pub output: PathBuf,
}

const PARAMETERS: [&str; 11] = ["d1", "d2", "a", "b", "e", "mu", "rho", "h0", "alpha", "lambda", "sigma"];

impl SweepSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !PARAMETERS.contains(&self.parameter.as_str()) {
            v.push(format!(
                "parameter must be one of {}, got {:?}",
                PARAMETERS.join(", "),
                self.parameter
            ));
        }
        if self.values.is_empty() {
            v.push("values must be nonempty".into());
        }
        if self.values.iter().any(|x| !x.is_finite()) {
            v.push("values must be finite".into());
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            v.push("values must be strictly monotone".into());
        }
        v
    }
}

pub fn parse_spec(path: &Path) -> Result<(SweepSpec, RunConfig), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(vec![format!("cannot read {}: {e}", path.display())]))?;
    let spec: SweepSpec = toml::from_str(&text).map_err(|e| CliError::Invalid(vec![e.message().to_string()]))?;
    let v = spec.violations();
    if !v.is_empty() {
        return Err(CliError::Invalid(v));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let template = parse_config(&base.join(&spec.template))?;
    Ok((spec, template))
}

/// One sweep row. `error` is set when the run could not be configured or integrated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub classification: Option<String>,
    pub status: Option<String>,
    pub t_final: f64,
    pub width: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub error: Option<String>,
}

fn apply(template: &RunConfig, parameter: &str, value: f64) -> RunConfig {
    let mut c = template.clone();
    let m = &mut c.model;
    match parameter {
        "d1" => m.d1 = value,
        "d2" => m.d2 = value,
        "a" => m.a = value,
        "b" => m.b = value,
        "e" => m.e = value,
        "mu" => m.mu = value,
        "rho" => m.rho = value,
        "h0" => m.h0 = value,
        "alpha" | "lambda" => {
            let InfectionFn::Saturating { alpha, lambda } = m.infection;
            m.infection = if parameter == "alpha" {
                InfectionFn::Saturating { alpha: value, lambda }
            } else {
                InfectionFn::Saturating { alpha, lambda: value }
            };
        }
        "sigma" => {
            c.initial.u = Profile::scaled(&c.initial.u, value);
            c.initial.v = Profile::scaled(&c.initial.v, value);
        }
        _ => unreachable!("parameter names are validated"),
    }
    c
}

fn run_one(template: &RunConfig, parameter: &str, value: f64) -> SweepRow {
    let failed = |e: String| SweepRow {
        value,
        classification: None,
        status: None,
        t_final: f64::NAN,
        width: f64::NAN,
        sup_u: f64::NAN,
        sup_v: f64::NAN,
        error: Some(e),
    };
    let cfg = apply(template, parameter, value);
    let mut problems = cfg.model.violations();
    let mut sim = cfg.sim_config();
    sim.snapshots = false;
    problems.extend(sim.violations(&cfg.model));
    if !problems.is_empty() {
        return failed(problems.join("; "));
    }
    let l_star = match regime(&cfg.model, cfg.numerics.eigen_nodes) {
        Ok((_, l)) => l,
        Err(e) => return failed(e.to_string()),
    };
    if cfg.numerics.early_stop && l_star.is_finite() {
        sim.early_stop_l_star = Some(l_star);
    }
    match run(&cfg.model, &sim, &cfg.initial.u, &cfg.initial.v) {
        Ok(traj) => {
            let s = &traj.final_state;
            SweepRow {
                value,
                classification: Some(label(&classify(&traj, l_star, &sim))),
                status: Some(label(&traj.status)),
                t_final: s.t,
                width: s.h - s.g,
                sup_u: s.sup_u(),
                sup_v: s.sup_v(),
                error: (traj.status == RunStatus::Unstable).then(|| "integration became unstable".to_string()),
            }
        }
        Err(e) => failed(e.to_string()),
    }
}

fn label<T: Serialize>(x: &T) -> String {
    serde_json::to_value(x)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

/// Runs the grid on at most `workers` threads; rows come back in grid order.
pub fn run_sweep(spec: &SweepSpec, template: &RunConfig, workers: usize) -> Result<Vec<SweepRow>, CliError> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        spec.values
            .par_iter()
            .map(|&v| run_one(template, &spec.parameter, v))
            .collect()
    }))
}

pub fn rows_csv(parameter: &str, rows: &[SweepRow]) -> String {
    let mut s = format!("{parameter},classification,status,t_final,width,sup_u,sup_v,error\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            float(r.value),
            r.classification.as_deref().unwrap_or(""),
            r.status.as_deref().unwrap_or(""),
            float(r.t_final),
            float(r.width),
            float(r.sup_u),
            float(r.sup_v),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
        ));
    }
    s
}

pub fn write_rows(path: &Path, parameter: &str, rows: &[SweepRow]) -> Result<(), CliError> {
    write_atomic(path, rows_csv(parameter, rows).as_bytes())?;
    Ok(())
}
