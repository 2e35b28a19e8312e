//! The subcommands. Each returns a serializable report; file outputs go to the given directory.

use std::path::Path;

use nlepi::initial::check_initial_data;
use nlepi::kernels::validate_weight;
use nlepi::model::{check_infection, check_kernels, r0, spreading_sufficient, ModelParams};
use nlepi::ode::{classify_ode_limit, default_ode_dt, default_ode_horizon, integrate_ode, OdeLimit, OdeState};
use nlepi::simulator::{classify, run, Classification, RunStatus, SimConfig, Trajectory};
use nlepi::spectral::{principal_eigenvalue_with, rayleigh_check, EigenProblem};
use nlepi::thresholds::{
    d_star_lower_bound_scaled, find_d_star_with, find_l_star_with, find_mu_star, find_sigma_star,
    vanishing_mu_bound_with, Probe, SearchOptions,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{csv_table, json, snapshots_csv, trajectory_csv, write_atomic};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `R0 ≤ 1`: no finite `L*`.
    Subcritical,
    /// `1 < R0 < (1 + d1/a)(1 + d2/b)`: finite `L*`.
    Threshold,
    /// `R0 ≥ (1 + d1/a)(1 + d2/b)`: `λ_p < 0` on every interval.
    SpreadingSufficient,
}

/// The regime and the `L*` used for classification (`+∞` and `0` outside the threshold regime).
pub fn regime(params: &ModelParams, nodes: usize) -> Result<(Regime, f64), CliError> {
    if r0(params) <= 1.0 {
        Ok((Regime::Subcritical, f64::INFINITY))
    } else if spreading_sufficient(params) {
        Ok((Regime::SpreadingSufficient, 0.0))
    } else {
        Ok((Regime::Threshold, find_l_star_with(params, nodes)?))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FinalState {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
    pub dh: f64,
    pub dg: f64,
}

impl FinalState {
    fn of(traj: &Trajectory) -> Self {
        let s = &traj.final_state;
        let (mass_u, mass_v) = s.masses(&traj.grid);
        Self {
            t: s.t,
            g: s.g,
            h: s.h,
            sup_u: s.sup_u(),
            sup_v: s.sup_v(),
            mass_u,
            mass_v,
            dh: traj.final_rates.0,
            dg: traj.final_rates.1,
        }
    }
}

/// Change in the final state when the run is repeated at twice the grid spacing.
#[derive(Debug, Clone, Serialize)]
pub struct Refinement {
    pub coarse_dx: f64,
    pub coarse_t: f64,
    pub delta_g: f64,
    pub delta_h: f64,
    pub delta_sup_u: f64,
    pub delta_sup_v: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary<'a> {
    pub classification: Classification,
    pub status: RunStatus,
    pub regime: Regime,
    pub r0: f64,
    /// `None` outside the threshold regime.
    pub l_star: Option<f64>,
    pub final_state: FinalState,
    pub refinement: Option<Refinement>,
    /// Why the refinement run was skipped.
    pub refinement_note: Option<String>,
    pub resolved: Resolved,
    pub config: &'a RunConfig,
}

fn run_classified(cfg: &RunConfig, sim: &SimConfig, l_star: f64) -> Result<(Trajectory, Classification), CliError> {
    let mut sim = sim.clone();
    if cfg.numerics.early_stop && l_star.is_finite() {
        sim.early_stop_l_star = Some(l_star);
    }
    let traj = run(&cfg.model, &sim, &cfg.initial.u, &cfg.initial.v)?;
    let class = classify(&traj, l_star, &sim);
    Ok((traj, class))
}

/// Runs the free-boundary simulation and writes `trajectory.csv`, `summary.json` and optionally `snapshots.csv`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<Classification, CliError> {
    let (regime, l_star) = regime(&cfg.model, cfg.numerics.eigen_nodes)?;
    let sim = cfg.sim_config();
    let (traj, class) = run_classified(cfg, &sim, l_star)?;

    let (refinement, refinement_note) = if !cfg.output.refinement_check {
        (None, Some("disabled".to_string()))
    } else {
        let mut coarse = sim.clone();
        coarse.dx = 2.0 * sim.dx;
        coarse.snapshots = false;
        let violations = coarse.violations(&cfg.model);
        if violations.is_empty() {
            let (c, _) = run_classified(cfg, &coarse, l_star)?;
            let (f, s) = (&traj.final_state, &c.final_state);
            (
                Some(Refinement {
                    coarse_dx: coarse.dx,
                    coarse_t: s.t,
                    delta_g: f.g - s.g,
                    delta_h: f.h - s.h,
                    delta_sup_u: f.sup_u() - s.sup_u(),
                    delta_sup_v: f.sup_v() - s.sup_v(),
                }),
                None,
            )
        } else {
            (None, Some(format!("2·dx is not admissible: {}", violations.join("; "))))
        }
    };

    let summary = SimulateSummary {
        classification: class,
        status: traj.status,
        regime,
        r0: r0(&cfg.model),
        l_star: l_star.is_finite().then_some(l_star).filter(|_| regime == Regime::Threshold),
        final_state: FinalState::of(&traj),
        refinement,
        refinement_note,
        resolved: Resolved {
            dt: sim.dt,
            steps: (sim.t_end / sim.dt - 1e-9).ceil().max(0.0) as usize,
        },
        config: cfg,
    };
    write_atomic(&out.join("trajectory.csv"), trajectory_csv(&traj.records).as_bytes())?;
    if sim.snapshots {
        write_atomic(&out.join("snapshots.csv"), snapshots_csv(&traj.snapshots).as_bytes())?;
    }
    write_atomic(&out.join("summary.json"), json(&summary).as_bytes())?;
    if traj.status == RunStatus::Unstable {
        return Err(CliError::Numerical(format!(
            "integration became unstable at t = {}",
            traj.final_state.t
        )));
    }
    Ok(class)
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeReport {
    pub r0: f64,
    pub u0: f64,
    pub v0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub limit: OdeLimit,
    pub final_state: OdeState,
}

/// Integrates the spatially homogeneous system and writes `ode.csv` (`t,u,v`, plus `V` when `R0 = 1`).
pub fn ode(cfg: &RunConfig, out: &Path) -> Result<OdeReport, CliError> {
    let p = &cfg.model;
    let h0 = p.h0;
    let u0 = cfg.ode.u0.unwrap_or_else(|| cfg.initial.u.sup_norm(h0));
    let v0 = cfg.ode.v0.unwrap_or_else(|| cfg.initial.v.sup_norm(h0));
    let t_end = cfg.ode.t_end.unwrap_or_else(|| default_ode_horizon(p));
    let dt = cfg.ode.dt.unwrap_or_else(|| default_ode_dt(p));
    let traj = integrate_ode(p, u0, v0, t_end, dt)?;
    let at_one = (r0(p) - 1.0).abs() <= 1e-12;
    let csv = if at_one {
        let alpha = p.gprime0() / p.a;
        csv_table(&["t", "u", "v", "V"], traj.iter().map(|s| vec![s.t, s.u, s.v, alpha * s.u + s.v]))
    } else {
        csv_table(&["t", "u", "v"], traj.iter().map(|s| vec![s.t, s.u, s.v]))
    };
    write_atomic(&out.join("ode.csv"), csv.as_bytes())?;
    let limit = if u0 > 0.0 && v0 > 0.0 {
        classify_ode_limit(p, u0, v0, t_end)?
    } else {
        OdeLimit::Extinct
    };
    Ok(OdeReport {
        r0: r0(p),
        u0,
        v0,
        t_end,
        dt,
        limit,
        final_state: *traj.last().expect("trajectory has the initial state"),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenReport {
    pub l1: f64,
    pub l2: f64,
    pub nodes: usize,
    pub lambda_p: f64,
    /// `|λ_p + ⟨Sy, y⟩|` for the normalized discrete eigenvector.
    pub rayleigh_residual: f64,
    /// `|variational expression − λ_p|` at the eigenpair.
    pub variational_residual: f64,
    pub min_phi: f64,
}

/// Principal eigenvalue on `[l1, l2]`; with `dump`, also writes `eigenvector.csv` (`x,phi1,phi2`).
pub fn eigen(cfg: &RunConfig, out: &Path, dump: bool) -> Result<EigenReport, CliError> {
    let p = &cfg.model;
    let (l1, l2) = (cfg.eigen.l1.unwrap_or(-p.h0), cfg.eigen.l2.unwrap_or(p.h0));
    let nodes = cfg.eigen.nodes.unwrap_or(cfg.numerics.eigen_nodes);
    let problem = EigenProblem::from_params(p, l1, l2, nodes);
    let res = principal_eigenvalue_with(&problem, cfg.eigen.solver.into())?;
    let variational_residual = rayleigh_check(&problem, &res)?;
    if dump || cfg.eigen.dump {
        let csv = csv_table(
            &["x", "phi1", "phi2"],
            (0..res.nodes.len()).map(|i| vec![res.nodes[i], res.phi1[i], res.phi2[i]]),
        );
        write_atomic(&out.join("eigenvector.csv"), csv.as_bytes())?;
    }
    Ok(EigenReport {
        l1,
        l2,
        nodes,
        lambda_p: res.lambda_p,
        rayleigh_residual: res.rayleigh_residual,
        variational_residual,
        min_phi: res.min_phi(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    LStar,
    DStar,
    MuStar,
    SigmaStar,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdRecord {
    pub target: &'static str,
    pub value: f64,
    /// Final bracket of the simulation-backed searches; `None` for the eigenvalue roots.
    pub bracket: Option<(f64, f64)>,
    pub probes: Vec<Probe>,
    /// Closed-form companion: the `d*` lower bound, or the explicit vanishing bound `μ̲`.
    pub bound: Option<f64>,
}

pub fn thresholds(cfg: &RunConfig, target: Target) -> Result<ThresholdRecord, CliError> {
    let p = &cfg.model;
    let t = &cfg.thresholds;
    let nodes = cfg.numerics.eigen_nodes;
    match target {
        Target::LStar => Ok(ThresholdRecord {
            target: "Lstar",
            value: find_l_star_with(p, nodes)?,
            bracket: None,
            probes: Vec::new(),
            bound: None,
        }),
        Target::DStar => {
            let (d1_0, d2_0) = (t.d1_0.unwrap_or(p.d1), t.d2_0.unwrap_or(p.d2));
            Ok(ThresholdRecord {
                target: "dstar",
                value: find_d_star_with(p, d1_0, d2_0, p.h0, nodes)?,
                bracket: None,
                probes: Vec::new(),
                bound: Some(d_star_lower_bound_scaled(p, d1_0, d2_0)),
            })
        }
        Target::MuStar | Target::SigmaStar => {
            let l_star = find_l_star_with(p, nodes)?;
            let opts = SearchOptions {
                rel_width: t.rel_width,
                max_expansions: t.max_expansions,
                max_horizon_doublings: t.max_horizon_doublings,
                l_star: Some(l_star),
            };
            let sim = cfg.sim_config();
            let (u, v) = (&cfg.initial.u, &cfg.initial.v);
            if target == Target::MuStar {
                let res = find_mu_star(p, &sim, u, v, t.bracket, &opts)?;
                let bound = vanishing_mu_bound_with(p, u, v, l_star, nodes).ok().map(|b| b.mu_bound);
                Ok(ThresholdRecord {
                    target: "mustar",
                    value: res.value,
                    bracket: Some(res.bracket),
                    probes: res.probes,
                    bound,
                })
            } else {
                let res = find_sigma_star(p, &sim, u, v, t.bracket, &opts)?;
                Ok(ThresholdRecord {
                    target: "sigmastar",
                    value: res.value,
                    bracket: Some(res.bracket),
                    probes: res.probes,
                    bound: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub assumption: String,
    pub passed: bool,
    pub detail: String,
}

/// Runs every assumption check on a parsed configuration.
pub fn validate(cfg: &RunConfig) -> Vec<Check> {
    let p = &cfg.model;
    let mut out = Vec::new();
    let mut push = |assumption: &str, failures: Vec<String>| {
        out.push(Check {
            assumption: assumption.to_string(),
            passed: failures.is_empty(),
            detail: failures.join("; "),
        })
    };
    for (name, res) in check_kernels(p) {
        push(&format!("kernel {name}"), res.err().unwrap_or_default());
    }
    let probe = 2.0 * cfg.numerics.domain_cap;
    match validate_weight(&p.weight, probe) {
        Ok(r) => push("boundary weight", r.failures),
        Err(e) => push("boundary weight", vec![e.to_string()]),
    }
    let g = check_infection(p);
    let (g1, g2): (Vec<String>, Vec<String>) = g.failures.into_iter().partition(|f| f.starts_with("G(0)") || f.starts_with("G'("));
    push("infection increasing", g1);
    push("infection saturating", g2);
    push("initial u", check_initial_data(&cfg.initial.u, p.h0));
    push("initial v", check_initial_data(&cfg.initial.v, p.h0));
    out
}
