//! Method-of-lines integration of the free-boundary system
//!
//! ```text
//! u_t = d1 (∫_g^h J1(x−y) u dy − u) − a u + e v
//! v_t = d2 (∫_g^h J2(x−y) v dy − v) − b v + G(u)
//! h'  =  μ ∫_g^h [u W_J1(h−x) + ρ v W(h−x)] dx
//! g'  = −μ ∫_g^h [u W_J1(x−g) + ρ v W(x−g)] dx
//! ```
//!
//! Densities live on a fixed uniform master grid; `g` and `h` are continuous.
//! Integrals over `[g, h]` use the trapezoid rule with fractional end cells, with
//! the density taken as zero at the fronts. Densities and fronts are advanced
//! together by classical RK4.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::initial::Profile;
use crate::kernels::KernelSpec;
use crate::model::ModelParams;
use crate::ode::NEGATIVITY_TOLERANCE;
use crate::quadrature::{geometric_tail_integral, piecewise_simpson};

/// Relative tolerance (in cells) for deciding that a node sits on a front.
const NODE_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub dx: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Half-width of the preallocated grid.
    pub domain_cap: f64,
    /// Record every this many steps (the initial and final states are always recorded).
    pub record_every: usize,
    pub tol_vanish: f64,
    pub tol_spread: f64,
    /// Keep full density profiles at each record.
    pub snapshots: bool,
    /// Hold `g` and `h` fixed (test mode).
    pub freeze_boundaries: bool,
    /// When set to `L*`, stop as soon as the run can be classified.
    pub early_stop_l_star: Option<f64>,
}

impl SimConfig {
    /// Largest admissible `dt`: `0.9 / (d1 + d2 + a + b + e + G'(0))`.
    pub fn stability_limit(params: &ModelParams) -> f64 {
        0.9 / (params.d1 + params.d2 + params.a + params.b + params.e + params.gprime0())
    }

    pub fn default_dt(params: &ModelParams) -> f64 {
        0.5 * Self::stability_limit(params)
    }

    pub fn new(params: &ModelParams, dx: f64, t_end: f64, domain_cap: f64) -> Self {
        Self {
            dx,
            dt: Self::default_dt(params),
            t_end,
            domain_cap,
            record_every: 10,
            tol_vanish: 1e-4,
            tol_spread: 0.5,
            snapshots: false,
            freeze_boundaries: false,
            early_stop_l_star: None,
        }
    }

    pub fn violations(&self, params: &ModelParams) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dx.is_finite() && self.dx > 0.0) {
            v.push(format!("dx must be > 0, got {}", self.dx));
        } else if self.dx > params.h0 / 10.0 * (1.0 + 1e-12) {
            v.push(format!("dx must be <= h0/10 = {}, got {}", params.h0 / 10.0, self.dx));
        }
        let limit = Self::stability_limit(params);
        if !(self.dt.is_finite() && self.dt > 0.0) {
            v.push(format!("dt must be > 0, got {}", self.dt));
        } else if self.dt > limit {
            v.push(format!("dt must be <= {limit} for stability, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            v.push(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if !(self.domain_cap.is_finite() && self.domain_cap > params.h0) {
            v.push(format!("domain_cap must exceed h0 = {}, got {}", params.h0, self.domain_cap));
        }
        if self.record_every == 0 {
            v.push("record_every must be >= 1".into());
        }
        if !(self.tol_vanish > 0.0) {
            v.push(format!("tol_vanish must be > 0, got {}", self.tol_vanish));
        }
        if !(self.tol_spread >= 0.0) {
            v.push(format!("tol_spread must be >= 0, got {}", self.tol_spread));
        }
        v
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let v = self.violations(params);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }
}

/// Uniform master grid `x_i = (i − half)·dx`, `i = 0..=2·half`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub dx: f64,
    pub half: usize,
}

impl Grid {
    pub fn new(dx: f64, cap: f64) -> Self {
        Self {
            dx,
            half: (cap / dx - NODE_SNAP).ceil().max(1.0) as usize,
        }
    }

    pub fn len(&self) -> usize {
        2 * self.half + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.dx
    }

    pub fn x_max(&self) -> f64 {
        self.half as f64 * self.dx
    }

    /// Nodes in the closed interval `[g, h]`.
    pub fn closed_range(&self, g: f64, h: f64) -> Option<(usize, usize)> {
        let lo = ((g / self.dx - NODE_SNAP).ceil() + self.half as f64).max(0.0);
        let hi = ((h / self.dx + NODE_SNAP).floor() + self.half as f64).min((self.len() - 1) as f64);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Nodes strictly inside `(g, h)`; nodes within a tiny fraction of a cell of a front count as on it.
    pub fn open_range(&self, g: f64, h: f64) -> Option<(usize, usize)> {
        let lo = ((g / self.dx + NODE_SNAP).floor() + 1.0 + self.half as f64).max(0.0);
        let hi = ((h / self.dx - NODE_SNAP).ceil() - 1.0 + self.half as f64).min((self.len() - 1) as f64);
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    /// Trapezoid weight of node `i` for `∫_g^h`, including the fractional end cells.
    pub fn weight(&self, i: usize, g: f64, h: f64) -> f64 {
        let x = self.x(i);
        0.5 * ((x - g).clamp(0.0, self.dx) + (h - x).clamp(0.0, self.dx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimState {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    /// Samples on the whole master grid; zero outside `(g, h)`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SimState {
    pub fn zero(grid: &Grid, h0: f64) -> Self {
        Self {
            t: 0.0,
            g: -h0,
            h: h0,
            u: vec![0.0; grid.len()],
            v: vec![0.0; grid.len()],
        }
    }

    pub fn from_profiles(grid: &Grid, h0: f64, u0: &Profile, v0: &Profile) -> Self {
        let mut s = Self::zero(grid, h0);
        if let Some((lo, hi)) = grid.open_range(-h0, h0) {
            for i in lo..=hi {
                let x = grid.x(i);
                s.u[i] = u0.eval(x, h0).max(0.0);
                s.v[i] = v0.eval(x, h0).max(0.0);
            }
        }
        s
    }

    pub fn sup_u(&self) -> f64 {
        self.u.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_v(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }

    /// Trapezoid masses `(∫u, ∫v)` over `[g, h]`.
    pub fn masses(&self, grid: &Grid) -> (f64, f64) {
        let mut mu = 0.0;
        let mut mv = 0.0;
        if let Some((lo, hi)) = grid.closed_range(self.g, self.h) {
            for i in lo..=hi {
                let w = grid.weight(i, self.g, self.h);
                mu += w * self.u[i];
                mv += w * self.v[i];
            }
        }
        (mu, mv)
    }
}

/// `∫_g^h J(x − y) ρ(y) dy` by trapezoid with fractional end cells; `density` sampled on the master grid.
pub fn nonlocal_term(kernel: &KernelSpec, grid: &Grid, g: f64, h: f64, density: &[f64], x: f64) -> f64 {
    let Some((lo, hi)) = grid.closed_range(g, h) else {
        return 0.0;
    };
    (lo..=hi)
        .map(|j| grid.weight(j, g, h) * kernel.eval(x - grid.x(j)) * density[j])
        .sum()
}

/// `(h', g')` from the front law. Fails if an integrand is negative.
pub fn boundary_rates(params: &ModelParams, grid: &Grid, state: &SimState) -> Result<(f64, f64)> {
    rates_at(params, grid, state.g, state.h, &state.u, &state.v, state.t)
}

fn rates_at(
    params: &ModelParams,
    grid: &Grid,
    g: f64,
    h: f64,
    u: &[f64],
    v: &[f64],
    t: f64,
) -> Result<(f64, f64)> {
    let Some((lo, hi)) = grid.closed_range(g, h) else {
        return Ok((0.0, 0.0));
    };
    let mut right = 0.0;
    let mut left = 0.0;
    for j in lo..=hi {
        if u[j] == 0.0 && v[j] == 0.0 {
            continue;
        }
        let x = grid.x(j);
        let w = grid.weight(j, g, h);
        let sr = (h - x).max(0.0);
        let sl = (x - g).max(0.0);
        let ir = u[j] * params.kernel1.survival(sr) + params.rho * v[j] * params.weight.eval(sr);
        let il = u[j] * params.kernel1.survival(sl) + params.rho * v[j] * params.weight.eval(sl);
        if ir < 0.0 || il < 0.0 || ir.is_nan() || il.is_nan() {
            return Err(Error::Unstable {
                t,
                reason: format!("negative front-law integrand at x = {x}"),
            });
        }
        right += w * ir;
        left += w * il;
    }
    Ok((params.mu * right, -params.mu * left))
}

/// Tail form versus double-integral form of the pathogen part of the front law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxComparison {
    /// `μ ∫_g^h ∫_h^∞ J1(x−y) u(x) dy dx`
    pub right_double: f64,
    /// `μ ∫_g^h u(x) W_J1(h−x) dx`
    pub right_tail: f64,
    /// `μ ∫_g^h ∫_{-∞}^g J1(x−y) u(x) dy dx`
    pub left_double: f64,
    /// `μ ∫_g^h u(x) W_J1(x−g) dx`
    pub left_tail: f64,
}

impl FluxComparison {
    pub fn abs_diff(&self) -> f64 {
        (self.right_double - self.right_tail)
            .abs()
            .max((self.left_double - self.left_tail).abs())
    }

    /// Largest difference relative to the flux size (absolute when both fluxes vanish).
    pub fn rel_diff(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        if self.right_tail == 0.0 && self.left_tail == 0.0 {
            return self.abs_diff();
        }
        rel(self.right_double, self.right_tail).max(rel(self.left_double, self.left_tail))
    }
}

/// `∫_{s0}^∞ J(s) ds` by direct quadrature of the density (independent of the closed-form tails).
fn tail_by_quadrature(kernel: &KernelSpec, s0: f64) -> f64 {
    let scale = match *kernel {
        KernelSpec::Uniform { radius } => radius,
        KernelSpec::Gaussian { sigma } => sigma,
        KernelSpec::Laplace { scale } => scale,
        KernelSpec::PowerTail { cutoff, .. } => cutoff,
    };
    let split = s0.max(0.0) + 20.0 * scale;
    let f = |s: f64| kernel.eval(s);
    piecewise_simpson(&f, s0, split, &kernel.breakpoints(), 1e-14) + geometric_tail_integral(&f, split)
}

pub fn flux_equivalence_check(params: &ModelParams, grid: &Grid, state: &SimState) -> FluxComparison {
    let mut out = FluxComparison {
        right_double: 0.0,
        right_tail: 0.0,
        left_double: 0.0,
        left_tail: 0.0,
    };
    let Some((lo, hi)) = grid.closed_range(state.g, state.h) else {
        return out;
    };
    let k = &params.kernel1;
    for j in lo..=hi {
        let u = state.u[j];
        if u == 0.0 {
            continue;
        }
        let x = grid.x(j);
        let wu = grid.weight(j, state.g, state.h) * u * params.mu;
        let sr = (state.h - x).max(0.0);
        let sl = (x - state.g).max(0.0);
        out.right_double += wu * tail_by_quadrature(k, sr);
        out.right_tail += wu * k.survival(sr);
        out.left_double += wu * tail_by_quadrature(k, sl);
        out.left_tail += wu * k.survival(sl);
    }
    out
}

/// `J(m·dx)` for `m = -M..=M`, stored at index `m + M`.
#[derive(Debug, Clone)]
struct KernelTable {
    values: Vec<f64>,
    reach: usize,
}

impl KernelTable {
    fn new(kernel: &KernelSpec, dx: f64, max_reach: usize) -> Self {
        let reach = ((kernel.effective_support() / dx).ceil() as usize).min(max_reach);
        let values = (0..=2 * reach)
            .map(|k| kernel.eval((k as f64 - reach as f64) * dx))
            .collect();
        Self { values, reach }
    }

    /// `Σ_j J((i − j) dx) · wd[j − base]` over `j ∈ [base, base + wd.len())`.
    fn convolve_at(&self, i: usize, base: usize, wd: &[f64]) -> f64 {
        let end = base + wd.len();
        let jlo = i.saturating_sub(self.reach).max(base);
        let jhi = (i + self.reach + 1).min(end);
        if jlo >= jhi {
            return 0.0;
        }
        let t0 = jlo + self.reach - i;
        let tv = &self.values[t0..t0 + (jhi - jlo)];
        let dv = &wd[jlo - base..jhi - base];
        tv.iter().zip(dv).map(|(a, b)| a * b).sum()
    }
}

/// Reusable integrator: grid plus precomputed kernel tables.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub params: ModelParams,
    pub config: SimConfig,
    pub grid: Grid,
    table1: KernelTable,
    table2: KernelTable,
}

struct Derivative {
    du: Vec<f64>,
    dv: Vec<f64>,
    dh: f64,
    dg: f64,
}

impl Simulator {
    pub fn new(params: &ModelParams, config: &SimConfig) -> Result<Self> {
        params.validate()?;
        config.validate(params)?;
        let grid = Grid::new(config.dx, config.domain_cap);
        let max_reach = grid.len();
        Ok(Self {
            params: params.clone(),
            config: config.clone(),
            grid,
            table1: KernelTable::new(&params.kernel1, config.dx, max_reach),
            table2: KernelTable::new(&params.kernel2, config.dx, max_reach),
        })
    }

    pub fn initial_state(&self, u0: &Profile, v0: &Profile) -> SimState {
        SimState::from_profiles(&self.grid, self.params.h0, u0, v0)
    }

    /// Time derivative of the evolving nodes `[elo, ehi]` and of the fronts.
    fn derivative(
        &self,
        g: f64,
        h: f64,
        u: &[f64],
        v: &[f64],
        evolving: Option<(usize, usize)>,
        t: f64,
    ) -> Result<Derivative> {
        if g < -self.grid.x_max() || h > self.grid.x_max() {
            return Err(Error::DomainExhausted { t });
        }
        let p = &self.params;
        let (dh, dg) = if self.config.freeze_boundaries {
            (0.0, 0.0)
        } else {
            rates_at(p, &self.grid, g, h, u, v, t)?
        };
        let Some((elo, ehi)) = evolving else {
            return Ok(Derivative {
                du: Vec::new(),
                dv: Vec::new(),
                dh,
                dg,
            });
        };
        let (qlo, qhi) = self.grid.closed_range(g, h).unwrap_or((elo, ehi));
        let (qlo, qhi) = (qlo.min(elo), qhi.max(ehi));
        let weights: Vec<f64> = (qlo..=qhi).map(|j| self.grid.weight(j, g, h)).collect();
        let wu: Vec<f64> = (qlo..=qhi).zip(&weights).map(|(j, w)| w * u[j]).collect();
        let wv: Vec<f64> = (qlo..=qhi).zip(&weights).map(|(j, w)| w * v[j]).collect();
        let n = ehi - elo + 1;
        let mut du = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        for i in elo..=ehi {
            let n1 = self.table1.convolve_at(i, qlo, &wu);
            let n2 = self.table2.convolve_at(i, qlo, &wv);
            du.push(p.d1 * (n1 - u[i]) - p.a * u[i] + p.e * v[i]);
            dv.push(p.d2 * (n2 - v[i]) - p.b * v[i] + p.infection.eval(u[i]));
        }
        Ok(Derivative { du, dv, dh, dg })
    }

    /// One RK4 step of length `dt`.
    pub fn step_by(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let evolving = self.grid.open_range(state.g, state.h);
        let t = state.t;
        let stage = |base: &SimState, k: &Derivative, c: f64| -> SimState {
            let mut s = base.clone();
            if let Some((elo, _)) = evolving {
                for (idx, (du, dv)) in k.du.iter().zip(&k.dv).enumerate() {
                    s.u[elo + idx] += c * dt * du;
                    s.v[elo + idx] += c * dt * dv;
                }
            }
            s.g += c * dt * k.dg;
            s.h += c * dt * k.dh;
            s
        };
        let eval = |s: &SimState, tt: f64| self.derivative(s.g, s.h, &s.u, &s.v, evolving, tt);

        let k1 = eval(state, t)?;
        let s2 = stage(state, &k1, 0.5);
        let k2 = eval(&s2, t + 0.5 * dt)?;
        let s3 = stage(state, &k2, 0.5);
        let k3 = eval(&s3, t + 0.5 * dt)?;
        let s4 = stage(state, &k3, 1.0);
        let k4 = eval(&s4, t + dt)?;

        let mut next = state.clone();
        next.t = t + dt;
        let t1 = next.t;
        if let Some((elo, _)) = evolving {
            for idx in 0..k1.du.len() {
                let i = elo + idx;
                let nu = state.u[i] + dt / 6.0 * (k1.du[idx] + 2.0 * k2.du[idx] + 2.0 * k3.du[idx] + k4.du[idx]);
                let nv = state.v[i] + dt / 6.0 * (k1.dv[idx] + 2.0 * k2.dv[idx] + 2.0 * k3.dv[idx] + k4.dv[idx]);
                next.u[i] = clamp_density(nu, t1, "u", self.grid.x(i))?;
                next.v[i] = clamp_density(nv, t1, "v", self.grid.x(i))?;
            }
        }
        next.h = state.h + dt / 6.0 * (k1.dh + 2.0 * k2.dh + 2.0 * k3.dh + k4.dh);
        next.g = state.g + dt / 6.0 * (k1.dg + 2.0 * k2.dg + 2.0 * k3.dg + k4.dg);
        if next.g.is_nan() || next.h.is_nan() {
            return Err(Error::Unstable {
                t: t1,
                reason: "front position is NaN".into(),
            });
        }
        if next.g < -self.grid.x_max() || next.h > self.grid.x_max() {
            return Err(Error::DomainExhausted { t: t1 });
        }
        Ok(next)
    }

    pub fn step(&self, state: &SimState) -> Result<SimState> {
        self.step_by(state, self.config.dt)
    }

    pub fn rates(&self, state: &SimState) -> Result<(f64, f64)> {
        boundary_rates(&self.params, &self.grid, state)
    }

    fn record(&self, state: &SimState) -> Record {
        let (mass_u, mass_v) = state.masses(&self.grid);
        Record {
            t: state.t,
            g: state.g,
            h: state.h,
            sup_u: state.sup_u(),
            sup_v: state.sup_v(),
            mass_u,
            mass_v,
        }
    }

    fn snapshot(&self, state: &SimState) -> Snapshot {
        let (lo, hi) = self.grid.closed_range(state.g, state.h).unwrap_or((1, 0));
        Snapshot {
            t: state.t,
            first_index: lo,
            x: (lo..=hi).map(|i| self.grid.x(i)).collect(),
            u: state.u.get(lo..=hi).map(<[f64]>::to_vec).unwrap_or_default(),
            v: state.v.get(lo..=hi).map(<[f64]>::to_vec).unwrap_or_default(),
        }
    }

    /// Integrates from `state` to `config.t_end`, stopping early on a decided classification when requested.
    pub fn run_from(&self, state: SimState) -> Result<Trajectory> {
        let cfg = &self.config;
        let steps = (cfg.t_end / cfg.dt - 1e-9).ceil().max(0.0) as usize;
        let mut traj = Trajectory {
            grid: self.grid,
            records: vec![self.record(&state)],
            snapshots: Vec::new(),
            final_rates: self.rates(&state)?,
            final_state: state,
            status: RunStatus::Completed,
        };
        if cfg.snapshots {
            traj.snapshots.push(self.snapshot(&traj.final_state));
        }
        for k in 0..steps {
            let t1 = ((k + 1) as f64 * cfg.dt).min(cfg.t_end);
            let dt = t1 - traj.final_state.t;
            match self.step_by(&traj.final_state, dt) {
                Ok(next) => traj.final_state = next,
                Err(Error::DomainExhausted { .. }) => {
                    traj.status = RunStatus::DomainExhausted;
                    break;
                }
                Err(Error::Unstable { .. }) => {
                    traj.status = RunStatus::Unstable;
                    break;
                }
                Err(e) => return Err(e),
            }
            let last = k + 1 == steps;
            if (k + 1) % cfg.record_every == 0 || last {
                traj.records.push(self.record(&traj.final_state));
                if cfg.snapshots {
                    traj.snapshots.push(self.snapshot(&traj.final_state));
                }
                if let Some(l_star) = cfg.early_stop_l_star {
                    if !last {
                        traj.final_rates = self.rates(&traj.final_state)?;
                        if classify(&traj, l_star, cfg) != Classification::Undecided {
                            traj.status = RunStatus::StoppedEarly;
                            break;
                        }
                    }
                }
            }
        }
        if traj.status != RunStatus::Completed || traj.records.last().map(|r| r.t) != Some(traj.final_state.t) {
            traj.records.push(self.record(&traj.final_state));
            traj.records.dedup_by(|a, b| a.t == b.t);
        }
        traj.final_rates = self.rates(&traj.final_state)?;
        Ok(traj)
    }
}

fn clamp_density(x: f64, t: f64, name: &str, at: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Unstable {
            t,
            reason: format!("{name} is NaN at x = {at}"),
        });
    }
    if x < -NEGATIVITY_TOLERANCE {
        return Err(Error::Unstable {
            t,
            reason: format!("{name} = {x} went negative at x = {at}"),
        });
    }
    Ok(x.max(0.0))
}

/// One recorded row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub t: f64,
    pub g: f64,
    pub h: f64,
    pub sup_u: f64,
    pub sup_v: f64,
    pub mass_u: f64,
    pub mass_v: f64,
}

/// Densities on the closed active range at a record time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    /// Master-grid index of `x[0]`.
    pub first_index: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    /// Value of `u` at master node `i` (zero outside the stored range).
    pub fn u_at(&self, i: usize) -> f64 {
        i.checked_sub(self.first_index)
            .and_then(|k| self.u.get(k))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn v_at(&self, i: usize) -> f64 {
        i.checked_sub(self.first_index)
            .and_then(|k| self.v.get(k))
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    StoppedEarly,
    DomainExhausted,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub grid: Grid,
    pub records: Vec<Record>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
    /// `(h', g')` at the final state.
    pub final_rates: (f64, f64),
    pub status: RunStatus,
}

pub fn step(params: &ModelParams, config: &SimConfig, state: &SimState) -> Result<SimState> {
    Simulator::new(params, config)?.step(state)
}

pub fn run(params: &ModelParams, config: &SimConfig, u0: &Profile, v0: &Profile) -> Result<Trajectory> {
    let sim = Simulator::new(params, config)?;
    let state = sim.initial_state(u0, v0);
    sim.run_from(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Spreading,
    Vanishing,
    Undecided,
}

/// Spreading once `h − g > 2L* + tol_spread` at any record; vanishing when at the final time the
/// densities and the front speeds are below `tol_vanish` and `h − g ≤ 2L*`.
pub fn classify(trajectory: &Trajectory, l_star: f64, config: &SimConfig) -> Classification {
    let threshold = 2.0 * l_star + config.tol_spread;
    let fin = &trajectory.final_state;
    if fin.h - fin.g > threshold || trajectory.records.iter().any(|r| r.h - r.g > threshold) {
        return Classification::Spreading;
    }
    let (dh, dg) = trajectory.final_rates;
    if fin.sup_u() + fin.sup_v() < config.tol_vanish
        && dh - dg < config.tol_vanish
        && fin.h - fin.g <= 2.0 * l_star
    {
        return Classification::Vanishing;
    }
    Classification::Undecided
}

/// Final profiles of the fixed-interval problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedBoundaryResult {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Sup norm of the right-hand side at the final profiles.
    pub residual: f64,
}

impl FixedBoundaryResult {
    /// Linear interpolation of `(u, v)` at `x`.
    pub fn value_at(&self, x: f64) -> (f64, f64) {
        let n = self.x.len();
        let k = self.x.partition_point(|&p| p <= x).clamp(1, n - 1);
        let s = ((x - self.x[k - 1]) / (self.x[k] - self.x[k - 1])).clamp(0.0, 1.0);
        (
            self.u[k - 1] + s * (self.u[k] - self.u[k - 1]),
            self.v[k - 1] + s * (self.v[k] - self.v[k - 1]),
        )
    }
}

/// The nonlocal reaction system on the fixed interval `[l1, l2]` (no front motion, no boundary condition).
#[derive(Debug, Clone)]
pub struct FixedBoundaryProblem {
    params: ModelParams,
    pub x: Vec<f64>,
    weights: Vec<f64>,
    table1: KernelTable,
    table2: KernelTable,
}

impl FixedBoundaryProblem {
    pub fn new(params: &ModelParams, l1: f64, l2: f64, dx: f64) -> Result<Self> {
        params.validate()?;
        if !(l1 < l2) {
            return Err(invalid(format!("interval must satisfy L1 < L2, got [{l1}, {l2}]")));
        }
        if !(dx > 0.0) {
            return Err(invalid(format!("dx must be > 0, got {dx}")));
        }
        let n = ((l2 - l1) / dx).round().max(1.0) as usize + 1;
        let h = (l2 - l1) / (n - 1) as f64;
        let x: Vec<f64> = (0..n).map(|i| if i == n - 1 { l2 } else { l1 + i as f64 * h }).collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Self {
            params: params.clone(),
            x,
            weights,
            table1: KernelTable::new(&params.kernel1, h, n),
            table2: KernelTable::new(&params.kernel2, h, n),
        })
    }

    pub fn rhs(&self, u: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let wu: Vec<f64> = self.weights.iter().zip(u).map(|(w, a)| w * a).collect();
        let wv: Vec<f64> = self.weights.iter().zip(v).map(|(w, a)| w * a).collect();
        let n = self.x.len();
        let mut du = Vec::with_capacity(n);
        let mut dv = Vec::with_capacity(n);
        for i in 0..n {
            let n1 = self.table1.convolve_at(i, 0, &wu);
            let n2 = self.table2.convolve_at(i, 0, &wv);
            du.push(p.d1 * (n1 - u[i]) - p.a * u[i] + p.e * v[i]);
            dv.push(p.d2 * (n2 - v[i]) - p.b * v[i] + p.infection.eval(u[i]));
        }
        (du, dv)
    }

    /// Sup norm of the time derivative at `(u, v)`.
    pub fn residual(&self, u: &[f64], v: &[f64]) -> f64 {
        let (du, dv) = self.rhs(u, v);
        du.iter().chain(&dv).fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn run(
        &self,
        u0: &dyn Fn(f64) -> f64,
        v0: &dyn Fn(f64) -> f64,
        t_end: f64,
        dt: f64,
    ) -> Result<FixedBoundaryResult> {
        let limit = SimConfig::stability_limit(&self.params);
        if !(dt > 0.0 && dt <= limit) {
            return Err(invalid(format!("dt must lie in (0, {limit}], got {dt}")));
        }
        let mut u: Vec<f64> = self.x.iter().map(|&x| u0(x).max(0.0)).collect();
        let mut v: Vec<f64> = self.x.iter().map(|&x| v0(x).max(0.0)).collect();
        let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
        let axpy = |a: &[f64], c: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
        let mut t = 0.0;
        for k in 0..steps {
            let t1 = ((k + 1) as f64 * dt).min(t_end);
            let h = t1 - t;
            let (k1u, k1v) = self.rhs(&u, &v);
            let (k2u, k2v) = self.rhs(&axpy(&u, 0.5 * h, &k1u), &axpy(&v, 0.5 * h, &k1v));
            let (k3u, k3v) = self.rhs(&axpy(&u, 0.5 * h, &k2u), &axpy(&v, 0.5 * h, &k2v));
            let (k4u, k4v) = self.rhs(&axpy(&u, h, &k3u), &axpy(&v, h, &k3v));
            for i in 0..u.len() {
                let nu = u[i] + h / 6.0 * (k1u[i] + 2.0 * k2u[i] + 2.0 * k3u[i] + k4u[i]);
                let nv = v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
                u[i] = clamp_density(nu, t1, "u", self.x[i])?;
                v[i] = clamp_density(nv, t1, "v", self.x[i])?;
            }
            t = t1;
        }
        let residual = self.residual(&u, &v);
        Ok(FixedBoundaryResult {
            x: self.x.clone(),
            u,
            v,
            residual,
        })
    }
}

pub fn fixed_boundary_run(
    params: &ModelParams,
    l1: f64,
    l2: f64,
    u0: &dyn Fn(f64) -> f64,
    v0: &dyn Fn(f64) -> f64,
    t_end: f64,
    dx: f64,
    dt: f64,
) -> Result<FixedBoundaryResult> {
    FixedBoundaryProblem::new(params, l1, l2, dx)?.run(u0, v0, t_end, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::params;

    #[test]
    fn grid_ranges_and_weights() {
        let grid = Grid::new(0.1, 2.0);
        assert_eq!(grid.len(), 41);
        let (lo, hi) = grid.closed_range(-1.0, 1.0).unwrap();
        assert!((grid.x(lo) + 1.0).abs() < 1e-12 && (grid.x(hi) - 1.0).abs() < 1e-12);
        let (olo, ohi) = grid.open_range(-1.0, 1.0).unwrap();
        assert_eq!((olo, ohi), (lo + 1, hi - 1));
        let (lo, hi) = grid.closed_range(-0.95, 1.03).unwrap();
        assert!((grid.x(lo) + 0.9).abs() < 1e-12 && (grid.x(hi) - 1.0).abs() < 1e-12);
        assert_eq!(grid.open_range(-0.95, 1.03), Some((lo, hi)));
        let total: f64 = (lo..=hi).map(|i| grid.weight(i, -0.95, 1.03)).sum();
        // the fractional end cells interpolate to zero at the fronts
        assert!((total - (0.025 + 1.9 + 0.015)).abs() < 1e-12);
        assert_eq!(grid.open_range(0.01, 0.02), None);
        assert!((grid.weight(grid.half, -0.03, 0.04) - 0.035).abs() < 1e-15);
    }

    #[test]
    fn nonlocal_term_examples() {
        let grid = Grid::new(0.01, 3.0);
        let k = KernelSpec::Uniform { radius: 1.0 };
        let zero = vec![0.0; grid.len()];
        assert_eq!(nonlocal_term(&k, &grid, -1.0, 1.0, &zero, 0.3), 0.0);
        let ones = vec![1.0; grid.len()];
        let half = nonlocal_term(&k, &grid, -1.0, 1.0, &ones, 1.0);
        assert!((half - 0.5).abs() < 1e-2, "{half}");
        let gauss = KernelSpec::Gaussian { sigma: 0.2 };
        let full = nonlocal_term(&gauss, &grid, -2.9, 2.9, &ones, 0.05);
        assert!((full - 1.0).abs() < 1e-6, "{full}");
    }

    #[test]
    fn front_rate_for_uniform_kernel() {
        // ∫_{-1}^{1} W_J(1 − x) dx = ∫_0^1 (1 − s)/2 ds = 0.25
        let mut p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        p.kernel1 = KernelSpec::Uniform { radius: 1.0 };
        let grid = Grid::new(0.01, 3.0);
        let mut s = SimState::zero(&grid, 1.0);
        let (lo, hi) = grid.closed_range(-1.0, 1.0).unwrap();
        for i in lo..=hi {
            s.u[i] = 1.0;
        }
        let (dh, dg) = boundary_rates(&p, &grid, &s).unwrap();
        assert!((dh - 0.25).abs() < 1e-10, "{dh}");
        assert!((dh + dg).abs() < 1e-12);
        let zero = SimState::zero(&grid, 1.0);
        assert_eq!(boundary_rates(&p, &grid, &zero).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn zero_state_is_stationary() {
        let p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        let cfg = SimConfig::new(&p, 0.05, 1.0, 4.0);
        let sim = Simulator::new(&p, &cfg).unwrap();
        let s0 = SimState::zero(&sim.grid, p.h0);
        let s1 = sim.step(&s0).unwrap();
        assert_eq!((s1.g, s1.h), (s0.g, s0.h));
        assert!(s1.u.iter().chain(&s1.v).all(|&x| x == 0.0));
    }

    #[test]
    fn frozen_equilibrium_is_stationary_in_the_interior() {
        let mut p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        p.h0 = 15.0;
        let mut cfg = SimConfig::new(&p, 0.05, 1.0, 16.0);
        cfg.freeze_boundaries = true;
        let sim = Simulator::new(&p, &cfg).unwrap();
        let mut s = SimState::zero(&sim.grid, p.h0);
        let (lo, hi) = sim.grid.open_range(-15.0, 15.0).unwrap();
        for i in lo..=hi {
            s.u[i] = 1.0;
            s.v[i] = 1.0;
        }
        let next = sim.step(&s).unwrap();
        let (clo, chi) = sim.grid.closed_range(-5.0, 5.0).unwrap();
        for i in clo..=chi {
            assert!((next.u[i] - 1.0).abs() < 1e-8 && (next.v[i] - 1.0).abs() < 1e-8);
        }
        assert_eq!((next.g, next.h), (-15.0, 15.0));
    }

    #[test]
    fn symmetric_data_stays_symmetric() {
        let p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        let mut cfg = SimConfig::new(&p, 0.05, 3.0, 6.0);
        cfg.snapshots = true;
        let t = run(&p, &cfg, &Profile::Cosine { amplitude: 1.0 }, &Profile::Bump { amplitude: 0.5 }).unwrap();
        for r in &t.records {
            assert!((r.g + r.h).abs() < 1e-10, "{r:?}");
        }
        let fin = &t.final_state;
        let n = t.grid.len();
        for i in 0..n {
            assert!((fin.u[i] - fin.u[n - 1 - i]).abs() < 1e-10);
        }
        assert!(t.records.windows(2).all(|w| w[1].t > w[0].t && w[1].h >= w[0].h && w[1].g <= w[0].g));
        assert!(t.final_rates.0 > 0.0);
    }

    #[test]
    fn flux_forms_agree() {
        let mut p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        let grid = Grid::new(0.02, 3.0);
        let mut s = SimState::zero(&grid, 1.0);
        let (lo, hi) = grid.open_range(-1.0, 1.0).unwrap();
        for i in lo..=hi {
            s.u[i] = 1.0 + 0.5 * (7.0 * grid.x(i)).sin();
        }
        for kernel in [
            KernelSpec::Uniform { radius: 1.0 },
            KernelSpec::Gaussian { sigma: 0.6 },
            KernelSpec::Laplace { scale: 0.4 },
            KernelSpec::PowerTail { exponent: 1.5, cutoff: 0.3 },
        ] {
            p.kernel1 = kernel;
            let c = flux_equivalence_check(&p, &grid, &s);
            assert!(c.rel_diff() < 1e-6, "{kernel}: {c:?}");
        }
    }

    #[test]
    fn config_violations_are_collected() {
        let p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        let mut cfg = SimConfig::new(&p, 0.5, 1.0, 0.5);
        cfg.dt = 1.0;
        let v = cfg.violations(&p);
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn fixed_boundary_decay_and_persistence() {
        let p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        let dt = SimConfig::default_dt(&p);
        let one = |_: f64| 1.0;
        let small = fixed_boundary_run(&p, -0.2, 0.2, &one, &one, 200.0, 0.02, dt).unwrap();
        let sup = small.u.iter().chain(&small.v).fold(0.0f64, |m, &x| m.max(x));
        assert!(sup < 1e-4, "{sup}");
        let half = |x: f64| 0.5 * (1.0 - (x / 10.0).powi(2)).max(0.0);
        let big = fixed_boundary_run(&p, -10.0, 10.0, &half, &half, 150.0, 0.1, dt).unwrap();
        let (um, vm) = big.value_at(0.0);
        assert!((um - 1.0).abs() < 0.05 && (vm - 1.0).abs() < 0.05, "{um} {vm}");
        assert!(big.u.iter().all(|&x| x > 0.0 && x <= 1.0 + 1e-9));
        assert!(big.residual < 1e-5, "{}", big.residual);
    }
}
