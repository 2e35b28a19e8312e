//! The spatially homogeneous system `u' = -a u + e v`, `v' = -b v + G(u)`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::model::{equilibrium, r0, ModelParams};

/// Values below this are treated as round-off and clamped to zero.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeState {
    pub t: f64,
    pub u: f64,
    pub v: f64,
}

fn rhs(params: &ModelParams, u: f64, v: f64) -> (f64, f64) {
    (
        -params.a * u + params.e * v,
        -params.b * v + params.infection.eval(u),
    )
}

fn rk4_step(params: &ModelParams, u: f64, v: f64, dt: f64) -> (f64, f64) {
    let (k1u, k1v) = rhs(params, u, v);
    let (k2u, k2v) = rhs(params, u + 0.5 * dt * k1u, v + 0.5 * dt * k1v);
    let (k3u, k3v) = rhs(params, u + 0.5 * dt * k2u, v + 0.5 * dt * k2v);
    let (k4u, k4v) = rhs(params, u + dt * k3u, v + dt * k3v);
    (
        u + dt / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )
}

fn clamp(t: f64, x: f64, name: &str) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Unstable {
            t,
            reason: format!("{name} is NaN"),
        });
    }
    if x < -NEGATIVITY_TOLERANCE {
        return Err(Error::Unstable {
            t,
            reason: format!("{name} = {x} went negative"),
        });
    }
    Ok(x.max(0.0))
}

/// Classical RK4 from `(u0, v0)` to `t_end`. The last step is shortened to land on `t_end`.
pub fn integrate_ode(
    params: &ModelParams,
    u0: f64,
    v0: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<OdeState>> {
    if !(u0 >= 0.0 && v0 >= 0.0) {
        return Err(invalid("initial densities must be nonnegative"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("t_end must be >= 0, got {t_end}")));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut u, mut v) = (u0, v0);
    out.push(OdeState { t: 0.0, u, v });
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = ((k + 1) as f64 * dt).min(t_end);
        let (nu, nv) = rk4_step(params, u, v, t1 - t0);
        u = clamp(t1, nu, "u")?;
        v = clamp(t1, nv, "v")?;
        out.push(OdeState { t: t1, u, v });
    }
    Ok(out)
}

/// `V(t) = (G'(0)/a) u + v` along a trajectory; only meaningful when `R0 = 1`.
pub fn lyapunov_series(params: &ModelParams, trajectory: &[OdeState]) -> Result<Vec<(f64, f64)>> {
    let r = r0(params);
    if (r - 1.0).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "the Lyapunov function requires R0 = 1, got R0 = {r}"
        )));
    }
    let alpha = params.gprime0() / params.a;
    Ok(trajectory
        .iter()
        .map(|s| (s.t, alpha * s.u + s.v))
        .collect())
}

/// `V'(t) = G(u) - G'(0) u` at `R0 = 1`.
pub fn lyapunov_derivative(params: &ModelParams, u: f64) -> f64 {
    params.infection.eval(u) - params.gprime0() * u
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "limit", rename_all = "snake_case")]
pub enum OdeLimit {
    Extinct,
    PersistsAt { u: f64, v: f64 },
    Undecided,
}

pub const ODE_CLASSIFY_TOLERANCE: f64 = 1e-4;

/// Horizon long enough for linear decay to dominate.
pub fn default_ode_horizon(params: &ModelParams) -> f64 {
    200.0 / params.a.min(params.b)
}

/// Step size used for classification runs.
pub fn default_ode_dt(params: &ModelParams) -> f64 {
    (0.2 / (params.a + params.b + params.e + params.gprime0())).min(0.05)
}

pub fn classify_ode_limit(params: &ModelParams, u0: f64, v0: f64, t_end: f64) -> Result<OdeLimit> {
    if !(u0 > 0.0 && v0 > 0.0) {
        return Err(invalid("classification needs positive initial data"));
    }
    let traj = integrate_ode(params, u0, v0, t_end, default_ode_dt(params))?;
    let last = traj[traj.len() - 1];
    if last.u.max(last.v) < ODE_CLASSIFY_TOLERANCE {
        return Ok(OdeLimit::Extinct);
    }
    let eq = equilibrium(params)?;
    if eq.u_star > 0.0
        && (last.u - eq.u_star).abs().max((last.v - eq.v_star).abs()) < ODE_CLASSIFY_TOLERANCE
    {
        return Ok(OdeLimit::PersistsAt {
            u: eq.u_star,
            v: eq.v_star,
        });
    }
    Ok(OdeLimit::Undecided)
}
