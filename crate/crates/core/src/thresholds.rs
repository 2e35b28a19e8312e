//! Sharp constants located by monotone bisection.
//!
//! `L*` and `d*` come from the principal eigenvalue; `μ*` and `σ*` from
//! classifying full free-boundary runs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial::Profile;
use crate::model::{r0, spreading_sufficient, ModelParams};
use crate::simulator::{classify, Classification, SimConfig, Simulator};
use crate::spectral::{lambda_p, principal_eigenvalue, EigenProblem};

/// Node count used by the eigenvalue bisections unless overridden.
pub const DEFAULT_EIGEN_NODES: usize = 200;
/// `|λ_p|` accepted as a root.
pub const EIGEN_ROOT_TOLERANCE: f64 = 1e-6;

fn check_l_star_regime(params: &ModelParams) -> Result<()> {
    params.validate()?;
    let r = r0(params);
    if r <= 1.0 {
        return Err(Error::Regime(format!(
            "R0 = {r} <= 1: lambda_p > 0 for all L, no finite L*"
        )));
    }
    if spreading_sufficient(params) {
        return Err(Error::Regime(format!(
            "spreading-sufficient regime: R0 = {r} >= (1 + d1/a)(1 + d2/b) = {}, lambda_p < 0 for all L",
            params.diffusion_threshold()
        )));
    }
    Ok(())
}

/// Bisection for the root of an increasing function `f` on `[lo, hi]` with `f(lo) < 0 < f(hi)`.
fn bisect_increasing(
    f: &mut dyn FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
) -> Result<(f64, usize)> {
    for it in 1..=200 {
        let mid = 0.5 * (lo + hi);
        let val = f(mid)?;
        if val.abs() < EIGEN_ROOT_TOLERANCE || hi - lo <= 1e-13 * hi.abs().max(1.0) {
            return Ok((mid, it));
        }
        if val < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Bracketing("bisection did not reach the root tolerance".into()))
}

/// `L*` with `λ_p(−L*, L*) = 0`, using [`DEFAULT_EIGEN_NODES`] nodes.
pub fn find_l_star(params: &ModelParams) -> Result<f64> {
    find_l_star_with(params, DEFAULT_EIGEN_NODES)
}

pub fn find_l_star_with(params: &ModelParams, n: usize) -> Result<f64> {
    check_l_star_regime(params)?;
    let base = EigenProblem::symmetric(params, 1.0, n);
    // λ_p decreases in L; bisect on −λ_p, which increases.
    let mut neg = |l: f64| -> Result<f64> { Ok(-lambda_p(&base.with_interval(-l, l))?) };

    let mut lo = params.h0 / 10.0;
    let mut shrink = 0;
    while neg(lo)? >= 0.0 {
        lo /= 2.0;
        shrink += 1;
        if shrink > 60 {
            return Err(Error::Bracketing("lambda_p stays <= 0 as L -> 0".into()));
        }
    }
    let mut hi = params.h0.max(lo * 2.0);
    let mut grow = 0;
    while neg(hi)? <= 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Bracketing("lambda_p stays >= 0 as L grows".into()));
        }
    }
    Ok(bisect_increasing(&mut neg, lo, hi)?.0)
}

/// `d*`: scale `s` at which `λ_p` on `[−h0, h0]` with `(d1, d2) = s·(d1_0, d2_0)` vanishes.
pub fn find_d_star(params: &ModelParams, d1_0: f64, d2_0: f64, h0: f64) -> Result<f64> {
    find_d_star_with(params, d1_0, d2_0, h0, DEFAULT_EIGEN_NODES)
}

pub fn find_d_star_with(params: &ModelParams, d1_0: f64, d2_0: f64, h0: f64, n: usize) -> Result<f64> {
    params.validate()?;
    let r = r0(params);
    if r <= 1.0 {
        return Err(Error::Regime(format!("R0 = {r} <= 1: lambda_p > 0 for every diffusion scale")));
    }
    if !(d1_0 > 0.0 && d2_0 > 0.0 && h0 > 0.0) {
        return Err(Error::InvalidParameter(
            "d1_0, d2_0 and h0 must be > 0".into(),
        ));
    }
    let base = EigenProblem::symmetric(params, h0, n);
    let mut f = |s: f64| -> Result<f64> { lambda_p(&base.with_diffusion(s * d1_0, s * d2_0)) };
    let lo = 0.0;
    if f(lo)? >= 0.0 {
        return Err(Error::Bracketing("lambda_p >= 0 already without diffusion".into()));
    }
    let mut hi = 1.0;
    let mut grow = 0;
    while f(hi)? <= 0.0 {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(Error::Bracketing("lambda_p stays <= 0 as the diffusion scale grows".into()));
        }
    }
    Ok(bisect_increasing(&mut f, lo, hi)?.0)
}

/// `(√((a−b)² + 4eG'(0)) − (a+b)) / 2`, a lower bound for `d*` when `d1 = d2 = d`.
pub fn d_star_lower_bound(params: &ModelParams) -> f64 {
    let (a, b) = (params.a, params.b);
    (((a - b) * (a - b) + 4.0 * params.e * params.gprime0()).sqrt() - (a + b)) / 2.0
}

/// Lower bound for `d*` along the ray `(d1, d2) = s·(d1_0, d2_0)`: the positive root of
/// `(a + s d1_0)(b + s d2_0) = e G'(0)`. Reduces to [`d_star_lower_bound`] for `d1_0 = d2_0 = 1`.
pub fn d_star_lower_bound_scaled(params: &ModelParams, d1_0: f64, d2_0: f64) -> f64 {
    let (a, b) = (params.a, params.b);
    let qa = d1_0 * d2_0;
    let qb = a * d2_0 + b * d1_0;
    let qc = a * b - params.e * params.gprime0();
    if qc >= 0.0 {
        return 0.0;
    }
    (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VanishingBound {
    pub mu_bound: f64,
    pub h1: f64,
    pub lambda_h1: f64,
    pub l_star: f64,
}

/// Explicit `μ̲` below which the infection vanishes from `(u0, v0)`.
pub fn vanishing_mu_bound(params: &ModelParams, u0: &Profile, v0: &Profile) -> Result<VanishingBound> {
    let l_star = find_l_star(params)?;
    vanishing_mu_bound_with(params, u0, v0, l_star, DEFAULT_EIGEN_NODES)
}

pub fn vanishing_mu_bound_with(
    params: &ModelParams,
    u0: &Profile,
    v0: &Profile,
    l_star: f64,
    n: usize,
) -> Result<VanishingBound> {
    let h0 = params.h0;
    if !(h0 < l_star) {
        return Err(Error::Precondition(format!("needs h0 < L*, got h0 = {h0}, L* = {l_star}")));
    }
    let sup0 = u0.sup_norm(h0) + v0.sup_norm(h0);
    if !(sup0 > 0.0) {
        return Err(Error::Precondition("initial data must be nonzero".into()));
    }
    let mut h1 = h0 + 0.1 * (l_star - h0);
    for _ in 0..=8 {
        let eig = principal_eigenvalue(&EigenProblem::symmetric(params, h1, n))?;
        if eig.lambda_p > 0.0 {
            let lambda_cap = eig.lambda_p / 2.0 * params.e.min(params.gprime0());
            let c = h1 - h0;
            let int1: f64 = eig.weights.iter().zip(&eig.phi1).map(|(w, p)| w * p).sum();
            let int2: f64 = eig.weights.iter().zip(&eig.phi2).map(|(w, p)| w * p).sum();
            let m = c * lambda_cap / (int1 + params.rho * params.weight.max_on(2.0 * h1) * int2);
            let min_phi = min_on(&eig.nodes, &eig.phi1, h0).min(min_on(&eig.nodes, &eig.phi2, h0));
            return Ok(VanishingBound {
                mu_bound: m * min_phi / sup0,
                h1,
                lambda_h1: eig.lambda_p,
                l_star,
            });
        }
        h1 = h0 + 0.5 * (h1 - h0);
    }
    Err(Error::Precondition(format!(
        "lambda_p stays <= 0 on intervals just above h0 = {h0}"
    )))
}

/// Minimum of the piecewise-linear interpolant of `(x, y)` over `[−r, r]`.
fn min_on(x: &[f64], y: &[f64], r: f64) -> f64 {
    let interp = |p: f64| {
        let k = x.partition_point(|&q| q <= p).clamp(1, x.len() - 1);
        let s = (p - x[k - 1]) / (x[k] - x[k - 1]);
        y[k - 1] + s * (y[k] - y[k - 1])
    };
    x.iter()
        .zip(y)
        .filter(|(p, _)| p.abs() <= r)
        .map(|(_, v)| *v)
        .fold(interp(-r).min(interp(r)), f64::min)
}

/// One classified simulation inside a bisection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    pub value: f64,
    pub outcome: Classification,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionResult {
    pub value: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub lo_outcome: Classification,
    pub hi_outcome: Classification,
    pub probes: Vec<Probe>,
}

/// Controls for the simulation-backed bisections.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOptions {
    /// Stop when `hi / lo − 1` drops to this.
    pub rel_width: f64,
    /// Bracket ends are pushed outward by ×4 (or ÷4) at most this many times.
    pub max_expansions: usize,
    /// Undecided runs are repeated with doubled horizon at most this many times.
    pub max_horizon_doublings: usize,
    /// `L*` for classification; computed when absent.
    pub l_star: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            rel_width: 1e-2,
            max_expansions: 8,
            max_horizon_doublings: 3,
            l_star: None,
        }
    }
}

fn resolve_l_star(params: &ModelParams, opts: &SearchOptions) -> Result<f64> {
    let l_star = match opts.l_star {
        Some(l) => l,
        None => find_l_star(params)?,
    };
    if !(params.h0 < l_star) {
        return Err(Error::Precondition(format!(
            "needs h0 < L*, got h0 = {}, L* = {l_star}",
            params.h0
        )));
    }
    Ok(l_star)
}

/// Runs with early stopping, doubling the horizon while the outcome is undecided.
fn classify_run(
    params: &ModelParams,
    config: &SimConfig,
    u0: &Profile,
    v0: &Profile,
    l_star: f64,
    opts: &SearchOptions,
    value: f64,
    probes: &mut Vec<Probe>,
) -> Result<Classification> {
    let mut cfg = config.clone();
    cfg.early_stop_l_star = Some(l_star);
    cfg.snapshots = false;
    let mut outcome = Classification::Undecided;
    for _ in 0..=opts.max_horizon_doublings {
        let sim = Simulator::new(params, &cfg)?;
        let traj = sim.run_from(sim.initial_state(u0, v0))?;
        outcome = classify(&traj, l_star, &cfg);
        if outcome != Classification::Undecided {
            break;
        }
        cfg.t_end *= 2.0;
    }
    probes.push(Probe {
        value,
        outcome,
        t_end: cfg.t_end,
    });
    Ok(outcome)
}

/// Geometric bisection on a positive parameter whose classification switches once from
/// vanishing (small) to spreading (large).
fn dichotomy_search(
    mut probe: impl FnMut(f64, &mut Vec<Probe>) -> Result<Classification>,
    bracket: (f64, f64),
    opts: &SearchOptions,
) -> Result<BisectionResult> {
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "bracket must satisfy 0 < lo < hi, got ({lo}, {hi})"
        )));
    }
    let mut probes = Vec::new();
    let undecided = |v: f64| Error::Bracketing(format!("run at {v} stays undecided at the horizon cap"));

    let mut lo_out = probe(lo, &mut probes)?;
    let mut expansions = 0;
    while lo_out != Classification::Vanishing {
        if lo_out == Classification::Undecided {
            return Err(undecided(lo));
        }
        if expansions == opts.max_expansions {
            return Err(Error::Bracketing(format!("no vanishing run down to {lo}")));
        }
        hi = lo;
        lo /= 4.0;
        expansions += 1;
        lo_out = probe(lo, &mut probes)?;
    }
    let mut hi_out = probe(hi, &mut probes)?;
    expansions = 0;
    while hi_out != Classification::Spreading {
        if hi_out == Classification::Undecided {
            return Err(undecided(hi));
        }
        if expansions == opts.max_expansions {
            return Err(Error::Bracketing(format!("no spreading run up to {hi}")));
        }
        lo = hi;
        hi *= 4.0;
        expansions += 1;
        hi_out = probe(hi, &mut probes)?;
    }

    let mut iterations = 0;
    while hi / lo - 1.0 > opts.rel_width {
        let mid = (lo * hi).sqrt();
        iterations += 1;
        match probe(mid, &mut probes)? {
            Classification::Vanishing => lo = mid,
            Classification::Spreading => hi = mid,
            Classification::Undecided => return Err(undecided(mid)),
        }
    }
    Ok(BisectionResult {
        value: (lo * hi).sqrt(),
        bracket: (lo, hi),
        iterations,
        lo_outcome: Classification::Vanishing,
        hi_outcome: Classification::Spreading,
        probes,
    })
}

/// `μ*` separating vanishing from spreading for fixed initial data.
pub fn find_mu_star(
    params: &ModelParams,
    config: &SimConfig,
    u0: &Profile,
    v0: &Profile,
    bracket: (f64, f64),
    opts: &SearchOptions,
) -> Result<BisectionResult> {
    check_l_star_regime(params)?;
    let l_star = resolve_l_star(params, opts)?;
    dichotomy_search(
        |mu, probes| {
            let p = ModelParams { mu, ..params.clone() };
            classify_run(&p, config, u0, v0, l_star, opts, mu, probes)
        },
        bracket,
        opts,
    )
}

/// Whether the σ-dichotomy applies: `J1 > 0` on all of ℝ, or `ρ > 0` and `W > 0` on `[0, 2L*]`.
pub fn sigma_star_precondition(params: &ModelParams, l_star: f64) -> Result<()> {
    if params.kernel1.is_positive_everywhere() {
        return Ok(());
    }
    if params.rho > 0.0 && params.weight.positive_on(2.0 * l_star) {
        return Ok(());
    }
    Err(Error::Precondition(format!(
        "sigma* needs J1 > 0 on the whole line or W > 0 on [0, 2L*] = [0, {}] with rho > 0; \
         {} kernel has compact support and the weight does not cover the interval",
        2.0 * l_star,
        params.kernel1.family_name()
    )))
}

/// `σ*` for initial data `σ·(ψ1, ψ2)`.
pub fn find_sigma_star(
    params: &ModelParams,
    config: &SimConfig,
    psi1: &Profile,
    psi2: &Profile,
    bracket: (f64, f64),
    opts: &SearchOptions,
) -> Result<BisectionResult> {
    check_l_star_regime(params)?;
    let l_star = resolve_l_star(params, opts)?;
    sigma_star_precondition(params, l_star)?;
    dichotomy_search(
        |sigma, probes| {
            classify_run(
                params,
                config,
                &psi1.scaled(sigma),
                &psi2.scaled(sigma),
                l_star,
                opts,
                sigma,
                probes,
            )
        },
        bracket,
        opts,
    )
}
