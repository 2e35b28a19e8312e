//! Model constants, the infection nonlinearity `G`, the reproduction number and
//! the endemic equilibrium.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{validate_kernel, KernelSpec, WeightSpec};

/// Infection rate of humans as a function of pathogen density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum InfectionFn {
    /// `G(z) = α z / (1 + z^λ)` with `α > 0`, `λ ∈ (0, 1]`.
    Saturating { alpha: f64, lambda: f64 },
}

impl InfectionFn {
    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut v = Vec::new();
        match *self {
            InfectionFn::Saturating { alpha, lambda } => {
                if !(alpha.is_finite() && alpha > 0.0) {
                    v.push(format!("alpha must be > 0, got {alpha}"));
                }
                if !(lambda > 0.0 && lambda <= 1.0) {
                    v.push(format!("lambda must lie in (0,1], got {lambda}"));
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(v)
        }
    }

    /// `G(z)`; extended oddly to `z < 0` so that tiny negative round-off stays finite.
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            InfectionFn::Saturating { alpha, lambda } => alpha * z / (1.0 + z.abs().powf(lambda)),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            InfectionFn::Saturating { alpha, lambda } => {
                let p = z.abs().powf(lambda);
                alpha * (1.0 + (1.0 - lambda) * p) / ((1.0 + p) * (1.0 + p))
            }
        }
    }

    /// `G'(0)`.
    pub fn slope_at_zero(&self) -> f64 {
        match *self {
            InfectionFn::Saturating { alpha, .. } => alpha,
        }
    }
}

/// Every constant the free-boundary system needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d1: f64,
    pub d2: f64,
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub mu: f64,
    pub rho: f64,
    pub h0: f64,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    pub weight: WeightSpec,
    pub infection: InfectionFn,
}

impl ModelParams {
    /// Collects every violated constraint instead of stopping at the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, value) in [
            ("d1", self.d1),
            ("d2", self.d2),
            ("a", self.a),
            ("b", self.b),
            ("e", self.e),
            ("mu", self.mu),
            ("h0", self.h0),
        ] {
            if !(value.is_finite() && value > 0.0) {
                v.push(format!("{name} must be > 0, got {value}"));
            }
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            v.push(format!("rho must be >= 0, got {}", self.rho));
        }
        if let Err(e) = self.kernel1.validate() {
            v.push(format!("kernel1: {e}"));
        }
        if let Err(e) = self.kernel2.validate() {
            v.push(format!("kernel2: {e}"));
        }
        if let Err(e) = self.weight.validate() {
            v.push(format!("weight: {e}"));
        }
        if let Err(errs) = self.infection.validate() {
            v.extend(errs.into_iter().map(|e| format!("infection: {e}")));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(v.join("; ")))
        }
    }

    pub fn gprime0(&self) -> f64 {
        self.infection.slope_at_zero()
    }

    /// `(1 + d1/a)(1 + d2/b)`: at or below `R0` spreading happens from any initial data.
    pub fn diffusion_threshold(&self) -> f64 {
        (1.0 + self.d1 / self.a) * (1.0 + self.d2 / self.b)
    }
}

/// Basic reproduction number `e G'(0) / (a b)`.
pub fn r0(params: &ModelParams) -> f64 {
    params.e * params.gprime0() / (params.a * params.b)
}

/// Spatially homogeneous steady state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumState {
    pub u_star: f64,
    pub v_star: f64,
}

const EQUILIBRIUM_FLOOR: f64 = 1e-12;

/// Unique positive root of `G(u)/u = ab/e` when `R0 > 1`, else `(0, 0)`.
pub fn equilibrium(params: &ModelParams) -> Result<EquilibriumState> {
    if r0(params) <= 1.0 {
        return Ok(EquilibriumState { u_star: 0.0, v_star: 0.0 });
    }
    let target = params.a * params.b / params.e;
    let excess = |u: f64| params.infection.eval(u) / u - target;

    let mut lo = EQUILIBRIUM_FLOOR;
    if excess(lo) <= 0.0 {
        return Err(Error::Bracketing(format!(
            "G(u)/u <= ab/e already at u = {lo}; the saturation condition fails near zero"
        )));
    }
    let mut hi = 1.0;
    while excess(hi) >= 0.0 {
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::Bracketing(
                "G(u)/u never drops below ab/e; the saturation limit condition is violated".into(),
            ));
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u_star = 0.5 * (lo + hi);
    Ok(EquilibriumState {
        u_star,
        v_star: params.a / params.e * u_star,
    })
}

/// Sufficient condition for spreading regardless of initial data: `R0 ≥ (1 + d1/a)(1 + d2/b)`.
pub fn spreading_sufficient(params: &ModelParams) -> bool {
    r0(params) >= params.diffusion_threshold()
}

/// A-priori sup bounds `(A, B)` for the densities given the initial sups.
pub fn a_priori_bounds(params: &ModelParams, u0_sup: f64, v0_sup: f64) -> Result<(f64, f64)> {
    if u0_sup < 0.0 || v0_sup < 0.0 {
        return Err(Error::InvalidParameter(
            "initial sup norms must be nonnegative".into(),
        ));
    }
    let eq = equilibrium(params)?;
    let a_bound = eq.u_star.max(u0_sup).max(params.e / params.a * v0_sup);
    let b_bound = v0_sup.max(params.infection.eval(a_bound) / params.b);
    Ok((a_bound, b_bound))
}

/// Result of sampling the monotonicity and saturation conditions on `G` over a log-spaced grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfectionReport {
    pub increasing: bool,
    pub ratio_decreasing: bool,
    pub ratio_limit: bool,
    pub failures: Vec<String>,
}

impl InfectionReport {
    pub fn passed(&self) -> bool {
        self.increasing && self.ratio_decreasing && self.ratio_limit
    }
}

const RATIO_LIMIT_PROBE: f64 = 1e6;

/// Samples `G(0) = 0, G' > 0` (increasing) and `(G(z)/z)' < 0, lim G(z)/z < ab/e` (saturating).
pub fn check_infection(params: &ModelParams) -> InfectionReport {
    let g = &params.infection;
    let mut failures = Vec::new();
    let zs: Vec<f64> = (0..=320).map(|i| 10f64.powf(-8.0 + i as f64 * 0.05)).collect();

    let mut increasing = g.eval(0.0) == 0.0;
    if !increasing {
        failures.push("G(0) != 0".into());
    }
    if let Some(z) = std::iter::once(0.0)
        .chain(zs.iter().copied())
        .find(|&z| g.derivative(z) <= 0.0)
    {
        increasing = false;
        failures.push(format!("G'({z}) is not positive"));
    }

    let ratios: Vec<f64> = zs.iter().map(|&z| g.eval(z) / z).collect();
    let ratio_decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    if !ratio_decreasing {
        failures.push("G(z)/z is not strictly decreasing".into());
    }
    let limit = g.eval(RATIO_LIMIT_PROBE) / RATIO_LIMIT_PROBE;
    let ratio_limit = limit < params.a * params.b / params.e;
    if !ratio_limit {
        failures.push(format!(
            "G(z)/z at z = {RATIO_LIMIT_PROBE:e} is {limit}, not below ab/e"
        ));
    }
    InfectionReport {
        increasing,
        ratio_decreasing,
        ratio_limit,
        failures,
    }
}

/// Checks both kernels are symmetric probability densities with `J(0) > 0`.
pub fn check_kernels(params: &ModelParams) -> Vec<(String, std::result::Result<(), Vec<String>>)> {
    vec![
        ("J1".to_string(), validate_kernel(&params.kernel1)),
        ("J2".to_string(), validate_kernel(&params.kernel2)),
    ]
}


#[cfg(test)]
mod tests {
    use super::fixtures::params;
    use super::*;

    #[test]
    fn reproduction_number_examples() {
        assert_eq!(r0(&params(1.0, 1.0, 1.0, 2.0, 1.0)), 2.0);
        assert_eq!(r0(&params(2.0, 1.0, 1.0, 1.0, 1.0)), 0.5);
        assert_eq!(r0(&params(1.0, 1.0, 1.0, 1.0, 1.0)), 1.0);
    }

    #[test]
    fn equilibrium_examples() {
        let eq = equilibrium(&params(1.0, 1.0, 1.0, 2.0, 1.0)).unwrap();
        assert!((eq.u_star - 1.0).abs() < 1e-12 && (eq.v_star - 1.0).abs() < 1e-12);
        let eq = equilibrium(&params(1.0, 1.0, 1.0, 3.0, 1.0)).unwrap();
        assert!((eq.u_star - 2.0).abs() < 1e-12 && (eq.v_star - 2.0).abs() < 1e-12);
        // 2 / (1 + sqrt(u)) = 1  ⇒  u = 1
        let p = params(1.0, 1.0, 1.0, 2.0, 0.5);
        let eq = equilibrium(&p).unwrap();
        assert!((eq.u_star - 1.0).abs() < 1e-12);
        assert!((p.infection.eval(eq.u_star) / eq.u_star - 1.0).abs() < 1e-10);
        let eq = equilibrium(&params(2.0, 1.0, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!((eq.u_star, eq.v_star), (0.0, 0.0));
    }

    #[test]
    fn equilibrium_zeroes_the_reaction_terms() {
        for &(a, b, e, alpha, lambda) in &[
            (1.0, 1.0, 1.0, 2.0, 1.0),
            (0.7, 1.3, 2.0, 1.5, 0.3),
            (2.0, 0.5, 0.8, 4.0, 0.8),
        ] {
            let p = params(a, b, e, alpha, lambda);
            let eq = equilibrium(&p).unwrap();
            assert!(eq.u_star > 0.0 && eq.v_star > 0.0);
            assert!((-a * eq.u_star + e * eq.v_star).abs() < 1e-9);
            assert!((-b * eq.v_star + p.infection.eval(eq.u_star)).abs() < 1e-9);
        }
    }

    #[test]
    fn spreading_sufficient_examples() {
        let mut p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        p.d1 = 0.4;
        p.d2 = 0.4;
        assert!(spreading_sufficient(&p));
        p.d1 = 0.5;
        p.d2 = 0.5;
        assert!(!spreading_sufficient(&p));
        let mut q = params(1.0, 1.0, 1.0, 1.0, 1.0);
        q.d1 = 1e-3;
        q.d2 = 1e-3;
        assert!(!spreading_sufficient(&q));
    }

    #[test]
    fn a_priori_bound_examples() {
        let p = params(1.0, 1.0, 1.0, 2.0, 1.0);
        let (a, b) = a_priori_bounds(&p, 0.5, 0.5).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
        let q = params(1.0, 1.0, 1.0, 0.5, 1.0);
        let (a, _) = a_priori_bounds(&q, 2.0, 1.0).unwrap();
        assert_eq!(a, 2.0);
        assert_eq!(a_priori_bounds(&q, 0.0, 0.0).unwrap(), (0.0, 0.0));
        assert!(a_priori_bounds(&q, -1.0, 0.0).is_err());
    }

    #[test]
    fn infection_family_satisfies_g1_g2() {
        let p = params(1.0, 1.0, 1.0, 2.0, 0.5);
        assert!(check_infection(&p).passed());
        assert_eq!(p.infection.slope_at_zero(), 2.0);
        assert!((p.infection.derivative(0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn violations_are_collected() {
        let mut p = params(-1.0, 1.0, 1.0, 2.0, 1.5);
        p.rho = -0.1;
        let v = p.violations();
        assert!(v.iter().any(|s| s.contains("a must be > 0")));
        assert!(v.iter().any(|s| s.contains("rho")));
        assert!(v.iter().any(|s| s.contains("lambda must lie in (0,1]")));
    }
}
