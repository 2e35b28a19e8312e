//! Dispersal kernels `J`, their tails `W_J(x) = ∫_x^∞ J`, and boundary weights `W`.
//!
//! Every kernel is a symmetric probability density. Tails and cumulative
//! distributions are closed-form per family, so they can be evaluated at the
//! continuous (non grid-aligned) front positions without tabulation error.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Result};

/// Tail mass below which a kernel is treated as zero.
pub const SUPPORT_TAIL_MASS: f64 = 1e-10;

/// Parametric dispersal kernel. Lengths are in spatial units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Density `1/(2r)` on `(-r, r)`; the jump at `|x| = r` takes the midpoint value.
    Uniform { radius: f64 },
    Gaussian { sigma: f64 },
    /// Density `exp(-|x|/β) / (2β)`.
    Laplace { scale: f64 },
    /// Density `c · max(cutoff, |x|)^(-γ)`: flat plateau near the origin, algebraic tail.
    PowerTail { exponent: f64, cutoff: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Uniform { radius } => positive("uniform radius", radius),
            KernelSpec::Gaussian { sigma } => positive("gaussian sigma", sigma),
            KernelSpec::Laplace { scale } => positive("laplace scale", scale),
            KernelSpec::PowerTail { exponent, cutoff } => {
                positive("power_tail cutoff", cutoff)?;
                if !(exponent.is_finite() && exponent > 1.0) {
                    return Err(invalid(format!(
                        "power_tail exponent must be > 1 for a normalizable density, got {exponent}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Uniform { .. } => "uniform",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Laplace { .. } => "laplace",
            KernelSpec::PowerTail { .. } => "power_tail",
        }
    }

    /// `J(x)`. Evaluated on `|x|`, so symmetric by construction.
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            KernelSpec::Uniform { radius } => {
                if ax < radius {
                    0.5 / radius
                } else if ax == radius {
                    0.25 / radius
                } else {
                    0.0
                }
            }
            KernelSpec::Gaussian { sigma } => {
                let z = ax / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt())
            }
            KernelSpec::Laplace { scale } => (-ax / scale).exp() / (2.0 * scale),
            KernelSpec::PowerTail { exponent, cutoff } => {
                power_tail_constant(exponent, cutoff) * ax.max(cutoff).powf(-exponent)
            }
        }
    }

    /// `W_J(x) = ∫_x^∞ J(y) dy` for `x ≥ 0`.
    pub fn tail(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(invalid(format!("kernel tail requires x >= 0, got {x}")));
        }
        Ok(self.tail_nonneg(x))
    }

    /// `∫_x^∞ J(y) dy` for any real `x`.
    pub fn survival(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.tail_nonneg(x)
        } else {
            1.0 - self.tail_nonneg(-x)
        }
    }

    /// `∫_{-∞}^x J(y) dy`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.survival(-x)
    }

    fn tail_nonneg(&self, x: f64) -> f64 {
        match *self {
            KernelSpec::Uniform { radius } => {
                if x >= radius {
                    0.0
                } else {
                    0.5 * (radius - x) / radius
                }
            }
            KernelSpec::Gaussian { sigma } => 0.5 * libm::erfc(x / (sigma * SQRT_2)),
            KernelSpec::Laplace { scale } => 0.5 * (-x / scale).exp(),
            KernelSpec::PowerTail { exponent, cutoff } => {
                let c = power_tail_constant(exponent, cutoff);
                let far = c * cutoff.powf(1.0 - exponent) / (exponent - 1.0);
                if x >= cutoff {
                    c * x.powf(1.0 - exponent) / (exponent - 1.0)
                } else {
                    c * cutoff.powf(-exponent) * (cutoff - x) + far
                }
            }
        }
    }

    /// Finite first moment `∫_0^∞ x J(x) dx < ∞`.
    pub fn has_finite_first_moment(&self) -> bool {
        match *self {
            KernelSpec::PowerTail { exponent, .. } => exponent > 2.0,
            _ => true,
        }
    }

    /// Radius beyond which the two-sided tail mass is below [`SUPPORT_TAIL_MASS`].
    pub fn effective_support(&self) -> f64 {
        match *self {
            KernelSpec::Uniform { radius } => radius,
            KernelSpec::Gaussian { sigma } => {
                // 2·Q(z) = 1e-10  ⇔  z ≈ 6.4674
                6.467_457_14 * sigma
            }
            KernelSpec::Laplace { scale } => scale * (1.0 / SUPPORT_TAIL_MASS).ln(),
            KernelSpec::PowerTail { exponent, cutoff } => {
                let c = power_tail_constant(exponent, cutoff);
                // 2 c R^{1-γ} / (γ - 1) = mass
                let r = (2.0 * c / ((exponent - 1.0) * SUPPORT_TAIL_MASS))
                    .powf(1.0 / (exponent - 1.0));
                r.max(cutoff)
            }
        }
    }

    /// Points where `J` is not smooth (used to split quadratures).
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            KernelSpec::Uniform { radius } => vec![-radius, radius],
            KernelSpec::Gaussian { .. } => vec![],
            KernelSpec::Laplace { .. } => vec![0.0],
            KernelSpec::PowerTail { cutoff, .. } => vec![-cutoff, cutoff],
        }
    }

    /// Whether `J(x) > 0` for every real `x`.
    pub fn is_positive_everywhere(&self) -> bool {
        !matches!(self, KernelSpec::Uniform { .. })
    }

    /// `sup J = J(0)`.
    pub fn sup(&self) -> f64 {
        self.eval(0.0)
    }
}

fn power_tail_constant(exponent: f64, cutoff: f64) -> f64 {
    (exponent - 1.0) / (2.0 * exponent * cutoff.powf(1.0 - exponent))
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be > 0, got {value}")))
    }
}

/// Boundary weight `W` acting on the infected-human density in the front law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `W = W_J` for the given kernel.
    KernelTail { of: KernelSpec },
    /// Height `height` on `[0, radius]`, linear ramp to zero on `[radius, 1.1·radius]`.
    ConstantOn { radius: f64, height: f64 },
    /// Piecewise-linear through `(x, W)` samples; constant beyond both ends.
    Table { points: Vec<[f64; 2]> },
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightSpec::KernelTail { of } => of.validate(),
            WeightSpec::ConstantOn { radius, height } => {
                positive("constant_on radius", *radius)?;
                if !height.is_finite() {
                    return Err(invalid("constant_on height must be finite"));
                }
                Ok(())
            }
            WeightSpec::Table { points } => {
                if points.is_empty() {
                    return Err(invalid("weight table needs at least one sample"));
                }
                if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(invalid("weight table samples must be finite"));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(invalid("weight table abscissae must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightSpec::KernelTail { of } => of.survival(x.max(0.0)),
            WeightSpec::ConstantOn { radius, height } => {
                let ramp = 0.1 * radius;
                if x <= *radius {
                    *height
                } else if x < radius + ramp {
                    height * (1.0 - (x - radius) / ramp)
                } else {
                    0.0
                }
            }
            WeightSpec::Table { points } => interpolate(points, x),
        }
    }

    /// `sup_{x ≥ 0} W`.
    pub fn sup(&self) -> f64 {
        match self {
            WeightSpec::KernelTail { .. } => 0.5,
            WeightSpec::ConstantOn { height, .. } => height.max(0.0),
            WeightSpec::Table { points } => {
                let mut s = self.eval(0.0);
                for p in points.iter().filter(|p| p[0] >= 0.0) {
                    s = s.max(p[1]);
                }
                s
            }
        }
    }

    /// `max_{x ∈ [0, r]} W(x)`.
    pub fn max_on(&self, r: f64) -> f64 {
        let mut m = self.eval(0.0).max(self.eval(r));
        for x in self.knots().into_iter().filter(|&x| x > 0.0 && x < r) {
            m = m.max(self.eval(x));
        }
        // kernel tails are nonincreasing, tables/ramps are piecewise linear
        m
    }

    /// Whether `W(x) > 0` on all of `[0, r]`.
    pub fn positive_on(&self, r: f64) -> bool {
        let mut pts = vec![0.0, r];
        pts.extend(self.knots().into_iter().filter(|&x| x > 0.0 && x < r));
        // piecewise-linear families attain their minimum at knots; the kernel tail is monotone
        pts.into_iter().all(|x| self.eval(x) > 0.0)
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            WeightSpec::KernelTail { .. } => vec![],
            WeightSpec::ConstantOn { radius, .. } => vec![*radius, 1.1 * radius],
            WeightSpec::Table { points } => points.iter().map(|p| p[0]).collect(),
        }
    }
}

fn interpolate(points: &[[f64; 2]], x: f64) -> f64 {
    let first = points[0];
    let last = points[points.len() - 1];
    if x <= first[0] {
        return first[1];
    }
    if x >= last[0] {
        return last[1];
    }
    let idx = points.partition_point(|p| p[0] <= x);
    let (p0, p1) = (points[idx - 1], points[idx]);
    let s = (x - p0[0]) / (p1[0] - p0[0]);
    p0[1] + s * (p1[1] - p0[1])
}

/// Outcome of probing a boundary weight: nonnegative, positive at 0, Lipschitz, bounded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub min_sampled: f64,
    pub positive_at_zero: bool,
    pub lipschitz: f64,
    pub sup: f64,
    pub probe_radius: f64,
    pub passed: bool,
    pub failures: Vec<String>,
}

const WEIGHT_PROBE_SAMPLES: usize = 4000;

/// Samples `W` on `[0, probe_radius]` and reports the weight checks.
pub fn validate_weight(spec: &WeightSpec, probe_radius: f64) -> Result<ValidationReport> {
    if !(probe_radius.is_finite() && probe_radius > 0.0) {
        return Err(invalid(format!("probe radius must be > 0, got {probe_radius}")));
    }
    let mut failures = Vec::new();
    if let Err(e) = spec.validate() {
        failures.push(e.to_string());
    }
    let mut xs: Vec<f64> = (0..=WEIGHT_PROBE_SAMPLES)
        .map(|i| probe_radius * i as f64 / WEIGHT_PROBE_SAMPLES as f64)
        .collect();
    xs.extend(spec.knots().into_iter().filter(|&x| x > 0.0 && x < probe_radius));
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let values: Vec<f64> = xs.iter().map(|&x| spec.eval(x)).collect();
    let min_sampled = values.iter().copied().fold(f64::INFINITY, f64::min);
    let lipschitz = xs
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, w)| ((w[1] - w[0]) / (x[1] - x[0])).abs())
        .fold(0.0, f64::max);
    let w0 = spec.eval(0.0);
    let positive_at_zero = w0 > 0.0;
    let sup = spec.sup();

    if min_sampled < 0.0 {
        failures.push(format!("W takes negative value {min_sampled}"));
    }
    if !positive_at_zero {
        failures.push(format!("W(0) = {w0} is not positive"));
    }
    if !lipschitz.is_finite() {
        failures.push("W is not Lipschitz on the probe interval".into());
    }
    if !sup.is_finite() {
        failures.push("W is unbounded".into());
    }
    Ok(ValidationReport {
        min_sampled,
        positive_at_zero,
        lipschitz,
        sup,
        probe_radius,
        passed: failures.is_empty(),
        failures,
    })
}

/// Checks a kernel: symmetry, `J(0) > 0`, nonnegativity and unit mass.
pub fn validate_kernel(spec: &KernelSpec) -> std::result::Result<(), Vec<String>> {
    let mut failures = Vec::new();
    if let Err(e) = spec.validate() {
        return Err(vec![e.to_string()]);
    }
    if spec.eval(0.0) <= 0.0 {
        failures.push("J(0) must be positive".to_string());
    }
    let support = spec.effective_support().min(1e6);
    for i in 0..=1000 {
        let x = support * i as f64 / 1000.0;
        let (p, m) = (spec.eval(x), spec.eval(-x));
        if p < 0.0 {
            failures.push(format!("J({x}) is negative"));
            break;
        }
        if p != m {
            failures.push(format!("J is not symmetric at x = {x}"));
            break;
        }
    }
    let mass = numerical_mass(spec);
    if (mass - 1.0).abs() > 1e-8 {
        failures.push(format!("kernel mass {mass} differs from 1"));
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(failures)
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::Uniform { radius } => write!(f, "uniform(r={radius})"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian(σ={sigma})"),
            KernelSpec::Laplace { scale } => write!(f, "laplace(β={scale})"),
            KernelSpec::PowerTail { exponent, cutoff } => {
                write!(f, "power_tail(γ={exponent}, cutoff={cutoff})")
            }
        }
    }
}

/// `∫_R J` by adaptive quadrature of the density (independent of the closed-form tails).
pub fn numerical_mass(spec: &KernelSpec) -> f64 {
    let f = |x: f64| spec.eval(x);
    let split = spec
        .breakpoints()
        .into_iter()
        .fold(1.0_f64, |m, b| m.max(b.abs()));
    let inner = crate::quadrature::piecewise_simpson(&f, 0.0, split, &spec.breakpoints(), 1e-13);
    let outer = crate::quadrature::geometric_tail_integral(&f, split);
    2.0 * (inner + outer)
}
