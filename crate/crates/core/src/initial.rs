//! Initial profiles supported on `[-h0, h0]`.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `amplitude · (1 − (x/h0)²)`.
    Bump { amplitude: f64 },
    /// `amplitude · cos(π x / (2 h0))`.
    Cosine { amplitude: f64 },
    /// `sigma · base(x)`.
    Scaled { sigma: f64, base: Box<Profile> },
    /// Piecewise-linear through `(x, value)` samples, zero outside the sampled range.
    Table { points: Vec<[f64; 2]> },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Bump { amplitude } | Profile::Cosine { amplitude } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(invalid(format!("profile amplitude must be >= 0, got {amplitude}")));
                }
                Ok(())
            }
            Profile::Scaled { sigma, base } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(invalid(format!("profile sigma must be >= 0, got {sigma}")));
                }
                base.validate()
            }
            Profile::Table { points } => {
                if points.len() < 2 {
                    return Err(invalid("profile table needs at least two samples"));
                }
                if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(invalid("profile table samples must be finite"));
                }
                if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(invalid("profile table abscissae must be strictly increasing"));
                }
                Ok(())
            }
        }
    }

    /// Value at `x`; analytic families vanish outside `(-h0, h0)`.
    pub fn eval(&self, x: f64, h0: f64) -> f64 {
        match self {
            Profile::Bump { amplitude } => {
                let s = x / h0;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - s * s)
                }
            }
            Profile::Cosine { amplitude } => {
                if x.abs() >= h0 {
                    0.0
                } else {
                    amplitude * (FRAC_PI_2 * x / h0).cos()
                }
            }
            Profile::Scaled { sigma, base } => sigma * base.eval(x, h0),
            Profile::Table { points } => {
                let first = points[0];
                let last = points[points.len() - 1];
                if x < first[0] || x > last[0] {
                    return 0.0;
                }
                let idx = points.partition_point(|p| p[0] <= x).min(points.len() - 1).max(1);
                let (p0, p1) = (points[idx - 1], points[idx]);
                p0[1] + (x - p0[0]) / (p1[0] - p0[0]) * (p1[1] - p0[1])
            }
        }
    }

    pub fn scaled(&self, sigma: f64) -> Profile {
        Profile::Scaled {
            sigma,
            base: Box::new(self.clone()),
        }
    }

    /// `sup |profile|`; for tables, the largest sample magnitude.
    pub fn sup_norm(&self, h0: f64) -> f64 {
        match self {
            Profile::Bump { amplitude } | Profile::Cosine { amplitude } => amplitude.abs(),
            Profile::Scaled { sigma, base } => sigma.abs() * base.sup_norm(h0),
            Profile::Table { points } => points.iter().map(|p| p[1].abs()).fold(0.0, f64::max),
        }
    }
}

/// Checks initial data: continuous, positive inside `(-h0, h0)`, zero at `±h0`.
pub fn check_initial_data(profile: &Profile, h0: f64) -> Vec<String> {
    let mut failures = Vec::new();
    if let Err(e) = profile.validate() {
        failures.push(e.to_string());
        return failures;
    }
    for end in [-h0, h0] {
        let v = profile.eval(end, h0);
        if v.abs() > 1e-12 {
            failures.push(format!("profile is {v} at x = {end}, must vanish at the initial front"));
        }
    }
    let samples = 2000;
    for k in 1..samples {
        let x = -h0 + 2.0 * h0 * k as f64 / samples as f64;
        let v = profile.eval(x, h0);
        if !(v > 0.0) {
            failures.push(format!("profile is {v} at interior point x = {x}, must be positive"));
            break;
        }
    }
    if let Profile::Table { points } = profile {
        if points[0][0] > -h0 || points[points.len() - 1][0] < h0 {
            failures.push("profile table does not cover [-h0, h0]".into());
        }
    }
    failures
}
