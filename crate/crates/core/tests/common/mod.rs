#![allow(dead_code)]

use nlepi::kernels::{KernelSpec, WeightSpec};
use nlepi::model::{InfectionFn, ModelParams};

pub fn model(a: f64, b: f64, e: f64, alpha: f64, lambda: f64) -> ModelParams {
    let k = KernelSpec::Gaussian { sigma: 1.0 };
    ModelParams {
        d1: 1.0,
        d2: 1.0,
        a,
        b,
        e,
        mu: 1.0,
        rho: 1.0,
        h0: 1.0,
        kernel1: k,
        kernel2: k,
        weight: WeightSpec::KernelTail { of: k },
        infection: InfectionFn::Saturating { alpha, lambda },
    }
}

pub fn with_kernels(mut p: ModelParams, k: KernelSpec) -> ModelParams {
    p.kernel1 = k;
    p.kernel2 = k;
    p.weight = WeightSpec::KernelTail { of: k };
    p
}

pub fn with_diffusion(mut p: ModelParams, d1: f64, d2: f64) -> ModelParams {
    p.d1 = d1;
    p.d2 = d2;
    p
}
