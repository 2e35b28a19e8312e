use nlepi::kernels::{numerical_mass, validate_kernel, validate_weight, KernelSpec, WeightSpec};
use nlepi::quadrature::adaptive_simpson;
use proptest::prelude::*;

fn families() -> Vec<KernelSpec> {
    vec![
        KernelSpec::Uniform { radius: 1.0 },
        KernelSpec::Uniform { radius: 0.3 },
        KernelSpec::Gaussian { sigma: 1.0 },
        KernelSpec::Gaussian { sigma: 2.5 },
        KernelSpec::Laplace { scale: 0.7 },
        KernelSpec::PowerTail { exponent: 1.5, cutoff: 1.0 },
        KernelSpec::PowerTail { exponent: 3.0, cutoff: 0.5 },
    ]
}

/// `1 − Φ(x)` from the Maclaurin series `Φ(x) = ½ + φ(x) Σ x^{2k+1} / (2k+1)!!`.
fn normal_upper_tail_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = x;
    let mut k = 0.0;
    while term.abs() > 1e-18 {
        k += 1.0;
        term *= x * x / (2.0 * k + 1.0);
        sum += term;
    }
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    0.5 - pdf * sum
}

#[test]
fn kernel_eval_examples() {
    assert_eq!(KernelSpec::Uniform { radius: 1.0 }.eval(0.0), 0.5);
    assert_eq!(KernelSpec::Uniform { radius: 1.0 }.eval(2.0), 0.0);
    let g = KernelSpec::Gaussian { sigma: 1.0 }.eval(0.0);
    assert!((g - 0.398_942_3).abs() < 1e-7);
}

#[test]
fn kernel_tail_examples() {
    let u = KernelSpec::Uniform { radius: 1.0 };
    assert_eq!(u.tail(0.0).unwrap(), 0.5);
    assert!((u.tail(0.5).unwrap() - 0.25).abs() < 1e-15);
    assert!(u.tail(-0.1).is_err());

    let g = KernelSpec::Gaussian { sigma: 1.0 };
    let closed = g.tail(1.0).unwrap();
    let by_quadrature = adaptive_simpson(&|y| g.eval(y), 1.0, 40.0, 1e-14);
    let by_series = normal_upper_tail_series(1.0);
    assert!((closed - by_quadrature).abs() < 1e-12, "{closed} vs {by_quadrature}");
    assert!((closed - by_series).abs() < 1e-12, "{closed} vs {by_series}");
    assert!((closed - 0.158_655).abs() < 5e-7);
}

#[test]
fn tails_match_quadrature_of_density() {
    for k in families() {
        for x in [0.0, 0.2, 0.9, 1.7, 4.0] {
            let breaks: Vec<f64> = k.breakpoints();
            let far = x + 60.0;
            let f = |y: f64| k.eval(y);
            let body = nlepi::quadrature::piecewise_simpson(&f, x, far, &breaks, 1e-14);
            let rest = nlepi::quadrature::geometric_tail_integral(&f, far);
            let tail = k.tail(x).unwrap();
            assert!((tail - body - rest).abs() < 1e-9, "{k} at {x}: {tail} vs {}", body + rest);
        }
    }
}

#[test]
fn first_moment_flags() {
    assert!(KernelSpec::Gaussian { sigma: 1.0 }.has_finite_first_moment());
    assert!(!KernelSpec::PowerTail { exponent: 1.5, cutoff: 1.0 }.has_finite_first_moment());
    assert!(KernelSpec::PowerTail { exponent: 2.5, cutoff: 1.0 }.has_finite_first_moment());
    assert!(!KernelSpec::PowerTail { exponent: 2.0, cutoff: 1.0 }.has_finite_first_moment());
}

#[test]
fn weight_validation_examples() {
    let tail = WeightSpec::KernelTail {
        of: KernelSpec::Uniform { radius: 1.0 },
    };
    let r = validate_weight(&tail, 2.0).unwrap();
    assert!(r.passed, "{:?}", r.failures);
    assert!(r.lipschitz <= 0.5 + 1e-12 && r.lipschitz > 0.49);

    let flat = WeightSpec::ConstantOn {
        radius: 1.0,
        height: 0.0,
    };
    let r = validate_weight(&flat, 2.0).unwrap();
    assert!(!r.passed && !r.positive_at_zero);

    let table = WeightSpec::Table {
        points: vec![[0.0, 1.0], [1.0, 0.5], [2.0, 0.0]],
    };
    let r = validate_weight(&table, 2.0).unwrap();
    assert!(r.passed);
    assert!((r.lipschitz - 0.5).abs() < 1e-12);
    assert_eq!(r.sup, 1.0);

    let negative = WeightSpec::Table {
        points: vec![[0.0, 1.0], [1.0, -0.5]],
    };
    assert!(!validate_weight(&negative, 2.0).unwrap().passed);
    assert!(validate_weight(&table, 0.0).is_err());
}

#[test]
fn every_family_passes_kernel_validation() {
    for k in families() {
        assert_eq!(validate_kernel(&k), Ok(()), "{k}");
        assert!((numerical_mass(&k) - 1.0).abs() < 1e-8, "{k}");
        assert!((k.tail(0.0).unwrap() - 0.5).abs() < 1e-8, "{k}");
    }
    assert!(validate_kernel(&KernelSpec::Gaussian { sigma: -1.0 }).is_err());
    assert!(validate_kernel(&KernelSpec::PowerTail { exponent: 0.8, cutoff: 1.0 }).is_err());
}

/// Trapezoid over the effective support: uniform cells near the origin, geometric cells in algebraic tails.
fn trapezoid_mass(k: &KernelSpec) -> f64 {
    let support = k.effective_support();
    let core = (1.5 * support).min(60.0);
    let dx = 1e-4;
    let n = (core / dx).round() as usize;
    let h = core / n as f64;
    let mut total = 0.5 * h * (k.eval(0.0) + k.eval(core));
    for i in 1..n {
        total += h * k.eval(i as f64 * h);
    }
    let mut x = core;
    while x < support {
        let next = (x * 1.0005).min(support);
        total += 0.5 * (next - x) * (k.eval(x) + k.eval(next));
        x = next;
    }
    2.0 * total
}

#[test]
fn trapezoid_normalization_over_effective_support() {
    for k in [
        KernelSpec::Uniform { radius: 1.0 },
        KernelSpec::Gaussian { sigma: 1.0 },
        KernelSpec::Laplace { scale: 0.7 },
        KernelSpec::PowerTail { exponent: 3.0, cutoff: 0.5 },
    ] {
        let m = trapezoid_mass(&k);
        assert!((m - 1.0).abs() < 1e-8, "{k}: {m}");
    }
}

fn kernel_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (0.1f64..5.0).prop_map(|radius| KernelSpec::Uniform { radius }),
        (0.1f64..5.0).prop_map(|sigma| KernelSpec::Gaussian { sigma }),
        (0.1f64..5.0).prop_map(|scale| KernelSpec::Laplace { scale }),
        (1.2f64..4.0, 0.1f64..3.0).prop_map(|(exponent, cutoff)| KernelSpec::PowerTail { exponent, cutoff }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_is_exactly_symmetric(k in kernel_strategy(), x in -50.0f64..50.0) {
        prop_assert_eq!(k.eval(x), k.eval(-x));
        prop_assert!(k.eval(x) >= 0.0);
        prop_assert!(k.eval(0.0) > 0.0);
    }

    #[test]
    fn tail_is_nonincreasing(k in kernel_strategy(), x1 in 0.0f64..20.0, dx in 0.0f64..20.0) {
        let x2 = x1 + dx;
        prop_assert!(k.tail(x1).unwrap() >= k.tail(x2).unwrap());
    }

    #[test]
    fn tail_derivative_is_minus_density(k in kernel_strategy(), x in 0.001f64..15.0) {
        let away_from_jumps = k.breakpoints().iter().all(|b| (x - b.abs()).abs() > 1e-3);
        prop_assume!(away_from_jumps);
        let h = 1e-6;
        let fd = (k.tail(x + h).unwrap() - k.tail(x - h).unwrap()) / (2.0 * h);
        prop_assert!((fd + k.eval(x)).abs() < 1e-5, "fd {} vs J {}", fd, k.eval(x));
    }

    #[test]
    fn tail_at_zero_is_half(k in kernel_strategy()) {
        prop_assert!((k.tail(0.0).unwrap() - 0.5).abs() < 1e-8);
    }
}
