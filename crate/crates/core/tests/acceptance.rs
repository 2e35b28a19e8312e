//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero on any failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::{model, with_diffusion, with_kernels};
use nlepi::initial::Profile;
use nlepi::kernels::KernelSpec;
use nlepi::model::{a_priori_bounds, equilibrium, r0, spreading_sufficient, ModelParams};
use nlepi::ode::{integrate_ode, lyapunov_series};
use nlepi::simulator::{
    classify, fixed_boundary_run, flux_equivalence_check, run, Classification, Grid, SimConfig, SimState,
};
use nlepi::spectral::{lambda_p, lower_bound_d1, upper_bound_d2, EigenProblem};
use nlepi::thresholds::{
    d_star_lower_bound, find_d_star, find_l_star, find_mu_star, vanishing_mu_bound_with, SearchOptions,
};
use rand::{rngs::StdRng, Rng, SeedableRng};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cosine(a: f64) -> Profile {
    Profile::Cosine { amplitude: a }
}

fn random_kernel(rng: &mut StdRng) -> KernelSpec {
    match rng.gen_range(0..3) {
        0 => KernelSpec::Gaussian { sigma: rng.gen_range(0.5..1.5) },
        1 => KernelSpec::Uniform { radius: rng.gen_range(0.5..2.0) },
        _ => KernelSpec::Laplace { scale: rng.gen_range(0.3..1.0) },
    }
}

fn ode_dichotomy() -> Outcome {
    let sub = model(1.0, 1.0, 1.0, 0.5, 1.0);
    let start = Instant::now();
    let s = *integrate_ode(&sub, 1.0, 1.0, 100.0, 0.01).map_err(|e| e.to_string())?.last().unwrap();
    let t_sub = start.elapsed().as_secs_f64();
    let sup = model(1.0, 1.0, 1.0, 2.0, 1.0);
    let start = Instant::now();
    let p = *integrate_ode(&sup, 0.1, 0.1, 100.0, 0.01).map_err(|e| e.to_string())?.last().unwrap();
    let t_sup = start.elapsed().as_secs_f64();
    let norm = s.u.hypot(s.v);
    let dist = (p.u - 1.0).abs().max((p.v - 1.0).abs());
    ensure(
        norm < 1e-4 && dist < 1e-3 && t_sub < 1.0 && t_sup < 1.0,
        format!("|(u,v)| = {norm:.2e} (α=0.5), distance to (1,1) = {dist:.2e} (α=2), {t_sub:.3}s / {t_sup:.3}s"),
    )
}

fn zero_diffusion_limit() -> Outcome {
    let p = with_diffusion(model(1.0, 1.0, 1.0, 2.0, 1.0), 1e-8, 1e-8);
    let problem = EigenProblem::symmetric(&p, 2.0, 400);
    let start = Instant::now();
    let lp = lambda_p(&problem).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    // smallest eigenvalue of [[a/e, -1], [-1, b/G'(0)]]
    let exact = 0.5 * (1.5 - (0.25f64 + 4.0).sqrt());
    ensure(
        (lp - (-0.280776)).abs() < 5e-3 && (lp - exact).abs() < 5e-3 && secs < 5.0,
        format!("λ_p = {lp:.7}, limit = {exact:.7}, {secs:.3}s"),
    )
}

fn eigenvalue_monotonicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20);
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let k = random_kernel(&mut rng);
        let p = with_diffusion(
            with_kernels(
                model(
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.5..2.0),
                    rng.gen_range(0.5..4.0),
                    1.0,
                ),
                k,
            ),
            rng.gen_range(0.2..2.0),
            rng.gen_range(0.2..2.0),
        );
        let mut prev = f64::INFINITY;
        for &l in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            let problem = EigenProblem::symmetric(&p, l, 120);
            let lp = lambda_p(&problem).map_err(|e| e.to_string())?;
            let lower = lower_bound_d1(&problem);
            let upper = upper_bound_d2(&problem);
            let doubled = lambda_p(&problem.with_diffusion(2.0 * p.d1, 2.0 * p.d2)).map_err(|e| e.to_string())?;
            for margin in [prev - lp, lp - lower, upper - lp, doubled - lp] {
                worst = worst.min(margin);
            }
            prev = lp;
        }
    }
    ensure(worst > 1e-8, format!("smallest strict margin = {worst:.3e} over 20 instances"))
}

fn l_star_sign_pattern() -> Outcome {
    let mut details = Vec::new();
    for p in [
        model(1.0, 1.0, 1.0, 2.0, 1.0),
        with_kernels(model(1.0, 0.5, 1.0, 1.5, 1.0), KernelSpec::Uniform { radius: 1.0 }),
    ] {
        let r = r0(&p);
        if !(r > 1.0 && r < p.diffusion_threshold()) {
            return Err(format!("instance outside the regime: R0 = {r}"));
        }
        let l = find_l_star(&p).map_err(|e| e.to_string())?;
        let at = |x: f64| lambda_p(&EigenProblem::symmetric(&p, x, 200));
        let (below, above) = (at(0.9 * l).map_err(|e| e.to_string())?, at(1.1 * l).map_err(|e| e.to_string())?);
        if !(below > 0.0 && above < 0.0) {
            return Err(format!("L* = {l}: λ_p(0.9L*) = {below:.3e}, λ_p(1.1L*) = {above:.3e}"));
        }
        details.push(format!("L* = {l:.6} (λ_p: {below:+.2e}, {above:+.2e})"));
    }
    Ok(details.join("; "))
}

fn d_star_bound() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    for _ in 0..10 {
        let a = rng.gen_range(0.3..2.0);
        let b = rng.gen_range(0.3..2.0);
        let e = rng.gen_range(0.3..2.0);
        let alpha = a * b / e * rng.gen_range(1.1..5.0);
        let k = random_kernel(&mut rng);
        let p = with_kernels(model(a, b, e, alpha, 1.0), k);
        let h0 = rng.gen_range(0.3..3.0);
        let d = find_d_star(&p, 1.0, 1.0, h0).map_err(|e| e.to_string())?;
        worst = worst.min(d - d_star_lower_bound(&p));
    }
    ensure(worst >= -1e-6, format!("min(d* − bound) = {worst:.4e} over 10 instances"))
}

fn flux_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = random_kernel(&mut rng);
        let p = with_kernels(model(1.0, 1.0, 1.0, 2.0, 1.0), k);
        let dx = rng.gen_range(0.02..0.1);
        let grid = Grid::new(dx, 12.0);
        let g = -rng.gen_range(0.5..8.0);
        let h = rng.gen_range(0.5..8.0);
        let mut s = SimState::zero(&grid, 1.0);
        s.g = g;
        s.h = h;
        if let Some((lo, hi)) = grid.open_range(g, h) {
            for i in lo..=hi {
                s.u[i] = rng.gen_range(0.0..2.0);
                s.v[i] = rng.gen_range(0.0..2.0);
            }
        }
        worst = worst.max(flux_equivalence_check(&p, &grid, &s).rel_diff());
    }
    ensure(worst < 1e-6, format!("largest relative difference = {worst:.3e} over 100 states"))
}

fn comparison_monotonicity() -> Outcome {
    let p = ModelParams { mu: 0.5, ..model(1.0, 1.0, 1.0, 2.0, 1.0) };
    let mut cfg = SimConfig::new(&p, 0.05, 15.0, 15.0);
    cfg.record_every = 5;
    cfg.snapshots = true;
    let start = Instant::now();
    let slow = run(&p, &cfg, &cosine(0.5), &cosine(0.5)).map_err(|e| e.to_string())?;
    let fast = run(&ModelParams { mu: 1.0, ..p.clone() }, &cfg, &cosine(0.5), &cosine(0.5)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let slack = 1e-6;
    let mut worst = f64::INFINITY;
    if slow.records.len() != fast.records.len() {
        return Err("record times differ".into());
    }
    for (s, f) in slow.records.iter().zip(&fast.records) {
        worst = worst.min(f.h - s.h + slack).min(s.g - f.g + slack);
    }
    for (s, f) in slow.snapshots.iter().zip(&fast.snapshots) {
        for k in 0..s.x.len() {
            let i = s.first_index + k;
            worst = worst.min(f.u_at(i) - s.u[k] + slack).min(f.v_at(i) - s.v[k] + slack);
        }
    }
    ensure(
        worst >= 0.0 && secs < 30.0,
        format!("{} records, min ordering margin incl. slack = {worst:.3e}, {secs:.2}s", slow.records.len()),
    )
}

fn a_priori() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut worst = f64::INFINITY;
    let mut runs = 0;
    while runs < 10 {
        let a = rng.gen_range(0.5..2.0);
        let b = rng.gen_range(0.5..2.0);
        let e = rng.gen_range(0.5..2.0);
        let alpha = a * b / e * rng.gen_range(2.0..6.0);
        let d = rng.gen_range(0.1..0.5);
        let p = with_diffusion(with_kernels(model(a, b, e, alpha, 1.0), random_kernel(&mut rng)), d, d);
        if !spreading_sufficient(&p) {
            continue;
        }
        runs += 1;
        let (su, sv) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
        let mut cfg = SimConfig::new(&p, 0.05, 10.0, 12.0);
        cfg.record_every = 1;
        let t = run(&p, &cfg, &cosine(su), &cosine(sv)).map_err(|e| e.to_string())?;
        let (ab, bb) = a_priori_bounds(&p, su, sv).map_err(|e| e.to_string())?;
        for r in &t.records {
            worst = worst.min(ab + 1e-6 - r.sup_u).min(bb + 1e-6 - r.sup_v);
        }
    }
    ensure(worst >= 0.0, format!("min margin to (A, B) + 1e-6 = {worst:.3e} over 10 runs"))
}

fn dichotomy() -> Outcome {
    let start = Instant::now();
    let mut p = model(1.0, 1.0, 1.0, 2.0, 1.0);
    let l_star = find_l_star(&p).map_err(|e| e.to_string())?;
    p.h0 = 0.5;
    if !(p.h0 < l_star && r0(&p) > 1.0 && r0(&p) < p.diffusion_threshold()) {
        return Err("instance outside the regime".into());
    }
    let mut cfg = SimConfig::new(&p, p.h0 / 20.0, 200.0, 3.0 * l_star + 5.0);
    let psi = cosine(1.0);
    let opts = SearchOptions { l_star: Some(l_star), ..Default::default() };
    let search = find_mu_star(&p, &cfg, &psi, &psi, (0.01, 10.0), &opts).map_err(|e| e.to_string())?;
    let vb = vanishing_mu_bound_with(&p, &psi, &psi, l_star, 200).map_err(|e| e.to_string())?;
    cfg.early_stop_l_star = Some(l_star);
    let at_bound = run(&ModelParams { mu: vb.mu_bound, ..p.clone() }, &cfg, &psi, &psi).map_err(|e| e.to_string())?;
    let at_big = run(&ModelParams { mu: 1e3 * vb.mu_bound, ..p.clone() }, &cfg, &psi, &psi).map_err(|e| e.to_string())?;
    let low = classify(&at_bound, l_star, &cfg);
    let high = classify(&at_big, l_star, &cfg);
    let secs = start.elapsed().as_secs_f64();
    ensure(
        search.lo_outcome == Classification::Vanishing
            && search.hi_outcome == Classification::Spreading
            && low == Classification::Vanishing
            && high == Classification::Spreading
            && secs < 600.0,
        format!(
            "μ* ∈ ({:.5}, {:.5}), μ̲ = {:.3e} → {low:?}, 10³μ̲ → {high:?}, {secs:.1}s",
            search.bracket.0, search.bracket.1, vb.mu_bound
        ),
    )
}

fn limit_profile() -> Outcome {
    let p = model(1.0, 1.0, 1.0, 2.0, 1.0);
    let eq = equilibrium(&p).map_err(|e| e.to_string())?;
    let dt = SimConfig::default_dt(&p);
    let err = |l: f64| -> Result<f64, String> {
        let start = move |x: f64| 0.3 * (1.0 - (x / l).powi(2));
        let r = fixed_boundary_run(&p, -l, l, &start, &start, 150.0, 0.1, dt).map_err(|e| e.to_string())?;
        let (u, v) = r.value_at(0.0);
        Ok((u - eq.u_star).abs().max((v - eq.v_star).abs()))
    };
    let (e20, e40) = (err(20.0)?, err(40.0)?);
    ensure(e20 < 5e-2 && e40 < e20, format!("midpoint error {e20:.3e} on [−20, 20], {e40:.3e} on [−40, 40]"))
}

fn convergence() -> Outcome {
    let p = model(1.0, 1.0, 1.0, 2.0, 1.0);
    let h_end = |dx: f64| -> Result<f64, String> {
        let mut cfg = SimConfig::new(&p, dx, 6.0, 10.0);
        cfg.dt = dx;
        Ok(run(&p, &cfg, &cosine(1.0), &cosine(1.0)).map_err(|e| e.to_string())?.final_state.h)
    };
    let (a, b, c) = (h_end(0.1)?, h_end(0.05)?, h_end(0.025)?);
    let front_ratio = (a - b) / (b - c);
    let lam = |n: usize| lambda_p(&EigenProblem::symmetric(&p, 2.0, n)).map_err(|e| e.to_string());
    let (x, y, z) = (lam(100)?, lam(200)?, lam(400)?);
    let eig_ratio = (x - y) / (y - z);
    ensure(
        front_ratio >= 1.8 && eig_ratio >= 3.6,
        format!("front difference ratio {front_ratio:.3} (first order ≈ 2), eigenvalue ratio {eig_ratio:.3} (second order ≈ 4)"),
    )
}

fn lyapunov() -> Outcome {
    let p = model(1.0, 1.0, 1.0, 1.0, 0.5);
    let traj = integrate_ode(&p, 1.0, 1.0, 1000.0, 0.05).map_err(|e| e.to_string())?;
    let series = lyapunov_series(&p, &traj).map_err(|e| e.to_string())?;
    let worst_rise = series.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
    let last = traj.last().unwrap();
    let sup = last.u.max(last.v);
    ensure(
        worst_rise <= 1e-10 && sup < 1e-3,
        format!("largest step increase of V = {worst_rise:.3e}, max(u, v) at t = 1000: {sup:.3e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("ODE dichotomy", ode_dichotomy),
        ("zero-diffusion eigenvalue limit", zero_diffusion_limit),
        ("eigenvalue monotonicity and bounds", eigenvalue_monotonicity),
        ("L* existence and sign pattern", l_star_sign_pattern),
        ("d* lower bound", d_star_bound),
        ("flux-form equivalence", flux_equivalence),
        ("comparison monotonicity", comparison_monotonicity),
        ("a-priori bounds", a_priori),
        ("spreading-vanishing dichotomy", dichotomy),
        ("spreading limit profile", limit_profile),
        ("convergence discipline", convergence),
        ("R0 = 1 Lyapunov monotonicity", lyapunov),
    ];
    let results: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(_, f)| {
                s.spawn(move || catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into())))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failures = 0;
    for (k, ((name, _), res)) in criteria.iter().zip(&results).enumerate() {
        match res {
            Ok(d) => println!("criterion {:>2} PASS  {name}: {d}", k + 1),
            Err(d) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {d}", k + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
