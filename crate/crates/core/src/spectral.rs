//! Principal eigenvalue of the block nonlocal operator
//!
//! ```text
//! K = D·N − D + A,   D = diag(d1/e, d2/G'(0)),   A = [[-a/e, 1], [1, -b/G'(0)]]
//! ```
//!
//! on an interval `[L1, L2]`, where `N = diag(N1, N2)` and `N_i φ(x) = ∫ J_i(x − y) φ(y) dy`.
//!
//! `N_i` is discretized by continuous piecewise-linear Galerkin with a lumped
//! (trapezoid) mass matrix `W`. The interaction matrix
//! `Q_jk = ∫∫ J(x − y) ψ_j(x) ψ_k(y) dx dy` is symmetric, entrywise nonnegative,
//! and its row sums never exceed the lumped mass, so the discrete operator
//! keeps the self-adjointness and the comparison bounds of the continuous one.
//! Kernel jumps (e.g. the uniform kernel) are integrated exactly, which keeps the
//! eigenvalue second-order accurate in the mesh size.
//!
//! The symmetric matrix handed to the eigensolvers is `W^{-1/2} (W K) W^{-1/2}`;
//! its eigenvectors are `W^{1/2} φ`, so the Euclidean norm equals the discrete
//! `L²` norm of `(φ1, φ2)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelSpec;
use crate::model::ModelParams;
use crate::quadrature::GaussLegendre;

pub const MIN_NODES: usize = 16;
/// Largest node count solved with the dense symmetric eigensolver under [`EigenSolver::Auto`].
pub const DENSE_NODE_LIMIT: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenProblem {
    pub l1: f64,
    pub l2: f64,
    pub d1: f64,
    pub d2: f64,
    pub a: f64,
    pub b: f64,
    pub e: f64,
    pub gprime0: f64,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    pub n: usize,
}

impl EigenProblem {
    pub fn from_params(params: &ModelParams, l1: f64, l2: f64, n: usize) -> Self {
        Self {
            l1,
            l2,
            d1: params.d1,
            d2: params.d2,
            a: params.a,
            b: params.b,
            e: params.e,
            gprime0: params.gprime0(),
            kernel1: params.kernel1,
            kernel2: params.kernel2,
            n,
        }
    }

    /// Symmetric interval `[-half, half]`.
    pub fn symmetric(params: &ModelParams, half: f64, n: usize) -> Self {
        Self::from_params(params, -half, half, n)
    }

    pub fn with_interval(&self, l1: f64, l2: f64) -> Self {
        Self { l1, l2, ..self.clone() }
    }

    pub fn with_diffusion(&self, d1: f64, d2: f64) -> Self {
        Self { d1, d2, ..self.clone() }
    }

    pub fn with_nodes(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1.is_finite() && self.l2.is_finite() && self.l2 > self.l1) {
            return Err(invalid(format!(
                "interval must satisfy L1 < L2, got [{}, {}]",
                self.l1, self.l2
            )));
        }
        if self.n < MIN_NODES {
            return Err(invalid(format!(
                "need at least {MIN_NODES} nodes, got {}",
                self.n
            )));
        }
        for (name, v) in [("d1", self.d1), ("d2", self.d2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("a", self.a),
            ("b", self.b),
            ("e", self.e),
            ("G'(0)", self.gprime0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        self.kernel1.validate()?;
        self.kernel2.validate()
    }

    fn diffusion_scales(&self) -> (f64, f64) {
        (self.d1 / self.e, self.d2 / self.gprime0)
    }

    fn reaction_scales(&self) -> (f64, f64) {
        (self.a / self.e, self.b / self.gprime0)
    }
}

/// Nodes, lumped mass and the two interaction matrices on `[L1, L2]`.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
}

impl Discretization {
    pub fn new(l1: f64, l2: f64, n: usize, kernel1: &KernelSpec, kernel2: &KernelSpec) -> Self {
        let h = (l2 - l1) / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { l2 } else { l1 + i as f64 * h })
            .collect();
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        let q1 = interaction_matrix(kernel1, n, h);
        let q2 = if kernel2 == kernel1 {
            q1.clone()
        } else {
            interaction_matrix(kernel2, n, h)
        };
        Self {
            nodes,
            weights,
            q1,
            q2,
        }
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// Discrete `∫ φ`.
    pub fn integrate(&self, phi: &[f64]) -> f64 {
        self.weights.iter().zip(phi).map(|(w, p)| w * p).sum()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Half {
    /// Rising ramp on `[-h, 0]` relative to the node.
    Left,
    /// Falling ramp on `[0, h]`.
    Right,
}

impl Half {
    fn start(self, h: f64) -> f64 {
        match self {
            Half::Left => -h,
            Half::Right => 0.0,
        }
    }

    fn value(self, xi: f64, h: f64) -> f64 {
        match self {
            Half::Left => 1.0 + xi / h,
            Half::Right => 1.0 - xi / h,
        }
    }
}

/// `C(s) = ∫ α(η + s) β(η) dη`: overlap of two linear ramps, integrated exactly by Simpson.
fn ramp_correlation(alpha: Half, beta: Half, s: f64, h: f64) -> f64 {
    let lo = beta.start(h).max(alpha.start(h) - s);
    let hi = (beta.start(h) + h).min(alpha.start(h) + h - s);
    if hi <= lo {
        return 0.0;
    }
    let f = |eta: f64| alpha.value(eta + s, h) * beta.value(eta, h);
    let mid = 0.5 * (lo + hi);
    (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi))
}

fn kernel_length_scale(kernel: &KernelSpec) -> f64 {
    match *kernel {
        KernelSpec::Uniform { radius } => radius,
        KernelSpec::Gaussian { sigma } => sigma,
        KernelSpec::Laplace { scale } => scale,
        KernelSpec::PowerTail { cutoff, .. } => cutoff,
    }
}

/// `∫∫ J(D + ξ − η) α(ξ) β(η) dξ dη` for node offset `D`.
fn half_interaction(
    kernel: &KernelSpec,
    gl: &GaussLegendre,
    breaks: &[f64],
    subdivisions: usize,
    alpha: Half,
    beta: Half,
    offset: f64,
    h: f64,
) -> f64 {
    let knot = alpha.start(h) - beta.start(h);
    let mut total = 0.0;
    for (lo, hi) in [(knot - h, knot), (knot, knot + h)] {
        let mut cuts = vec![lo, hi];
        cuts.extend(
            breaks
                .iter()
                .map(|b| b - offset)
                .filter(|&s| s > lo && s < hi),
        );
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let step = (w[1] - w[0]) / subdivisions as f64;
            for k in 0..subdivisions {
                let a = w[0] + k as f64 * step;
                total += gl.integrate(a, a + step, |s| {
                    kernel.eval(offset + s) * ramp_correlation(alpha, beta, s, h)
                });
            }
        }
    }
    total
}

/// Galerkin interaction matrix `Q_jk = ∫∫ J(x − y) ψ_j(x) ψ_k(y)` for `n` hat functions of width `h`.
pub fn interaction_matrix(kernel: &KernelSpec, n: usize, h: f64) -> DMatrix<f64> {
    let gl = GaussLegendre::new(8);
    let breaks = kernel.breakpoints();
    let subdivisions = ((4.0 * h / kernel_length_scale(kernel)).ceil() as usize).clamp(1, 64);
    let reach = kernel.effective_support() + 2.0 * h;
    let max_offset = n - 1;

    // table[pair][offset + max_offset], pair = 2·alpha + beta
    let halves = [Half::Left, Half::Right];
    let mut table = vec![vec![0.0; 2 * max_offset + 1]; 4];
    for (ai, &alpha) in halves.iter().enumerate() {
        for (bi, &beta) in halves.iter().enumerate() {
            let row = &mut table[2 * ai + bi];
            for k in 0..=2 * max_offset {
                let offset = (k as f64 - max_offset as f64) * h;
                if offset.abs() > reach {
                    continue;
                }
                row[k] = half_interaction(
                    kernel,
                    &gl,
                    &breaks,
                    subdivisions,
                    alpha,
                    beta,
                    offset,
                    h,
                );
            }
        }
    }

    let halves_of = |i: usize| -> (bool, bool) { (i > 0, i < n - 1) };
    let mut q = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let (il, ir) = halves_of(i);
        for j in 0..n {
            let k = i + max_offset - j;
            let (jl, jr) = halves_of(j);
            let mut v = 0.0;
            if il && jl {
                v += table[0][k];
            }
            if il && jr {
                v += table[1][k];
            }
            if ir && jl {
                v += table[2][k];
            }
            if ir && jr {
                v += table[3][k];
            }
            q[(i, j)] = v;
        }
    }
    let qt = q.transpose();
    (q + qt) * 0.5
}

/// The assembled symmetric `2n × 2n` matrix together with its discretization.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub disc: Discretization,
    pub matrix: DMatrix<f64>,
}

/// Builds the symmetric matrix with block structure
/// `[[ (d1/e)(S1 − I) − (a/e)I, I ], [ I, (d2/G'(0))(S2 − I) − (b/G'(0))I ]]`,
/// where `S_i = W^{-1/2} Q_i W^{-1/2}`.
pub fn assemble_operator(problem: &EigenProblem) -> Result<AssembledOperator> {
    problem.validate()?;
    let disc = Discretization::new(
        problem.l1,
        problem.l2,
        problem.n,
        &problem.kernel1,
        &problem.kernel2,
    );
    let matrix = assemble_from(problem, &disc);
    Ok(AssembledOperator { disc, matrix })
}

fn assemble_from(problem: &EigenProblem, disc: &Discretization) -> DMatrix<f64> {
    let n = disc.n();
    let (s1, s2) = problem.diffusion_scales();
    let (r1, r2) = problem.reaction_scales();
    let inv_sqrt: Vec<f64> = disc.weights.iter().map(|w| 1.0 / w.sqrt()).collect();
    let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let scale = inv_sqrt[i] * inv_sqrt[j];
            m[(i, j)] = s1 * disc.q1[(i, j)] * scale;
            m[(n + i, n + j)] = s2 * disc.q2[(i, j)] * scale;
        }
        m[(i, i)] -= s1 + r1;
        m[(n + i, n + i)] -= s2 + r2;
        m[(i, n + i)] = 1.0;
        m[(n + i, i)] = 1.0;
    }
    let mt = m.transpose();
    (m + mt) * 0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum EigenSolver {
    /// Dense for `n ≤ DENSE_NODE_LIMIT`, Lanczos above.
    #[default]
    Auto,
    Dense,
    Lanczos,
    /// Shifted power iteration; slow, intended as a cross-check.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenResult {
    pub lambda_p: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub rayleigh_residual: f64,
}

impl EigenResult {
    pub fn min_phi(&self) -> f64 {
        self.phi1
            .iter()
            .chain(&self.phi2)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Tolerance on eigenvector entries of the wrong sign.
pub const SIGN_TOLERANCE: f64 = 1e-10;

pub fn principal_eigenvalue(problem: &EigenProblem) -> Result<EigenResult> {
    principal_eigenvalue_with(problem, EigenSolver::Auto)
}

pub fn principal_eigenvalue_with(problem: &EigenProblem, solver: EigenSolver) -> Result<EigenResult> {
    let op = assemble_operator(problem)?;
    solve_assembled(&op, solver)
}

/// λ_p only; convenient for bisections. Skips the eigenvector sign check, which is
/// ill-conditioned when diffusion is (near) zero and the top eigenspace is almost degenerate.
pub fn lambda_p(problem: &EigenProblem) -> Result<f64> {
    let op = assemble_operator(problem)?;
    let top = if op.disc.n() <= DENSE_NODE_LIMIT {
        SymmetricEigen::try_new(op.matrix.clone(), 1e-15, 0)
            .ok_or_else(|| Error::Eigensolver("dense symmetric solve did not converge".into()))?
            .eigenvalues
            .max()
    } else {
        lanczos_top(&op.matrix, 1e-12, 600)?.0
    };
    Ok(-top)
}

pub fn solve_assembled(op: &AssembledOperator, solver: EigenSolver) -> Result<EigenResult> {
    let n = op.disc.n();
    let solver = match solver {
        EigenSolver::Auto if n <= DENSE_NODE_LIMIT => EigenSolver::Dense,
        EigenSolver::Auto => EigenSolver::Lanczos,
        s => s,
    };
    let (top, mut y) = match solver {
        EigenSolver::Dense => dense_top(&op.matrix)?,
        EigenSolver::Lanczos => lanczos_top(&op.matrix, 1e-12, 600)?,
        EigenSolver::Power => power_iteration(&op.matrix, 1e-13, 2_000_000)?,
        EigenSolver::Auto => unreachable!(),
    };

    let mid = n / 2;
    let anchor = if n % 2 == 1 { y[mid] } else { y[mid] + y[mid - 1] };
    if anchor < 0.0 {
        y.neg_mut();
    }
    let norm = y.norm();
    y /= norm;

    let phi: Vec<f64> = (0..2 * n)
        .map(|k| y[k] / op.disc.weights[k % n].sqrt())
        .collect();
    if let Some(bad) = phi.iter().position(|&p| p < -SIGN_TOLERANCE) {
        return Err(Error::Eigensolver(format!(
            "principal eigenvector changes sign at entry {bad} ({}); refine the grid",
            phi[bad]
        )));
    }
    let quad = y.dot(&(&op.matrix * &y));
    let lambda_p = -top;
    Ok(EigenResult {
        lambda_p,
        nodes: op.disc.nodes.clone(),
        weights: op.disc.weights.clone(),
        phi1: phi[..n].to_vec(),
        phi2: phi[n..].to_vec(),
        rayleigh_residual: (lambda_p + quad).abs(),
    })
}

fn dense_top(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 0)
        .ok_or_else(|| Error::Eigensolver("dense symmetric solve did not converge".into()))?;
    let (idx, &top) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Eigensolver("empty spectrum".into()))?;
    Ok((top, eig.eigenvectors.column(idx).into_owned()))
}

/// Largest eigenpair by Lanczos with full reorthogonalization.
pub fn lanczos_top(m: &DMatrix<f64>, tol: f64, max_steps: usize) -> Result<(f64, DVector<f64>)> {
    let dim = m.nrows();
    let max_steps = max_steps.min(dim);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(max_steps);
    let mut alphas = Vec::with_capacity(max_steps);
    let mut betas: Vec<f64> = Vec::with_capacity(max_steps);
    let mut q = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let scale = m.abs().column_sum().max().max(1.0);

    for j in 0..max_steps {
        let mut w = m * &q;
        let alpha = q.dot(&w);
        alphas.push(alpha);
        basis.push(q.clone());
        for _ in 0..2 {
            for v in &basis {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        let beta = w.norm();

        let converged_check = (j + 1) % 5 == 0 || beta < tol * scale || j + 1 == max_steps;
        if converged_check {
            let (theta, s) = tridiagonal_top(&alphas, &betas);
            let residual = beta * s[s.len() - 1].abs();
            if residual < tol * scale || beta < tol * scale || j + 1 == max_steps {
                let mut y = DVector::zeros(dim);
                for (c, v) in s.iter().zip(&basis) {
                    y.axpy(*c, v, 1.0);
                }
                let y = y.normalize();
                let true_res = (m * &y - &y * theta).norm();
                if true_res > 1e3 * tol * scale {
                    return Err(Error::Eigensolver(format!(
                        "Lanczos residual {true_res:e} after {} steps",
                        j + 1
                    )));
                }
                return Ok((theta, y));
            }
        }
        betas.push(beta);
        q = w / beta;
    }
    Err(Error::Eigensolver("Lanczos exhausted its step budget".into()))
}

fn tridiagonal_top(alphas: &[f64], betas: &[f64]) -> (f64, Vec<f64>) {
    let k = alphas.len();
    let mut t = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}

/// Power iteration on `cI + M` with `c` the Gershgorin radius, so the shifted spectrum is nonnegative.
pub fn power_iteration(m: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<(f64, DVector<f64>)> {
    let dim = m.nrows();
    let shift = m.abs().column_sum().max();
    let mut y = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    let mut theta = f64::NEG_INFINITY;
    for _ in 0..max_iter {
        let my = m * &y;
        let next = &my + &y * shift;
        let rq = y.dot(&my);
        let res = (&my - &y * rq).norm();
        if (rq - theta).abs() < tol && res < 1e3 * tol.sqrt() * shift.max(1.0) {
            return Ok((rq, y));
        }
        theta = rq;
        y = next.normalize();
    }
    Err(Error::Eigensolver(format!(
        "power iteration did not converge in {max_iter} steps"
    )))
}

/// Evaluates the variational (double-integral) form of `-⟨Kφ, φ⟩ / ‖φ‖²` with the discrete quadrature.
pub fn variational_expression(
    problem: &EigenProblem,
    disc: &Discretization,
    phi1: &[f64],
    phi2: &[f64],
) -> f64 {
    let n = disc.n();
    let (s1, s2) = problem.diffusion_scales();
    let (r1, r2) = problem.reaction_scales();
    let dirichlet = |q: &DMatrix<f64>, phi: &[f64]| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = phi[i] - phi[j];
                acc += q[(i, j)] * d * d;
            }
        }
        0.5 * acc
    };
    let mut local = 0.0;
    let mut norm = 0.0;
    for i in 0..n {
        let w = disc.weights[i];
        let mass1: f64 = disc.q1.row(i).sum();
        let mass2: f64 = disc.q2.row(i).sum();
        let (p1, p2) = (phi1[i], phi2[i]);
        local += (-r1 - s1) * w * p1 * p1
            + s1 * mass1 * p1 * p1
            + 2.0 * w * p1 * p2
            + (-r2 - s2) * w * p2 * p2
            + s2 * mass2 * p2 * p2;
        norm += w * (p1 * p1 + p2 * p2);
    }
    (s1 * dirichlet(&disc.q1, phi1) + s2 * dirichlet(&disc.q2, phi2) - local) / norm
}

/// `|variational expression − λ_p|` at the computed eigenpair.
pub fn rayleigh_check(problem: &EigenProblem, result: &EigenResult) -> Result<f64> {
    let op = assemble_operator(problem)?;
    Ok(rayleigh_check_with(problem, &op.disc, result))
}

pub fn rayleigh_check_with(problem: &EigenProblem, disc: &Discretization, result: &EigenResult) -> f64 {
    (variational_expression(problem, disc, &result.phi1, &result.phi2) - result.lambda_p).abs()
}

/// Upper bound on λ_p obtained from the best constant test pair.
pub fn upper_bound_d2(problem: &EigenProblem) -> f64 {
    let (s1, s2) = problem.diffusion_scales();
    let (r1, r2) = problem.reaction_scales();
    let diff = r1 - r2 + s1 - s2;
    0.5 * (r1 + r2 + s1 + s2 - (diff * diff + 4.0).sqrt())
}

/// Lower bound `−λ_max(A)`, also the zero-diffusion limit of λ_p.
pub fn lower_bound_d1(problem: &EigenProblem) -> f64 {
    let (r1, r2) = problem.reaction_scales();
    let diff = r1 - r2;
    0.5 * (r1 + r2 - (diff * diff + 4.0).sqrt())
}
