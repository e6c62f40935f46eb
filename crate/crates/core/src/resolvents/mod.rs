//! Resolvents of the two splitting operators under the block-diagonal
//! preconditioner `Γ = blkdiag(γ ⊗ I_n, γ ⊗ I_m, α I_n, β I_n, δ I_m)`.
//!
//! `J_{ΓA}` decomposes into N independent proximal problems, one per agent.
//! `J_{ΓB}` is a closed-form affine map followed by one projection onto the
//! nonnegative orthant.

pub mod simplex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::game::{AgentSpec, CostModel, Dimensions, GameSpec, LocalSet};
use crate::linalg::{self, Matrix};
use crate::operators::ExtendedPoint;

pub use simplex::project_box_simplex;

/// Natural-residual target of every inner proximal solve.
pub const DEFAULT_PROX_TOLERANCE: f64 = 1e-10;
/// Iteration cap for the iterative proximal path.
pub const PROX_MAX_ITERS: usize = 100_000;
/// Tolerance of the raw ↔ central step-size round trip.
pub const STEP_ROUNDTRIP_TOLERANCE: f64 = 1e-12;

/// `δ_c = δ / (δγ̂ + 1/N)`
pub fn delta_to_central(delta: f64, gamma_hat: f64, agents: usize) -> f64 {
    delta / (delta * gamma_hat + 1.0 / agents as f64)
}

/// Inverse of [`delta_to_central`] on `δ_c ∈ (0, 1/γ̂)`.
pub fn central_to_delta(delta_c: f64, gamma_hat: f64, agents: usize) -> f64 {
    delta_c / (agents as f64 * (1.0 - delta_c * gamma_hat))
}

/// `β_c = β / (1 + β(α + γ̂/N))`
pub fn beta_to_central(beta: f64, alpha: f64, gamma_hat: f64, agents: usize) -> f64 {
    beta / (1.0 + beta * (alpha + gamma_hat / agents as f64))
}

/// Inverse of [`beta_to_central`] on `β_c ∈ (0, 1/(α + γ̂/N))`.
pub fn central_to_beta(beta_c: f64, alpha: f64, gamma_hat: f64, agents: usize) -> f64 {
    beta_c / (1.0 - beta_c * (alpha + gamma_hat / agents as f64))
}

/// Preconditioner entries together with the coordinator's step sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSizes {
    pub(crate) gamma: Vec<f64>,
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
    pub(crate) delta: f64,
    pub(crate) gamma_hat: f64,
    pub(crate) delta_c: f64,
    pub(crate) beta_c: f64,
}

impl StepSizes {
    /// From the preconditioner entries `(γ_i, α, β, δ)`.
    pub fn from_raw(gamma: Vec<f64>, alpha: f64, beta: f64, delta: f64) -> Result<Self> {
        let gamma_hat = check_gamma(&gamma)?;
        for (name, v) in [("alpha", alpha), ("beta", beta), ("delta", delta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidStepSizes(format!("{name} must be positive, got {v}")));
            }
        }
        let agents = gamma.len();
        Ok(Self {
            delta_c: delta_to_central(delta, gamma_hat, agents),
            beta_c: beta_to_central(beta, alpha, gamma_hat, agents),
            gamma,
            alpha,
            beta,
            delta,
            gamma_hat,
        })
    }

    /// From the coordinator parameters `(γ_i, α, δ_c, β_c)`; requires
    /// `δ_c ∈ (0, 1/γ̂)` and `β_c ∈ (0, 1/(α + γ̂/N))`.
    pub fn from_central(gamma: Vec<f64>, alpha: f64, delta_c: f64, beta_c: f64) -> Result<Self> {
        let gamma_hat = check_gamma(&gamma)?;
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidStepSizes(format!("alpha must be positive, got {alpha}")));
        }
        let agents = gamma.len();
        let delta_max = 1.0 / gamma_hat;
        if !(delta_c > 0.0 && delta_c < delta_max) {
            return Err(Error::InvalidStepSizes(format!(
                "delta_c = {delta_c} outside (0, {delta_max})"
            )));
        }
        let beta_max = 1.0 / (alpha + gamma_hat / agents as f64);
        if !(beta_c > 0.0 && beta_c < beta_max) {
            return Err(Error::InvalidStepSizes(format!(
                "beta_c = {beta_c} outside (0, {beta_max})"
            )));
        }
        Ok(Self {
            delta: central_to_delta(delta_c, gamma_hat, agents),
            beta: central_to_beta(beta_c, alpha, gamma_hat, agents),
            gamma,
            alpha,
            delta_c,
            beta_c,
            gamma_hat,
        })
    }

    /// Uniform `γ_i = gamma` for `agents` agents.
    pub fn uniform_central(agents: usize, gamma: f64, alpha: f64, delta_c: f64, beta_c: f64) -> Result<Self> {
        Self::from_central(vec![gamma; agents], alpha, delta_c, beta_c)
    }

    pub fn agents(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma_hat(&self) -> f64 {
        self.gamma_hat
    }

    pub fn delta_c(&self) -> f64 {
        self.delta_c
    }

    pub fn beta_c(&self) -> f64 {
        self.beta_c
    }

    pub fn check(&self, dims: Dimensions) -> Result<()> {
        check_len("step sizes gamma", dims.agents, self.gamma.len())
    }
}

fn check_gamma(gamma: &[f64]) -> Result<f64> {
    if gamma.is_empty() {
        return Err(Error::InvalidStepSizes("no agent step sizes".into()));
    }
    if let Some(g) = gamma.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(Error::InvalidStepSizes(format!("gamma_i must be positive, got {g}")));
    }
    Ok(gamma.iter().sum::<f64>() / gamma.len() as f64)
}

/// `argmin_{z ∈ Ω_i} f_i(z, σ) + linearᵀz + ½(z − center)ᵀ metric (z − center)`
#[derive(Debug, Clone)]
pub struct ProxProblem {
    pub agent: usize,
    pub sigma: Vec<f64>,
    pub linear: Vec<f64>,
    pub center: Vec<f64>,
    /// Symmetric positive definite, n × n.
    pub metric: Matrix,
    pub tolerance: f64,
}

impl ProxProblem {
    fn gradient(&self, agent: &AgentSpec, z: &[f64]) -> Result<Vec<f64>> {
        let mut g = agent
            .cost
            .grad_x(z, &self.sigma)
            .ok_or(Error::NonSmoothCost(self.agent))?;
        linalg::axpy(1.0, &self.linear, &mut g);
        linalg::axpy(1.0, &self.metric.mul_vec(&linalg::sub(z, &self.center)), &mut g);
        Ok(g)
    }

    /// `‖z − proj_Ω(z − ∇φ(z))‖`
    pub fn natural_residual(&self, agent: &AgentSpec, z: &[f64]) -> Result<f64> {
        let g = self.gradient(agent, z)?;
        let p = agent.local_set.project(&linalg::sub(z, &g))?;
        Ok(linalg::dist2(z, &p))
    }

    fn check(&self, n: usize) -> Result<()> {
        check_len("prox sigma", n, self.sigma.len())?;
        check_len("prox linear term", n, self.linear.len())?;
        check_len("prox center", n, self.center.len())?;
        check_len("prox metric rows", n, self.metric.rows())?;
        check_len("prox metric cols", n, self.metric.cols())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxMethod {
    /// Exact weighted projection when the problem allows it, else iterative.
    Auto,
    /// Always use accelerated projected gradient.
    Iterative,
}

/// Solves one agent's proximal subproblem.
pub fn local_prox(agent: &AgentSpec, p: &ProxProblem) -> Result<Vec<f64>> {
    local_prox_with(agent, p, ProxMethod::Auto)
}

pub fn local_prox_with(agent: &AgentSpec, p: &ProxProblem, method: ProxMethod) -> Result<Vec<f64>> {
    p.check(agent.local_set.dim())?;
    if method == ProxMethod::Auto {
        if let Some(z) = diagonal_fast_path(agent, p)? {
            return Ok(z);
        }
    }
    accelerated_projected_gradient(agent, p)
}

/// Quadratic cost, box-simplex set and diagonal metric: the objective is
/// `Σ_j ½ w_j (z_j − v_j)² + const`, so the solution is one weighted
/// box-simplex projection.
fn diagonal_fast_path(agent: &AgentSpec, p: &ProxProblem) -> Result<Option<Vec<f64>>> {
    let (CostModel::QuadraticAgg { a, target, q }, LocalSet::BoxSimplex { upper, total }) =
        (&agent.cost, &agent.local_set)
    else {
        return Ok(None);
    };
    if !p.metric.is_diagonal() {
        return Ok(None);
    }
    let qs = q.mul_vec(&p.sigma);
    let diag = p.metric.diagonal();
    let mut weights = Vec::with_capacity(diag.len());
    let mut v = Vec::with_capacity(diag.len());
    for j in 0..diag.len() {
        let w = a + diag[j];
        weights.push(w);
        v.push((a * target[j] - qs[j] - p.linear[j] + diag[j] * p.center[j]) / w);
    }
    project_box_simplex(&v, upper, *total, &weights).map(Some)
}

/// FISTA with gradient-based restart and fixed step `1/L`.
fn accelerated_projected_gradient(agent: &AgentSpec, p: &ProxProblem) -> Result<Vec<f64>> {
    let lipschitz = p.metric.gershgorin_bound() + agent.cost.curvature_bound();
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let set = &agent.local_set;

    let mut z = set.project(&p.center)?;
    let mut y = z.clone();
    let mut t = 1.0f64;
    let mut residual = f64::INFINITY;
    for _ in 0..PROX_MAX_ITERS {
        let g = p.gradient(agent, &y)?;
        let z_next = set.project(&y.iter().zip(&g).map(|(yj, gj)| yj - step * gj).collect::<Vec<_>>())?;

        residual = p.natural_residual(agent, &z_next)?;
        if residual <= p.tolerance {
            return Ok(z_next);
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let dz = linalg::sub(&z_next, &z);
        // restart when the momentum direction opposes descent
        if linalg::dot(&linalg::sub(&y, &z_next), &dz) > 0.0 {
            t = 1.0;
            y.clone_from(&z_next);
        } else {
            let beta = (t - 1.0) / t_next;
            y = z_next.iter().zip(&dz).map(|(zj, dj)| zj + beta * dj).collect();
            t = t_next;
        }
        z = z_next;
    }
    Err(Error::NoConvergence {
        what: "local proximal solve",
        iters: PROX_MAX_ITERS,
        residual,
    })
}

/// `J_{ΓA}` with the default inner tolerance.
pub fn resolvent_a(game: &GameSpec, steps: &StepSizes, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    resolvent_a_with(game, steps, w, DEFAULT_PROX_TOLERANCE, ProxMethod::Auto)
}

/// `J_{ΓA}(x, y, σ, μ, λ) = (x⁺, y⁺, σ, μ, λ)` where, per agent,
/// `x_i⁺ = argmin_{v ∈ Ω_i} f_i(v, σ) + ‖v − x_i‖²/2γ_i + ‖A_i v − b_i − y_i‖²/2γ_i`
/// and `y_i⁺ = A_i x_i⁺ − b_i`.
pub fn resolvent_a_with(
    game: &GameSpec,
    steps: &StepSizes,
    w: &ExtendedPoint,
    tolerance: f64,
    method: ProxMethod,
) -> Result<ExtendedPoint> {
    let dims = game.dims();
    w.check(dims)?;
    steps.check(dims)?;
    let blocks: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..dims.agents)
        .into_par_iter()
        .map(|i| {
            let agent = game.agent(i);
            let gamma = steps.gamma[i];
            let xi = &w.x[i * dims.n..(i + 1) * dims.n];
            let yi = &w.y[i * dims.m..(i + 1) * dims.m];
            // ‖A v − b − y‖² = ‖A(v − x)‖² + 2⟨Aᵀ(Ax − b − y), v⟩ + const
            let metric = Matrix::identity(dims.n).add(&agent.coupling.gram()).scale(1.0 / gamma);
            let shift = linalg::sub(&agent.link(xi), yi);
            let linear = linalg::scaled(&agent.coupling.tr_mul_vec(&shift), 1.0 / gamma);
            let problem = ProxProblem {
                agent: i,
                sigma: w.sigma.clone(),
                linear,
                center: xi.to_vec(),
                metric,
                tolerance,
            };
            let x_new = local_prox_with(agent, &problem, method)?;
            let y_new = agent.link(&x_new);
            Ok((x_new, y_new))
        })
        .collect();

    let mut out = w.clone();
    for (i, block) in blocks.into_iter().enumerate() {
        let (x_new, y_new) = block?;
        out.x[i * dims.n..(i + 1) * dims.n].copy_from_slice(&x_new);
        out.y[i * dims.m..(i + 1) * dims.m].copy_from_slice(&y_new);
    }
    Ok(out)
}

/// `J_{ΓB}` for `B = N_{λ≥0} + S` with the sum normalization `P = 1ᵀ_N ⊗ I_m`.
pub fn resolvent_b(dims: Dimensions, steps: &StepSizes, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    w.check(dims)?;
    steps.check(dims)?;
    let agents = dims.agents as f64;
    let (alpha, beta, delta, gamma_hat) = (steps.alpha, steps.beta, steps.delta, steps.gamma_hat);

    let xhat = crate::game::average(&w.x, dims.n)?;
    let mu_scale = agents / ((1.0 + beta * alpha) * agents + beta * gamma_hat);
    let mu: Vec<f64> = w
        .mu
        .iter()
        .zip(w.sigma.iter().zip(&xhat))
        .map(|(m, (s, h))| mu_scale * (m + beta * (s - h)))
        .collect();

    // P Pᵀ = N·I_m, so (I + δγ̂ P Pᵀ)⁻¹ collapses to the scalar 1/(1 + δNγ̂).
    let mut py = vec![0.0; dims.m];
    for yi in w.y.chunks(dims.m) {
        linalg::axpy(1.0, yi, &mut py);
    }
    let lambda_scale = 1.0 / (1.0 + delta * agents * gamma_hat);
    let lambda: Vec<f64> = w
        .lambda
        .iter()
        .zip(&py)
        .map(|(l, p)| (lambda_scale * (l + delta * p)).max(0.0))
        .collect();

    let mut x = w.x.clone();
    let mut y = w.y.clone();
    for (i, gamma) in steps.gamma.iter().enumerate() {
        for (xj, mj) in x[i * dims.n..(i + 1) * dims.n].iter_mut().zip(&mu) {
            *xj += gamma * mj / agents;
        }
        for (yj, lj) in y[i * dims.m..(i + 1) * dims.m].iter_mut().zip(&lambda) {
            *yj -= gamma * lj;
        }
    }
    let sigma = w.sigma.iter().zip(&mu).map(|(s, m)| s - alpha * m).collect();
    Ok(ExtendedPoint {
        x,
        y,
        sigma,
        mu,
        lambda,
    })
}

/// `2 J(w) − w`
pub fn reflect<J>(resolvent: J, w: &ExtendedPoint) -> Result<ExtendedPoint>
where
    J: FnOnce(&ExtendedPoint) -> Result<ExtendedPoint>,
{
    let j = resolvent(w)?;
    Ok(j.combine(2.0, w, -1.0))
}
