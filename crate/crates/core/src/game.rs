//! Game data model: agents, local sets, costs and affine coupling.
//!
//! An N-agent average aggregative game. Agent `i` picks `x_i ∈ Ω_i ⊂ Rⁿ`,
//! pays `f_i(x_i, σ)` with `σ` the population average, and all agents share
//! the coupling constraint `Σ_i A_i x_i ≤ Σ_i b_i`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{self, Matrix};
use crate::resolvents::simplex::project_box_simplex;

/// Problem sizes and the derived extended-space dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    pub agents: usize,
    pub n: usize,
    pub m: usize,
}

impl Dimensions {
    pub fn new(agents: usize, n: usize, m: usize) -> Result<Self> {
        if agents == 0 || n == 0 || m == 0 {
            return Err(Error::InvalidConfig(format!(
                "dimensions must be positive (N={agents}, n={n}, m={m})"
            )));
        }
        Ok(Self { agents, n, m })
    }

    /// Extended-space dimension `nN + mN + 2n + m`.
    pub fn d(&self) -> usize {
        self.n * self.agents + self.m * self.agents + 2 * self.n + self.m
    }

    pub fn d1(&self) -> usize {
        self.d() - self.n * self.agents
    }

    pub fn d2(&self) -> usize {
        self.d1() - self.m * self.agents
    }

    pub fn d3(&self) -> usize {
        self.d() - self.m
    }

    pub fn stacked_x(&self) -> usize {
        self.n * self.agents
    }

    pub fn stacked_y(&self) -> usize {
        self.m * self.agents
    }
}

/// Projection under a diagonal metric: `(v, weights) ↦ argmin Σ w_j (z_j − v_j)²`.
pub type ProjectionFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// User-supplied convex set, known only through its projection.
#[derive(Clone)]
pub struct ConvexOracle {
    pub dim: usize,
    pub project: Arc<ProjectionFn>,
    /// Axis-aligned bounding box `(lower, upper)`.
    pub bounds: (Vec<f64>, Vec<f64>),
}

impl fmt::Debug for ConvexOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexOracle")
            .field("dim", &self.dim)
            .field("bounds", &self.bounds)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum LocalSet {
    /// `{x | 0 ≤ x ≤ upper, 1ᵀx = total}`
    BoxSimplex { upper: Vec<f64>, total: f64 },
    GenericConvex(ConvexOracle),
}

impl LocalSet {
    /// Checked constructor; rejects empty sets.
    pub fn box_simplex(upper: Vec<f64>, total: f64) -> Result<Self> {
        let set = LocalSet::BoxSimplex { upper, total };
        if !set.is_nonempty() {
            let LocalSet::BoxSimplex { upper, total } = set else {
                unreachable!()
            };
            return Err(Error::EmptySet {
                upper_sum: upper.iter().sum(),
                total,
            });
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            LocalSet::BoxSimplex { upper, .. } => upper.len(),
            LocalSet::GenericConvex(o) => o.dim,
        }
    }

    pub fn is_nonempty(&self) -> bool {
        match self {
            LocalSet::BoxSimplex { upper, total } => {
                *total >= 0.0
                    && upper.iter().all(|u| *u >= 0.0)
                    && upper.iter().sum::<f64>() >= *total
            }
            LocalSet::GenericConvex(_) => true,
        }
    }

    pub fn project_weighted(&self, v: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
        check_len("local set projection", self.dim(), v.len())?;
        match self {
            LocalSet::BoxSimplex { upper, total } => project_box_simplex(v, upper, *total, weights),
            LocalSet::GenericConvex(o) => {
                let out = (o.project)(v, weights);
                check_len("projection oracle output", o.dim, out.len())?;
                Ok(out)
            }
        }
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.project_weighted(v, &vec![1.0; v.len()])
    }

    /// Membership up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            LocalSet::BoxSimplex { upper, total } => {
                x.len() == upper.len()
                    && x.iter().zip(upper).all(|(xi, ui)| *xi >= -tol && *xi <= ui + tol)
                    && (x.iter().sum::<f64>() - total).abs() <= tol * (1.0 + x.len() as f64)
            }
            LocalSet::GenericConvex(_) => match self.project(x) {
                Ok(p) => linalg::norm_inf(&linalg::sub(&p, x)) <= tol,
                Err(_) => false,
            },
        }
    }

    /// Axis-aligned bounding box of the set.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            LocalSet::BoxSimplex { upper, total } => {
                (vec![0.0; upper.len()], upper.iter().map(|u| u.min(*total)).collect())
            }
            LocalSet::GenericConvex(o) => o.bounds.clone(),
        }
    }
}

/// `(x, σ) ↦ f(x, σ)`
pub type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
/// `(x, σ) ↦ ∇ f(x, σ)` with respect to one of the two arguments.
pub type GradientFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;

/// Smooth cost given by oracles.
#[derive(Clone)]
pub struct SmoothOracle {
    pub value: Arc<ValueFn>,
    pub grad_x: Option<Arc<GradientFn>>,
    pub grad_sigma: Option<Arc<GradientFn>>,
    /// Lipschitz constant of `∇ₓ f(·, σ)`.
    pub curvature: f64,
    /// Lipschitz constant of `σ ↦ ∇ₓ f(x, σ)`.
    pub sigma_coupling: f64,
}

impl fmt::Debug for SmoothOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothOracle")
            .field("has_grad_x", &self.grad_x.is_some())
            .field("has_grad_sigma", &self.grad_sigma.is_some())
            .field("curvature", &self.curvature)
            .field("sigma_coupling", &self.sigma_coupling)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum CostModel {
    /// `f(x, σ) = ½ a ‖x − target‖² + (Q σ)ᵀ x`
    QuadraticAgg {
        a: f64,
        target: Vec<f64>,
        q: Matrix,
    },
    GenericSmooth(SmoothOracle),
}

impl CostModel {
    pub fn value(&self, x: &[f64], sigma: &[f64]) -> f64 {
        match self {
            CostModel::QuadraticAgg { a, target, q } => {
                let d = linalg::sub(x, target);
                0.5 * a * linalg::dot(&d, &d) + linalg::dot(&q.mul_vec(sigma), x)
            }
            CostModel::GenericSmooth(o) => (o.value)(x, sigma),
        }
    }

    /// Partial gradient in the first argument, `∂ₓ f(x, σ)`.
    pub fn grad_x(&self, x: &[f64], sigma: &[f64]) -> Option<Vec<f64>> {
        match self {
            CostModel::QuadraticAgg { a, target, q } => {
                let mut g = q.mul_vec(sigma);
                for ((gj, xj), tj) in g.iter_mut().zip(x).zip(target) {
                    *gj += a * (xj - tj);
                }
                Some(g)
            }
            CostModel::GenericSmooth(o) => o.grad_x.as_ref().map(|g| g(x, sigma)),
        }
    }

    /// Partial gradient in the aggregate argument, `∂_σ f(x, σ)`.
    pub fn grad_sigma(&self, x: &[f64], sigma: &[f64]) -> Option<Vec<f64>> {
        match self {
            CostModel::QuadraticAgg { q, .. } => Some(q.tr_mul_vec(x)),
            CostModel::GenericSmooth(o) => o.grad_sigma.as_ref().map(|g| g(x, sigma)),
        }
    }

    /// Lipschitz bound of `x ↦ ∂ₓ f(x, σ)`.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            CostModel::QuadraticAgg { a, .. } => *a,
            CostModel::GenericSmooth(o) => o.curvature,
        }
    }

    /// Lipschitz bound of `σ ↦ ∂ₓ f(x, σ)`.
    pub fn sigma_coupling_bound(&self) -> f64 {
        match self {
            CostModel::QuadraticAgg { q, .. } => q.spectral_norm(),
            CostModel::GenericSmooth(o) => o.sigma_coupling,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub local_set: LocalSet,
    pub cost: CostModel,
    /// `A_i`, m × n.
    pub coupling: Matrix,
    /// `b_i`, length m.
    pub offset: Vec<f64>,
}

impl AgentSpec {
    /// `A_i x_i − b_i`
    pub fn link(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.coupling.mul_vec(x);
        for (yj, bj) in y.iter_mut().zip(&self.offset) {
            *yj -= bj;
        }
        y
    }

    /// Membership of `(x, y)` in `C_i = {(x, y) | x ∈ Ω_i, y = A_i x − b_i}`.
    pub fn in_constraint_graph(&self, x: &[f64], y: &[f64], tol: f64) -> bool {
        self.local_set.contains(x, tol)
            && y.len() == self.offset.len()
            && linalg::norm_inf(&linalg::sub(&self.link(x), y)) <= tol
    }
}

#[derive(Debug, Clone)]
pub struct GameSpec {
    dims: Dimensions,
    agents: Vec<AgentSpec>,
}

impl GameSpec {
    /// Checks structural consistency of every agent against `dims`.
    pub fn new(dims: Dimensions, agents: Vec<AgentSpec>) -> Result<Self> {
        check_len("agent count", dims.agents, agents.len())?;
        for agent in &agents {
            check_len("local set dimension", dims.n, agent.local_set.dim())?;
            check_len("coupling matrix rows", dims.m, agent.coupling.rows())?;
            check_len("coupling matrix cols", dims.n, agent.coupling.cols())?;
            check_len("coupling offset", dims.m, agent.offset.len())?;
            if let CostModel::QuadraticAgg { a, target, q } = &agent.cost {
                check_len("cost target", dims.n, target.len())?;
                check_len("cost coupling rows", dims.n, q.rows())?;
                check_len("cost coupling cols", dims.n, q.cols())?;
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidConfig(format!(
                        "quadratic cost weight must be positive, got {a}"
                    )));
                }
                if !q.is_finite() || target.iter().any(|t| !t.is_finite()) {
                    return Err(Error::InvalidConfig("non-finite cost data".into()));
                }
            }
        }
        Ok(Self { dims, agents })
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn agent(&self, i: usize) -> &AgentSpec {
        &self.agents[i]
    }

    /// `b = Σ_i b_i`
    pub fn total_offset(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.dims.m];
        for agent in &self.agents {
            linalg::axpy(1.0, &agent.offset, &mut b);
        }
        b
    }

    /// `A x = Σ_i A_i x_i`
    pub fn coupling_product(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("stacked strategy", self.dims.stacked_x(), x.len())?;
        let mut ax = vec![0.0; self.dims.m];
        for (agent, xi) in self.agents.iter().zip(x.chunks(self.dims.n)) {
            linalg::axpy(1.0, &agent.coupling.mul_vec(xi), &mut ax);
        }
        Ok(ax)
    }

    /// `‖A‖₂²` bounded by `Σ_i ‖A_i‖₂²`.
    pub fn coupling_norm_sq_bound(&self) -> f64 {
        self.agents
            .iter()
            .map(|a| a.coupling.spectral_norm().powi(2))
            .sum()
    }

    /// Serializes to the JSON game document.
    pub fn to_document(&self) -> Result<GameDocument> {
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, agent)| {
                let (upper, total) = match &agent.local_set {
                    LocalSet::BoxSimplex { upper, total } => (upper.clone(), *total),
                    LocalSet::GenericConvex(_) => {
                        return Err(Error::Schema(format!(
                            "agent {i}: oracle local sets cannot be serialized"
                        )))
                    }
                };
                let (a, xtilde, q) = match &agent.cost {
                    CostModel::QuadraticAgg { a, target, q } => (*a, target.clone(), q.to_rows()),
                    CostModel::GenericSmooth(_) => {
                        return Err(Error::Schema(format!(
                            "agent {i}: oracle costs cannot be serialized"
                        )))
                    }
                };
                Ok(AgentDocument {
                    upper,
                    total,
                    a,
                    xtilde,
                    q,
                    a_mat: agent.coupling.to_rows(),
                    b: agent.offset.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GameDocument {
            dims: DimsDocument {
                agents: self.dims.agents,
                n: self.dims.n,
                m: self.dims.m,
            },
            agents,
        })
    }

    pub fn from_document(doc: &GameDocument) -> Result<Self> {
        let dims = Dimensions::new(doc.dims.agents, doc.dims.n, doc.dims.m)
            .map_err(|e| Error::Schema(e.to_string()))?;
        let agents = doc
            .agents
            .iter()
            .map(|a| {
                Ok(AgentSpec {
                    local_set: LocalSet::BoxSimplex {
                        upper: a.upper.clone(),
                        total: a.total,
                    },
                    cost: CostModel::QuadraticAgg {
                        a: a.a,
                        target: a.xtilde.clone(),
                        q: Matrix::from_rows(&a.q)?,
                    },
                    coupling: Matrix::from_rows(&a.a_mat)?,
                    offset: a.b.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GameSpec::new(dims, agents)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document()?)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GameDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

/// On-disk game format. Matrices are row-major nested arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameDocument {
    pub dims: DimsDocument,
    pub agents: Vec<AgentDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsDocument {
    #[serde(rename = "N")]
    pub agents: usize,
    pub n: usize,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDocument {
    pub upper: Vec<f64>,
    pub total: f64,
    pub a: f64,
    pub xtilde: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "A")]
    pub a_mat: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

/// `M_n x`: the average of the N blocks of a stacked vector.
///
/// Blocks are summed in ascending agent order so the result is
/// bit-reproducible.
pub fn average(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 || x.is_empty() || !x.len().is_multiple_of(n) {
        return Err(Error::DimensionMismatch {
            context: "stacked vector (length not a positive multiple of block size)",
            expected: n,
            actual: x.len(),
        });
    }
    let agents = x.len() / n;
    let mut out = vec![0.0; n];
    for block in x.chunks(n) {
        linalg::axpy(1.0, block, &mut out);
    }
    let inv = agents as f64;
    out.iter_mut().for_each(|v| *v /= inv);
    Ok(out)
}

/// `max(Ax − b, 0)` componentwise.
pub fn coupling_violation(game: &GameSpec, x: &[f64]) -> Result<Vec<f64>> {
    let ax = game.coupling_product(x)?;
    let b = game.total_offset();
    Ok(ax.iter().zip(&b).map(|(a, b)| (a - b).max(0.0)).collect())
}

/// Signed `Ax − b`.
pub fn coupling_residual(game: &GameSpec, x: &[f64]) -> Result<Vec<f64>> {
    let ax = game.coupling_product(x)?;
    Ok(linalg::sub(&ax, &game.total_offset()))
}

/// Strict-feasibility margin sought by the phase-1 search.
pub const SLATER_MARGIN: f64 = 1e-9;
/// Iteration budget of the phase-1 search.
pub const FEASIBILITY_MAX_ITERS: usize = 10_000;
/// Relative error allowed between the gradient oracle and central differences.
pub const GRADIENT_FD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentCheck {
    pub index: usize,
    pub nonempty: bool,
    /// Relative error of the gradient oracle against central differences;
    /// `None` when the cost has no gradient oracle.
    pub gradient_fd_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub agents: Vec<AgentCheck>,
    pub feasible_point: Vec<f64>,
    /// `max_j (Ax − b)_j` at `feasible_point`.
    pub max_violation: f64,
    /// Whether `Ax ≤ b − SLATER_MARGIN` holds at `feasible_point`.
    pub strictly_feasible: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn gradients_ok(&self) -> bool {
        self.agents
            .iter()
            .all(|a| a.gradient_fd_error.is_none_or(|e| e <= GRADIENT_FD_TOLERANCE))
    }

    pub fn all_ok(&self) -> bool {
        self.gradients_ok() && self.agents.iter().all(|a| a.nonempty)
    }
}

/// Checks local-set nonemptiness, gradient oracles and global feasibility.
pub fn validate_game(game: &GameSpec) -> Result<ValidationReport> {
    let dims = game.dims();
    let mut warnings = Vec::new();
    let mut checks = Vec::with_capacity(dims.agents);

    for (i, agent) in game.agents().iter().enumerate() {
        if !agent.local_set.is_nonempty() {
            return Err(Error::EmptyLocalSet(i));
        }
    }

    // Per-agent probe point: the projection of the bounding-box centre.
    let mut x0 = Vec::with_capacity(dims.stacked_x());
    for agent in game.agents() {
        let (lo, hi) = agent.local_set.bounding_box();
        let centre: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| 0.5 * (l + h)).collect();
        x0.extend(agent.local_set.project(&centre)?);
    }
    let sigma0 = average(&x0, dims.n)?;

    for (i, (agent, xi)) in game.agents().iter().zip(x0.chunks(dims.n)).enumerate() {
        let err = agent
            .cost
            .grad_x(xi, &sigma0)
            .map(|g| gradient_fd_error(&agent.cost, xi, &sigma0, &g));
        if let Some(e) = err {
            if e > GRADIENT_FD_TOLERANCE {
                warnings.push(format!(
                    "agent {i}: gradient oracle disagrees with finite differences (rel. error {e:e})"
                ));
            }
        }
        checks.push(AgentCheck {
            index: i,
            nonempty: true,
            gradient_fd_error: err,
        });
    }

    let (point, max_violation) = phase_one(game, x0)?;
    let strictly_feasible = max_violation <= -SLATER_MARGIN;
    if !strictly_feasible {
        warnings.push(format!(
            "no strictly feasible point certified (max violation {max_violation:e}); Slater's condition unverified"
        ));
    }
    Ok(ValidationReport {
        agents: checks,
        feasible_point: point,
        max_violation,
        strictly_feasible,
        warnings,
    })
}

fn gradient_fd_error(cost: &CostModel, x: &[f64], sigma: &[f64], grad: &[f64]) -> f64 {
    let mut fd = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let up = cost.value(&probe, sigma);
        probe[j] = x[j] - h;
        let down = cost.value(&probe, sigma);
        probe[j] = x[j];
        fd[j] = (up - down) / (2.0 * h);
    }
    linalg::dist2(&fd, grad) / linalg::norm2(grad).max(1.0)
}

/// Projected gradient on `½‖max(Ax − b + margin, 0)‖²` over `Π Ω_i`, with a
/// decreasing margin schedule. Returns the best point and its max violation.
fn phase_one(game: &GameSpec, mut x: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let dims = game.dims();
    let b = game.total_offset();
    let step = 1.0 / game.coupling_norm_sq_bound().max(f64::MIN_POSITIVE);
    let scale = 1.0 + linalg::norm_inf(&b);
    let margins = [1e-2, 1e-4, 1e-6, 1e-8].map(|m| (m * scale).max(10.0 * SLATER_MARGIN));
    let per_stage = FEASIBILITY_MAX_ITERS / margins.len();

    let max_violation = |x: &[f64]| -> Result<f64> {
        let r = coupling_residual(game, x)?;
        Ok(r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    };
    let mut best_violation = max_violation(&x)?;
    let mut best = x.clone();
    if best_violation <= -SLATER_MARGIN {
        return Ok((best, best_violation));
    }

    'stages: for margin in margins {
        for _ in 0..per_stage {
            let ax = game.coupling_product(&x)?;
            let r: Vec<f64> = ax
                .iter()
                .zip(&b)
                .map(|(a, bj)| (a - bj + margin).max(0.0))
                .collect();
            if r.iter().all(|v| *v == 0.0) {
                break;
            }
            let mut next = Vec::with_capacity(x.len());
            for (agent, xi) in game.agents().iter().zip(x.chunks(dims.n)) {
                let g = agent.coupling.tr_mul_vec(&r);
                let v: Vec<f64> = xi.iter().zip(&g).map(|(xj, gj)| xj - step * gj).collect();
                next.extend(agent.local_set.project(&v)?);
            }
            x = next;
            let viol = max_violation(&x)?;
            if viol < best_violation {
                best_violation = viol;
                best.clone_from(&x);
            }
            if best_violation <= -SLATER_MARGIN {
                break 'stages;
            }
        }
    }

    if best_violation > SLATER_MARGIN {
        return Err(Error::Infeasible {
            max_violation: best_violation,
        });
    }
    Ok((best, best_violation))
}
