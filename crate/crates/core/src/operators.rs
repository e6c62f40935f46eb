//! Pseudo-gradient mappings, the extended operator and its splitting, and
//! residual diagnostics.
//!
//! The extended space stacks `ω = (x, y, σ, μ, λ)` with `x ∈ R^{nN}` the
//! strategies, `y ∈ R^{mN}` the local constraint images `y_i = A_i x_i − b_i`,
//! `σ ∈ Rⁿ` the coordinator's aggregate, `μ ∈ Rⁿ` the consensus multiplier
//! and `λ ∈ Rᵐ` the coupling multiplier. Set-valued parts (normal cones) are
//! never materialized: inclusions are checked via projection residuals.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::game::{average, coupling_residual, Dimensions, GameSpec};
use crate::linalg;
use crate::resolvents::StepSizes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl ExtendedPoint {
    pub fn zeros(dims: Dimensions) -> Self {
        Self {
            x: vec![0.0; dims.stacked_x()],
            y: vec![0.0; dims.stacked_y()],
            sigma: vec![0.0; dims.n],
            mu: vec![0.0; dims.n],
            lambda: vec![0.0; dims.m],
        }
    }

    pub fn check(&self, dims: Dimensions) -> Result<()> {
        check_len("extended point x", dims.stacked_x(), self.x.len())?;
        check_len("extended point y", dims.stacked_y(), self.y.len())?;
        check_len("extended point sigma", dims.n, self.sigma.len())?;
        check_len("extended point mu", dims.n, self.mu.len())?;
        check_len("extended point lambda", dims.m, self.lambda.len())
    }

    pub fn len(&self) -> usize {
        self.x.len() + self.y.len() + self.sigma.len() + self.mu.len() + self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.x);
        v.extend_from_slice(&self.y);
        v.extend_from_slice(&self.sigma);
        v.extend_from_slice(&self.mu);
        v.extend_from_slice(&self.lambda);
        v
    }

    pub fn from_flat(dims: Dimensions, v: &[f64]) -> Result<Self> {
        check_len("flat extended point", dims.d(), v.len())?;
        let (x, rest) = v.split_at(dims.stacked_x());
        let (y, rest) = rest.split_at(dims.stacked_y());
        let (sigma, rest) = rest.split_at(dims.n);
        let (mu, lambda) = rest.split_at(dims.n);
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            sigma: sigma.to_vec(),
            mu: mu.to_vec(),
            lambda: lambda.to_vec(),
        })
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let z = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| f(*p, *q)).collect();
        Self {
            x: z(&self.x, &other.x),
            y: z(&self.y, &other.y),
            sigma: z(&self.sigma, &other.sigma),
            mu: z(&self.mu, &other.mu),
            lambda: z(&self.lambda, &other.lambda),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        self.zip_with(other, |p, q| a * p + b * q)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        linalg::dot(&self.to_flat(), &other.to_flat())
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        linalg::norm_inf(&self.to_flat())
    }

    /// Multiplies every block by the matching entry of `Γ`.
    pub fn scale_by_gamma(&self, steps: &StepSizes, n: usize, m: usize) -> Self {
        self.scale_blocks(steps, n, m, false)
    }

    /// Multiplies every block by the matching entry of `Γ⁻¹`.
    pub fn scale_by_gamma_inv(&self, steps: &StepSizes, n: usize, m: usize) -> Self {
        self.scale_blocks(steps, n, m, true)
    }

    fn scale_blocks(&self, steps: &StepSizes, n: usize, m: usize, invert: bool) -> Self {
        let s = |v: f64| if invert { 1.0 / v } else { v };
        let per_agent = |v: &[f64], block: usize| -> Vec<f64> {
            v.chunks(block)
                .zip(&steps.gamma)
                .flat_map(|(c, g)| c.iter().map(move |e| e * s(*g)))
                .collect()
        };
        Self {
            x: per_agent(&self.x, n),
            y: per_agent(&self.y, m),
            sigma: linalg::scaled(&self.sigma, s(steps.alpha)),
            mu: linalg::scaled(&self.mu, s(steps.beta)),
            lambda: linalg::scaled(&self.lambda, s(steps.delta)),
        }
    }

    /// `⟨self, other⟩_{Γ⁻¹}`
    pub fn dot_gamma_inv(&self, other: &Self, steps: &StepSizes) -> f64 {
        let n = self.sigma.len();
        let m = self.lambda.len();
        self.scale_by_gamma_inv(steps, n, m).dot(other)
    }

    pub fn norm_gamma_inv(&self, steps: &StepSizes) -> f64 {
        self.dot_gamma_inv(self, steps).max(0.0).sqrt()
    }
}

/// KKT residual of a candidate extended point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `max_i ‖x_i − proj_{Ω_i}(x_i − ∂ₓf_i(x_i, M_n x) − A_iᵀλ)‖`
    pub stationarity: f64,
    /// `‖max(Ax − b, 0)‖∞`
    pub primal: f64,
    /// `|λᵀ(Ax − b)|`
    pub complementarity: f64,
    /// `‖min(λ, 0)‖∞`
    pub dual_sign: f64,
    /// `‖σ − M_n x‖∞`
    pub consensus: f64,
    /// `max_i ‖y_i − (A_i x_i − b_i)‖∞`
    pub link: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.primal,
            self.complementarity,
            self.dual_sign,
            self.consensus,
            self.link,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Which normalization couples `y` and `λ` in the skew operator.
///
/// `Average` is `M_m = (1/N) 1ᵀ ⊗ I_m`, the form of the extended operator.
/// `Sum` is `P = 1ᵀ ⊗ I_m = N·M_m`, under which `λ` is the true multiplier of
/// `Ax ≤ b`; the closed-form resolvent and the semi-decentralized iteration
/// use this form. The two zero sets correspond via `λ_sum = λ_avg / N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualScaling {
    Average,
    Sum,
}

impl DualScaling {
    fn factor(self, agents: usize) -> f64 {
        match self {
            DualScaling::Average => 1.0 / agents as f64,
            DualScaling::Sum => 1.0,
        }
    }
}

fn agent_blocks(x: &[f64], n: usize) -> impl Iterator<Item = &[f64]> {
    x.chunks(n)
}

fn stacked_gradient(
    game: &GameSpec,
    x: &[f64],
    sigma_of: impl Fn(&[f64]) -> Vec<f64>,
    full: bool,
) -> Result<Vec<f64>> {
    let dims = game.dims();
    check_len("stacked strategy", dims.stacked_x(), x.len())?;
    let sigma = sigma_of(x);
    check_len("aggregate", dims.n, sigma.len())?;
    let inv_n = 1.0 / dims.agents as f64;
    let mut out = Vec::with_capacity(x.len());
    for (i, (agent, xi)) in game.agents().iter().zip(agent_blocks(x, dims.n)).enumerate() {
        let mut g = agent.cost.grad_x(xi, &sigma).ok_or(Error::NonSmoothCost(i))?;
        if full {
            let gs = agent
                .cost
                .grad_sigma(xi, &sigma)
                .ok_or(Error::NonSmoothCost(i))?;
            linalg::axpy(inv_n, &gs, &mut g);
        }
        out.extend(g);
    }
    Ok(out)
}

/// `F(x) = col(∂_{x_i} f_i(x_i, M_n x))`, differentiating through the
/// agent's own share of the average.
pub fn pseudo_subdifferential(game: &GameSpec, x: &[f64]) -> Result<Vec<f64>> {
    let n = game.dims().n;
    stacked_gradient(game, x, |x| average(x, n).unwrap_or_default(), true)
}

/// `F_a(x) = col(∂_{x_i} f_i(x_i, z)|_{z = M_n x})`: the aggregate is frozen
/// before differentiating.
pub fn aggregative_subdifferential(game: &GameSpec, x: &[f64]) -> Result<Vec<f64>> {
    let n = game.dims().n;
    stacked_gradient(game, x, |x| average(x, n).unwrap_or_default(), false)
}

/// `F_e(x, σ) = col(∂_{x_i} f_i(x_i, σ))` with σ an independent variable.
pub fn extended_subdifferential(game: &GameSpec, x: &[f64], sigma: &[f64]) -> Result<Vec<f64>> {
    check_len("aggregate", game.dims().n, sigma.len())?;
    stacked_gradient(game, x, |_| sigma.to_vec(), false)
}

/// The skew operator `S` with the `Average` normalization.
pub fn apply_s(dims: Dimensions, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    apply_s_scaled(dims, w, DualScaling::Average)
}

/// `S w = (−M_nᵀμ, Kᵀλ, μ, M_n x − σ, −K y)` where `K` is `M_m` or `P`.
pub fn apply_s_scaled(dims: Dimensions, w: &ExtendedPoint, scaling: DualScaling) -> Result<ExtendedPoint> {
    w.check(dims)?;
    let inv_n = 1.0 / dims.agents as f64;
    let k = scaling.factor(dims.agents);
    let x_part: Vec<f64> = (0..dims.agents)
        .flat_map(|_| w.mu.iter().map(|v| -v * inv_n))
        .collect();
    let y_part: Vec<f64> = (0..dims.agents)
        .flat_map(|_| w.lambda.iter().map(|v| v * k))
        .collect();
    let xhat = average(&w.x, dims.n)?;
    let mut y_sum = vec![0.0; dims.m];
    for yi in w.y.chunks(dims.m) {
        linalg::axpy(1.0, yi, &mut y_sum);
    }
    Ok(ExtendedPoint {
        x: x_part,
        y: y_part,
        sigma: w.mu.clone(),
        mu: linalg::sub(&xhat, &w.sigma),
        lambda: y_sum.iter().map(|v| -v * k).collect(),
    })
}

/// Single-valued part of `T(w)` (normal cones taken as zero), written out
/// directly from the extended KKT system.
pub fn apply_t_single_valued(game: &GameSpec, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    let dims = game.dims();
    w.check(dims)?;
    let inv_n = 1.0 / dims.agents as f64;
    let fe = extended_subdifferential(game, &w.x, &w.sigma)?;
    let xhat = average(&w.x, dims.n)?;
    let yhat = average(&w.y, dims.m)?;
    let x: Vec<f64> = fe
        .chunks(dims.n)
        .flat_map(|g| g.iter().zip(&w.mu).map(move |(gj, mj)| gj - mj * inv_n))
        .collect();
    let y: Vec<f64> = (0..dims.agents)
        .flat_map(|_| w.lambda.iter().map(move |l| l * inv_n))
        .collect();
    Ok(ExtendedPoint {
        x,
        y,
        sigma: w.mu.clone(),
        mu: w.sigma.iter().zip(&xhat).map(|(s, h)| -(s - h)).collect(),
        lambda: yhat.iter().map(|v| -v).collect(),
    })
}

/// Single-valued part of `A(w) = (F_e(x, σ), 0, 0, 0, 0)`.
pub fn apply_a_single_valued(game: &GameSpec, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    let dims = game.dims();
    w.check(dims)?;
    let mut out = ExtendedPoint::zeros(dims);
    out.x = extended_subdifferential(game, &w.x, &w.sigma)?;
    Ok(out)
}

/// Single-valued part of `B(w) = S w`.
pub fn apply_b_single_valued(dims: Dimensions, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    apply_s(dims, w)
}

/// KKT residual of `w` for the aggregative equilibrium conditions.
pub fn kkt_residual(game: &GameSpec, w: &ExtendedPoint) -> Result<KktResidual> {
    let dims = game.dims();
    w.check(dims)?;
    let xhat = average(&w.x, dims.n)?;
    let mut stationarity = 0.0f64;
    let mut link = 0.0f64;
    for (i, agent) in game.agents().iter().enumerate() {
        let xi = &w.x[i * dims.n..(i + 1) * dims.n];
        let yi = &w.y[i * dims.m..(i + 1) * dims.m];
        let mut g = agent.cost.grad_x(xi, &xhat).ok_or(Error::NonSmoothCost(i))?;
        linalg::axpy(1.0, &agent.coupling.tr_mul_vec(&w.lambda), &mut g);
        let probe = linalg::sub(xi, &g);
        let p = agent.local_set.project(&probe)?;
        stationarity = stationarity.max(linalg::dist2(xi, &p));
        link = link.max(linalg::norm_inf(&linalg::sub(yi, &agent.link(xi))));
    }
    let r = coupling_residual(game, &w.x)?;
    Ok(KktResidual {
        stationarity,
        primal: r.iter().fold(0.0, |m, v| f64::max(m, *v)),
        complementarity: linalg::dot(&w.lambda, &r).abs(),
        dual_sign: w.lambda.iter().fold(0.0, |m, v| f64::max(m, -v)),
        consensus: linalg::norm_inf(&linalg::sub(&w.sigma, &xhat)),
        link,
    })
}

/// Inclusion residual of `w⁺ = J_{ΓA}(w)`: how far `w − w⁺ ∈ ΓA(w⁺)` is
/// from holding, as a max of natural residuals.
pub fn resolvent_a_inclusion_residual(
    game: &GameSpec,
    steps: &StepSizes,
    w: &ExtendedPoint,
    w_plus: &ExtendedPoint,
) -> Result<f64> {
    let dims = game.dims();
    w.check(dims)?;
    w_plus.check(dims)?;
    let mut res = linalg::norm_inf(&linalg::sub(&w.sigma, &w_plus.sigma))
        .max(linalg::norm_inf(&linalg::sub(&w.mu, &w_plus.mu)))
        .max(linalg::norm_inf(&linalg::sub(&w.lambda, &w_plus.lambda)));
    for (i, agent) in game.agents().iter().enumerate() {
        let xs = i * dims.n..(i + 1) * dims.n;
        let ys = i * dims.m..(i + 1) * dims.m;
        let (x, xp) = (&w.x[xs.clone()], &w_plus.x[xs]);
        let (y, yp) = (&w.y[ys.clone()], &w_plus.y[ys]);
        let gamma = steps.gamma[i];
        // (x − x⁺)/γ − ∇f(x⁺, σ) + A_iᵀ(y − y⁺)/γ must lie in N_Ω(x⁺)
        let mut g = agent
            .cost
            .grad_x(xp, &w.sigma)
            .ok_or(Error::NonSmoothCost(i))?;
        linalg::axpy(-1.0 / gamma, &linalg::sub(x, xp), &mut g);
        linalg::axpy(
            -1.0 / gamma,
            &agent.coupling.tr_mul_vec(&linalg::sub(y, yp)),
            &mut g,
        );
        let p = agent.local_set.project(&linalg::sub(xp, &g))?;
        res = res
            .max(linalg::dist2(xp, &p))
            .max(linalg::norm_inf(&linalg::sub(yp, &agent.link(xp))));
    }
    Ok(res)
}

/// Inclusion residual of `w⁺ = J_{ΓB}(w)` for `B = N_{λ≥0} + S` under the
/// given dual scaling.
pub fn resolvent_b_inclusion_residual(
    dims: Dimensions,
    steps: &StepSizes,
    w: &ExtendedPoint,
    w_plus: &ExtendedPoint,
    scaling: DualScaling,
) -> Result<f64> {
    w.check(dims)?;
    w_plus.check(dims)?;
    let s = apply_s_scaled(dims, w_plus, scaling)?;
    // r = w − w⁺ − ΓS w⁺ ; all blocks but λ must vanish, r_λ/δ ∈ N_{≥0}(λ⁺)
    let r = w.sub(w_plus).sub(&s.scale_by_gamma(steps, dims.n, dims.m));
    let mut res = linalg::norm_inf(&r.x)
        .max(linalg::norm_inf(&r.y))
        .max(linalg::norm_inf(&r.sigma))
        .max(linalg::norm_inf(&r.mu));
    for (lp, rl) in w_plus.lambda.iter().zip(&r.lambda) {
        let v = rl / steps.delta;
        res = res.max((lp - (lp + v).max(0.0)).abs());
    }
    Ok(res)
}

/// Sampled evidence on monotonicity of the pseudo-gradient mappings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    /// `min ⟨F_e(x,σ) − F_e(x',σ'), x − x'⟩` over sampled pairs.
    pub min_extended: f64,
    /// Same, normalized by `‖(x,σ) − (x',σ')‖²`.
    pub min_extended_ratio: f64,
    /// `min ⟨F_a(x) − F_a(x'), x − x'⟩` over sampled pairs.
    pub min_aggregative: f64,
}

impl ProbeReport {
    pub fn extended_monotone(&self) -> bool {
        self.min_extended >= 0.0
    }
}

pub const DEFAULT_PROBE_SAMPLES: usize = 1000;

/// Draws `samples` random pairs in the bounding box of `Π Ω_i` (and of the
/// set of averages for σ) and reports the smallest monotonicity inner
/// products. A negative value falsifies monotonicity on this instance.
pub fn monotonicity_probe(game: &GameSpec, samples: usize, seed: u64) -> Result<ProbeReport> {
    let dims = game.dims();
    let samples = samples.max(1);
    let mut lo = Vec::with_capacity(dims.stacked_x());
    let mut hi = Vec::with_capacity(dims.stacked_x());
    for agent in game.agents() {
        let (l, h) = agent.local_set.bounding_box();
        lo.extend(l);
        hi.extend(h);
    }
    let sigma_lo = average(&lo, dims.n)?;
    let sigma_hi = average(&hi, dims.n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |l: &[f64], h: &[f64]| -> Vec<f64> {
        l.iter().zip(h).map(|(a, b)| a + (b - a) * rng.gen::<f64>()).collect()
    };

    let mut report = ProbeReport {
        samples,
        min_extended: f64::INFINITY,
        min_extended_ratio: f64::INFINITY,
        min_aggregative: f64::INFINITY,
    };
    for _ in 0..samples {
        let x1 = draw(&lo, &hi);
        let s1 = draw(&sigma_lo, &sigma_hi);
        let x2 = draw(&lo, &hi);
        let s2 = draw(&sigma_lo, &sigma_hi);
        let dx = linalg::sub(&x1, &x2);
        let ds = linalg::sub(&s1, &s2);
        let df = linalg::sub(
            &extended_subdifferential(game, &x1, &s1)?,
            &extended_subdifferential(game, &x2, &s2)?,
        );
        let ext = linalg::dot(&df, &dx);
        let dist_sq = linalg::dot(&dx, &dx) + linalg::dot(&ds, &ds);
        let dfa = linalg::sub(
            &aggregative_subdifferential(game, &x1)?,
            &aggregative_subdifferential(game, &x2)?,
        );
        report.min_extended = report.min_extended.min(ext);
        if dist_sq > 0.0 {
            report.min_extended_ratio = report.min_extended_ratio.min(ext / dist_sq);
        }
        report.min_aggregative = report.min_aggregative.min(linalg::dot(&dfa, &dx));
    }
    Ok(report)
}
