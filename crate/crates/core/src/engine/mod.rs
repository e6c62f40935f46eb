//! Iterative solvers: the semi-decentralized Douglas–Rachford iteration, the
//! raw splitting iteration on the extended space, and a projected
//! forward-backward baseline.
//!
//! # Correspondence between the two DR forms
//!
//! The semi-decentralized iteration keeps `ω^k = (x^k, y^k, σ^k, μ^k, λ^k)`
//! with `y^k = A x^k − b`. The raw iteration keeps the governing sequence
//! `ω̃^k` of the reflected-resolvent recursion. With unit relaxation the two
//! are related, with no index offset, by
//!
//! ```text
//! ω̃^k = (x^k + γ_i μ^k / N,  y^k − γ_i λ^k,  σ^k,  μ^k,  λ^k)
//! ```
//!
//! and `J_{ΓA}(ω̃^k)` has strategy block `x^{k+1}`. See [`algorithm_to_tilde`].

pub mod agent;
pub mod coordinator;
pub mod messages;
pub mod pfb;
pub mod raw;
pub mod trace;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::game::{average, coupling_residual, Dimensions, GameSpec};
use crate::linalg;
use crate::operators::{kkt_residual, ExtendedPoint};
use crate::resolvents::{ProxMethod, StepSizes};

pub use agent::{agent_update, agent_update_with};
pub use coordinator::coordinator_update;
pub use messages::{AgentState, AggregateMessage, BroadcastMessage, CoordinatorState};
pub use pfb::{run_pfb, PfbEngine, PfbSteps};
pub use raw::{raw_dr_step, run_raw_dr, RawDrEngine, RawStep};
pub use trace::{format_float, RunTrace, TraceRow, TRACE_CSV_HEADER};

pub const DEFAULT_MAX_ITERS: usize = 100_000;
pub const DEFAULT_STOP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub steps: StepSizes,
    /// Constant relaxation `λ_k ∈ (0, 2)`.
    pub relaxation: f64,
    pub max_iters: usize,
    /// Threshold on `max(step norm, consensus, primal violation)`.
    pub stop_tol: f64,
    pub rng_seed: u64,
    pub record_every: usize,
    /// Record wall-clock time per row. Off by default so traces are
    /// reproducible byte for byte.
    pub timing: bool,
    /// Also stop once `‖x^k − x̄‖ ≤ reference_tol · ‖x⁰ − x̄‖`.
    pub reference_tol: Option<f64>,
    /// `λ⁰ ≥ 0`; zero when absent.
    pub initial_lambda: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(steps: StepSizes) -> Self {
        Self {
            steps,
            relaxation: 1.0,
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            rng_seed: 0,
            record_every: 1,
            timing: false,
            reference_tol: None,
            initial_lambda: None,
        }
    }

    pub fn validate(&self, dims: Dimensions) -> Result<()> {
        self.steps.check(dims)?;
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(Error::InvalidConfig(format!(
                "relaxation {} outside (0, 2)",
                self.relaxation
            )));
        }
        if self.max_iters == 0 || self.record_every == 0 {
            return Err(Error::InvalidConfig(
                "max_iters and record_every must be positive".into(),
            ));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidConfig("stop_tol must be nonnegative".into()));
        }
        if let Some(l) = &self.initial_lambda {
            check_len("initial lambda", dims.m, l.len())?;
            if l.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidConfig("initial lambda must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// JSON form of a run configuration; every field is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigDocument {
    pub gamma: f64,
    pub alpha: f64,
    pub delta_c: f64,
    pub beta_c: f64,
    pub relaxation: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    pub rng_seed: u64,
    pub record_every: usize,
}

impl Default for ConfigDocument {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            alpha: 1.0,
            delta_c: 0.5,
            beta_c: 0.5,
            relaxation: 1.0,
            max_iters: DEFAULT_MAX_ITERS,
            stop_tol: DEFAULT_STOP_TOL,
            rng_seed: 0,
            record_every: 1,
        }
    }
}

impl ConfigDocument {
    pub fn to_config(&self, agents: usize) -> Result<RunConfig> {
        let steps = StepSizes::uniform_central(agents, self.gamma, self.alpha, self.delta_c, self.beta_c)?;
        Ok(RunConfig {
            relaxation: self.relaxation,
            max_iters: self.max_iters,
            stop_tol: self.stop_tol,
            rng_seed: self.rng_seed,
            record_every: self.record_every,
            ..RunConfig::new(steps)
        })
    }
}

/// Final state of a converged run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub point: ExtendedPoint,
}

/// `ω ↦ ω̃ = (x + γ_i μ/N, y − γ_i λ, σ, μ, λ)`
pub fn algorithm_to_tilde(dims: Dimensions, steps: &StepSizes, w: &ExtendedPoint) -> ExtendedPoint {
    shift_tilde(dims, steps, w, 1.0)
}

/// Inverse of [`algorithm_to_tilde`].
pub fn tilde_to_algorithm(dims: Dimensions, steps: &StepSizes, w: &ExtendedPoint) -> ExtendedPoint {
    shift_tilde(dims, steps, w, -1.0)
}

fn shift_tilde(dims: Dimensions, steps: &StepSizes, w: &ExtendedPoint, sign: f64) -> ExtendedPoint {
    let inv_n = 1.0 / dims.agents as f64;
    let mut out = w.clone();
    for (i, g) in steps.gamma().iter().enumerate() {
        for (xj, mj) in out.x[i * dims.n..(i + 1) * dims.n].iter_mut().zip(&w.mu) {
            *xj += sign * g * mj * inv_n;
        }
        for (yj, lj) in out.y[i * dims.m..(i + 1) * dims.m].iter_mut().zip(&w.lambda) {
            *yj -= sign * g * lj;
        }
    }
    out
}

/// Initial agent and coordinator states.
///
/// `x0` is projected onto `Π Ω_i` if needed; when absent every agent starts
/// at the projection of the origin onto its local set.
pub fn dr_init(
    game: &GameSpec,
    config: &RunConfig,
    x0: Option<&[f64]>,
) -> Result<(Vec<AgentState>, CoordinatorState)> {
    let dims = game.dims();
    config.validate(dims)?;
    let x = initial_strategy(game, x0)?;
    let agents: Vec<AgentState> = game
        .agents()
        .iter()
        .zip(x.chunks(dims.n))
        .map(|(a, xi)| AgentState {
            x: xi.to_vec(),
            y: a.link(xi),
        })
        .collect();
    let agg = AggregateMessage::from_agents(&agents, dims.n, dims.m)?;
    let coord = CoordinatorState {
        sigma: agg.xhat().to_vec(),
        mu: vec![0.0; dims.n],
        lambda: config.initial_lambda.clone().unwrap_or_else(|| vec![0.0; dims.m]),
        prev_xhat: agg.xhat().to_vec(),
        prev_yhat: agg.yhat().to_vec(),
    };
    Ok((agents, coord))
}

pub(crate) fn initial_strategy(game: &GameSpec, x0: Option<&[f64]>) -> Result<Vec<f64>> {
    let dims = game.dims();
    let mut x = Vec::with_capacity(dims.stacked_x());
    match x0 {
        Some(x0) => {
            check_len("initial strategy", dims.stacked_x(), x0.len())?;
            for (i, (agent, xi)) in game.agents().iter().zip(x0.chunks(dims.n)).enumerate() {
                if agent.local_set.contains(xi, 0.0) {
                    x.extend_from_slice(xi);
                } else {
                    log::warn!("initial strategy of agent {i} is outside its local set, projecting");
                    x.extend(agent.local_set.project(xi)?);
                }
            }
        }
        None => {
            for agent in game.agents() {
                x.extend(agent.local_set.project(&vec![0.0; dims.n])?);
            }
        }
    }
    Ok(x)
}

/// One step of some iterative method, seen by the run driver.
pub trait Iteration {
    fn method(&self) -> &'static str;
    /// Advances one iteration and returns the step norm.
    fn step(&mut self) -> Result<f64>;
    /// Current `(x, y, σ, μ, λ)` with `y = A x − b`.
    fn point(&self) -> ExtendedPoint;
}

/// `(‖σ − M_n x‖∞, ‖max(Ax − b, 0)‖∞)`
pub fn feasibility_gaps(game: &GameSpec, w: &ExtendedPoint) -> Result<(f64, f64)> {
    let xhat = average(&w.x, game.dims().n)?;
    let consensus = linalg::norm_inf(&linalg::sub(&w.sigma, &xhat));
    let primal = coupling_residual(game, &w.x)?.iter().fold(0.0, |m, v| f64::max(m, *v));
    Ok((consensus, primal))
}

/// Runs `it` until the stopping metric or the reference criterion is met.
pub fn drive<I: Iteration>(
    it: &mut I,
    game: &GameSpec,
    config: &RunConfig,
    reference: Option<&[f64]>,
) -> Result<RunOutcome> {
    if let Some(r) = reference {
        check_len("reference strategy", game.dims().stacked_x(), r.len())?;
    }
    let start = config.timing.then(Instant::now);
    let d0 = reference.map(|r| linalg::dist2(&it.point().x, r));
    let mut trace = RunTrace::new(it.method(), d0);
    let mut point = it.point();
    for k in 1..=config.max_iters {
        let step_norm = it.step()?;
        point = it.point();
        let (consensus, primal) = feasibility_gaps(game, &point)?;
        let dist = reference.map(|r| linalg::dist2(&point.x, r));
        let metric = step_norm.max(consensus).max(primal);
        let reached_reference = match (config.reference_tol, dist, d0) {
            (Some(tol), Some(d), Some(d0)) => d <= tol * d0,
            _ => false,
        };
        let done = metric <= config.stop_tol || reached_reference;
        if k % config.record_every == 0 || done || k == config.max_iters {
            trace.rows.push(TraceRow {
                iter: k,
                dist_to_ref: dist,
                kkt: kkt_residual(game, &point)?,
                step_norm,
                wall_nanos: start.map_or(0, |s| s.elapsed().as_nanos() as u64),
            });
        }
        if done {
            trace.converged = true;
            log::debug!("{} converged after {k} iterations", trace.method);
            return Ok(RunOutcome { trace, point });
        }
    }
    Err(Error::MaxItersExceeded {
        iters: config.max_iters,
        trace: Box::new(trace),
        point: Box::new(point),
    })
}

/// The semi-decentralized iteration. Agents and the coordinator exchange
/// only [`AggregateMessage`] and [`BroadcastMessage`] values.
pub struct DrEngine<'g> {
    game: &'g GameSpec,
    steps: StepSizes,
    agents: Vec<AgentState>,
    coord: CoordinatorState,
    bcast: BroadcastMessage,
    tilde: ExtendedPoint,
    prox_method: ProxMethod,
}

impl<'g> DrEngine<'g> {
    pub fn new(game: &'g GameSpec, config: &RunConfig, x0: Option<&[f64]>) -> Result<Self> {
        let (agents, coord) = dr_init(game, config, x0)?;
        let bcast = coord.broadcast();
        let mut engine = Self {
            game,
            steps: config.steps.clone(),
            agents,
            coord,
            bcast,
            tilde: ExtendedPoint::zeros(game.dims()),
            prox_method: ProxMethod::Auto,
        };
        engine.tilde = algorithm_to_tilde(game.dims(), &engine.steps, &engine.point());
        Ok(engine)
    }

    /// Forces the iterative inner solver (used to cross-check the exact path).
    pub fn with_prox_method(mut self, method: ProxMethod) -> Self {
        self.prox_method = method;
        self
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn coordinator(&self) -> &CoordinatorState {
        &self.coord
    }

    /// Governing sequence `ω̃^k` of the equivalent raw iteration.
    pub fn tilde(&self) -> &ExtendedPoint {
        &self.tilde
    }

    /// One round: parallel local updates, aggregation, coordinator update,
    /// broadcast. Returns `‖ω̃^{k+1} − ω̃^k‖_{Γ⁻¹}`.
    pub fn dr_step(&mut self) -> Result<f64> {
        let dims = self.game.dims();
        let bcast = &self.bcast;
        let gamma = self.steps.gamma();
        let game = self.game;
        let method = self.prox_method;
        let updated: Vec<Result<AgentState>> = self
            .agents
            .par_iter()
            .enumerate()
            .map(|(i, s)| agent_update_with(i, game.agent(i), s, bcast, gamma[i], dims.agents, method))
            .collect();
        let agents = updated.into_iter().collect::<Result<Vec<_>>>()?;
        let agg = AggregateMessage::from_agents(&agents, dims.n, dims.m)?;
        let (coord, bcast) = coordinator_update(&self.coord, &agg, &self.steps)?;
        self.agents = agents;
        self.coord = coord;
        self.bcast = bcast;

        let tilde = algorithm_to_tilde(dims, &self.steps, &self.point());
        let step = tilde.sub(&self.tilde).norm_gamma_inv(&self.steps);
        self.tilde = tilde;
        Ok(step)
    }
}

impl Iteration for DrEngine<'_> {
    fn method(&self) -> &'static str {
        "dr"
    }

    fn step(&mut self) -> Result<f64> {
        self.dr_step()
    }

    fn point(&self) -> ExtendedPoint {
        ExtendedPoint {
            x: self.agents.iter().flat_map(|a| a.x.iter().copied()).collect(),
            y: self.agents.iter().flat_map(|a| a.y.iter().copied()).collect(),
            sigma: self.coord.sigma.clone(),
            mu: self.coord.mu.clone(),
            lambda: self.coord.lambda.clone(),
        }
    }
}

/// Semi-decentralized DR from the default start. A relaxation other than 1
/// runs the raw iteration, which has no closed semi-decentralized form.
pub fn run_dr(game: &GameSpec, config: &RunConfig, reference: Option<&[f64]>) -> Result<RunOutcome> {
    run_dr_from(game, config, None, reference)
}

pub fn run_dr_from(
    game: &GameSpec,
    config: &RunConfig,
    x0: Option<&[f64]>,
    reference: Option<&[f64]>,
) -> Result<RunOutcome> {
    if config.relaxation == 1.0 {
        let mut engine = DrEngine::new(game, config, x0)?;
        drive(&mut engine, game, config, reference)
    } else {
        let mut engine = RawDrEngine::new(game, config, x0)?;
        drive(&mut engine, game, config, reference)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{AgentSpec, CostModel, LocalSet};
    use crate::linalg::Matrix;

    /// Two scalar agents on `[0, 2]` (box-simplex with total = x is not
    /// expressible, so n = 2 with a slack coordinate) and diagonal Q.
    fn toy(q: f64, b: f64) -> GameSpec {
        let agent = |target: f64| AgentSpec {
            local_set: LocalSet::BoxSimplex {
                upper: vec![1.0, 1.0],
                total: 1.0,
            },
            cost: CostModel::QuadraticAgg {
                a: 1.0,
                target: vec![target, 1.0 - target],
                q: Matrix::scaled_identity(2, q),
            },
            coupling: Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            offset: vec![b / 2.0],
        };
        GameSpec::new(Dimensions::new(2, 2, 1).unwrap(), vec![agent(0.9), agent(0.7)]).unwrap()
    }

    fn config(n: usize) -> RunConfig {
        let mut c = RunConfig::new(StepSizes::uniform_central(n, 1.0, 1.0, 0.5, 0.5).unwrap());
        c.stop_tol = 1e-10;
        c.max_iters = 5000;
        c
    }

    #[test]
    fn tilde_map_round_trips() {
        let game = toy(0.2, 1.0);
        let steps = StepSizes::from_raw(vec![0.5, 2.0], 1.0, 1.0, 1.0).unwrap();
        let w = ExtendedPoint::from_flat(game.dims(), &[0.1, 0.9, 0.3, 0.7, 0.2, -0.1, 0.5, 0.5, 0.3, -0.2, 0.4]).unwrap();
        let t = algorithm_to_tilde(game.dims(), &steps, &w);
        let back = tilde_to_algorithm(game.dims(), &steps, &t);
        assert!(back.sub(&w).norm_inf() < 1e-15);
        assert!((t.x[2] - (0.3 + 2.0 * 0.3 / 2.0)).abs() < 1e-15);
        assert!((t.y[1] - (-0.1 - 2.0 * 0.4)).abs() < 1e-15);
    }

    #[test]
    fn init_state() {
        let game = toy(0.2, 1.0);
        let (agents, coord) = dr_init(&game, &config(2), None).unwrap();
        for (a, spec) in agents.iter().zip(game.agents()) {
            assert_eq!(a.x, vec![0.5, 0.5]);
            assert_eq!(a.y, spec.link(&a.x));
        }
        assert_eq!(coord.sigma, vec![0.5, 0.5]);
        assert_eq!(coord.mu, vec![0.0; 2]);
        assert_eq!(coord.lambda, vec![0.0]);
    }

    #[test]
    fn invalid_relaxation_rejected() {
        let game = toy(0.2, 1.0);
        let mut c = config(2);
        c.relaxation = 2.0;
        assert!(dr_init(&game, &c, None).is_err());
    }

    #[test]
    fn strongly_monotone_toy_converges_quickly() {
        // uncoupled optimum is x = proj(target − Q σ / a)
        let game = toy(0.2, 1.0);
        let mut c = config(2);
        c.stop_tol = 1e-8;
        c.max_iters = 500;
        let out = run_dr(&game, &c, None).unwrap();
        assert!(out.trace.converged);
        assert!(out.trace.iterations() < 500);
        assert!(out.trace.final_kkt().unwrap().max() <= 1e-6);
    }

    #[test]
    fn active_coupling_is_priced() {
        // the first coordinates want 0.9 + 0.7 = 1.6 > b = 1
        let game = toy(0.0, 1.0);
        let out = run_dr(&game, &config(2), None).unwrap();
        let w = &out.point;
        assert!((w.x[0] + w.x[2] - 1.0).abs() < 1e-7);
        assert!(w.lambda[0] > 0.1);
        assert!(kkt_residual(&game, w).unwrap().max() < 1e-7);
    }

    #[test]
    fn one_iteration_budget_gives_partial_trace() {
        let game = toy(0.2, 1.0);
        let mut c = config(2);
        c.max_iters = 1;
        match run_dr(&game, &c, None) {
            Err(Error::MaxItersExceeded { iters, trace, .. }) => {
                assert_eq!(iters, 1);
                assert_eq!(trace.rows.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
