//! Semi-decentralized projected pseudo-gradient baseline with a
//! preconditioned dual ascent on the coupling multiplier:
//!
//! ```text
//! x_i⁺ = proj_{Ω_i}(x_i − τ_i (∂ₓf_i(x_i, x̂) + A_iᵀλ))
//! λ⁺   = proj_{≥0}(λ + τ_λ (A(2x⁺ − x) − b))
//! ```

use rayon::prelude::*;
use serde::Serialize;

use super::{drive, initial_strategy, Iteration, RunConfig, RunOutcome};
use crate::error::{Error, Result};
use crate::game::{average, GameSpec};
use crate::linalg::{self, Matrix};
use crate::operators::ExtendedPoint;

/// Fraction of the inverse Lipschitz estimates used as step sizes.
pub const PFB_STEP_FRACTION: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfbSteps {
    pub tau: Vec<f64>,
    pub tau_lambda: f64,
}

impl PfbSteps {
    /// `τ_λ = 0.4 / ‖A‖²` and `τ_i = 0.4 / L_i` with
    /// `L_i = c_i + ‖Q_i‖ + τ_λ ‖A_i‖²`, where `c_i` bounds the curvature of
    /// `f_i(·, σ)` and `‖Q_i‖` bounds its sensitivity to the aggregate.
    pub fn from_game(game: &GameSpec) -> Self {
        let dims = game.dims();
        let mut aat = Matrix::zeros(dims.m, dims.m);
        for a in game.agents() {
            aat = aat.add(&a.coupling.transpose().gram());
        }
        let a_norm_sq = aat.spectral_norm();
        let tau_lambda = if a_norm_sq > 0.0 {
            PFB_STEP_FRACTION / a_norm_sq
        } else {
            PFB_STEP_FRACTION
        };
        let tau = game
            .agents()
            .iter()
            .map(|a| {
                let ai = a.coupling.spectral_norm();
                let l = a.cost.curvature_bound() + a.cost.sigma_coupling_bound() + tau_lambda * ai * ai;
                PFB_STEP_FRACTION / l
            })
            .collect();
        Self { tau, tau_lambda }
    }
}

pub struct PfbEngine<'g> {
    game: &'g GameSpec,
    steps: PfbSteps,
    x: Vec<f64>,
    lambda: Vec<f64>,
}

impl<'g> PfbEngine<'g> {
    pub fn new(game: &'g GameSpec, config: &RunConfig, x0: Option<&[f64]>) -> Result<Self> {
        let dims = game.dims();
        config.validate(dims)?;
        for (i, a) in game.agents().iter().enumerate() {
            if a.cost.grad_x(&vec![0.0; dims.n], &vec![0.0; dims.n]).is_none() {
                return Err(Error::NonSmoothCost(i));
            }
        }
        Ok(Self {
            game,
            steps: PfbSteps::from_game(game),
            x: initial_strategy(game, x0)?,
            lambda: config.initial_lambda.clone().unwrap_or_else(|| vec![0.0; dims.m]),
        })
    }

    pub fn steps(&self) -> &PfbSteps {
        &self.steps
    }
}

impl Iteration for PfbEngine<'_> {
    fn method(&self) -> &'static str {
        "pfb"
    }

    fn step(&mut self) -> Result<f64> {
        let dims = self.game.dims();
        let xhat = average(&self.x, dims.n)?;
        let game = self.game;
        let lambda = &self.lambda;
        let tau = &self.steps.tau;
        let blocks: Vec<Result<Vec<f64>>> = self
            .x
            .par_chunks(dims.n)
            .enumerate()
            .map(|(i, xi)| {
                let agent = game.agent(i);
                let mut g = agent.cost.grad_x(xi, &xhat).ok_or(Error::NonSmoothCost(i))?;
                linalg::axpy(1.0, &agent.coupling.tr_mul_vec(lambda), &mut g);
                let probe: Vec<f64> = xi.iter().zip(&g).map(|(x, g)| x - tau[i] * g).collect();
                agent.local_set.project(&probe)
            })
            .collect();
        let mut x_next = Vec::with_capacity(self.x.len());
        for b in blocks {
            x_next.extend(b?);
        }

        let mut r = vec![0.0; dims.m];
        for (i, agent) in game.agents().iter().enumerate() {
            let range = i * dims.n..(i + 1) * dims.n;
            let extrapolated: Vec<f64> = x_next[range.clone()]
                .iter()
                .zip(&self.x[range])
                .map(|(a, b)| 2.0 * a - b)
                .collect();
            linalg::axpy(1.0, &agent.link(&extrapolated), &mut r);
        }
        let lambda_next: Vec<f64> = self
            .lambda
            .iter()
            .zip(&r)
            .map(|(l, r)| (l + self.steps.tau_lambda * r).max(0.0))
            .collect();

        let mut sq = 0.0;
        for (i, t) in tau.iter().enumerate() {
            let range = i * dims.n..(i + 1) * dims.n;
            let d = linalg::dist2(&x_next[range.clone()], &self.x[range]);
            sq += d * d / t;
        }
        let dl = linalg::dist2(&lambda_next, &self.lambda);
        sq += dl * dl / self.steps.tau_lambda;
        self.x = x_next;
        self.lambda = lambda_next;
        Ok(sq.sqrt())
    }

    fn point(&self) -> ExtendedPoint {
        let dims = self.game.dims();
        ExtendedPoint {
            y: self
                .game
                .agents()
                .iter()
                .zip(self.x.chunks(dims.n))
                .flat_map(|(a, xi)| a.link(xi))
                .collect(),
            sigma: average(&self.x, dims.n).unwrap_or_else(|_| vec![0.0; dims.n]),
            mu: vec![0.0; dims.n],
            lambda: self.lambda.clone(),
            x: self.x.clone(),
        }
    }
}

pub fn run_pfb(game: &GameSpec, config: &RunConfig, reference: Option<&[f64]>) -> Result<RunOutcome> {
    let mut engine = PfbEngine::new(game, config, None)?;
    drive(&mut engine, game, config, reference)
}
