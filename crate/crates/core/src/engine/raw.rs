//! The reflected-resolvent iteration written directly on the extended space.

use super::{algorithm_to_tilde, dr_init, drive, Iteration, RunConfig, RunOutcome};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::operators::ExtendedPoint;
use crate::resolvents::{reflect, resolvent_a, resolvent_b, StepSizes};

#[derive(Debug, Clone)]
pub struct RawStep {
    /// `ω^{k+1/2} = J_{ΓA}(ω̃^k)`
    pub half: ExtendedPoint,
    /// `ω^{k+1} = J_{ΓB}(2ω^{k+1/2} − ω̃^k)`
    pub full: ExtendedPoint,
    /// `ω̃^{k+1} = ω̃^k + λ_k(ω^{k+1} − ω^{k+1/2})`
    pub next: ExtendedPoint,
}

/// One relaxed DR step; `relaxation ∈ [0, 2]`.
pub fn raw_dr_step(
    tilde: &ExtendedPoint,
    game: &GameSpec,
    steps: &StepSizes,
    relaxation: f64,
) -> Result<RawStep> {
    if !(0.0..=2.0).contains(&relaxation) {
        return Err(Error::InvalidConfig(format!("relaxation {relaxation} outside [0, 2]")));
    }
    let dims = game.dims();
    let half = resolvent_a(game, steps, tilde)?;
    let reflected = half.combine(2.0, tilde, -1.0);
    let full = resolvent_b(dims, steps, &reflected)?;
    let next = tilde.combine(1.0, &full.sub(&half), relaxation);
    Ok(RawStep { half, full, next })
}

/// `R_B ∘ R_A` where `R = 2J − Id`; its fixed points are the DR fixed points.
pub fn reflected_composition(tilde: &ExtendedPoint, game: &GameSpec, steps: &StepSizes) -> Result<ExtendedPoint> {
    let dims = game.dims();
    let ra = reflect(|w| resolvent_a(game, steps, w), tilde)?;
    reflect(|w| resolvent_b(dims, steps, w), &ra)
}

pub struct RawDrEngine<'g> {
    game: &'g GameSpec,
    steps: StepSizes,
    relaxation: f64,
    tilde: ExtendedPoint,
    point: ExtendedPoint,
}

impl<'g> RawDrEngine<'g> {
    /// Starts from the same `ω⁰` as the semi-decentralized engine, mapped to
    /// `ω̃⁰`.
    pub fn new(game: &'g GameSpec, config: &RunConfig, x0: Option<&[f64]>) -> Result<Self> {
        let (agents, coord) = dr_init(game, config, x0)?;
        let point = ExtendedPoint {
            x: agents.iter().flat_map(|a| a.x.iter().copied()).collect(),
            y: agents.iter().flat_map(|a| a.y.iter().copied()).collect(),
            sigma: coord.sigma,
            mu: coord.mu,
            lambda: coord.lambda,
        };
        let tilde = algorithm_to_tilde(game.dims(), &config.steps, &point);
        Ok(Self {
            game,
            steps: config.steps.clone(),
            relaxation: config.relaxation,
            tilde,
            point,
        })
    }

    pub fn from_tilde(game: &'g GameSpec, steps: StepSizes, relaxation: f64, tilde: ExtendedPoint) -> Result<Self> {
        tilde.check(game.dims())?;
        Ok(Self {
            game,
            point: tilde.clone(),
            steps,
            relaxation,
            tilde,
        })
    }

    pub fn tilde(&self) -> &ExtendedPoint {
        &self.tilde
    }

    /// Advances and returns the full step record.
    pub fn advance(&mut self) -> Result<RawStep> {
        let s = raw_dr_step(&self.tilde, self.game, &self.steps, self.relaxation)?;
        self.point = ExtendedPoint {
            x: s.half.x.clone(),
            y: s.half.y.clone(),
            sigma: s.full.sigma.clone(),
            mu: s.full.mu.clone(),
            lambda: s.full.lambda.clone(),
        };
        self.tilde = s.next.clone();
        Ok(s)
    }
}

impl Iteration for RawDrEngine<'_> {
    fn method(&self) -> &'static str {
        "dr-raw"
    }

    fn step(&mut self) -> Result<f64> {
        let prev = self.tilde.clone();
        self.advance()?;
        Ok(self.tilde.sub(&prev).norm_gamma_inv(&self.steps))
    }

    /// Primal blocks of the latest half-step, multiplier blocks of the
    /// latest full step.
    fn point(&self) -> ExtendedPoint {
        self.point.clone()
    }
}

pub fn run_raw_dr(game: &GameSpec, config: &RunConfig, reference: Option<&[f64]>) -> Result<RunOutcome> {
    let mut engine = RawDrEngine::new(game, config, None)?;
    drive(&mut engine, game, config, reference)
}
