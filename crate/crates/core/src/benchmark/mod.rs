//! Random resource-allocation games, reference solutions, equilibrium
//! quality measures and the DR versus forward-backward comparison.
//!
//! Each agent splits one unit of work over `n` time slots subject to
//! per-slot caps `ū_i`, and pays `½ a_i ‖x_i − x̃_i‖² + (Q_i σ)ᵀ x_i` where σ
//! is the average allocation. Weighted slot loads are capped:
//! `Σ_i w_i x_i ≤ b̄`.

pub mod experiment;
pub mod quality;
pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{validate_game, AgentSpec, CostModel, Dimensions, GameSpec, LocalSet};
use crate::linalg::Matrix;

pub use experiment::{run_comparison, ComparisonConfig, ExperimentReport, Method, MethodRun, SeedOutcome};
pub use quality::{epsilon_nash_gap, gae_vi_residual, EpsilonReport};
pub use reference::{ground_truth, GroundTruth};

/// Attempts allowed when drawing an upper-bound vector.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;
/// Stream used for the coupling bound, disjoint from every agent stream.
const COUPLING_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkParams {
    #[serde(rename = "N")]
    pub agents: usize,
    pub n: usize,
    pub a_range: (f64, f64),
    pub w_range: (f64, f64),
    pub q_range: (f64, f64),
    /// Entries of `Q̄_i` are uniform on `[0, qbar_max]`.
    pub qbar_max: f64,
    /// `1ᵀū_i`
    pub upper_total: f64,
    /// `b̄(h) / (Σ_i w_i ū_i)(h)` is uniform on this interval.
    pub b_fraction: (f64, f64),
    pub seed: u64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self::paper()
    }
}

impl BenchmarkParams {
    /// 1000 agents, 10 slots.
    pub fn paper() -> Self {
        Self {
            agents: 1000,
            n: 10,
            a_range: (1.0, 2.0),
            w_range: (1.0, 2.0),
            q_range: (1.0, 2.0),
            qbar_max: 0.1,
            upper_total: 2.0,
            b_fraction: (0.5, 2.0 / 3.0),
            seed: 0,
        }
    }

    /// 100 agents, 10 slots.
    pub fn desk() -> Self {
        Self {
            agents: 100,
            ..Self::paper()
        }
    }

    /// 5 agents, 3 slots.
    pub fn toy() -> Self {
        Self {
            agents: 5,
            n: 3,
            ..Self::paper()
        }
    }

    pub fn with_size(mut self, agents: usize, n: usize) -> Self {
        self.agents = agents;
        self.n = n;
        self
    }

    /// Same draws with `Q_i = 0`, which makes the extended pseudo-gradient
    /// monotone.
    pub fn without_aggregate_cost(mut self) -> Self {
        self.q_range = (0.0, 0.0);
        self.qbar_max = 0.0;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.agents == 0 || self.n == 0 {
            return bad("N and n must be positive".into());
        }
        for (name, (lo, hi)) in [("a", self.a_range), ("w", self.w_range)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(format!("{name} range [{lo}, {hi}] must be positive and ordered"));
            }
        }
        let (lo, hi) = self.q_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("q range [{lo}, {hi}] must be nonnegative and ordered"));
        }
        if !(self.qbar_max >= 0.0 && self.qbar_max.is_finite()) {
            return bad(format!("qbar_max {} must be nonnegative", self.qbar_max));
        }
        if !(self.upper_total >= 1.0 && self.upper_total <= self.n as f64) {
            return bad(format!(
                "upper_total {} must lie in [1, n] for caps in [0, 1] and unit tasks",
                self.upper_total
            ));
        }
        let (lo, hi) = self.b_fraction;
        if !(0.5 <= lo && lo <= hi && hi <= 2.0 / 3.0) {
            return bad(format!("b_fraction [{lo}, {hi}] must lie within [1/2, 2/3]"));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Caps with `1ᵀū = total` and `ū ∈ [0, 1]ⁿ`: rescaled uniforms, redrawn
/// while any entry exceeds one.
fn draw_upper(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Result<Vec<f64>> {
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            continue;
        }
        let mut u: Vec<f64> = raw.iter().map(|v| v * total / sum).collect();
        // rescaling can land an ulp short of the total
        for _ in 0..4 {
            let short = total - u.iter().sum::<f64>();
            if short <= 0.0 {
                break;
            }
            let k = (0..n).min_by(|&a, &b| u[a].total_cmp(&u[b])).unwrap_or(0);
            u[k] += short;
        }
        if u.iter().all(|v| *v <= 1.0) && u.iter().sum::<f64>() >= total {
            return Ok(u);
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_GENERATION_ATTEMPTS,
        reason: format!("no cap vector in [0, 1]^{n} summing to {total}"),
    })
}

struct DrawnAgent {
    a: f64,
    w: f64,
    q: Matrix,
    upper: Vec<f64>,
}

/// Agent `i` draws from its own stream, so changing N does not reshuffle
/// the agents already present.
fn draw_agent(params: &BenchmarkParams, i: usize) -> Result<DrawnAgent> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(i as u64);
    let n = params.n;
    let a = uniform(&mut rng, params.a_range);
    let w = uniform(&mut rng, params.w_range);
    let q_diag = uniform(&mut rng, params.q_range);
    let mut q = Matrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            let v = params.qbar_max * rng.gen::<f64>() + if r == c { q_diag } else { 0.0 };
            q.set(r, c, v);
        }
    }
    let upper = draw_upper(&mut rng, n, params.upper_total)?;
    Ok(DrawnAgent { a, w, q, upper })
}

/// Draws a game and checks it with [`validate_game`].
pub fn generate_benchmark(params: &BenchmarkParams) -> Result<GameSpec> {
    params.validate()?;
    let (agents, n) = (params.agents, params.n);
    let drawn = (0..agents).map(|i| draw_agent(params, i)).collect::<Result<Vec<_>>>()?;

    let mut load = vec![0.0; n];
    for d in &drawn {
        for (l, u) in load.iter_mut().zip(&d.upper) {
            *l += d.w * u;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(COUPLING_STREAM);
    let b: Vec<f64> = load.iter().map(|l| l * uniform(&mut rng, params.b_fraction)).collect();
    for (bh, l) in b.iter().zip(&load) {
        if !(*bh >= 0.5 * l && *bh <= 2.0 / 3.0 * l) {
            return Err(Error::GenerationFailed {
                attempts: 1,
                reason: format!("coupling bound {bh} outside [{}, {}]", 0.5 * l, 2.0 / 3.0 * l),
            });
        }
    }
    let b_share: Vec<f64> = b.iter().map(|v| v / agents as f64).collect();

    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let mut specs = Vec::with_capacity(agents);
    for d in drawn {
        let local_set = LocalSet::box_simplex(d.upper, 1.0)?;
        let target = local_set.project(&e1)?;
        specs.push(AgentSpec {
            local_set,
            cost: CostModel::QuadraticAgg { a: d.a, target, q: d.q },
            coupling: Matrix::scaled_identity(n, d.w),
            offset: b_share.clone(),
        });
    }
    let game = GameSpec::new(Dimensions::new(agents, n, n)?, specs)?;
    let report = validate_game(&game)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(game)
}
