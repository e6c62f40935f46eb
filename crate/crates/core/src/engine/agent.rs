//! Local strategy update of a single agent.

use super::messages::{AgentState, BroadcastMessage};
use crate::error::{check_len, Result};
use crate::game::AgentSpec;
use crate::linalg::Matrix;
use crate::resolvents::{local_prox_with, ProxMethod, ProxProblem, DEFAULT_PROX_TOLERANCE};

/// `x⁺ = argmin_{z ∈ Ω_i} f_i(z, σ) + (A_iᵀλ − μ/N)ᵀz + ‖z − x_i‖²_{(I + A_iᵀA_i)} / 2γ_i`,
/// `y⁺ = A_i x⁺ − b_i`.
pub fn agent_update(
    index: usize,
    agent: &AgentSpec,
    state: &AgentState,
    bcast: &BroadcastMessage,
    gamma: f64,
    population: usize,
) -> Result<AgentState> {
    agent_update_with(index, agent, state, bcast, gamma, population, ProxMethod::Auto)
}

pub fn agent_update_with(
    index: usize,
    agent: &AgentSpec,
    state: &AgentState,
    bcast: &BroadcastMessage,
    gamma: f64,
    population: usize,
    method: ProxMethod,
) -> Result<AgentState> {
    let n = state.x.len();
    check_len("broadcast mu", n, bcast.mu.len())?;
    check_len("broadcast lambda", agent.offset.len(), bcast.lambda.len())?;
    let inv_n = 1.0 / population as f64;
    let mut linear = agent.coupling.tr_mul_vec(&bcast.lambda);
    for (l, m) in linear.iter_mut().zip(&bcast.mu) {
        *l -= m * inv_n;
    }
    let metric = Matrix::identity(n).add(&agent.coupling.gram()).scale(1.0 / gamma);
    let problem = ProxProblem {
        agent: index,
        sigma: bcast.sigma.clone(),
        linear,
        center: state.x.clone(),
        metric,
        tolerance: DEFAULT_PROX_TOLERANCE,
    };
    let x = local_prox_with(agent, &problem, method)?;
    let y = agent.link(&x);
    Ok(AgentState { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{CostModel, LocalSet};

    fn agent(upper: Vec<f64>) -> AgentSpec {
        let n = upper.len();
        AgentSpec {
            local_set: LocalSet::BoxSimplex { upper, total: 1.0 },
            cost: CostModel::QuadraticAgg {
                a: 1.0,
                target: vec![0.5; n],
                q: Matrix::scaled_identity(n, 0.3),
            },
            coupling: Matrix::scaled_identity(n, 2.0),
            offset: vec![0.1; n],
        }
    }

    #[test]
    fn singleton_set_keeps_strategy() {
        let a = agent(vec![1.0]);
        let state = AgentState {
            x: vec![1.0],
            y: vec![7.0],
        };
        let bcast = BroadcastMessage {
            lambda: vec![3.0],
            mu: vec![-2.0],
            sigma: vec![0.4],
        };
        let out = agent_update(0, &a, &state, &bcast, 1.0, 3).unwrap();
        assert_eq!(out.x, vec![1.0]);
        assert_eq!(out.y, vec![2.0 - 0.1]);
    }

    #[test]
    fn constrained_minimizer_is_fixed() {
        // with σ = 0 and zero multipliers the minimizer of ½‖z − 0.5·1‖² on
        // the simplex is the uniform point
        let a = agent(vec![1.0, 1.0]);
        let x = vec![0.5, 0.5];
        let state = AgentState { y: a.link(&x), x };
        let bcast = BroadcastMessage {
            lambda: vec![0.0; 2],
            mu: vec![0.0; 2],
            sigma: vec![0.0; 2],
        };
        let out = agent_update(0, &a, &state, &bcast, 1.0, 4).unwrap();
        assert_eq!(out, state);
    }
}
