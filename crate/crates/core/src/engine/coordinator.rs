//! Central multiplier and strategy updates.
//!
//! This module sees only aggregate messages; nothing in its signature can
//! carry an individual agent's strategy.

use super::messages::{AggregateMessage, BroadcastMessage, CoordinatorState};
use crate::error::{check_len, Result};
use crate::resolvents::StepSizes;

/// One coordinator round:
///
/// ```text
/// λ⁺ = proj_{≥0}(λ + δ_c (2ŷ⁺ − ŷ))
/// μ⁺ = μ − β_c (2x̂⁺ − x̂ − σ + α μ)
/// σ⁺ = σ − α μ⁺
/// ```
pub fn coordinator_update(
    coord: &CoordinatorState,
    agg: &AggregateMessage,
    steps: &StepSizes,
) -> Result<(CoordinatorState, BroadcastMessage)> {
    let n = coord.sigma.len();
    let m = coord.lambda.len();
    check_len("coordinator mu", n, coord.mu.len())?;
    check_len("coordinator lagged xhat", n, coord.prev_xhat.len())?;
    check_len("coordinator lagged yhat", m, coord.prev_yhat.len())?;
    check_len("aggregate xhat", n, agg.xhat().len())?;
    check_len("aggregate yhat", m, agg.yhat().len())?;

    let (alpha, beta_c, delta_c) = (steps.alpha(), steps.beta_c(), steps.delta_c());
    let lambda: Vec<f64> = (0..m)
        .map(|j| {
            let extrapolated = 2.0 * agg.yhat()[j] - coord.prev_yhat[j];
            (coord.lambda[j] + delta_c * extrapolated).max(0.0)
        })
        .collect();
    let mu: Vec<f64> = (0..n)
        .map(|j| {
            let extrapolated = 2.0 * agg.xhat()[j] - coord.prev_xhat[j];
            coord.mu[j] - beta_c * (extrapolated - coord.sigma[j] + alpha * coord.mu[j])
        })
        .collect();
    let sigma: Vec<f64> = coord.sigma.iter().zip(&mu).map(|(s, m)| s - alpha * m).collect();

    let next = CoordinatorState {
        sigma,
        mu,
        lambda,
        prev_xhat: agg.xhat().to_vec(),
        prev_yhat: agg.yhat().to_vec(),
    };
    let bcast = next.broadcast();
    Ok((next, bcast))
}
