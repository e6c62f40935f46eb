//! Equilibrium quality: variational-inequality residual and the Nash gap of
//! unilateral deviations.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::game::{average, AgentSpec, ConvexOracle, GameSpec, LocalSet};
use crate::linalg;
use crate::operators::{kkt_residual, ExtendedPoint};

/// Natural-residual target of each best-response solve.
pub const BEST_RESPONSE_TOLERANCE: f64 = 1e-12;
pub const BEST_RESPONSE_MAX_ITERS: usize = 50_000;
const DYKSTRA_MAX_CYCLES: usize = 10_000;
const DYKSTRA_TOLERANCE: f64 = 1e-14;

/// `max_i ‖x_i − proj_{Ω_i}(x_i − F_a,i(x) − A_iᵀλ)‖`, the stationarity part
/// of the KKT residual with the aggregate frozen at `M_n x`.
pub fn gae_vi_residual(game: &GameSpec, x: &[f64], lambda: &[f64]) -> Result<f64> {
    let dims = game.dims();
    check_len("strategy profile", dims.stacked_x(), x.len())?;
    check_len("coupling multiplier", dims.m, lambda.len())?;
    let w = ExtendedPoint {
        y: game
            .agents()
            .iter()
            .zip(x.chunks(dims.n))
            .flat_map(|(a, xi)| a.link(xi))
            .collect(),
        sigma: average(x, dims.n)?,
        mu: vec![0.0; dims.n],
        lambda: lambda.to_vec(),
        x: x.to_vec(),
    };
    Ok(kkt_residual(game, &w)?.stationarity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    /// `ε_i = f_i(x_i, M_n x) − min_{z ∈ X_i(x_{−i})} f_i(z, (z + Σ_{j≠i} x_j)/N)`
    pub per_agent: Vec<f64>,
    pub max: f64,
}

/// Largest gain any agent obtains by a feasible unilateral deviation that
/// accounts for its own effect on the average.
pub fn epsilon_nash_gap(game: &GameSpec, x: &[f64]) -> Result<EpsilonReport> {
    let dims = game.dims();
    check_len("strategy profile", dims.stacked_x(), x.len())?;
    let mut total = vec![0.0; dims.n];
    for xi in x.chunks(dims.n) {
        linalg::axpy(1.0, xi, &mut total);
    }
    let mut load = vec![0.0; dims.m];
    for (agent, xi) in game.agents().iter().zip(x.chunks(dims.n)) {
        linalg::axpy(1.0, &agent.coupling.mul_vec(xi), &mut load);
    }
    let b = game.total_offset();

    let per_agent = (0..dims.agents)
        .into_par_iter()
        .map(|i| {
            let agent = game.agent(i);
            let xi = &x[i * dims.n..(i + 1) * dims.n];
            let others = linalg::sub(&total, xi);
            let own = agent.coupling.mul_vec(xi);
            // room left by the others, never tighter than the current choice
            let room: Vec<f64> = (0..dims.m)
                .map(|h| (b[h] - (load[h] - own[h])).max(own[h]))
                .collect();
            agent_gap(i, agent, xi, &others, &room, dims.agents)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max = per_agent.iter().copied().fold(0.0, f64::max);
    Ok(EpsilonReport { per_agent, max })
}

fn agent_gap(
    index: usize,
    agent: &AgentSpec,
    xi: &[f64],
    others: &[f64],
    room: &[f64],
    population: usize,
) -> Result<f64> {
    let inv_n = 1.0 / population as f64;
    let sigma_of = |z: &[f64]| -> Vec<f64> { z.iter().zip(others).map(|(a, b)| (a + b) * inv_n).collect() };
    let value = |z: &[f64]| agent.cost.value(z, &sigma_of(z));
    let gradient = |z: &[f64]| -> Result<Vec<f64>> {
        let s = sigma_of(z);
        let mut g = agent.cost.grad_x(z, &s).ok_or(Error::NonSmoothCost(index))?;
        let gs = agent.cost.grad_sigma(z, &s).ok_or(Error::NonSmoothCost(index))?;
        linalg::axpy(inv_n, &gs, &mut g);
        Ok(g)
    };
    let Some(set) = deviation_set(agent, xi, room) else {
        return Ok(0.0);
    };

    let lipschitz = agent.cost.curvature_bound() + 2.0 * agent.cost.sigma_coupling_bound() * inv_n;
    let step = 1.0 / lipschitz.max(f64::MIN_POSITIVE);
    let start_value = value(xi);
    let mut best = start_value;
    let mut z = xi.to_vec();
    let mut y = z.clone();
    let mut t = 1.0f64;
    for _ in 0..BEST_RESPONSE_MAX_ITERS {
        let g = gradient(&y)?;
        let z_next = set.project(&y.iter().zip(&g).map(|(a, b)| a - step * b).collect::<Vec<_>>())?;
        best = best.min(value(&z_next));
        let gz = gradient(&z_next)?;
        let natural = linalg::dist2(&z_next, &set.project(&linalg::sub(&z_next, &gz))?);
        if natural <= BEST_RESPONSE_TOLERANCE {
            break;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let dz = linalg::sub(&z_next, &z);
        if linalg::dot(&linalg::sub(&y, &z_next), &dz) > 0.0 {
            t = 1.0;
            y.clone_from(&z_next);
        } else {
            let beta = (t - 1.0) / t_next;
            y = z_next.iter().zip(&dz).map(|(a, d)| a + beta * d).collect();
            t = t_next;
        }
        z = z_next;
    }
    Ok((start_value - best).max(0.0))
}

/// `Ω_i ∩ {z | A_i z ≤ room}`. A positive diagonal `A_i` over a box-simplex
/// tightens the caps; anything else is handled by Dykstra's alternating
/// projections. Returns `None` when rounding leaves only `x_i` itself.
fn deviation_set(agent: &AgentSpec, xi: &[f64], room: &[f64]) -> Option<LocalSet> {
    let a = &agent.coupling;
    if let LocalSet::BoxSimplex { upper, total } = &agent.local_set {
        if a.is_diagonal() && a.diagonal().iter().all(|v| *v > 0.0) {
            let caps: Vec<f64> = (0..upper.len())
                .map(|j| (room[j] / a.get(j, j)).min(upper[j]).max(xi[j]).max(0.0))
                .collect();
            if caps.iter().sum::<f64>() < *total {
                return None;
            }
            return Some(LocalSet::BoxSimplex { upper: caps, total: *total });
        }
    }
    let base = agent.local_set.clone();
    let rows: Vec<(Vec<f64>, f64)> = (0..a.rows()).map(|h| (a.row(h).to_vec(), room[h])).collect();
    let bounds = base.bounding_box();
    // only unit-weight projections are requested by the best-response solver
    Some(LocalSet::GenericConvex(ConvexOracle {
        dim: xi.len(),
        project: Arc::new(move |v: &[f64], _w: &[f64]| dykstra(&base, &rows, v)),
        bounds,
    }))
}

/// Euclidean projection onto `base ∩ ⋂_h {aₕᵀz ≤ rₕ}`.
fn dykstra(base: &LocalSet, rows: &[(Vec<f64>, f64)], v: &[f64]) -> Vec<f64> {
    let sets = rows.len() + 1;
    let mut z = v.to_vec();
    let mut corrections = vec![vec![0.0; v.len()]; sets];
    for _ in 0..DYKSTRA_MAX_CYCLES {
        let before = z.clone();
        for (k, corr) in corrections.iter_mut().enumerate() {
            let probe = linalg::add(&z, corr);
            let projected = if k == 0 {
                base.project(&probe).unwrap_or_else(|_| probe.clone())
            } else {
                let (a, r) = &rows[k - 1];
                let excess = linalg::dot(a, &probe) - r;
                let aa = linalg::dot(a, a);
                if excess > 0.0 && aa > 0.0 {
                    probe.iter().zip(a).map(|(p, ai)| p - excess / aa * ai).collect()
                } else {
                    probe.clone()
                }
            };
            *corr = linalg::sub(&probe, &projected);
            z = projected;
        }
        if linalg::dist2(&z, &before) <= DYKSTRA_TOLERANCE {
            break;
        }
    }
    z
}
