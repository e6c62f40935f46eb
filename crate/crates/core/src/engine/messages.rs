//! Value types exchanged between agents and the coordinator.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

/// Private state of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec<f64>,
    /// Always `A_i x_i − b_i` after a completed update.
    pub y: Vec<f64>,
}

/// Coordinator state: its own strategy, both multipliers and the aggregates
/// received in the previous round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinatorState {
    pub sigma: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub prev_xhat: Vec<f64>,
    pub prev_yhat: Vec<f64>,
}

impl CoordinatorState {
    pub fn broadcast(&self) -> BroadcastMessage {
        BroadcastMessage {
            lambda: self.lambda.clone(),
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
        }
    }
}

/// Uplink: the population averages `(x̂, ŷ)` and nothing else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMessage {
    xhat: Vec<f64>,
    yhat: Vec<f64>,
}

impl AggregateMessage {
    pub fn new(xhat: Vec<f64>, yhat: Vec<f64>) -> Self {
        Self { xhat, yhat }
    }

    /// Averages the agents' `x_i` and `y_i` by a fixed-order sum.
    pub fn from_agents(states: &[AgentState], n: usize, m: usize) -> Result<Self> {
        let mut xhat = vec![0.0; n];
        let mut yhat = vec![0.0; m];
        for s in states {
            check_len("aggregated x_i", n, s.x.len())?;
            check_len("aggregated y_i", m, s.y.len())?;
            for (a, v) in xhat.iter_mut().zip(&s.x) {
                *a += v;
            }
            for (a, v) in yhat.iter_mut().zip(&s.y) {
                *a += v;
            }
        }
        let inv = 1.0 / states.len().max(1) as f64;
        xhat.iter_mut().for_each(|v| *v *= inv);
        yhat.iter_mut().for_each(|v| *v *= inv);
        Ok(Self { xhat, yhat })
    }

    pub fn xhat(&self) -> &[f64] {
        &self.xhat
    }

    pub fn yhat(&self) -> &[f64] {
        &self.yhat
    }

    /// Number of reals carried uplink per round.
    pub fn payload_len(&self) -> usize {
        self.xhat.len() + self.yhat.len()
    }
}

/// Downlink, identical for every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastMessage {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}
