//! Equilibrium seeking for generalized aggregative games by a
//! semi-decentralized Douglas–Rachford splitting.
//!
//! Agents solve small local proximal problems and report only population
//! averages; a coordinator updates the aggregate estimate and the
//! multipliers of the shared affine constraint `Σ A_i x_i ≤ Σ b_i`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod engine;
pub mod error;
pub mod game;
pub mod linalg;
pub mod operators;
pub mod resolvents;
pub mod verify;

pub use error::{Error, Result};
pub use game::{AgentSpec, CostModel, Dimensions, GameSpec, LocalSet};
pub use operators::{ExtendedPoint, KktResidual};
pub use resolvents::StepSizes;
