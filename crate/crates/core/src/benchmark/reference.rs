//! High-accuracy reference equilibria.

use serde::Serialize;

use crate::engine::{run_dr, run_pfb, RunConfig};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::linalg;
use crate::operators::{kkt_residual, monotonicity_probe, ExtendedPoint, KktResidual, DEFAULT_PROBE_SAMPLES};
use crate::resolvents::StepSizes;

/// Iteration cap of a reference solve.
pub const GROUND_TRUTH_MAX_ITERS: usize = 1_000_000;
/// Smallest stopping threshold worth asking of binary64 iterates.
pub const GROUND_TRUTH_STOP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Serialize)]
pub struct GroundTruth {
    pub x: Vec<f64>,
    pub point: ExtendedPoint,
    pub kkt: KktResidual,
    pub iterations: usize,
}

fn reference_config(game: &GameSpec, tol: f64) -> Result<RunConfig> {
    let steps = StepSizes::uniform_central(game.dims().agents, 1.0, 1.0, 0.5, 0.5)
        .or_else(|_| StepSizes::uniform_central(game.dims().agents, 1.0, 1.0, 0.5, 0.25))?;
    let mut config = RunConfig::new(steps);
    config.stop_tol = (tol * 1e-3).max(GROUND_TRUTH_STOP_FLOOR);
    config.max_iters = GROUND_TRUTH_MAX_ITERS;
    config.record_every = GROUND_TRUTH_MAX_ITERS;
    Ok(config)
}

/// Runs DR far past `tol` and certifies the result by its KKT residual.
pub fn ground_truth(game: &GameSpec, tol: f64) -> Result<GroundTruth> {
    let probe = monotonicity_probe(game, DEFAULT_PROBE_SAMPLES, 0)?;
    if probe.min_aggregative < 0.0 {
        log::warn!(
            "aggregative pseudo-gradient is not monotone on this instance (min sample {:e})",
            probe.min_aggregative
        );
    }
    let config = reference_config(game, tol)?;
    let (point, iterations) = match run_dr(game, &config, None) {
        Ok(out) => (out.point, out.trace.iterations()),
        // the stopping metric can stall at round-off level; certify anyway
        Err(Error::MaxItersExceeded { point, iters, .. }) => (*point, iters),
        Err(e) => return Err(e),
    };
    let kkt = kkt_residual(game, &point)?;
    if !(kkt.max() <= tol) {
        return Err(Error::NotCertified(format!(
            "KKT residual {:e} above {tol:e}",
            kkt.max()
        )));
    }
    Ok(GroundTruth {
        x: point.x.clone(),
        iterations,
        point,
        kkt,
    })
}

/// [`ground_truth`] plus an independent forward-backward solve; fails when
/// the two strategy profiles differ by more than `10·tol`.
pub fn ground_truth_cross_checked(game: &GameSpec, tol: f64) -> Result<(GroundTruth, f64)> {
    let reference = ground_truth(game, tol)?;
    let config = reference_config(game, tol)?;
    let other = match run_pfb(game, &config, None) {
        Ok(out) => out.point,
        Err(Error::MaxItersExceeded { point, .. }) => *point,
        Err(e) => return Err(e),
    };
    let gap = linalg::dist2(&reference.x, &other.x);
    if !(gap <= 10.0 * tol) {
        return Err(Error::NotCertified(format!(
            "DR and forward-backward references differ by {gap:e}"
        )));
    }
    Ok((reference, gap))
}
