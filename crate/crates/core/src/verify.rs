//! Property suites run against a concrete instance: resolvent inclusions,
//! skew-symmetry, firm nonexpansiveness, agreement of the two DR forms, and
//! KKT at convergence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::{
    algorithm_to_tilde, run_dr, DrEngine, RawDrEngine, RunConfig, ConfigDocument,
};
use crate::error::Result;
use crate::game::{average, GameSpec};
use crate::linalg;
use crate::operators::{
    apply_s_scaled, monotonicity_probe, resolvent_a_inclusion_residual, resolvent_b_inclusion_residual,
    DualScaling, ExtendedPoint, DEFAULT_PROBE_SAMPLES,
};
use crate::resolvents::{resolvent_a, resolvent_b, StepSizes};

pub const SUITES: [&str; 6] = ["step-sizes", "resolvents", "skew", "firm-nonexpansive", "trajectory", "kkt"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub threshold: f64,
    pub note: String,
}

impl Check {
    fn bound(suite: &'static str, name: &str, value: f64, threshold: f64) -> Self {
        Self {
            suite,
            name: name.to_string(),
            status: if value <= threshold { Status::Pass } else { Status::Fail },
            value,
            threshold,
            note: String::new(),
        }
    }

    fn skip(suite: &'static str, name: &str, note: String) -> Self {
        Self {
            suite,
            name: name.to_string(),
            status: Status::Skip,
            value: f64::NAN,
            threshold: f64::NAN,
            note,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<18} {:<34} {:<5} {:>12} {:>12}\n", "suite", "check", "", "value", "threshold");
        for c in &self.checks {
            let status = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skip => "SKIP",
            };
            s.push_str(&format!(
                "{:<18} {:<34} {:<5} {:>12.3e} {:>12.3e} {}\n",
                c.suite, c.name, status, c.value, c.threshold, c.note
            ));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub trajectory_iters: usize,
    /// Restrict to these suites; all when empty.
    pub suites: Vec<String>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 50,
            seed: 0,
            trajectory_iters: 50,
            suites: Vec::new(),
        }
    }
}

/// Random extended point: strategies in the bounding box of each local set,
/// everything else uniform on `[−1, 1]`.
pub fn random_point(game: &GameSpec, rng: &mut ChaCha8Rng) -> ExtendedPoint {
    let dims = game.dims();
    let mut w = ExtendedPoint::zeros(dims);
    for (i, agent) in game.agents().iter().enumerate() {
        let (lo, hi) = agent.local_set.bounding_box();
        for j in 0..dims.n {
            w.x[i * dims.n + j] = lo[j] + (hi[j] - lo[j]) * rng.gen::<f64>();
        }
    }
    let mut sym = |v: &mut Vec<f64>| v.iter_mut().for_each(|e| *e = 2.0 * rng.gen::<f64>() - 1.0);
    sym(&mut w.y);
    sym(&mut w.sigma);
    sym(&mut w.mu);
    sym(&mut w.lambda);
    w
}

/// `max_pairs (‖ΔJ‖²_{Γ⁻¹} − ⟨ΔJ, Δw⟩_{Γ⁻¹})`; nonpositive for a firmly
/// nonexpansive map.
pub fn firm_nonexpansive_excess<J>(
    resolvent: J,
    steps: &StepSizes,
    pairs: &[(ExtendedPoint, ExtendedPoint)],
) -> Result<f64>
where
    J: Fn(&ExtendedPoint) -> Result<ExtendedPoint>,
{
    let mut worst = f64::NEG_INFINITY;
    for (w1, w2) in pairs {
        let dj = resolvent(w1)?.sub(&resolvent(w2)?);
        let dw = w1.sub(w2);
        worst = worst.max(dj.dot_gamma_inv(&dj, steps) - dj.dot_gamma_inv(&dw, steps));
    }
    Ok(worst)
}

/// Largest `‖x^k‖` gap between the semi-decentralized engine and the raw
/// iteration over `iters` steps, both started from the default point.
pub fn trajectory_deviation(game: &GameSpec, config: &RunConfig, iters: usize) -> Result<f64> {
    let mut alg = DrEngine::new(game, config, None)?;
    let mut raw = RawDrEngine::new(game, config, None)?;
    let dims = game.dims();
    let mut worst = 0.0f64;
    let start = algorithm_to_tilde(dims, &config.steps, &crate::engine::Iteration::point(&alg));
    worst = worst.max(start.sub(raw.tilde()).norm_inf());
    for _ in 0..iters {
        alg.dr_step()?;
        let s = raw.advance()?;
        let x_alg: Vec<f64> = alg.agents().iter().flat_map(|a| a.x.iter().copied()).collect();
        worst = worst.max(linalg::norm_inf(&linalg::sub(&x_alg, &s.half.x)));
    }
    Ok(worst)
}

fn wanted(opts: &VerifyOptions, suite: &str) -> bool {
    opts.suites.is_empty() || opts.suites.iter().any(|s| s == suite)
}

pub fn run_suites(game: &GameSpec, settings: &ConfigDocument, opts: &VerifyOptions) -> Result<VerifyReport> {
    let dims = game.dims();
    let mut checks = Vec::new();
    let steps = StepSizes::from_central(vec![settings.gamma; dims.agents], settings.alpha, settings.delta_c, settings.beta_c);
    if wanted(opts, "step-sizes") {
        checks.push(match &steps {
            Ok(_) => Check::bound("step-sizes", "central parameters in range", 0.0, 0.0),
            Err(e) => Check {
                status: Status::Fail,
                note: e.to_string(),
                ..Check::bound("step-sizes", "central parameters in range", 1.0, 0.0)
            },
        });
    }
    let Ok(steps) = steps else {
        for suite in SUITES.iter().skip(1).filter(|s| wanted(opts, s)) {
            checks.push(Check::skip(suite, "all", "invalid step sizes".into()));
        }
        return Ok(VerifyReport { checks });
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let points: Vec<ExtendedPoint> = (0..2 * opts.samples).map(|_| random_point(game, &mut rng)).collect();

    if wanted(opts, "resolvents") {
        let mut ra = 0.0f64;
        let mut rb = 0.0f64;
        for w in &points[..opts.samples] {
            let a = resolvent_a(game, &steps, w)?;
            ra = ra.max(resolvent_a_inclusion_residual(game, &steps, w, &a)?);
            let b = resolvent_b(dims, &steps, w)?;
            rb = rb.max(resolvent_b_inclusion_residual(dims, &steps, w, &b, DualScaling::Sum)?);
        }
        checks.push(Check::bound("resolvents", "J_A inclusion residual", ra, 1e-8));
        checks.push(Check::bound("resolvents", "J_B inclusion residual", rb, 1e-10));
    }

    if wanted(opts, "skew") {
        let mut worst = 0.0f64;
        for w in &points {
            for scaling in [DualScaling::Average, DualScaling::Sum] {
                let s = apply_s_scaled(dims, w, scaling)?;
                let rel = w.dot(&s).abs() / (w.norm() * s.norm()).max(f64::MIN_POSITIVE);
                worst = worst.max(rel);
            }
        }
        checks.push(Check::bound("skew", "|<w, Sw>| relative", worst, 1e-10));
    }

    if wanted(opts, "firm-nonexpansive") {
        let pairs: Vec<(ExtendedPoint, ExtendedPoint)> = points
            .chunks(2)
            .map(|p| (p[0].clone(), p[1].clone()))
            .collect();
        let eb = firm_nonexpansive_excess(|w| resolvent_b(dims, &steps, w), &steps, &pairs)?;
        checks.push(Check::bound("firm-nonexpansive", "J_B excess", eb, 1e-8));
        let probe = monotonicity_probe(game, DEFAULT_PROBE_SAMPLES, opts.seed)?;
        if probe.extended_monotone() {
            let ea = firm_nonexpansive_excess(|w| resolvent_a(game, &steps, w), &steps, &pairs)?;
            checks.push(Check::bound("firm-nonexpansive", "J_A excess", ea, 1e-8));
        } else {
            checks.push(Check::skip(
                "firm-nonexpansive",
                "J_A excess",
                format!("extended map not monotone (sample {:.2e})", probe.min_extended),
            ));
        }
    }

    let mut config = settings.to_config(dims.agents)?;
    if wanted(opts, "trajectory") {
        let dev = trajectory_deviation(game, &config, opts.trajectory_iters)?;
        checks.push(Check::bound("trajectory", "DR forms, max x deviation", dev, 1e-8));
    }

    if wanted(opts, "kkt") {
        config.stop_tol = 1e-9;
        match run_dr(game, &config, None) {
            Ok(out) => {
                let w = &out.point;
                let kkt = crate::operators::kkt_residual(game, w)?;
                checks.push(Check::bound("kkt", "KKT residual", kkt.max(), 1e-6));
                checks.push(Check::bound("kkt", "|mu|_inf", linalg::norm_inf(&w.mu), 1e-6));
                let xhat = average(&w.x, dims.n)?;
                checks.push(Check::bound(
                    "kkt",
                    "|sigma - mean x|_inf",
                    linalg::norm_inf(&linalg::sub(&w.sigma, &xhat)),
                    1e-6,
                ));
            }
            Err(e) => checks.push(Check {
                status: Status::Fail,
                note: e.to_string(),
                ..Check::bound("kkt", "DR convergence", f64::INFINITY, 1e-6)
            }),
        }
    }
    Ok(VerifyReport { checks })
}
