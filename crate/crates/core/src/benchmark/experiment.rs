//! Multi-seed convergence comparison of DR against the forward-backward
//! baseline, measured by `‖x^k − x̄‖ / ‖x⁰ − x̄‖`.

use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_benchmark, ground_truth, BenchmarkParams};
use crate::engine::{format_float, run_dr, run_pfb, RunConfig, RunOutcome, RunTrace};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::operators::KktResidual;
use crate::resolvents::StepSizes;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dr,
    Pfb,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dr => "dr",
            Method::Pfb => "pfb",
        }
    }

    pub fn run(self, game: &GameSpec, config: &RunConfig, reference: Option<&[f64]>) -> Result<RunOutcome> {
        match self {
            Method::Dr => run_dr(game, config, reference),
            Method::Pfb => run_pfb(game, config, reference),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dr" => Ok(Method::Dr),
            "pfb" => Ok(Method::Pfb),
            other => Err(Error::InvalidConfig(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    /// Seed `k` of the experiment uses `params.seed + k`.
    pub params: BenchmarkParams,
    pub num_seeds: usize,
    pub methods: Vec<Method>,
    /// Target normalized error.
    pub tol: f64,
    /// KKT tolerance certified for the reference equilibrium.
    pub reference_tol: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub delta_c: f64,
    pub beta_c: f64,
    pub max_iters: usize,
    pub timing: bool,
}

impl ComparisonConfig {
    /// DR parameters α = 1, δ_c = β_c = 0.5, γ_i = 1.
    pub fn new(params: BenchmarkParams, num_seeds: usize) -> Self {
        Self {
            params,
            num_seeds,
            methods: vec![Method::Dr, Method::Pfb],
            tol: 1e-6,
            reference_tol: 1e-10,
            gamma: 1.0,
            alpha: 1.0,
            delta_c: 0.5,
            beta_c: 0.5,
            max_iters: 20_000,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodRun {
    pub method: Method,
    pub seed: u64,
    /// First iteration with normalized error at most `tol`.
    pub iters_to_tol: Option<usize>,
    pub final_kkt: KktResidual,
    pub wall_ms: f64,
    /// Normalized error per iteration, starting with 1 at iteration 0.
    pub curve: Vec<f64>,
    #[serde(skip)]
    pub trace: RunTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub runs: Vec<MethodRun>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanCurve {
    pub method: Method,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ComparisonConfig,
    pub seeds: Vec<SeedOutcome>,
    pub mean_curves: Vec<MeanCurve>,
    /// Mean baseline iterations over mean DR iterations, counting a run that
    /// never reached `tol` at the iteration cap.
    pub speed_ratio: Option<f64>,
}

fn iters_to_tol(curve: &[f64], tol: f64) -> Option<usize> {
    curve.iter().position(|e| *e <= tol)
}

fn run_seed(cfg: &ComparisonConfig, seed: u64) -> Result<Vec<MethodRun>> {
    let params = cfg.params.clone().with_seed(seed);
    let game = generate_benchmark(&params)?;
    let reference = ground_truth(&game, cfg.reference_tol)?;
    let steps = StepSizes::uniform_central(params.agents, cfg.gamma, cfg.alpha, cfg.delta_c, cfg.beta_c)?;
    let mut config = RunConfig::new(steps);
    config.max_iters = cfg.max_iters;
    config.stop_tol = 0.0;
    config.reference_tol = Some(cfg.tol);

    let mut runs = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = cfg.timing.then(Instant::now);
        let trace = match method.run(&game, &config, Some(&reference.x)) {
            Ok(out) => out.trace,
            Err(Error::MaxItersExceeded { trace, .. }) => *trace,
            Err(e) => return Err(e),
        };
        let wall_ms = start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3);
        let curve = trace.normalized_errors().unwrap_or_default();
        runs.push(MethodRun {
            method,
            seed,
            iters_to_tol: iters_to_tol(&curve, cfg.tol),
            final_kkt: trace.final_kkt().unwrap_or_default(),
            wall_ms,
            curve,
            trace,
        });
    }
    Ok(runs)
}

/// Runs every method on `num_seeds` generated games. Seeds run in parallel;
/// failed seeds are recorded and skipped.
pub fn run_comparison(cfg: &ComparisonConfig) -> Result<ExperimentReport> {
    if cfg.num_seeds == 0 {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods to compare".into()));
    }
    cfg.params.validate()?;
    let seeds: Vec<SeedOutcome> = (0..cfg.num_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let seed = cfg.params.seed.wrapping_add(k);
            match run_seed(cfg, seed) {
                Ok(runs) => SeedOutcome { seed, runs, error: None },
                Err(e) => {
                    log::warn!("seed {seed} failed: {e}");
                    SeedOutcome {
                        seed,
                        runs: Vec::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    if seeds.iter().all(|s| s.error.is_some()) {
        return Err(Error::NotCertified(format!(
            "all {} seeds failed; first error: {}",
            seeds.len(),
            seeds[0].error.as_deref().unwrap_or("")
        )));
    }

    let mean_curves = cfg
        .methods
        .iter()
        .map(|&m| MeanCurve {
            method: m,
            values: mean_curve(&seeds, m),
        })
        .collect();
    let mean_iters = |m: Method| -> Option<f64> {
        let v: Vec<f64> = seeds
            .iter()
            .flat_map(|s| s.runs.iter().filter(|r| r.method == m))
            .map(|r| r.iters_to_tol.unwrap_or(cfg.max_iters) as f64)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let speed_ratio = match (mean_iters(Method::Pfb), mean_iters(Method::Dr)) {
        (Some(p), Some(d)) if d > 0.0 => Some(p / d),
        _ => None,
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        seeds,
        mean_curves,
        speed_ratio,
    })
}

/// Per-iteration mean across seeds; shorter curves are extended by their
/// final value.
fn mean_curve(seeds: &[SeedOutcome], method: Method) -> Vec<f64> {
    let curves: Vec<&[f64]> = seeds
        .iter()
        .flat_map(|s| s.runs.iter().filter(|r| r.method == method))
        .map(|r| r.curve.as_slice())
        .filter(|c| !c.is_empty())
        .collect();
    let len = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    (0..len)
        .map(|k| {
            let sum: f64 = curves.iter().map(|c| c[k.min(c.len() - 1)]).sum();
            sum / curves.len() as f64
        })
        .collect()
}

impl ExperimentReport {
    pub fn runs(&self, method: Method) -> impl Iterator<Item = &MethodRun> {
        self.seeds
            .iter()
            .flat_map(move |s| s.runs.iter().filter(move |r| r.method == method))
    }

    pub fn mean_curve(&self, method: Method) -> Option<&[f64]> {
        self.mean_curves
            .iter()
            .find(|c| c.method == method)
            .map(|c| c.values.as_slice())
    }

    /// Mean curve value at iteration `k`, holding the last value past the end.
    pub fn mean_curve_at(&self, method: Method, k: usize) -> Option<f64> {
        let c = self.mean_curve(method)?;
        c.get(k.min(c.len().checked_sub(1)?)).copied()
    }

    /// Seeds where DR reached `tol` in strictly fewer iterations than the
    /// baseline, and the number of seeds where both methods ran.
    pub fn dr_wins(&self) -> (usize, usize) {
        let mut wins = 0;
        let mut compared = 0;
        for s in self.seeds.iter().filter(|s| s.error.is_none()) {
            let find = |m: Method| s.runs.iter().find(|r| r.method == m);
            if let (Some(dr), Some(pfb)) = (find(Method::Dr), find(Method::Pfb)) {
                compared += 1;
                let dr_iters = dr.iters_to_tol.unwrap_or(usize::MAX);
                let pfb_iters = pfb.iters_to_tol.unwrap_or(usize::MAX);
                if dr.iters_to_tol.is_some() && dr_iters < pfb_iters {
                    wins += 1;
                }
            }
        }
        (wins, compared)
    }

    /// Median iterations-to-tolerance of `method`, a run that never got
    /// there counting as the iteration cap.
    pub fn median_iters(&self, method: Method) -> Option<usize> {
        let mut v: Vec<usize> = self
            .runs(method)
            .map(|r| r.iters_to_tol.unwrap_or(self.config.max_iters))
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_unstable();
        Some(v[(v.len() - 1) / 2])
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from("seed,method,iters_to_tol,final_kkt,wall_ms\n");
        for seed in &self.seeds {
            for r in &seed.runs {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.seed,
                    r.method.name(),
                    r.iters_to_tol.map(|v| v.to_string()).unwrap_or_default(),
                    format_float(r.final_kkt.max()),
                    format_float(r.wall_ms)
                );
            }
        }
        s
    }

    pub fn mean_curve_csv(&self, method: Method) -> String {
        let mut s = String::from("iter,mean_normalized_error\n");
        for (k, v) in self.mean_curve(method).unwrap_or(&[]).iter().enumerate() {
            let _ = writeln!(s, "{k},{}", format_float(*v));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
