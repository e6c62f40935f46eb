//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use agg_splitter::benchmark::{
    epsilon_nash_gap, gae_vi_residual, generate_benchmark, ground_truth, run_comparison, BenchmarkParams,
    ComparisonConfig, Method,
};
use agg_splitter::engine::{
    algorithm_to_tilde, coordinator_update, raw_dr_step, run_dr, run_pfb, AgentState, AggregateMessage,
    BroadcastMessage, CoordinatorState, DrEngine, Iteration, RunConfig,
};
use agg_splitter::game::average;
use agg_splitter::operators::{
    aggregative_subdifferential, apply_s_scaled, extended_subdifferential, kkt_residual, monotonicity_probe,
    resolvent_a_inclusion_residual, resolvent_b_inclusion_residual, DualScaling, ExtendedPoint,
    DEFAULT_PROBE_SAMPLES,
};
use agg_splitter::resolvents::{
    beta_to_central, central_to_beta, central_to_delta, delta_to_central, project_box_simplex, resolvent_a,
    resolvent_b,
};
use agg_splitter::verify::{firm_nonexpansive_excess, random_point};
use agg_splitter::{CostModel, Dimensions, GameSpec, StepSizes};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn toy() -> GameSpec {
    generate_benchmark(&BenchmarkParams::toy()).unwrap()
}

fn default_config(agents: usize) -> RunConfig {
    RunConfig::new(StepSizes::uniform_central(agents, 1.0, 1.0, 0.5, 0.5).unwrap())
}

fn heterogeneous_steps(agents: usize, rng: &mut ChaCha8Rng) -> StepSizes {
    let gamma: Vec<f64> = (0..agents).map(|_| rng.gen_range(0.5..2.0)).collect();
    let hat = gamma.iter().sum::<f64>() / agents as f64;
    let alpha = rng.gen_range(0.5..2.0);
    StepSizes::from_central(gamma, alpha, 0.6 / hat, 0.6 / (alpha + hat / agents as f64)).unwrap()
}

/// Offsets of the x, y, σ, μ, λ blocks in the stacked extended vector.
struct Layout {
    y: usize,
    sigma: usize,
    mu: usize,
    lambda: usize,
    len: usize,
}

impl Layout {
    fn new(d: Dimensions) -> Self {
        let y = d.agents * d.n;
        let sigma = y + d.agents * d.m;
        let mu = sigma + d.n;
        let lambda = mu + d.n;
        Self {
            y,
            sigma,
            mu,
            lambda,
            len: lambda + d.m,
        }
    }
}

/// `J_ΓB(ω)` by enumerating which multipliers sit at zero and solving the
/// linear system `(I + ΓS)ω⁺ = ω − Γν` densely for each pattern.
fn dense_resolvent_b(d: Dimensions, steps: &StepSizes, w: &ExtendedPoint) -> (Vec<f64>, usize) {
    let l = Layout::new(d);
    let inv_n = 1.0 / d.agents as f64;
    let mut s = DMatrix::<f64>::zeros(l.len, l.len);
    let mut gamma = vec![0.0; l.len];
    for i in 0..d.agents {
        for j in 0..d.n {
            let r = i * d.n + j;
            s[(r, l.mu + j)] = -inv_n;
            s[(l.mu + j, r)] = inv_n;
            gamma[r] = steps.gamma()[i];
        }
        for h in 0..d.m {
            let r = l.y + i * d.m + h;
            s[(r, l.lambda + h)] = 1.0;
            s[(l.lambda + h, r)] = -1.0;
            gamma[r] = steps.gamma()[i];
        }
    }
    for j in 0..d.n {
        s[(l.sigma + j, l.mu + j)] = 1.0;
        s[(l.mu + j, l.sigma + j)] = -1.0;
        gamma[l.sigma + j] = steps.alpha();
        gamma[l.mu + j] = steps.beta();
    }
    for h in 0..d.m {
        gamma[l.lambda + h] = steps.delta();
    }
    let mut base = DMatrix::<f64>::identity(l.len, l.len);
    for r in 0..l.len {
        for c in 0..l.len {
            base[(r, c)] += gamma[r] * s[(r, c)];
        }
    }
    let rhs0 = DVector::from_vec(w.to_flat());

    let mut valid = Vec::new();
    for pattern in 0..(1usize << d.m) {
        let mut mat = base.clone();
        let mut rhs = rhs0.clone();
        for h in 0..d.m {
            if pattern & (1 << h) != 0 {
                let r = l.lambda + h;
                mat.row_mut(r).fill(0.0);
                mat[(r, r)] = 1.0;
                rhs[r] = 0.0;
            }
        }
        let Some(sol) = mat.lu().solve(&rhs) else { continue };
        let resid = &rhs0 - &base * &sol;
        let ok = (0..d.m).all(|h| {
            let r = l.lambda + h;
            if pattern & (1 << h) != 0 {
                // normal cone of the orthant at zero: ν_h ≤ 0
                resid[r] / gamma[r] <= 1e-12
            } else {
                sol[r] >= -1e-12
            }
        });
        if ok {
            valid.push(sol.iter().copied().collect::<Vec<f64>>());
        }
    }
    let count = valid.len();
    (valid.into_iter().next().unwrap_or_default(), count)
}

fn criterion_1() -> Outcome {
    let game = toy();
    let d = game.dims();
    assert_eq!((d.agents, d.n, d.m), (5, 3, 3));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut ra, mut rb, mut dense, mut ambiguous) = (0.0f64, 0.0f64, 0.0f64, 0);
    let mut active_counts = [0usize; 4];
    for k in 0..50 {
        let steps = if k % 2 == 0 {
            StepSizes::uniform_central(d.agents, 1.0, 1.0, 0.5, 0.5).unwrap()
        } else {
            heterogeneous_steps(d.agents, &mut rng)
        };
        let w = random_point(&game, &mut rng);
        let a = resolvent_a(&game, &steps, &w).unwrap();
        ra = ra.max(resolvent_a_inclusion_residual(&game, &steps, &w, &a).unwrap());
        let b = resolvent_b(d, &steps, &w).unwrap();
        rb = rb.max(resolvent_b_inclusion_residual(d, &steps, &w, &b, DualScaling::Sum).unwrap());
        let (oracle, count) = dense_resolvent_b(d, &steps, &w);
        if count != 1 {
            ambiguous += 1;
            continue;
        }
        let flat = b.to_flat();
        dense = dense.max(flat.iter().zip(&oracle).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
        active_counts[b.lambda.iter().filter(|v| **v == 0.0).count()] += 1;
    }
    check(
        ra <= 1e-8 && rb <= 1e-8 && dense <= 1e-10 && ambiguous == 0,
        format!(
            "J_A residual {ra:.2e}, J_B residual {rb:.2e}, dense J_B gap {dense:.2e}, zero-multiplier counts {active_counts:?}"
        ),
    )
}

fn trajectory_gap(game: &GameSpec, config: &RunConfig, iters: usize) -> (f64, f64) {
    let d = game.dims();
    let mut alg = DrEngine::new(game, config, None).unwrap();
    let mut tilde = algorithm_to_tilde(d, &config.steps, &alg.point());
    let (mut x_gap, mut tilde_gap) = (0.0f64, 0.0f64);
    for _ in 0..iters {
        alg.dr_step().unwrap();
        let step = raw_dr_step(&tilde, game, &config.steps, 1.0).unwrap();
        let x_alg: Vec<f64> = alg.agents().iter().flat_map(|a| a.x.iter().copied()).collect();
        x_gap = x_gap.max(x_alg.iter().zip(&step.half.x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
        tilde = step.next;
        tilde_gap = tilde_gap.max(alg.tilde().sub(&tilde).norm_inf());
    }
    (x_gap, tilde_gap)
}

fn criterion_2() -> Outcome {
    let game = toy();
    let d = game.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut hetero = RunConfig::new(heterogeneous_steps(d.agents, &mut rng));
    hetero.initial_lambda = Some(vec![0.3, 0.0, 0.1]);
    let (x1, t1) = trajectory_gap(&game, &default_config(d.agents), 50);
    let (x2, t2) = trajectory_gap(&game, &hetero, 50);
    check(
        x1.max(x2) <= 1e-8,
        format!("max x deviation {:.2e} (uniform), {:.2e} (heterogeneous, λ⁰ ≠ 0); shifted-state gap {:.2e}", x1, x2, t1.max(t2)),
    )
}

fn benchmark_50() -> GameSpec {
    generate_benchmark(&BenchmarkParams::desk().with_size(50, 5)).unwrap()
}

fn criterion_3_4() -> (Outcome, Outcome) {
    let game = benchmark_50();
    let d = game.dims();
    let mut config = default_config(d.agents);
    config.stop_tol = 1e-9;
    config.max_iters = 100_000;
    let out = match run_dr(&game, &config, None) {
        Ok(out) => out,
        Err(e) => return (Err(e.to_string()), Err("no terminal point".into())),
    };
    let w = &out.point;
    let kkt = kkt_residual(&game, w).unwrap();
    let mu = w.mu.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let xbar = average(&w.x, d.n).unwrap();
    let consensus = w.sigma.iter().zip(&xbar).map(|(s, x)| (s - x).abs()).fold(0.0, f64::max);
    let worst = [kkt.stationarity, kkt.primal, kkt.consensus, kkt.complementarity, kkt.link]
        .into_iter()
        .fold(0.0, f64::max);
    let c3 = check(
        worst <= 1e-6 && mu <= 1e-5 && consensus <= 1e-5,
        format!(
            "{} iterations; stationarity {:.1e} primal {:.1e} consensus {:.1e} complementarity {:.1e} link {:.1e}; |mu| {:.1e} |sigma - Mx| {:.1e}",
            out.trace.iterations(),
            kkt.stationarity,
            kkt.primal,
            kkt.consensus,
            kkt.complementarity,
            kkt.link,
            mu,
            consensus
        ),
    );

    let vi = gae_vi_residual(&game, &w.x, &w.lambda).unwrap();
    let mut link = 0.0f64;
    for (i, agent) in game.agents().iter().enumerate() {
        let xi = &w.x[i * d.n..(i + 1) * d.n];
        let yi = &w.y[i * d.m..(i + 1) * d.m];
        for (h, (y, b)) in yi.iter().zip(&agent.offset).enumerate() {
            let ax: f64 = (0..d.n).map(|j| agent.coupling.get(h, j) * xi[j]).sum();
            link = link.max((y - (ax - b)).abs());
        }
    }
    let c4 = check(
        vi <= 1e-5 && link <= 1e-10,
        format!("VI residual {vi:.2e}, max |y_i - (A_i x_i - b_i)| {link:.2e}"),
    );
    (c3, c4)
}

fn criterion_5() -> Outcome {
    let cfg = ComparisonConfig::new(BenchmarkParams::desk(), 10);
    assert_eq!((cfg.alpha, cfg.delta_c, cfg.beta_c, cfg.gamma), (1.0, 0.5, 0.5, 1.0));
    let report = run_comparison(&cfg).map_err(|e| e.to_string())?;
    let (wins, compared) = report.dr_wins();
    let k = report.median_iters(Method::Pfb).ok_or("no pFB runs")?;
    let dr = report.mean_curve_at(Method::Dr, k).ok_or("no DR curve")?;
    let pfb = report.mean_curve_at(Method::Pfb, k).ok_or("no pFB curve")?;
    check(
        compared == 10 && wins * 10 >= 8 * compared && dr < pfb,
        format!(
            "DR faster on {wins}/{compared} seeds; median iterations DR {:?} pFB {k}; mean curves at {k}: DR {dr:.2e} pFB {pfb:.2e}",
            report.median_iters(Method::Dr)
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut boundary_ok = true;
    for _ in 0..20 {
        let agents = rng.gen_range(1..30);
        let gamma: Vec<f64> = (0..agents).map(|_| rng.gen_range(0.1..3.0)).collect();
        let hat = gamma.iter().sum::<f64>() / agents as f64;
        let alpha = rng.gen_range(0.1..3.0);
        let beta_sup = 1.0 / (alpha + hat / agents as f64);
        let ok_beta = 0.5 * beta_sup;
        let ok_delta = 0.5 / hat;
        boundary_ok &= StepSizes::from_central(gamma.clone(), alpha, 1.0 / hat, ok_beta).is_err();
        boundary_ok &= StepSizes::from_central(gamma.clone(), alpha, ok_delta, beta_sup).is_err();
        boundary_ok &= StepSizes::from_central(gamma.clone(), alpha, 0.999 / hat, ok_beta).is_ok();
        boundary_ok &= StepSizes::from_central(gamma.clone(), alpha, ok_delta, 0.999 * beta_sup).is_ok();
        boundary_ok &= StepSizes::from_central(gamma, alpha, 0.0, ok_beta).is_err();
    }
    let mut worst = 0.0f64;
    let mut formula = 0.0f64;
    for _ in 0..1000 {
        let agents = rng.gen_range(1..2000usize);
        let hat = rng.gen_range(0.05..5.0);
        let alpha = rng.gen_range(0.05..5.0);
        // raw values on their natural scales; the δ ↦ δ_c ↦ δ round trip has
        // relative condition number 1 + δγ̂N, likewise 1 + β(α + γ̂/N) for β
        let delta = 10f64.powf(rng.gen_range(-3.0..3.0)) / (hat * agents as f64);
        let beta = 10f64.powf(rng.gen_range(-3.0..3.0)) / (alpha + hat / agents as f64);
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        let dc = delta_to_central(delta, hat, agents);
        let bc = beta_to_central(beta, alpha, hat, agents);
        formula = formula.max(rel(dc, delta / (delta * hat + 1.0 / agents as f64)));
        formula = formula.max(rel(bc, beta / (1.0 + beta * (alpha + hat / agents as f64))));
        worst = worst.max(rel(central_to_delta(dc, hat, agents), delta));
        worst = worst.max(rel(central_to_beta(bc, alpha, hat, agents), beta));
        let dc2 = rng.gen_range(0.001..0.999) / hat;
        let bc2 = rng.gen_range(0.001..0.999) / (alpha + hat / agents as f64);
        worst = worst.max(rel(delta_to_central(central_to_delta(dc2, hat, agents), hat, agents), dc2));
        worst = worst.max(rel(beta_to_central(central_to_beta(bc2, alpha, hat, agents), alpha, hat, agents), bc2));
    }
    check(
        boundary_ok && worst <= 1e-12 && formula <= 1e-14,
        format!("open-interval boundaries rejected: {boundary_ok}; round-trip error {worst:.2e}; map formula error {formula:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let game = toy();
    let d = game.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut skew = 0.0f64;
    for _ in 0..100 {
        let w = random_point(&game, &mut rng);
        for scaling in [DualScaling::Average, DualScaling::Sum] {
            let s = apply_s_scaled(d, &w, scaling).unwrap();
            skew = skew.max(w.dot(&s).abs() / (w.norm() * s.norm()));
        }
    }

    let monotone = generate_benchmark(&BenchmarkParams::toy().without_aggregate_cost()).unwrap();
    let probe = monotonicity_probe(&monotone, DEFAULT_PROBE_SAMPLES, 7).unwrap();
    let steps = heterogeneous_steps(d.agents, &mut rng);
    let pairs: Vec<(ExtendedPoint, ExtendedPoint)> = (0..100)
        .map(|_| (random_point(&monotone, &mut rng), random_point(&monotone, &mut rng)))
        .collect();
    let ea = firm_nonexpansive_excess(|w| resolvent_a(&monotone, &steps, w), &steps, &pairs).unwrap();
    let eb = firm_nonexpansive_excess(|w| resolvent_b(d, &steps, w), &steps, &pairs).unwrap();

    let mut fe_gap = 0.0f64;
    for _ in 0..100 {
        let x = random_point(&game, &mut rng).x;
        let sigma = average(&x, d.n).unwrap();
        let fe = extended_subdifferential(&game, &x, &sigma).unwrap();
        let fa = aggregative_subdifferential(&game, &x).unwrap();
        // a_i (x_i − x̃_i) + Q_i σ written out
        for (i, agent) in game.agents().iter().enumerate() {
            let CostModel::QuadraticAgg { a, target, q } = &agent.cost else { panic!("quadratic benchmark") };
            for j in 0..d.n {
                let qs: f64 = (0..d.n).map(|c| q.get(j, c) * sigma[c]).sum();
                let direct = a * (x[i * d.n + j] - target[j]) + qs;
                let k = i * d.n + j;
                fe_gap = fe_gap.max((fe[k] - fa[k]).abs()).max((fa[k] - direct).abs());
            }
        }
    }
    check(
        skew <= 1e-10 && probe.extended_monotone() && ea <= 1e-8 && eb <= 1e-8 && fe_gap <= 1e-12,
        format!(
            "skew {skew:.2e}; probe-monotone {}; firm-nonexpansive excess J_A {ea:.2e} J_B {eb:.2e}; |F_e(x, Mx) - F_a(x)| {fe_gap:.2e}",
            probe.extended_monotone()
        ),
    )
}

/// Weighted projection onto the box-simplex by trying every assignment of
/// each coordinate to its lower bound, its upper bound or the free set.
fn enumerate_box_simplex(v: &[f64], upper: &[f64], total: f64, weights: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(n as u32) {
        let mut state = vec![0u8; n];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let fixed: f64 = (0..n).filter(|&j| state[j] == 1).map(|j| upper[j]).sum();
        let free: Vec<usize> = (0..n).filter(|&j| state[j] == 2).collect();
        let mut x = vec![0.0; n];
        for j in 0..n {
            if state[j] == 1 {
                x[j] = upper[j];
            }
        }
        if free.is_empty() {
            if (fixed - total).abs() > 1e-12 {
                continue;
            }
        } else {
            let theta = (free.iter().map(|&j| v[j]).sum::<f64>() - (total - fixed))
                / free.iter().map(|&j| 1.0 / weights[j]).sum::<f64>();
            for &j in &free {
                x[j] = v[j] - theta / weights[j];
            }
        }
        if x.iter().zip(upper).any(|(xj, u)| *xj < -1e-12 || *xj > u + 1e-12) {
            continue;
        }
        let cost: f64 = (0..n).map(|j| weights[j] * (x[j] - v[j]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, x));
        }
    }
    best.expect("nonempty set has a feasible pattern").1
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = rng.gen_range(1..=4);
        let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let cap: f64 = upper.iter().sum();
        let total = match case % 10 {
            0 => cap,
            1 => 0.0,
            _ => rng.gen_range(0.0..1.0) * cap,
        };
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let weights: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-1.0..1.0))).collect();
        let got = project_box_simplex(&v, &upper, total, &weights).map_err(|e| e.to_string())?;
        let want = enumerate_box_simplex(&v, &upper, total, &weights);
        worst = worst.max(got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let ones = [1.0, 1.0];
    let examples = [
        ([0.5, 0.5], [0.5, 0.5]),
        ([2.0, 0.0], [1.0, 0.0]),
        ([0.9, 0.9], [0.5, 0.5]),
    ];
    let exact = examples
        .iter()
        .all(|(v, want)| project_box_simplex(v, &ones, 1.0, &ones).unwrap() == want.to_vec());
    check(
        worst <= 1e-10 && exact,
        format!("max deviation from enumeration {worst:.2e} over 1000 cases; listed examples exact: {exact}"),
    )
}

fn criterion_9() -> Outcome {
    let mut identical = true;
    for game in [toy(), benchmark_50()] {
        let config = default_config(game.dims().agents);
        let a = run_dr(&game, &config, None).unwrap().trace;
        let b = run_dr(&game, &config, None).unwrap().trace;
        identical &= a.to_csv() == b.to_csv() && a.to_json().unwrap() == b.to_json().unwrap();
        let a = run_pfb(&game, &config, None).unwrap().trace;
        let b = run_pfb(&game, &config, None).unwrap().trace;
        identical &= a.to_csv() == b.to_csv();
    }
    let cfg = ComparisonConfig::new(BenchmarkParams::desk().with_size(30, 5), 3);
    identical &= run_comparison(&cfg).unwrap().summary_csv() == run_comparison(&cfg).unwrap().summary_csv();

    // the coordinator sees agents only through the aggregate message
    let update: fn(&CoordinatorState, &AggregateMessage, &StepSizes) -> agg_splitter::Result<(CoordinatorState, BroadcastMessage)> =
        coordinator_update;
    let game = toy();
    let d = game.dims();
    let engine = DrEngine::new(&game, &default_config(d.agents), None).unwrap();
    let states: Vec<AgentState> = engine.agents().to_vec();
    let msg = AggregateMessage::from_agents(&states, d.n, d.m).unwrap();
    let boundary = msg.payload_len() == d.n + d.m && msg.xhat().len() == d.n && msg.yhat().len() == d.m;
    update(engine.coordinator(), &msg, &default_config(d.agents).steps).unwrap();
    check(
        identical && boundary,
        format!(
            "repeated runs byte-identical: {identical}; uplink payload {} reals for n + m = {}",
            msg.payload_len(),
            d.n + d.m
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut means = Vec::new();
    let mut all_nonnegative = true;
    let mut log = Vec::new();
    for agents in [10, 100] {
        let mut eps = Vec::new();
        for seed in 0..5 {
            let game = generate_benchmark(&BenchmarkParams::desk().with_size(agents, 10).with_seed(seed)).unwrap();
            let reference = ground_truth(&game, 1e-10).map_err(|e| e.to_string())?;
            let gap = epsilon_nash_gap(&game, &reference.x).unwrap();
            all_nonnegative &= gap.per_agent.iter().all(|e| *e >= 0.0);
            eps.push(gap.max);
        }
        let mean = eps.iter().sum::<f64>() / eps.len() as f64;
        log.push(format!("N={agents}: {}", eps.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" ")));
        means.push(mean);
    }
    check(
        all_nonnegative && means[1] <= means[0],
        format!("mean eps N=10 {:.2e}, N=100 {:.2e} ({})", means[0], means[1], log.join("; ")),
    )
}

fn timed<F: FnOnce() -> Outcome>(limit: Option<Duration>, f: F) -> (Outcome, Duration) {
    let start = Instant::now();
    let out = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let out = match (out, limit) {
        (Ok(detail), Some(l)) if elapsed > l => Err(format!("{detail}; over time limit {l:?}")),
        (out, _) => out,
    };
    (out, elapsed)
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let mut results: Vec<(u8, &str, Outcome, Duration)> = Vec::new();
    let mut push = |k, name, (out, t)| results.push((k, name, out, t));

    push(1, "resolvent inclusions and dense J_B", timed(secs(10), criterion_1));
    push(2, "two DR forms share the x trajectory", timed(secs(10), criterion_2));
    let start = Instant::now();
    let (c3, c4) = catch_unwind(criterion_3_4).unwrap_or_else(|_| (Err("panicked".into()), Err("panicked".into())));
    let t = start.elapsed();
    let c3 = match c3 {
        Ok(d) if t > Duration::from_secs(60) => Err(format!("{d}; over time limit")),
        other => other,
    };
    push(3, "convergence at N=50, n=5", (c3, t));
    push(4, "equilibrium certificate", (c4, t));
    push(5, "DR against forward-backward, N=100", timed(secs(300), criterion_5));
    push(6, "step-size intervals and maps", timed(None, criterion_6));
    push(7, "operator properties", timed(None, criterion_7));
    push(8, "box-simplex projection", timed(None, criterion_8));
    push(9, "determinism and uplink payload", timed(None, criterion_9));
    push(10, "epsilon gap trend", timed(None, criterion_10));

    let mut failed = 0;
    for (k, name, out, t) in &results {
        let (tag, detail) = match out {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} criterion {k:>2} ({name}, {:.2} s): {detail}", t.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
