use agg_splitter::benchmark::{generate_benchmark, BenchmarkParams};
use agg_splitter::engine::{algorithm_to_tilde, coordinator_update, tilde_to_algorithm, AggregateMessage, CoordinatorState};
use agg_splitter::game::average;
use agg_splitter::operators::{
    apply_a_single_valued, apply_b_single_valued, apply_s_scaled, apply_t_single_valued,
    resolvent_b_inclusion_residual, DualScaling,
};
use agg_splitter::resolvents::{
    central_to_beta, central_to_delta, project_box_simplex, resolvent_a, resolvent_b, StepSizes,
};
use agg_splitter::verify::random_point;
use agg_splitter::GameSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_game(agents: usize, n: usize, seed: u64, aggregate_cost: bool) -> GameSpec {
    // n ≥ 3 so that caps summing to 2 fit below one
    let mut params = BenchmarkParams::toy().with_size(agents, n).with_seed(seed);
    if !aggregate_cost {
        params = params.without_aggregate_cost();
    }
    generate_benchmark(&params).unwrap()
}

fn steps_strategy(agents: usize) -> impl Strategy<Value = StepSizes> {
    (
        prop::collection::vec(0.2f64..3.0, agents),
        0.1f64..3.0,
        0.01f64..0.99,
        0.01f64..0.99,
    )
        .prop_map(move |(gamma, alpha, fd, fb)| {
            let hat = gamma.iter().sum::<f64>() / gamma.len() as f64;
            let n = gamma.len() as f64;
            StepSizes::from_central(gamma, alpha, fd / hat, fb / (alpha + hat / n)).unwrap()
        })
}

fn game_and_steps(aggregate_cost: bool) -> impl Strategy<Value = (GameSpec, StepSizes, u64)> {
    (1usize..6, 3usize..6, any::<u64>(), any::<u64>()).prop_flat_map(move |(agents, n, seed, point_seed)| {
        steps_strategy(agents).prop_map(move |steps| (small_game(agents, n, seed, aggregate_cost), steps, point_seed))
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn average_is_linear(
        n in 1usize..5,
        x in prop::collection::vec(-10.0f64..10.0, 20),
        z in prop::collection::vec(-10.0f64..10.0, 20),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let len = 20 / n * n;
        let (x, z) = (&x[..len], &z[..len]);
        let combo: Vec<f64> = x.iter().zip(z).map(|(p, q)| a * p + b * q).collect();
        let lhs = average(&combo, n).unwrap();
        let (ax, az) = (average(x, n).unwrap(), average(z, n).unwrap());
        let rhs: Vec<f64> = ax.iter().zip(&az).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn projection_is_feasible_idempotent_and_optimal(
        upper in prop::collection::vec(0.0f64..1.0, 1..8),
        fraction in 0.0f64..=1.0,
        v in prop::collection::vec(-3.0f64..3.0, 8),
        other in prop::collection::vec(-3.0f64..3.0, 8),
        weights in prop::collection::vec(0.1f64..10.0, 8),
    ) {
        let n = upper.len();
        let total = fraction * upper.iter().sum::<f64>();
        let (v, other, weights) = (&v[..n], &other[..n], &weights[..n]);
        let p = project_box_simplex(v, &upper, total, weights).unwrap();
        prop_assert!((p.iter().sum::<f64>() - total).abs() <= 1e-12);
        prop_assert!(p.iter().zip(&upper).all(|(x, u)| *x >= 0.0 && *x <= *u));
        let again = project_box_simplex(&p, &upper, total, weights).unwrap();
        prop_assert!(max_abs_diff(&p, &again) <= 1e-12);
        // ⟨W(v − p), z − p⟩ ≤ 0 for every feasible z
        let z = project_box_simplex(other, &upper, total, weights).unwrap();
        let vi: f64 = (0..n).map(|j| weights[j] * (v[j] - p[j]) * (z[j] - p[j])).sum();
        prop_assert!(vi <= 1e-10, "{}", vi);
    }

    #[test]
    fn central_steps_round_trip(
        agents in 1usize..500,
        hat in 0.05f64..5.0,
        alpha in 0.05f64..5.0,
        fd in 0.001f64..0.999,
        fb in 0.001f64..0.999,
    ) {
        let dc = fd / hat;
        let bc = fb / (alpha + hat / agents as f64);
        let delta = central_to_delta(dc, hat, agents);
        let beta = central_to_beta(bc, alpha, hat, agents);
        prop_assert!(delta > 0.0 && beta > 0.0);
        let steps = StepSizes::from_raw(vec![hat; agents], alpha, beta, delta).unwrap();
        prop_assert!((steps.delta_c() - dc).abs() <= 1e-12 * dc);
        prop_assert!((steps.beta_c() - bc).abs() <= 1e-12 * bc);
    }

    #[test]
    fn skew_operator_is_skew((game, _steps, seed) in game_and_steps(true)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_point(&game, &mut rng);
        for scaling in [DualScaling::Average, DualScaling::Sum] {
            let s = apply_s_scaled(game.dims(), &w, scaling).unwrap();
            prop_assert!(w.dot(&s).abs() <= 1e-12 * (w.norm() * s.norm()).max(1e-300));
        }
    }

    #[test]
    fn full_operator_splits_into_a_and_b((game, _steps, seed) in game_and_steps(true)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_point(&game, &mut rng);
        let t = apply_t_single_valued(&game, &w).unwrap();
        let a = apply_a_single_valued(&game, &w).unwrap();
        let b = apply_b_single_valued(game.dims(), &w).unwrap();
        prop_assert!(t.sub(&a.add(&b)).norm_inf() <= 1e-12);
    }

    #[test]
    fn resolvent_b_solves_its_inclusion((game, steps, seed) in game_and_steps(true)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_point(&game, &mut rng);
        let out = resolvent_b(game.dims(), &steps, &w).unwrap();
        prop_assert!(out.lambda.iter().all(|l| *l >= 0.0));
        let r = resolvent_b_inclusion_residual(game.dims(), &steps, &w, &out, DualScaling::Sum).unwrap();
        prop_assert!(r <= 1e-10, "{}", r);
    }

    #[test]
    fn resolvent_a_respects_sets_and_passes_duals((game, steps, seed) in game_and_steps(true)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_point(&game, &mut rng);
        let out = resolvent_a(&game, &steps, &w).unwrap();
        let d = game.dims();
        for (i, agent) in game.agents().iter().enumerate() {
            let xi = &out.x[i * d.n..(i + 1) * d.n];
            prop_assert!(agent.local_set.contains(xi, 1e-10));
            prop_assert_eq!(agent.link(xi), out.y[i * d.m..(i + 1) * d.m].to_vec());
        }
        prop_assert_eq!(&out.sigma, &w.sigma);
        prop_assert_eq!(&out.mu, &w.mu);
        prop_assert_eq!(&out.lambda, &w.lambda);
    }

    #[test]
    fn shifted_state_map_round_trips((game, steps, seed) in game_and_steps(true)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_point(&game, &mut rng);
        let d = game.dims();
        let back = tilde_to_algorithm(d, &steps, &algorithm_to_tilde(d, &steps, &w));
        prop_assert!(back.sub(&w).norm_inf() <= 1e-14);
    }

    #[test]
    fn coordinator_keeps_multiplier_nonnegative(
        (game, steps, seed) in game_and_steps(true),
        prev in prop::collection::vec(-2.0f64..2.0, 6),
        lambda in prop::collection::vec(0.0f64..2.0, 6),
    ) {
        let d = game.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = random_point(&game, &mut rng);
        let state = CoordinatorState {
            sigma: w.sigma.clone(),
            mu: w.mu.clone(),
            lambda: lambda[..d.m].to_vec(),
            prev_xhat: average(&w.x, d.n).unwrap(),
            prev_yhat: prev[..d.m].to_vec(),
        };
        let msg = AggregateMessage::new(average(&w.x, d.n).unwrap(), average(&w.y, d.m).unwrap());
        let (next, bcast) = coordinator_update(&state, &msg, &steps).unwrap();
        prop_assert!(next.lambda.iter().all(|l| *l >= 0.0));
        prop_assert_eq!(&bcast.lambda, &next.lambda);
    }

    #[test]
    fn game_json_round_trips(agents in 1usize..6, n in 3usize..6, seed in any::<u64>()) {
        let game = small_game(agents, n, seed, true);
        let text = game.to_json().unwrap();
        prop_assert_eq!(GameSpec::from_json(&text).unwrap().to_json().unwrap(), text);
    }
}
