mod common;

use common::{norm, random_instance, random_positions, rng, sub};
use locdyn::baselines::{kalman_step, static_solve, static_solve_from, KalmanConfig, KalmanState, StaticConfig};
use locdyn::convex::{fhat_value, g_value};
use locdyn::geometry::distance;
use locdyn::harness::{node_errors, step_error};
use locdyn::solver::{run_locdyn, solve_step};
use locdyn::{
    gen_lap, sample_trial, trajectory_error, ErrorMetric, LapParams, MeasurementSet, NetworkGraph, Positions,
    ScenarioKind, SolverConfig,
};
use rand::Rng;

fn tight(lambda: f64) -> SolverConfig {
    SolverConfig {
        lambda,
        max_iters: 20_000,
        grad_tolerance: 1e-11,
        ..SolverConfig::default()
    }
}

#[test]
fn minimizer_is_independent_of_start() {
    for seed in 0..10 {
        let inst = random_instance(100 + seed);
        let mut r = rng(200 + seed);
        let (n, p) = (inst.graph.n_nodes(), inst.graph.dim());
        let a = solve_step(
            &inst.meas,
            &inst.x_pred,
            &random_positions(&mut r, n, p, 50.0),
            &tight(inst.lambda),
            &inst.graph,
        )
        .unwrap();
        let b = solve_step(
            &inst.meas,
            &inst.x_pred,
            &random_positions(&mut r, n, p, 50.0),
            &tight(inst.lambda),
            &inst.graph,
        )
        .unwrap();
        assert!(norm(&sub(&a.estimate, &b.estimate)) < 1e-7, "seed {seed}");
    }
}

#[test]
fn objective_decreases_towards_minimum() {
    let inst = random_instance(7);
    let mut r = rng(8);
    let x0 = random_positions(&mut r, inst.graph.n_nodes(), inst.graph.dim(), 40.0);
    let cfg = SolverConfig {
        lambda: inst.lambda,
        record_objective: true,
        ..SolverConfig::default()
    };
    let res = solve_step(&inst.meas, &inst.x_pred, &x0, &cfg, &inst.graph).unwrap();
    let g_end = g_value(&res.estimate, &inst.x_pred, inst.lambda, &inst.meas, &inst.graph).unwrap();
    assert!(g_end < res.objective[0]);
    assert_eq!(res.objective.len(), res.iterations + 1);
    assert!(res.grad_norm <= 1e-6);
}

#[test]
fn small_lambda_approaches_static_solution() {
    // single node with four anchors and inconsistent ranges: a unique static optimum
    let anchors = vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0], vec![20.0, 20.0]];
    let g = NetworkGraph::complete(1, 2, anchors).unwrap();
    let truth = Positions::from_flat(vec![7.0, 11.0], 2).unwrap();
    let meas = MeasurementSet::with_ranges(&g, 1, vec![], vec![vec![12.0, 15.0, 10.0, 16.0]]);
    let stat = static_solve(
        &meas,
        &g,
        &StaticConfig {
            max_iters: 50_000,
            grad_tolerance: 1e-12,
            ..Default::default()
        },
    )
    .unwrap();
    let pred = Positions::from_flat(vec![5.0, 5.0], 2).unwrap();
    let mut prev = f64::INFINITY;
    for lambda in [1e-1, 1e-2, 1e-4, 1e-8] {
        let res = solve_step(&meas, &pred, &truth, &tight(lambda), &g).unwrap();
        let gap = distance(res.estimate.as_slice(), stat.estimate.as_slice());
        assert!(gap < prev, "lambda {lambda}: {gap} not below {prev}");
        prev = gap;
    }
    assert!(prev < 1e-3, "gap {prev} at lambda 1e-8");
}

#[test]
fn static_solution_ignores_initialization() {
    for seed in 0..5 {
        let inst = random_instance(300 + seed);
        // every node sees four anchors around the box
        let anchors = vec![
            vec![-40.0; inst.graph.dim()],
            vec![40.0; inst.graph.dim()],
            {
                let mut v = vec![-40.0; inst.graph.dim()];
                v[0] = 40.0;
                v
            },
            {
                let mut v = vec![40.0; inst.graph.dim()];
                v[0] = -40.0;
                v
            },
        ];
        let g = NetworkGraph::complete(inst.graph.n_nodes(), inst.graph.dim(), anchors).unwrap();
        let mut r = rng(400 + seed);
        // shrunken ranges keep every ball disjoint from the solution, so every
        // anchor term is active and the minimizer is a single point
        let exact = MeasurementSet::noiseless(&g, &inst.truth, 1);
        let meas = MeasurementSet::with_ranges(
            &g,
            1,
            exact.edge_ranges.iter().map(|d| 0.8 * d).collect(),
            exact
                .anchor_ranges
                .iter()
                .map(|row| row.iter().map(|d| 0.8 * d).collect())
                .collect(),
        );
        let cfg = StaticConfig {
            max_iters: 50_000,
            grad_tolerance: 1e-10,
            ..Default::default()
        };
        let a = static_solve(&meas, &g, &cfg).unwrap();
        let x0 = random_positions(&mut r, g.n_nodes(), g.dim(), 60.0);
        let b = static_solve_from(&meas, &g, &cfg, &x0).unwrap();
        let fa = fhat_value(&a.estimate, &meas, &g).unwrap();
        let fb = fhat_value(&b.estimate, &meas, &g).unwrap();
        assert!((fa - fb).abs() < 1e-6);
        assert!(norm(&sub(&a.estimate, &b.estimate)) < 1e-3, "seed {seed}");
    }
}

#[test]
fn static_steps_do_not_depend_on_history() {
    let sc = gen_lap(&LapParams {
        steps: 20,
        ..Default::default()
    })
    .unwrap();
    let meas = sample_trial(&sc, 1.0, None, 5).unwrap();
    let forward: Vec<Positions> = meas
        .iter()
        .map(|m| static_solve(m, &sc.graph, &StaticConfig::default()).unwrap().estimate)
        .collect();
    for (k, m) in meas.iter().enumerate().rev() {
        let again = static_solve(m, &sc.graph, &StaticConfig::default()).unwrap().estimate;
        assert_eq!(again, forward[k]);
    }
}

#[test]
fn noiseless_run_tracks_truth() {
    let sc = ScenarioKind::Lap.generate_default().unwrap();
    let meas = sample_trial(&sc, 0.0, None, 1).unwrap();
    let cfg = SolverConfig {
        lambda: 0.01,
        ..SolverConfig::default()
    };
    let est = run_locdyn(&sc, &meas, &cfg, 1).unwrap();
    for (k, (e, t)) in est.estimates.iter().zip(&sc.truth).enumerate().skip(1) {
        let errs = node_errors(e, t).unwrap();
        let step = step_error(&errs, ErrorMetric::Stacked);
        assert!(step < 1e-2, "step {}: error {step}", k + 1);
    }
    let err = trajectory_error(&est.estimates, &sc.truth, ErrorMetric::Stacked).unwrap();
    assert!(err < 1e-2, "error {err}");
}

#[test]
fn kalman_covariance_stays_psd() {
    let anchors = vec![
        vec![-30.0, -30.0],
        vec![30.0, -30.0],
        vec![30.0, 30.0],
        vec![-30.0, 30.0],
    ];
    let g = NetworkGraph::complete(3, 2, anchors).unwrap();
    let cfg = KalmanConfig::default();
    let mut r = rng(11);
    let mut truth = random_positions(&mut r, 3, 2, 10.0);
    let mut states: Vec<KalmanState> = truth.nodes().map(|p| KalmanState::new(p, &cfg)).collect();
    for step in 0..10_000 {
        for v in truth.as_mut_slice() {
            *v = (*v + r.random_range(-0.5..0.5)).clamp(-25.0, 25.0);
        }
        let meas = common::noisy_measurements(&mut r, &g, &truth, 1.0);
        kalman_step(&mut states, &meas, &g, if step == 0 { 0.0 } else { 1.0 }, &cfg).unwrap();
        if step % 100 == 0 {
            for s in &states {
                let asym = (&s.cov - s.cov.transpose()).abs().max();
                assert!(asym == 0.0);
                assert!(s.min_eigenvalue() >= -1e-9);
            }
        }
    }
}
