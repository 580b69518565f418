use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajflow::benchmarks::{gen_narma, NarmaConfig};
use trajflow::constraints::{eval_constraints, with_slacks};
use trajflow::flow::{descend, integrate, to_feasible, Direction, Flow, FlowConfig, Terminal};
use trajflow::objective::{DoubleWell, Quadratic};
use trajflow::rnn::SseObjective;
use trajflow::{Bounds, ParameterVector};

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14) + 1e-300)
}

#[test]
fn qgs_reaches_the_constraint_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = Bounds::new(vec![1.0, 2.5, 10.0, 0.3]).unwrap();
    for _ in 0..25 {
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(-40.0..40.0)).collect();
        let x0 = ParameterVector::from_vec(x).unwrap();
        let tr = to_feasible(&x0, &l, &FlowConfig::default(), &mut rng).unwrap();
        assert_eq!(tr.terminal, Terminal::Converged);
        assert!(non_increasing(&tr.lyapunov_values()));
        assert!(eval_constraints(&tr.end, &l).unwrap().max_violation() <= 1e-6);
    }
}

#[test]
fn qgs_restarts_a_pair_stuck_at_the_origin() {
    let l = Bounds::uniform(2, 1.0).unwrap();
    let x0 = ParameterVector::from_parts(&[0.0, 3.0], &[0.0, 1.0]).unwrap();
    let tr = to_feasible(&x0, &l, &FlowConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert!(tr.restarts >= 1 && tr.restarts <= 3);
    assert_eq!(tr.terminal, Terminal::Converged);
}

#[test]
fn pgs_decreases_the_error_and_stays_feasible() {
    let p = gen_narma(&NarmaConfig {
        hidden: 3,
        n_train: 20,
        ..Default::default()
    })
    .unwrap();
    let train = p.train();
    let obj = SseObjective::new(p.spec, &train).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = FlowConfig {
        max_steps: 2000,
        polish_iterations: 3000,
        ..Default::default()
    };
    for _ in 0..3 {
        let x0 = p.initial_point(&mut rng).unwrap();
        let tr = descend(&obj, &x0, &p.bounds, &cfg, &mut rng).unwrap();
        assert!(non_increasing(&tr.lyapunov_values()));
        assert!(tr.samples.iter().all(|s| s.max_violation <= 1e-6));
        assert_eq!(tr.terminal, Terminal::Converged);
    }
}

#[test]
fn reverse_then_forward_returns_to_the_minimum() {
    let obj = Quadratic::bowl(2);
    let l = Bounds::uniform(2, 1.0).unwrap();
    let near = with_slacks(&[0.01, -0.02], &l).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = FlowConfig::default();
    let up = integrate(Flow::Pgs(&obj), &near, &l, Direction::Reverse, &cfg, &mut rng).unwrap();
    let vals = up.lyapunov_values();
    assert!(vals.windows(2).all(|w| w[1] >= w[0]));
    assert!(vals.last().unwrap() > &vals[0]);
    let down = descend(&obj, &up.end, &l, &cfg, &mut rng).unwrap();
    assert_eq!(down.terminal, Terminal::Converged);
    assert!(down.end.weights().iter().all(|v| v.abs() < 1e-6));
}

#[test]
fn double_well_descents_pick_the_nearer_well() {
    let obj = DoubleWell::new(1);
    let l = Bounds::uniform(1, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (o, want) in [(0.1, 0.5), (-0.2, -0.5), (0.8, 0.5), (-0.7, -0.5)] {
        let x0 = with_slacks(&[o], &l).unwrap();
        let tr = descend(&obj, &x0, &l, &FlowConfig::default(), &mut rng).unwrap();
        assert!((tr.end.weights()[0] - want).abs() < 1e-6, "{o} -> {:?}", tr.end.weights());
    }
}

#[test]
fn fixed_step_mode_is_reproducible() {
    let l = Bounds::uniform(3, 2.0).unwrap();
    let x0 = ParameterVector::from_vec(vec![3.0, 0.1, -4.0, 1.0, 0.5, 2.0]).unwrap();
    let cfg = FlowConfig {
        step_init: 1e-2,
        step_min: 1e-2,
        step_max: 1e-2,
        ..Default::default()
    };
    let a = to_feasible(&x0, &l, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let b = to_feasible(&x0, &l, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a.lyapunov_values(), b.lyapunov_values());
    let dts: Vec<f64> = a.samples.windows(2).map(|w| w[1].t - w[0].t).collect();
    assert!(dts.iter().all(|d| (d - 1e-2).abs() < 1e-12 || *d == 0.0));
}
