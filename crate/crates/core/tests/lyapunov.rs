mod common;

use lyagraph::dynamics::{GaussianTerm, StateBounds, SystemConfig, Vec2};
use lyagraph::lyapunov::*;
use lyagraph::nn::{Activation, Dense, NetworkParams};
use lyagraph::ppo::GaussianPolicy;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `V(z) = |z₁| + |z₂|` built from four ReLUs.
fn l1_net() -> NetworkParams {
    NetworkParams::from_layers(vec![
        Dense {
            in_dim: 2,
            out_dim: 4,
            weights: vec![1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0],
            biases: vec![0.0; 4],
            activation: Activation::Relu,
        },
        Dense {
            in_dim: 4,
            out_dim: 1,
            weights: vec![1.0; 4],
            biases: vec![0.0],
            activation: Activation::Identity,
        },
    ])
    .unwrap()
}

fn constant_net(c: f64) -> NetworkParams {
    NetworkParams::from_layers(vec![Dense {
        in_dim: 2,
        out_dim: 1,
        weights: vec![0.0, 0.0],
        biases: vec![c],
        activation: Activation::Identity,
    }])
    .unwrap()
}

fn constant_policy(u: Vec2) -> GaussianPolicy {
    let net = NetworkParams::from_layers(vec![Dense {
        in_dim: 2,
        out_dim: 2,
        weights: vec![0.0; 4],
        biases: u.to_vec(),
        activation: Activation::Identity,
    }])
    .unwrap();
    GaussianPolicy::new(net, vec![-1.0, -1.0]).unwrap()
}

fn flat_system() -> SystemConfig {
    SystemConfig {
        terms: vec![GaussianTerm {
            alpha: 0.0,
            mu: [0.0, 0.0],
            sigma: 1.0,
        }],
        ..SystemConfig::default()
    }
}

#[test]
fn lie_derivative_of_quadratic_matches_hand_expansion() {
    // ((1 + h)² − 1)/h · (−1) = −(2 + h)
    let v = |z: Vec2| z[0] * z[0] + z[1] * z[1];
    let d = lie_derivative_fd(v, [1.0, 0.0], [-1.0, 0.0], 1e-3);
    assert!((d + 2.001).abs() < 1e-10, "{d}");
    assert_eq!(lie_derivative_fd(v, [0.3, -0.7], [0.0, 0.0], 1e-3), 0.0);
}

#[test]
fn lie_derivative_of_relu_net_matches_hand_value() {
    let lyap = LyapunovNet::new(l1_net(), [0.0, 0.0], StateBounds::default()).unwrap();
    // at z = (0.3, −0.2): ∂V/∂z = (1, −1), so ż = (−1, 0.5) gives −1.5
    let d = lie_derivative_fd(|z| lyap.value_at_offset(z).unwrap(), [0.3, -0.2], [-1.0, 0.5], 1e-3);
    assert!((d + 1.5).abs() < 1e-10, "{d}");
    assert!((lyap.value_at_offset([0.3, -0.2]).unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn lie_derivative_converges_to_analytic_gradient() {
    // smooth net: a single GELU unit
    let net = NetworkParams::from_layers(vec![
        Dense {
            in_dim: 2,
            out_dim: 1,
            weights: vec![0.8, -0.5],
            biases: vec![0.1],
            activation: Activation::Gelu,
        },
    ])
    .unwrap();
    let z = [0.2, 0.4];
    let zdot = [0.3, -0.6];
    let (_, grad) = net.backward(&z, &[1.0]).unwrap();
    let exact = grad[0] * zdot[0] + grad[1] * zdot[1];
    let f = |p: Vec2| net.forward_scalar(&p).unwrap();
    let e1 = (lie_derivative_fd(f, z, zdot, 1e-3) - exact).abs();
    let e2 = (lie_derivative_fd(f, z, zdot, 1e-4) - exact).abs();
    assert!(e1 < 1e-3);
    assert!(e2 < e1 / 5.0, "first-order convergence: {e1} then {e2}");
}

#[test]
fn risk_examples() {
    assert!((lyapunov_risk(&[-0.3], &[-1.0], 0.0, 0.0, 0.0).unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(lyapunov_risk(&[0.4, 1.0], &[-0.2, -3.0], 0.0, 0.0, 0.0).unwrap(), 0.0);
    // (0 + 0.5) + (0.1 + 0), averaged, plus 0.1²
    let r = lyapunov_risk(&[0.2, -0.1], &[0.5, -0.4], 0.1, 0.0, 0.0).unwrap();
    assert!((r - 0.31).abs() < 1e-12, "{r}");
    assert!(lyapunov_risk(&[], &[], 0.0, 0.0, 0.0).is_err());
}

#[test]
fn risk_of_relu_net_batch_matches_hand_sum() {
    let lyap = LyapunovNet::new(l1_net(), [0.0, 0.0], StateBounds::default()).unwrap();
    let h = 1e-3;
    // states in original units; offsets are x/5
    let states = [[1.5, -1.0], [-0.5, 0.0]];
    let rates = [[-1.0, 0.5], [2.5, 0.0]];
    let eval = lyap.evaluate_batch(&states, &rates, h).unwrap();
    // z = (0.3, −0.2), ż = (−0.2, 0.1): V = 0.5, L = −0.2 − 0.1 = −0.3
    // z = (−0.1, 0), ż = (0.5, 0): V = 0.1, L = −0.5
    assert!((eval[0].0 - 0.5).abs() < 1e-12 && (eval[0].1 + 0.3).abs() < 1e-10);
    assert!((eval[1].0 - 0.1).abs() < 1e-12 && (eval[1].1 + 0.5).abs() < 1e-10);
    let (v, l): (Vec<f64>, Vec<f64>) = eval.into_iter().unzip();
    let center = lyap.value([0.0, 0.0]).unwrap();
    let r = lyapunov_risk(&v, &l, center, 0.2, 0.4).unwrap();
    // margins: max(0, 0.2 − 0.5) + max(0, −0.3 + 0.4) = 0.1 ; max(0, 0.2 − 0.1) + max(0, −0.5 + 0.4) = 0.1
    assert!((r - 0.1).abs() < 1e-10, "{r}");
}

#[test]
fn closed_loop_examples() {
    let flat = flat_system();
    let zero = constant_policy([0.0, 0.0]);
    assert_eq!(closed_loop_derivative(&flat, &zero, [1.0, 1.0], [0.3, -2.0]).unwrap(), [0.0, 0.0]);
    let push = constant_policy([0.5, 0.0]);
    assert_eq!(closed_loop_derivative(&flat, &push, [1.0, 1.0], [0.3, -2.0]).unwrap(), [0.5, 0.0]);
}

#[test]
fn closed_loop_matches_short_simulation_step() {
    let system = SystemConfig::default();
    let policy = common::linear_policy(3.0);
    let center = [1.0, -2.0];
    let x = [1.7, -1.4];
    let xdot = closed_loop_derivative(&system, &policy, center, x).unwrap();
    let u = policy
        .mean_action(&lyagraph::dynamics::observation(&system.state_bounds, x, center))
        .unwrap();
    let dt = 1e-4;
    let (next, _) = system.advance_by(x, [u[0], u[1]], dt).unwrap();
    for i in 0..2 {
        assert!(((next[i] - x[i]) / dt - xdot[i]).abs() < 1e-3);
    }
}

#[test]
fn constant_candidate_certifies_nothing() {
    let system = SystemConfig::default();
    let lyap = LyapunovNet::new(constant_net(1.0), [0.0, 0.0], system.state_bounds).unwrap();
    let policy = common::linear_policy(5.0);
    let (eta, shells) = certify_radius(&system, &policy, &lyap, &RoaConfig::default(), 1e-3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(eta, 0.0);
    assert_eq!(shells.len(), 1);
    assert!(!shells[0].passed);
}

#[test]
fn contracting_field_certifies_to_upper_bound() {
    let system = SystemConfig::default();
    let center = [0.5, -1.0];
    let lyap = LyapunovNet::new(l1_net(), center, system.state_bounds).unwrap();
    for skip in [true, false] {
        let cfg = RoaConfig {
            skip_inner_disk: skip,
            ..RoaConfig::default()
        };
        let field = |x: Vec2| Ok([center[0] - x[0], center[1] - x[1]]);
        let (eta, shells) = certify_with(&system, &lyap, &cfg, 1e-3, field, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        if skip {
            assert!((eta - cfg.eta_ub).abs() < 1e-12, "{eta}");
            assert!(shells.iter().all(|s| s.passed));
        } else {
            // the innermost disk holds states closer to an axis than the difference step
            assert!(eta <= cfg.eta_ub);
        }
    }
}

#[test]
fn zero_epochs_returns_initial_net() {
    let system = SystemConfig::default();
    let policy = common::linear_policy(5.0);
    let cfg = LyapunovConfig {
        epochs: 0,
        ..LyapunovConfig::default()
    };
    let (lyap, curve) = train_lyapunov(&system, &policy, [0.0, 0.0], (0.0, 2.2), &cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert!(curve.is_empty());
    let init = NetworkParams::init(&cfg.net_dims, &cfg.activations, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    assert_eq!(lyap.net, init);
}

#[test]
fn training_on_linear_feedback_reduces_risk_and_certifies() {
    let system = SystemConfig::default();
    let policy = common::linear_policy(50.0);
    let center = [-2.0, 1.0];
    let cfg = LyapunovConfig {
        epochs: 10,
        n_train_points: 4000,
        ..LyapunovConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (lyap, curve) = train_lyapunov(&system, &policy, center, RoaConfig::default().tested_band(), &cfg, &mut rng).unwrap();
    assert!(curve.last().unwrap() < curve.first().unwrap(), "{curve:?}");
    assert!(*curve.last().unwrap() < 1e-3);
    let (eta, _) = certify_radius(&system, &policy, &lyap, &RoaConfig::default(), cfg.fd_step, &mut rng).unwrap();
    assert!(eta > RoaConfig::default().eta_lb, "eta {eta}");
    let rate = rollout_success_rate(&system, &policy, center, 0.9 * eta, 50, 0.01, 900, &mut rng).unwrap();
    assert_eq!(rate, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn risk_is_nonnegative(
        v in prop::collection::vec(-2.0f64..2.0, 1..20),
        seed in any::<u64>(),
        c in -1.0f64..1.0,
        m in 0.0f64..0.1,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l: Vec<f64> = v.iter().map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        prop_assert!(lyapunov_risk(&v, &l, c, m, m).unwrap() >= 0.0);
    }

    #[test]
    fn risk_vanishes_exactly_when_criterion_holds(
        v in prop::collection::vec(0.0f64..2.0, 1..20),
        l in prop::collection::vec(-2.0f64..=0.0, 1..20),
    ) {
        let n = v.len().min(l.len());
        prop_assert_eq!(lyapunov_risk(&v[..n], &l[..n], 0.0, 0.0, 0.0).unwrap(), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn more_test_points_never_enlarge_the_radius(seed in any::<u64>(), gain in 0.5f64..6.0) {
        let system = SystemConfig::default();
        let policy = common::linear_policy(gain);
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = LyapunovConfig::default();
        let net = NetworkParams::init(&cfg.net_dims, &cfg.activations, &mut init_rng).unwrap();
        let lyap = LyapunovNet::new(net, [1.0, 1.0], system.state_bounds).unwrap();
        let small = RoaConfig { n_test_points: 20, ..RoaConfig::default() };
        let large = RoaConfig { n_test_points: 200, ..RoaConfig::default() };
        let (a, _) = certify_radius(&system, &policy, &lyap, &small, 1e-3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let (b, _) = certify_radius(&system, &policy, &lyap, &large, 1e-3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(b <= a);
        for eta in [a, b] {
            prop_assert!(eta <= small.eta_ub + 1e-12);
            let k = (eta / small.delta_eta).round();
            prop_assert!((eta - k * small.delta_eta).abs() < 1e-12);
        }
    }
}
