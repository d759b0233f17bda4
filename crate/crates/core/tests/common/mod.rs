//! Oracles shared by the integration tests.
#![allow(dead_code)]

use jumpleg::ballistics::LiftoffState;
use jumpleg::nn::{Mlp, OutputActivation};
use jumpleg::td3::{Architecture, ReplayBuffer, Td3Agent, Td3Config, Transition};
use jumpleg::Vec3;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst relative error between backprop and central differences for the
/// scalar loss `Σ w ⊙ net(x)` with random `w`. Inputs whose hidden
/// pre-activations lie within `kink` of zero are redrawn.
pub fn gradient_check(sizes: &[usize], output: OutputActivation, batch: usize, seed: u64) -> f64 {
    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Mlp::new(sizes, output, 1.0, &mut rng);
    let kink = 1e-4;
    let x = loop {
        let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.gen_range(-1.0..1.0));
        let cache = net.forward_cached(x.view()).unwrap();
        let pre = cache.pre_activations();
        let near_kink = pre[..pre.len() - 1].iter().any(|p| p.iter().any(|v| v.abs() < kink));
        if !near_kink {
            break x;
        }
    };
    let w = Array2::from_shape_fn((batch, *sizes.last().unwrap()), |_| rng.gen_range(-1.0..1.0));
    let loss = |net: &Mlp, x: &Array2<f64>| (net.forward_batch(x.view()).unwrap() * &w).sum();

    let cache = net.forward_cached(x.view()).unwrap();
    let (grads, grad_x) = net.backward(&cache, w.view());
    let rel = |a: f64, n: f64| (a - n).abs() / (a.abs() + n.abs()).max(1e-7);
    let mut worst = 0.0f64;

    for l in 0..net.layers.len() {
        for idx in 0..net.layers[l].weight.len() {
            let (r, c) = (idx / net.layers[l].weight.ncols(), idx % net.layers[l].weight.ncols());
            let orig = net.layers[l].weight[[r, c]];
            net.layers[l].weight[[r, c]] = orig + H;
            let up = loss(&net, &x);
            net.layers[l].weight[[r, c]] = orig - H;
            let down = loss(&net, &x);
            net.layers[l].weight[[r, c]] = orig;
            worst = worst.max(rel(grads.layers[l].weight[[r, c]], (up - down) / (2.0 * H)));
        }
        for i in 0..net.layers[l].bias.len() {
            let orig = net.layers[l].bias[i];
            net.layers[l].bias[i] = orig + H;
            let up = loss(&net, &x);
            net.layers[l].bias[i] = orig - H;
            let down = loss(&net, &x);
            net.layers[l].bias[i] = orig;
            worst = worst.max(rel(grads.layers[l].bias[i], (up - down) / (2.0 * H)));
        }
    }
    let mut xp = x.clone();
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        xp[[r, c]] = x[[r, c]] + H;
        let up = loss(&net, &xp);
        xp[[r, c]] = x[[r, c]] - H;
        let down = loss(&net, &xp);
        xp[[r, c]] = x[[r, c]];
        worst = worst.max(rel(grad_x[[r, c]], (up - down) / (2.0 * H)));
    }
    worst
}

pub const BANDIT_OPTIMUM: [f64; 5] = [0.3, -0.5, 0.1, 0.7, -0.2];

/// Runs TD3 on the one-step bandit `r = 1 - ‖a - a*‖²` with a constant
/// state. Returns the first step at which the noiseless action is within
/// `tol` of the optimum (checked every 100 steps), if any within `max_steps`.
pub fn bandit(seed: u64, max_steps: usize, tol: f64) -> (Option<usize>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture {
        state_dim: 1,
        action_dim: 5,
        actor_hidden: vec![64, 64],
        critic_hidden: vec![64, 64],
    };
    let cfg = Td3Config {
        batch_size: 128,
        buffer_capacity: 10_000,
        expl_noise: 0.2,
        actor_lr: 1e-3,
        critic_lr: 1e-3,
        ..Default::default()
    };
    let mut agent = Td3Agent::new(arch, cfg, &mut rng);
    let mut buffer = ReplayBuffer::new(10_000, 1, 5);
    let state = [0.0];
    let dist = |a: &[f64]| {
        a.iter()
            .zip(BANDIT_OPTIMUM)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    for step in 1..=max_steps {
        let warmup = step <= 200;
        let a = agent.select_action(&state, agent.cfg.expl_noise, warmup, &mut rng);
        let r = 1.0 - dist(&a).powi(2);
        buffer.push(Transition::terminal(state.to_vec(), a, r));
        agent.train_step(&buffer, &mut rng);
        if step % 100 == 0 && dist(&agent.act(&state)) <= tol {
            return (Some(step), dist(&agent.act(&state)));
        }
    }
    (None, dist(&agent.act(&state)))
}

/// Fixed-step RK4 of a point mass under gravity: position and velocity.
pub fn rk4_state(lo: &LiftoffState, t: f64, g: f64, steps: usize) -> (Vec3, Vec3) {
    let h = t / steps as f64;
    let acc = Vec3::new(0.0, 0.0, -g);
    let (mut p, mut v) = (lo.c_lo, lo.cdot_lo);
    for _ in 0..steps {
        let (k1p, k2p, k3p, k4p) = (v, v + 0.5 * h * acc, v + 0.5 * h * acc, v + h * acc);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        v += h * acc;
    }
    (p, v)
}

/// Apex `(time, height)` by bisection on the sign of the integrated
/// vertical velocity.
pub fn rk4_apex(lo: &LiftoffState, g: f64) -> (f64, f64) {
    let (mut t_lo, mut t_hi) = (0.0, 1e-3);
    while rk4_state(lo, t_hi, g, 16).1.z > 0.0 {
        t_lo = t_hi;
        t_hi *= 2.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (t_lo + t_hi);
        if rk4_state(lo, mid, g, 16).1.z > 0.0 {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
    }
    let t = 0.5 * (t_lo + t_hi);
    (t, rk4_state(lo, t, g, 1000).0.z)
}

pub fn random_liftoff<R: Rng>(rng: &mut R) -> LiftoffState {
    let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let theta_v = rng.gen_range(0.3..1.5f64);
    let speed = rng.gen_range(0.5..4.0);
    let c = Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(0.25..0.32));
    let v = Vec3::new(
        speed * theta_v.cos() * phi.cos(),
        speed * theta_v.cos() * phi.sin(),
        speed * theta_v.sin(),
    );
    LiftoffState::new(c, v)
}
