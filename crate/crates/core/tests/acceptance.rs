//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 8–11 and 13 need two 50k-episode training runs (default and
//! half-width actor). Their checkpoints are kept under
//! `target/tmp/acceptance/` and reused when complete; delete that directory
//! to retrain. `JUMPLEG_ACCEPTANCE_EPISODES` shrinks the budget for smoke
//! runs (the learning criteria are then not meaningful).
//!
//! Criteria 1–7 and 12 are the property suite and always fail the test.
//! The scaled reproductions (8–11, 13) are reported line by line and fail
//! the test only with `JUMPLEG_STRICT_ACCEPTANCE=1`.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use jumpleg::ballistics::{apex, propagate_flight};
use jumpleg::harness::{self, EvalReport, JumpEnv};
use jumpleg::kinematics::{fk, ik, jacobian};
use jumpleg::nn::OutputActivation;
use jumpleg::planner::{action_to_liftoff, bezier_control_points, build_plan, eval_bezier, Action};
use jumpleg::reward::{activation, landing_reward, RewardConfig};
use jumpleg::sim::TerminationCause;
use jumpleg::td3::Td3Agent;
use jumpleg::{Config, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CHECKPOINT_STEP: u64 = 5_000;
const SEED: u64 = 0;
/// Scaled reproductions of learning results.
const REPRODUCTION: [u32; 5] = [8, 9, 10, 11, 13];

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    println!(
        "[{}] {:>2} {}: {}",
        if v.pass { "PASS" } else { "FAIL" },
        v.id,
        v.name,
        v.detail
    );
}

fn random_unit<R: Rng>(rng: &mut R) -> Vec<f64> {
    (0..5).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn bezier_boundaries() -> Verdict {
    let t0 = Instant::now();
    let env = JumpEnv::new(Config::default());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = Action::from_normalized(&random_unit(&mut rng), &env.cfg.action_bounds);
        let c_tg = harness::sample_target(&env.train_region, &mut rng);
        let lo = action_to_liftoff(&a, &env.c_0, &c_tg);
        let cp = bezier_control_points(&env.c_0, &lo, a.t_th);
        let (c0, _) = eval_bezier(&cp, a.t_th, 0.0).unwrap();
        let (c1, v1) = eval_bezier(&cp, a.t_th, a.t_th).unwrap();
        worst = worst
            .max((c0 - env.c_0).norm())
            .max((c1 - lo.c_lo).norm())
            .max((v1 - lo.cdot_lo).norm());
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 1,
        name: "Bezier boundary conditions",
        pass: worst <= 1e-9 && secs < 1.0,
        detail: format!("max error {worst:.2e} (tol 1e-9) over 1000 actions in {secs:.3} s (limit 1 s)"),
    }
}

fn ballistic_oracle() -> Verdict {
    let t0 = Instant::now();
    let g = 9.81;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let lo = common::random_liftoff(&mut rng);
        let (_, z) = apex(&lo, g);
        let (_, z_rk) = common::rk4_apex(&lo, g);
        worst = worst.max((z - z_rk).abs());
        let dir = lo.cdot_lo.xy().normalize();
        let d = rng.gen_range(0.05..0.8);
        let c_tg = lo.c_lo + Vec3::new(dir.x * d, dir.y * d, 0.0);
        let f = propagate_flight(&lo, &c_tg, g).unwrap();
        let (p, _) = common::rk4_state(&lo, f.t_fl, g, 1000);
        worst = worst.max((f.c_land - p).norm());
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 2,
        name: "ballistic closed form vs RK4",
        pass: worst <= 1e-6 && secs < 1.0,
        detail: format!("max error {worst:.2e} m (tol 1e-6) over 100 lift-off states in {secs:.3} s (limit 1 s)"),
    }
}

fn kinematics_round_trip() -> Verdict {
    let t0 = Instant::now();
    let m = Config::default().robot;
    let q0 = Vec3::from(m.q0);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut ik_err = 0.0f64;
    for _ in 0..1000 {
        let dir = Vec3::new(rng.gen_range(-0.7..0.7), rng.gen_range(-0.7..0.7), -1.0).normalize();
        let p = dir * rng.gen_range(0.05..0.31);
        let sol = ik(&m, &p, &q0).unwrap();
        ik_err = ik_err.max((fk(&m, &sol.q) - p).norm());
    }
    let mut jac_err = 0.0f64;
    let h = 1e-7;
    for _ in 0..1000 {
        let q = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..1.0), rng.gen_range(0.1..2.4));
        let j = jacobian(&m, &q);
        for k in 0..3 {
            let mut dq = Vec3::zeros();
            dq[k] = h;
            let col = (fk(&m, &(q + dq)) - fk(&m, &(q - dq))) / (2.0 * h);
            jac_err = jac_err.max((col - j.column(k)).abs().max());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 3,
        name: "kinematics round trip",
        pass: ik_err <= 1e-9 && jac_err <= 1e-6 && secs < 1.0,
        detail: format!(
            "fk(ik(p)) error {ik_err:.2e} (tol 1e-9), Jacobian vs finite differences {jac_err:.2e} (tol 1e-6), {secs:.3} s (limit 1 s)"
        ),
    }
}

fn gradient_checks() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = common::gradient_check(&[4, 8, 3], OutputActivation::Identity, 4, 0);
    for seed in 1..=20 {
        let mut sizes = vec![rng.gen_range(1..8)];
        sizes.extend((0..rng.gen_range(1..4)).map(|_| rng.gen_range(2..16)));
        sizes.push(rng.gen_range(1..6));
        let out = if rng.gen() { OutputActivation::Tanh } else { OutputActivation::Identity };
        worst = worst.max(common::gradient_check(&sizes, out, 3, seed));
    }
    let secs = t0.elapsed().as_secs_f64();
    Verdict {
        id: 4,
        name: "MLP gradient check",
        pass: worst <= 1e-4 && secs < 10.0,
        detail: format!("max relative error {worst:.2e} (tol 1e-4) over 21 networks in {secs:.3} s (limit 10 s)"),
    }
}

fn reward_properties() -> Verdict {
    let table = [
        ((5.0, 0.0, 10.0), 0.0),
        ((12.0, 0.0, 10.0), 2.0),
        ((-3.0, 0.0, 10.0), 3.0),
    ];
    let table_ok = table.iter().all(|((x, lo, hi), y)| activation(*x, *lo, *hi) == *y);

    let cfg = RewardConfig::default();
    let tg = Vec3::new(0.3, 0.2, 0.4);
    let max_ok = landing_reward(&tg, &tg, &cfg) == cfg.beta / cfg.eps;

    let env = JumpEnv::new(Config::default());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_total = f64::INFINITY;
    let test_region = env.test_region(1.2);
    for _ in 0..2000 {
        let c_tg = harness::sample_target(&test_region, &mut rng);
        let res = env.jump(&random_unit(&mut rng), &c_tg);
        min_total = min_total.min(res.reward.total);
    }
    Verdict {
        id: 5,
        name: "reward properties",
        pass: table_ok && max_ok && min_total >= 0.0,
        detail: format!(
            "activation table exact: {table_ok}; landing reward at zero distance = beta/eps: {max_ok}; min total over 2000 random jumps {min_total:.3e} (must be >= 0)"
        ),
    }
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        harness::train(Config::default(), 100, &out, 17).unwrap();
        std::fs::read(out.join(harness::LOG_FILE)).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    Verdict {
        id: 6,
        name: "seeded training determinism",
        pass: a == b,
        detail: format!("two 100-episode logs ({} bytes) identical: {}", a.len(), a == b),
    }
}

fn bandit() -> Verdict {
    let results: Vec<_> = (0..3).map(|s| common::bandit(s, 5000, 0.1)).collect();
    let pass = results.iter().all(|(hit, _)| hit.is_some());
    let detail = results
        .iter()
        .enumerate()
        .map(|(s, (hit, d))| match hit {
            Some(step) => format!("seed {s}: within 0.1 at step {step}"),
            None => format!("seed {s}: distance {d:.3} after 5000 steps"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    Verdict {
        id: 7,
        name: "TD3 bandit oracle",
        pass,
        detail,
    }
}

fn latency() -> Verdict {
    let cfg = Config::default();
    let env = JumpEnv::new(cfg.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let agent = Td3Agent::new(harness::architecture(&cfg), cfg.train.td3.clone(), &mut rng);
    let grid = harness::build_test_grid(&env.test_region(1.2));
    let t0 = Instant::now();
    let mut planned = 0;
    for c_tg in &grid {
        let u = agent.act(&env.state(c_tg));
        let a = Action::from_normalized(&u, &cfg.action_bounds);
        if build_plan(&cfg.robot, &cfg.sim, &a, &env.c_0, c_tg).is_ok() {
            planned += 1;
        }
    }
    let ms = t0.elapsed().as_secs_f64() * 1e3 / grid.len() as f64;
    Verdict {
        id: 12,
        name: "inference latency",
        pass: ms <= 5.0,
        detail: format!("{ms:.3} ms per target (actor forward + thrust plan, {planned}/726 planned; limit 5 ms)"),
    }
}

/// Training artifacts of one configuration, produced on demand.
struct Run {
    dir: PathBuf,
    cfg: Config,
}

fn episode_budget() -> u64 {
    std::env::var("JUMPLEG_ACCEPTANCE_EPISODES")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(50_000)
}

fn ensure_trained(name: &str, cfg: Config, episodes: u64) -> Run {
    let base = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let dir = if episodes == 50_000 {
        base.join(format!("{name}_seed{SEED}"))
    } else {
        base.join(format!("{name}_seed{SEED}_ep{episodes}"))
    };
    let last = harness::checkpoint_path(&dir, episodes);
    if last.exists() {
        println!("# {name}: reusing checkpoints in {}", dir.display());
    } else {
        println!("# {name}: training {episodes} episodes into {}", dir.display());
        let t0 = Instant::now();
        harness::train(cfg.clone(), episodes, &dir, SEED).unwrap();
        println!("# {name}: trained in {:.0} s", t0.elapsed().as_secs_f64());
    }
    Run { dir, cfg }
}

impl Run {
    fn eval(&self, episode: u64) -> EvalReport {
        let path = harness::checkpoint_path(&self.dir, episode);
        let env = JumpEnv::new(self.cfg.clone());
        let agent = Td3Agent::load_checkpoint_expecting(&path, &harness::architecture(&self.cfg)).unwrap();
        let grid = harness::build_test_grid(&env.test_region(self.cfg.train.region.test_scale));
        harness::evaluate(&agent, &env, &grid).unwrap()
    }
}

fn checkpoints(episodes: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (1..=episodes / CHECKPOINT_STEP).map(|k| k * CHECKPOINT_STEP).collect();
    if v.last() != Some(&episodes) {
        v.push(episodes);
    }
    v
}

fn learning_criteria(verdicts: &mut Vec<Verdict>) {
    let episodes = episode_budget();
    let default = ensure_trained("default", Config::default(), episodes);
    let mut half_cfg = Config::default();
    half_cfg.train.actor_hidden = vec![128, 256, 128];
    let half = ensure_trained("half_width", half_cfg, episodes);

    let eps = checkpoints(episodes);
    let reports: Vec<EvalReport> = eps.iter().map(|&e| default.eval(e)).collect();
    for (e, r) in eps.iter().zip(&reports) {
        println!(
            "# default @ {e:>6}: front {:6.2}%  back {:6.2}%  feasible {:3}  constraint-free {:.3}",
            r.mean_rpe_front,
            r.mean_rpe_back,
            r.feasible_count,
            r.constraint_free_fraction()
        );
    }
    let last = reports.last().unwrap();
    let early_ep = 10_000.min(episodes);
    let early = &reports[eps.iter().position(|&e| e >= early_ep).unwrap()];

    let fronts: Vec<f64> = reports.iter().map(|r| r.mean_rpe_front).collect();
    let pairs = fronts.len().saturating_sub(1);
    let non_increasing = fronts.windows(2).filter(|w| w[1] <= w[0]).count();
    let frac = if pairs == 0 { 0.0 } else { non_increasing as f64 / pairs as f64 };
    verdicts.push(Verdict {
        id: 8,
        name: "learning-curve shape",
        pass: frac >= 0.8 && last.mean_rpe_front <= 25.0,
        detail: format!(
            "front RPE non-increasing in {non_increasing}/{pairs} checkpoint pairs ({:.0}%, need >= 80%); final front RPE {:.2}% (need <= 25%)",
            frac * 100.0,
            last.mean_rpe_front
        ),
    });

    verdicts.push(Verdict {
        id: 9,
        name: "feasibility-region growth",
        pass: last.feasible_count > early.feasible_count,
        detail: format!(
            "feasible targets (RPE <= 10%): {} at {early_ep} episodes, {} at {episodes} (need strict growth)",
            early.feasible_count, last.feasible_count
        ),
    });

    let executed: Vec<_> = early
        .points
        .iter()
        .filter(|p| p.cause != TerminationCause::InfeasibleAction)
        .collect();
    let clean = executed.iter().filter(|p| p.path_cost == 0.0).count();
    let clean_frac = clean as f64 / executed.len().max(1) as f64;
    verdicts.push(Verdict {
        id: 10,
        name: "constraint satisfaction",
        pass: !executed.is_empty() && clean_frac >= 0.9,
        detail: format!(
            "{clean}/{} executed evaluation jumps at {early_ep} episodes have zero path cost ({:.1}%, need >= 90%); {} of 726 rejected before thrust",
            executed.len(),
            clean_frac * 100.0,
            726 - executed.len()
        ),
    });

    let env = JumpEnv::new(Config::default());
    let inside = last.mean_rpe_where(&env.train_region, true);
    let outside = last.mean_rpe_where(&env.train_region, false);
    verdicts.push(Verdict {
        id: 11,
        name: "generalization",
        pass: outside <= 2.0 * inside,
        detail: format!(
            "mean RPE outside training cylinder {outside:.2}% vs inside {inside:.2}% (ratio {:.2}, need <= 2)",
            outside / inside
        ),
    });

    let half_last = half.eval(episodes);
    let gap = (half_last.mean_rpe_front - last.mean_rpe_front).abs();
    verdicts.push(Verdict {
        id: 13,
        name: "half-width actor",
        pass: gap <= 10.0,
        detail: format!(
            "final front RPE {:.2}% (128-256-128) vs {:.2}% (256-512-256), gap {gap:.2} pp (need <= 10)",
            half_last.mean_rpe_front, last.mean_rpe_front
        ),
    });
}

#[test]
fn acceptance() {
    let mut verdicts = vec![
        bezier_boundaries(),
        ballistic_oracle(),
        kinematics_round_trip(),
        gradient_checks(),
        reward_properties(),
        determinism(),
        bandit(),
        latency(),
    ];
    learning_criteria(&mut verdicts);
    verdicts.sort_by_key(|v| v.id);
    println!();
    for v in &verdicts {
        report(v);
    }
    let strict = std::env::var("JUMPLEG_STRICT_ACCEPTANCE").is_ok_and(|v| v == "1");
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    let fatal: Vec<u32> = failed
        .iter()
        .copied()
        .filter(|id| strict || !REPRODUCTION.contains(id))
        .collect();
    let passed = verdicts.len() - failed.len();
    println!("\n{passed}/{} criteria passed; failed: {failed:?}", verdicts.len());
    assert!(fatal.is_empty(), "failed criteria: {fatal:?}");
}

