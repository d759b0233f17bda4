use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use jumpleg::config::load_config;
use jumpleg::harness;
use jumpleg::{Config, Vec3};

/// Train and evaluate the guided jumping agent.
#[derive(Parser, Debug)]
#[command(name = "jumpleg", version)]
struct Cli {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Train from scratch, writing checkpoints and train_log.csv to OUT.
    Train {
        #[arg(long)]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint instead of a fresh agent.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate one checkpoint on the test grid.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Test-region radius as a multiple of the training radius.
        #[arg(long)]
        grid_scale: Option<f64>,
    },
    /// Evaluate every checkpoint in a directory (RPE-versus-episodes curve).
    SweepEval {
        #[arg(long)]
        checkpoint_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        grid_scale: Option<f64>,
    },
    /// Run one noiseless jump and dump its trajectory.
    Replay {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Target CoM position `x,y,z` in metres.
        #[arg(long, value_parser = parse_target, allow_hyphen_values = true)]
        target: Vec3,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

fn parse_target(s: &str) -> Result<Vec3, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [x, y, z] if v.iter().all(|c| c.is_finite()) => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(format!("expected three finite numbers x,y,z, got {s:?}")),
    }
}

fn config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => load_config(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(Config::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = config(cli.config.as_deref())?;
    let scale = |s: Option<f64>| -> Result<f64> {
        let s = s.unwrap_or(cfg.train.region.test_scale);
        if !(s.is_finite() && s > 0.0) {
            bail!("--grid-scale must be > 0, got {s}");
        }
        Ok(s)
    };
    match cli.cmd {
        Cmd::Train {
            episodes,
            seed,
            out,
            resume,
        } => {
            let summary = match resume {
                Some(ckpt) => harness::Trainer::resume(cfg, &ckpt, seed)?.run(episodes, &out)?,
                None => harness::train(cfg, episodes, &out, seed)?,
            };
            println!(
                "trained to episode {}; {} checkpoints; log {}",
                summary.episodes,
                summary.checkpoints.len(),
                summary.log.display()
            );
        }
        Cmd::Eval {
            checkpoint,
            out,
            grid_scale,
        } => {
            let r = harness::evaluate_checkpoint(&cfg, &checkpoint, scale(grid_scale)?, Some(&out))?;
            println!(
                "episode {}: mean RPE front {:.2}% back {:.2}%, feasible {}/{}, inference {:.3} ms",
                r.episode_tag,
                r.mean_rpe_front,
                r.mean_rpe_back,
                r.feasible_count,
                r.points.len(),
                r.mean_inference_time * 1e3
            );
        }
        Cmd::SweepEval {
            checkpoint_dir,
            out,
            grid_scale,
        } => {
            let rows = harness::sweep_eval(&cfg, &checkpoint_dir, scale(grid_scale)?, &out)?;
            println!("evaluated {} checkpoints into {}", rows.len(), out.display());
        }
        Cmd::Replay {
            checkpoint,
            target,
            dump,
        } => {
            let (res, rpe) = harness::replay(&cfg, &checkpoint, &target, dump.as_deref())?;
            let a = &res.action;
            println!(
                "action t_th={:.4} r={:.4} theta={:.4} r_v={:.4} theta_v={:.4}",
                a.t_th, a.r, a.theta, a.r_v, a.theta_v
            );
            match res.outcome.c_touchdown {
                Some(c) => println!("{}: touchdown ({:.4}, {:.4}, {:.4}), RPE {rpe:.2}%", res.cause(), c.x, c.y, c.z),
                None => println!("{}: no touchdown", res.cause()),
            }
            println!("reward {:.4}", res.reward.total);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
