//! Command-line entry point: train, evaluate, compare, simulate and
//! gradcheck.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input mismatch,
//! 4 numerical failure. Commands never leave partial output files behind
//! on failure. `HEATGRID_OUT` overrides directory-valued `--out` flags.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heatgrid::config::SystemConfig;
use heatgrid::env::{self, ActionKw, Env};
use heatgrid::error::{Error, Result};
use heatgrid::eval::{compare, evaluate, EvalReport};
use heatgrid::nn::gradient_check_suite;
use heatgrid::scenario::{perturb, UncertaintyTier};
use heatgrid::td3::Td3Agent;
use heatgrid::train::{rollout, train_with_snapshots};

#[derive(Parser)]
#[command(
    name = "heatgrid",
    about = "Electricity-heat cooperative system simulator with a TD3/PVTD3 dispatch scheduler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write its checkpoint and training log.
    Train {
        /// System configuration file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Master seed; every stochastic stream derives from it.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (overridden by HEATGRID_OUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Force l5 = 0: the plain TD3 baseline without the
        /// grid-fluctuation penalty.
        #[arg(long)]
        ablate_peak_penalty: bool,
        /// Force k2 = k3 = 0: no terminal storage-deviation cost.
        #[arg(long)]
        ablate_terminal_cost: bool,
    },
    /// Evaluate a checkpoint over seeded scenario tiers.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Base seed of the scenario set.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scenarios per uncertainty tier.
        #[arg(long, default_value_t = 10)]
        per_tier: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two evaluation reports built on the same scenario set.
    Compare {
        /// Baseline report CSV (e.g. the TD3 run).
        #[arg(long)]
        a: PathBuf,
        /// Comparison report CSV (e.g. the PVTD3 run).
        #[arg(long)]
        b: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll a single noiseless trajectory and write its CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `midbox`, `zero`, or a checkpoint path.
        #[arg(long)]
        policy: String,
        /// Uncertainty band `LO:HI` (e.g. `0:0.1`); omit for the
        /// unperturbed typical day.
        #[arg(long)]
        tier: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Also export the scenario series to this CSV path.
        #[arg(long)]
        scenario_out: Option<PathBuf>,
    },
    /// Check analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Deliberately corrupt one gradient; the check must then fail.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Tracks files written by a command so a failure removes them all.
struct OutputGuard {
    created: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    fn new() -> Self {
        Self {
            created: Vec::new(),
            committed: false,
        }
    }

    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, contents)?;
        self.created.push(path.to_path_buf());
        Ok(())
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if !self.committed {
            for path in &self.created {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

/// Directory-valued `--out`, with the HEATGRID_OUT override.
fn resolve_out_dir(flag: Option<PathBuf>) -> Result<PathBuf> {
    match std::env::var_os("HEATGRID_OUT") {
        Some(dir) => Ok(PathBuf::from(dir)),
        None => flag.ok_or_else(|| {
            Error::config("--out", "missing output directory (or set HEATGRID_OUT)")
        }),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            config,
            seed,
            out,
            ablate_peak_penalty,
            ablate_terminal_cost,
        } => cmd_train(&config, seed, out, ablate_peak_penalty, ablate_terminal_cost),
        Command::Evaluate {
            checkpoint,
            config,
            seed,
            per_tier,
            out,
        } => cmd_evaluate(&checkpoint, &config, seed, per_tier, out),
        Command::Compare { a, b, out } => cmd_compare(&a, &b, &out),
        Command::Simulate {
            config,
            policy,
            tier,
            seed,
            out,
            scenario_out,
        } => cmd_simulate(&config, &policy, tier.as_deref(), seed, &out, scenario_out.as_deref()),
        Command::Gradcheck { seed, inject_fault } => cmd_gradcheck(seed, inject_fault),
    }
}

fn cmd_train(
    config_path: &Path,
    seed: u64,
    out: Option<PathBuf>,
    ablate_peak_penalty: bool,
    ablate_terminal_cost: bool,
) -> Result<()> {
    let mut config = SystemConfig::load(config_path)?;
    if ablate_peak_penalty {
        config.weights = config.weights.ablate_peak_penalty();
    }
    if ablate_terminal_cost {
        config.weights.k2 = 0.0;
        config.weights.k3 = 0.0;
    }
    let out_dir = resolve_out_dir(out)?;
    let mut guard = OutputGuard::new();

    let mut snapshots: Vec<(usize, String)> = Vec::new();
    let output = train_with_snapshots(&config, seed, |episode, agent| {
        snapshots.push((episode, agent.write_checkpoint(&config, seed, episode)));
        Ok(())
    })?;

    // the completion snapshot is written once, as checkpoint.txt
    for (episode, text) in snapshots.iter().filter(|(e, _)| *e != config.td3.episodes) {
        guard.write(&out_dir.join(format!("checkpoint_ep{episode}.txt")), text)?;
    }
    let final_text = output
        .agent
        .write_checkpoint(&config, seed, config.td3.episodes);
    guard.write(&out_dir.join("checkpoint.txt"), &final_text)?;
    guard.write(&out_dir.join("trainlog.csv"), &output.log.to_csv())?;
    guard.write(&out_dir.join("timings.csv"), &output.log.timings_csv())?;
    let manifest = format!(
        "heatgrid train manifest\nmaster_seed {seed}\nepisodes {}\nl5 {}\nk2 {}\nk3 {}\n",
        config.td3.episodes, config.weights.l5, config.weights.k2, config.weights.k3
    );
    guard.write(&out_dir.join("manifest.txt"), &manifest)?;
    guard.commit();
    println!(
        "trained {} episodes (seed {seed}) -> {}",
        config.td3.episodes,
        out_dir.display()
    );
    Ok(())
}

fn cmd_evaluate(
    checkpoint_path: &Path,
    config_path: &Path,
    seed: u64,
    per_tier: usize,
    out: Option<PathBuf>,
) -> Result<()> {
    let config = SystemConfig::load(config_path)?;
    let checkpoint = load_checkpoint(checkpoint_path)?;
    check_compatible(&checkpoint.agent, &config)?;
    let out_dir = resolve_out_dir(out)?;
    let tiers = UncertaintyTier::evaluation_tiers();
    let report = evaluate(&checkpoint.agent, &config, &tiers, per_tier, seed)?;
    let mut guard = OutputGuard::new();
    guard.write(&out_dir.join("eval.csv"), &report.to_csv())?;
    guard.write(&out_dir.join("eval_means.csv"), &report.means_csv())?;
    guard.commit();
    println!(
        "evaluated {} scenarios (base seed {seed}) -> {}",
        report.rows.len(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_compare(a_path: &Path, b_path: &Path, out: &Path) -> Result<()> {
    let read = |path: &Path| -> Result<EvalReport> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
            path: path.to_path_buf(),
            source,
        })?;
        EvalReport::from_csv(&text)
    };
    let a = read(a_path)?;
    let b = read(b_path)?;
    let comparison = compare(&a, &b)?;
    let mut guard = OutputGuard::new();
    guard.write(out, &comparison.to_csv())?;
    guard.commit();
    for m in &comparison.metrics {
        let pct: Vec<String> = m.reduction_pct.iter().map(|p| format!("{p:.2}%")).collect();
        println!("{}: reduction per tier {}", m.metric, pct.join(" "));
    }
    Ok(())
}

fn cmd_simulate(
    config_path: &Path,
    policy: &str,
    tier: Option<&str>,
    seed: u64,
    out: &Path,
    scenario_out: Option<&Path>,
) -> Result<()> {
    let config = SystemConfig::load(config_path)?;
    let tier = match tier {
        None => None,
        Some(spec) => Some(parse_tier(spec)?),
    };
    let scenario = match tier {
        Some(t) => perturb(&config.profile, t, seed),
        None => perturb_identity(&config),
    };

    let outcomes = match policy {
        "midbox" | "zero" => {
            let action = if policy == "midbox" {
                ActionKw::midbox(&config)
            } else {
                ActionKw::zero(&config)
            };
            let mut environment = Env::new(&scenario, &config, config.weights);
            let mut state = environment.reset()?;
            let mut outcomes = Vec::with_capacity(config.horizon);
            for _ in 0..config.horizon {
                let o = environment.step(&state, action);
                state = o.next_state;
                outcomes.push(o);
            }
            outcomes
        }
        path => {
            let checkpoint = load_checkpoint(Path::new(path))?;
            check_compatible(&checkpoint.agent, &config)?;
            rollout(&checkpoint.agent, &scenario, &config, config.weights, None)?.outcomes
        }
    };

    let mut guard = OutputGuard::new();
    guard.write(out, &env::trajectory_csv(&outcomes))?;
    if let Some(path) = scenario_out {
        guard.write(path, &scenario.to_csv())?;
    }
    guard.commit();
    let cost = env::episode_cost(&outcomes)?;
    println!(
        "simulated {} steps: c_s {:.3}, delta_p {:.3} -> {}",
        outcomes.len(),
        cost.c_s,
        cost.delta_p_total,
        out.display()
    );
    Ok(())
}

fn cmd_gradcheck(seed: u64, inject_fault: bool) -> Result<()> {
    let report = gradient_check_suite(100, seed, inject_fault);
    println!(
        "gradcheck: {} nets, max relative error {:.3e}",
        report.nets_checked, report.max_relative_error
    );
    if report.max_relative_error < 1e-4 {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "gradient check failed: max relative error {:.3e} >= 1e-4",
            report.max_relative_error
        )))
    }
}

fn load_checkpoint(path: &Path) -> Result<heatgrid::td3::AgentCheckpoint> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
        path: path.to_path_buf(),
        source,
    })?;
    Td3Agent::read_checkpoint(&text)
}

/// The checkpoint's networks must fit the evaluation config's state and
/// action spaces.
fn check_compatible(agent: &Td3Agent, _config: &SystemConfig) -> Result<()> {
    if agent.actor.input_dim() != env::STATE_DIM || agent.actor.output_dim() != env::ACTION_DIM {
        return Err(Error::InputMismatch(format!(
            "checkpoint actor has dimensions {:?}",
            agent.actor.layer_sizes
        )));
    }
    Ok(())
}

fn parse_tier(spec: &str) -> Result<UncertaintyTier> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| Error::config("--tier", "expected LO:HI, e.g. 0:0.1"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Error::config("--tier", "bad lower bound"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Error::config("--tier", "bad upper bound"))?;
    UncertaintyTier::new(lo, hi)
}

/// The unperturbed profile wrapped as a scenario.
fn perturb_identity(config: &SystemConfig) -> heatgrid::Scenario {
    heatgrid::Scenario {
        electric_load_kw: config.profile.electric_load_kw.clone(),
        heat_load_kw: config.profile.heat_load_kw.clone(),
        irradiance_w_m2: config.profile.irradiance_w_m2.clone(),
        wind_speed_ms: config.profile.wind_speed_ms.clone(),
        buy_price_per_kwh: config.profile.buy_price_per_kwh.clone(),
        sell_price_per_kwh: config.profile.sell_price_per_kwh.clone(),
        seed: 0,
        tier: UncertaintyTier { lo: 0.0, hi: 0.30 },
    }
}
