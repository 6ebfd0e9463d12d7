//! Acceptance suite: nine verifiable criteria covering oracle
//! equivalence, gradient correctness, conservation, the reward ablation
//! identity, training improvement, the paired peak-shaving effect, the
//! benchmark comparison arithmetic, bitwise determinism, and the
//! terminal-storage penalty. Each test prints one pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).

mod common;

use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{oracle_step, rel_err, trained, variant_config, Variant};
use heatgrid::config::SystemConfig;
use heatgrid::device::StorageParams;
use heatgrid::env::{apply_action, ActionKw, Env, EnvState, RewardWeights};
use heatgrid::eval::{compare, evaluate, percent_reduction};
use heatgrid::nn::gradient_check_suite;
use heatgrid::scenario::{perturb, Scenario, UncertaintyTier};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Random but valid (config, weights, scenario, state, prev, action)
/// triples shared by criteria 1 and 4.
struct TripleGen {
    rng: ChaCha8Rng,
}

struct Triple {
    cfg: SystemConfig,
    weights: RewardWeights,
    scenario: Scenario,
    state: EnvState,
    prev_grid: Option<f64>,
    raw: ActionKw,
}

impl TripleGen {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    fn storage(&mut self) -> StorageParams {
        let min = self.rng.random_range(0.0..100.0);
        let max = min + self.rng.random_range(100.0..2000.0);
        StorageParams {
            hsd_min_kwh: min,
            hsd_max_kwh: max,
            hsd_init_kwh: self.rng.random_range(min..max),
        }
    }

    fn next(&mut self) -> Triple {
        let mut cfg = SystemConfig::default();
        cfg.heat_pump_low.cop = self.rng.random_range(1.0..4.0);
        cfg.heat_pump_low.p_max_kw = self.rng.random_range(50.0..500.0);
        cfg.heat_pump_high.cop = self.rng.random_range(1.0..4.0);
        cfg.heat_pump_high.p_max_kw = self.rng.random_range(50.0..500.0);
        cfg.compressor.eta_cp = self.rng.random_range(0.1..1.0);
        cfg.compressor.p_max_kw = self.rng.random_range(50.0..500.0);
        cfg.water_tank = self.storage();
        cfg.steam_accumulator = self.storage();
        cfg.grid.capacity_kw = if self.rng.random::<bool>() {
            f64::INFINITY
        } else {
            self.rng.random_range(100.0..1500.0)
        };
        let weights = RewardWeights {
            k1: self.rng.random_range(0.0..0.5),
            k2: self.rng.random_range(0.0..0.2),
            k3: self.rng.random_range(0.0..0.2),
            l1: self.rng.random_range(0.0..2.0),
            l2: self.rng.random_range(0.0..2.0),
            l3: self.rng.random_range(0.0..2.0),
            l4: self.rng.random_range(0.0..2.0),
            l5: self.rng.random_range(0.1..2.0),
        };
        let horizon = cfg.horizon;
        let series = |rng: &mut ChaCha8Rng, hi: f64| -> Vec<f64> {
            (0..horizon).map(|_| rng.random_range(0.0..hi)).collect()
        };
        let buy: Vec<f64> = series(&mut self.rng, 2.0);
        let sell: Vec<f64> = buy
            .iter()
            .map(|b| b * self.rng.random_range(0.0..1.0))
            .collect();
        let scenario = Scenario {
            electric_load_kw: series(&mut self.rng, 1200.0),
            heat_load_kw: series(&mut self.rng, 1500.0),
            irradiance_w_m2: series(&mut self.rng, 1000.0),
            wind_speed_ms: series(&mut self.rng, 28.0),
            buy_price_per_kwh: buy,
            sell_price_per_kwh: sell,
            seed: 0,
            tier: UncertaintyTier { lo: 0.0, hi: 0.3 },
        };
        let t = self.rng.random_range(0..horizon);
        let state = EnvState {
            t,
            e_load_kw: self.rng.random_range(0.0..1200.0),
            h_load_kw: self.rng.random_range(0.0..1500.0),
            pv_kw: self.rng.random_range(0.0..600.0),
            wind_kw: self.rng.random_range(0.0..600.0),
            hsd_l_kwh: self
                .rng
                .random_range(cfg.water_tank.hsd_min_kwh..=cfg.water_tank.hsd_max_kwh),
            hsd_h_kwh: self.rng.random_range(
                cfg.steam_accumulator.hsd_min_kwh..=cfg.steam_accumulator.hsd_max_kwh,
            ),
        };
        let prev_grid = if self.rng.random::<bool>() {
            Some(self.rng.random_range(-500.0..1500.0))
        } else {
            None
        };
        let raw = ActionKw {
            p_hp_l_kw: self.rng.random_range(-200.0..700.0),
            p_hp_h_kw: self.rng.random_range(-200.0..700.0),
            p_cp_kw: self.rng.random_range(-200.0..700.0),
        };
        Triple {
            cfg,
            weights,
            scenario,
            state,
            prev_grid,
            raw,
        }
    }
}

#[test]
fn criterion_1_environment_oracle_equivalence() {
    let started = Instant::now();
    let mut gen = TripleGen::new(11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let tr = gen.next();
        let out = apply_action(
            &tr.state,
            tr.raw,
            &tr.scenario,
            &tr.cfg,
            &tr.weights,
            tr.prev_grid,
        );
        let ora = oracle_step(
            &tr.cfg,
            &tr.weights,
            &tr.scenario,
            &tr.state,
            tr.prev_grid,
            tr.raw,
        );
        let b = &out.breakdown;
        for (got, want) in [
            (out.grid_kw, ora.grid_kw),
            (out.next_state.hsd_l_kwh, ora.hsd_l_next),
            (out.next_state.hsd_h_kwh, ora.hsd_h_next),
            (out.next_state.pv_kw, ora.next_pv_kw),
            (out.next_state.wind_kw, ora.next_wind_kw),
            (b.c1_step, ora.c1_step),
            (b.c2_terminal, ora.c2_terminal),
            (b.pen_e_ex, ora.pen_e_ex),
            (b.pen_e_loss, ora.pen_e_loss),
            (b.pen_h_ex, ora.pen_h_ex),
            (b.pen_h_loss, ora.pen_h_loss),
            (b.pen_delta_p, ora.pen_delta_p),
            (b.total, ora.total),
        ] {
            worst = worst.max(rel_err(got, want));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        "environment-oracle equivalence",
        worst <= 1e-9 && elapsed < 5.0,
        &format!("1000 triples, max rel err {worst:.2e}, {elapsed:.2}s"),
    );
}

#[test]
fn criterion_2_gradient_suite() {
    let started = Instant::now();
    let rep = gradient_check_suite(100, 12, false);
    let elapsed = started.elapsed().as_secs_f64();
    report(
        2,
        "gradient suite",
        rep.max_relative_error < 1e-4 && elapsed < 30.0,
        &format!(
            "{} nets, max rel err {:.2e}, {elapsed:.2}s",
            rep.nets_checked, rep.max_relative_error
        ),
    );
}

#[test]
fn criterion_3_conservation_and_balance() {
    let cfg = SystemConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0f64;
    for rollout_idx in 0..100u64 {
        let scenario = perturb(&cfg.profile, UncertaintyTier::training_band(), rollout_idx);
        let mut env = Env::new(&scenario, &cfg, cfg.weights);
        let mut state = env.reset().unwrap();
        for _ in 0..cfg.horizon {
            let raw = ActionKw {
                p_hp_l_kw: rng.random_range(-100.0..600.0),
                p_hp_h_kw: rng.random_range(-100.0..600.0),
                p_cp_kw: rng.random_range(-100.0..600.0),
            };
            let out = env.step(&state, raw);
            // electrical balance
            let lhs = state.pv_kw + state.wind_kw + out.grid_kw;
            let rhs = out.applied.p_hp_l_kw
                + out.applied.p_hp_h_kw
                + out.applied.p_cp_kw
                + state.e_load_kw;
            worst = worst.max((lhs - rhs).abs());
            // per-device heat conservation
            let f = &out.flows;
            let tank = (f.q_l_in - f.q_l_out)
                - ((out.next_state.hsd_l_kwh - state.hsd_l_kwh) + f.overflow_l - f.shortfall_l);
            let acc = (f.q_h_in - f.q_h_out)
                - ((out.next_state.hsd_h_kwh - state.hsd_h_kwh) + f.overflow_h - f.shortfall_h);
            worst = worst.max(tank.abs()).max(acc.abs());
            state = out.next_state;
        }
    }
    report(
        3,
        "conservation and balance",
        worst <= 1e-9,
        &format!("100 rollouts x 24 steps, worst discrepancy {worst:.2e} kW"),
    );
}

#[test]
fn criterion_4_reward_ablation_identity() {
    let mut gen = TripleGen::new(14);
    let mut checked = 0usize;
    for _ in 0..10_000 {
        let tr = gen.next();
        let pvtd3 = apply_action(
            &tr.state,
            tr.raw,
            &tr.scenario,
            &tr.cfg,
            &tr.weights,
            tr.prev_grid,
        );
        let td3_weights = tr.weights.ablate_peak_penalty();
        let td3 = apply_action(
            &tr.state,
            tr.raw,
            &tr.scenario,
            &tr.cfg,
            &td3_weights,
            tr.prev_grid,
        );
        // identical but for the fluctuation term, bit for bit:
        // pvtd3 == td3 - l5*delta_p in the engine's evaluation order
        assert_eq!(
            pvtd3.reward.to_bits(),
            (td3.reward - pvtd3.breakdown.pen_delta_p).to_bits()
        );
        assert_eq!(td3.breakdown.pen_delta_p, 0.0);
        let (a, b) = (&pvtd3.breakdown, &td3.breakdown);
        for (x, y) in [
            (a.c1_step, b.c1_step),
            (a.c2_terminal, b.c2_terminal),
            (a.pen_e_ex, b.pen_e_ex),
            (a.pen_e_loss, b.pen_e_loss),
            (a.pen_h_ex, b.pen_h_ex),
            (a.pen_h_loss, b.pen_h_loss),
        ] {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(pvtd3.grid_kw.to_bits(), td3.grid_kw.to_bits());
        checked += 1;
    }
    report(
        4,
        "reward-ablation identity",
        checked == 10_000,
        &format!("{checked} random steps, exact to the bit"),
    );
}

#[test]
fn criterion_5_training_improvement() {
    let seeds = [1u64, 2, 3, 4, 5];
    let mut passes = 0;
    let mut details = Vec::new();
    for &seed in &seeds {
        let started = Instant::now();
        let run = trained(Variant::Pvtd3, seed);
        let train_secs = started.elapsed().as_secs_f64();
        assert!(
            train_secs < 600.0,
            "seed {seed} exceeded the 10-minute budget: {train_secs:.0}s"
        );
        let rewards: Vec<f64> = run.log.episodes.iter().map(|e| e.cum_reward).collect();
        let first10 = rewards[..10].iter().sum::<f64>() / 10.0;
        let last10 = rewards[rewards.len() - 10..].iter().sum::<f64>() / 10.0;
        // close at least half the gap between the early mean and zero
        let ok = last10 - first10 >= 0.5 * first10.abs();
        if ok {
            passes += 1;
        }
        details.push(format!(
            "seed {seed}: {first10:.0} -> {last10:.0} ({})",
            if ok { "ok" } else { "short" }
        ));
    }
    report(
        5,
        "training improvement",
        passes >= 4,
        &format!("{passes}/5 seeds improved; {}", details.join("; ")),
    );
}

#[test]
fn criterion_6_directional_peak_shaving_effect() {
    let cfg = SystemConfig::default();
    let tiers = UncertaintyTier::evaluation_tiers();
    let mut pair_passes = 0;
    let mut details = Vec::new();
    for seed in [1u64, 2, 3] {
        let pvtd3 = trained(Variant::Pvtd3, seed);
        let td3 = trained(Variant::Td3, seed);
        let report_pv = evaluate(&pvtd3.agent, &cfg, &tiers, 10, 100).unwrap();
        let report_td = evaluate(&td3.agent, &cfg, &tiers, 10, 100).unwrap();
        let comparison = compare(&report_td, &report_pv).unwrap();
        let reductions = &comparison.metric("delta_p").unwrap().reduction_pct;
        let tiers_ok = reductions.iter().filter(|r| **r >= 5.0).count();
        if tiers_ok >= 2 {
            pair_passes += 1;
        }
        details.push(format!(
            "seed {seed}: dP reduction {}",
            reductions
                .iter()
                .map(|r| format!("{r:.1}%"))
                .collect::<Vec<_>>()
                .join("/")
        ));
    }
    report(
        6,
        "directional peak-shaving effect",
        pair_passes >= 2,
        &format!("{pair_passes}/3 seed pairs passed; {}", details.join("; ")),
    );
}

#[test]
fn criterion_7_benchmark_comparison_arithmetic() {
    use heatgrid::eval::{
        BENCHMARK_PVTD3_C_S, BENCHMARK_PVTD3_DELTA_P, BENCHMARK_TD3_C_S, BENCHMARK_TD3_DELTA_P,
    };
    // the benchmark per-tier values fed through the comparison CSVs
    // and the compare command itself
    let tier_bounds = [(0.0, 0.1), (0.1, 0.2), (0.2, 0.3)];
    let fixture = |c_s: &[f64; 3], delta_p: &[f64; 3]| -> String {
        let mut text = String::from(
            "tier_lo,tier_hi,seed,c_s,delta_p,hsd_l_t,hsd_h_t,abs_dev_l,abs_dev_h\n",
        );
        for (i, (lo, hi)) in tier_bounds.iter().enumerate() {
            text.push_str(&format!(
                "{lo},{hi},{i},{},{},0,0,0,0\n",
                c_s[i], delta_p[i]
            ));
        }
        text
    };
    let dir = std::env::temp_dir().join(format!("hg_accept7_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a_path = dir.join("td3.csv");
    let b_path = dir.join("pvtd3.csv");
    let out_path = dir.join("comparison.csv");
    std::fs::write(&a_path, fixture(&BENCHMARK_TD3_C_S, &BENCHMARK_TD3_DELTA_P)).unwrap();
    std::fs::write(&b_path, fixture(&BENCHMARK_PVTD3_C_S, &BENCHMARK_PVTD3_DELTA_P)).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_heatgrid"))
        .args(["compare", "--a"])
        .arg(&a_path)
        .arg("--b")
        .arg(&b_path)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&out_path).unwrap();
    let row = |metric: &str| -> Vec<f64> {
        let line = csv
            .lines()
            .find(|l| l.starts_with(&format!("{metric},")))
            .unwrap();
        let fields: Vec<f64> = line
            .split(',')
            .skip(1)
            .map(|f| f.parse().unwrap())
            .collect();
        fields[6..9].to_vec()
    };
    let cost_reductions = row("c_s");
    let dp_reductions = row("delta_p");
    std::fs::remove_dir_all(&dir).ok();

    // headline cost reductions; the benchmark table itself yields 13.57
    // in the third tier where the headline says 13.59
    let stated = [6.93, 12.68, 13.59];
    let mut ok = true;
    for (r, s) in cost_reductions.iter().zip(stated) {
        ok &= (r - s).abs() <= 0.02;
    }
    let two_dp: Vec<f64> = cost_reductions.iter().map(|r| (r * 100.0).round() / 100.0).collect();
    ok &= two_dp == vec![6.93, 12.68, 13.57];

    // fluctuation reductions: 12.80/12.42/14.21 per tier, mean ~12.8
    let dp_two_dp: Vec<f64> = dp_reductions.iter().map(|r| (r * 100.0).round() / 100.0).collect();
    ok &= dp_two_dp == vec![12.80, 12.42, 14.21];
    let dp_mean = dp_reductions.iter().sum::<f64>() / 3.0;
    ok &= (dp_mean - 12.8).abs() < 0.5;

    // cross-check against the library formula directly
    for i in 0..3 {
        assert!(
            (percent_reduction(BENCHMARK_TD3_C_S[i], BENCHMARK_PVTD3_C_S[i]) - cost_reductions[i]).abs()
                < 1e-9
        );
    }
    report(
        7,
        "benchmark comparison arithmetic",
        ok,
        &format!(
            "cost reductions {two_dp:?} (stated {stated:?}), dP reductions {dp_two_dp:?}, mean {dp_mean:.2}%"
        ),
    );
}

#[test]
fn criterion_8_bitwise_determinism() {
    let bin = env!("CARGO_BIN_EXE_heatgrid");
    let base = std::env::temp_dir().join(format!("hg_accept8_{}", std::process::id()));
    std::fs::create_dir_all(&base).unwrap();
    // a reduced-episode configuration keeps the double run quick while
    // exercising the full train + evaluate pipeline
    let mut cfg = SystemConfig::default();
    cfg.td3.episodes = 40;
    cfg.td3.warmup_steps = 200;
    let cfg_path = base.join("config.toml");
    std::fs::write(&cfg_path, cfg.to_toml_string()).unwrap();

    let run = |tag: &str| -> std::path::PathBuf {
        let out_dir = base.join(tag);
        let out = Command::new(bin)
            .args(["train", "--config"])
            .arg(&cfg_path)
            .args(["--seed", "7", "--out"])
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        let eval_out = base.join(format!("{tag}_eval"));
        let out = Command::new(bin)
            .args(["evaluate", "--checkpoint"])
            .arg(out_dir.join("checkpoint.txt"))
            .arg("--config")
            .arg(&cfg_path)
            .args(["--seed", "900", "--per-tier", "4", "--out"])
            .arg(&eval_out)
            .output()
            .unwrap();
        assert!(out.status.success());
        out_dir
    };
    let run1 = run("run1");
    let run2 = run("run2");

    let mut compared = Vec::new();
    let mut identical = true;
    for file in ["checkpoint.txt", "checkpoint_ep25.txt", "trainlog.csv", "manifest.txt"] {
        let a = std::fs::read(run1.join(file)).unwrap();
        let b = std::fs::read(run2.join(file)).unwrap();
        identical &= a == b;
        compared.push(file.to_string());
    }
    for file in ["eval.csv", "eval_means.csv"] {
        let a = std::fs::read(base.join("run1_eval").join(file)).unwrap();
        let b = std::fs::read(base.join("run2_eval").join(file)).unwrap();
        identical &= a == b;
        compared.push(file.to_string());
    }
    std::fs::remove_dir_all(&base).ok();
    report(
        8,
        "bitwise determinism",
        identical,
        &format!("byte-identical across two runs: {}", compared.join(", ")),
    );
}

#[test]
fn criterion_9_terminal_storage_penalty_efficacy() {
    let tiers = UncertaintyTier::evaluation_tiers();
    let with_penalty = trained(Variant::Pvtd3, 1);
    let ablated = trained(Variant::NoTerminalCost, 1);
    let cfg_pen = variant_config(Variant::Pvtd3);
    let cfg_abl = variant_config(Variant::NoTerminalCost);
    let rep_pen = evaluate(&with_penalty.agent, &cfg_pen, &tiers, 10, 100).unwrap();
    let rep_abl = evaluate(&ablated.agent, &cfg_abl, &tiers, 10, 100).unwrap();
    let mean_dev = |rep: &heatgrid::eval::EvalReport| -> (f64, f64) {
        let n = rep.rows.len() as f64;
        (
            rep.rows.iter().map(|r| r.abs_dev_l).sum::<f64>() / n,
            rep.rows.iter().map(|r| r.abs_dev_h).sum::<f64>() / n,
        )
    };
    let (pen_l, pen_h) = mean_dev(&rep_pen);
    let (abl_l, abl_h) = mean_dev(&rep_abl);
    report(
        9,
        "terminal-storage penalty efficacy",
        pen_l < abl_l && pen_h < abl_h,
        &format!(
            "tank |dev| {pen_l:.1} vs {abl_l:.1} kWh ablated; accumulator {pen_h:.1} vs {abl_h:.1} kWh"
        ),
    );
}
