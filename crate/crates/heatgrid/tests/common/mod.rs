//! Shared test machinery: an independent straight-line step oracle and a
//! cache of trained agents reused across acceptance criteria.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use heatgrid::config::SystemConfig;
use heatgrid::env::{ActionKw, EnvState, RewardWeights};
use heatgrid::scenario::Scenario;
use heatgrid::train::{train, TrainOutput};

/// Everything one oracle evaluation produces, mirroring the engine's
/// step outputs field by field.
#[derive(Debug, Clone, Copy)]
pub struct OracleStep {
    pub grid_kw: f64,
    pub hsd_l_next: f64,
    pub hsd_h_next: f64,
    pub next_pv_kw: f64,
    pub next_wind_kw: f64,
    pub c1_step: f64,
    pub c2_terminal: f64,
    pub pen_e_ex: f64,
    pub pen_e_loss: f64,
    pub pen_h_ex: f64,
    pub pen_h_loss: f64,
    pub pen_delta_p: f64,
    pub total: f64,
}

/// Independent re-evaluation of one environment step, written directly
/// from the device equations and the reward definition, sharing no code
/// with the engine.
pub fn oracle_step(
    cfg: &SystemConfig,
    w: &RewardWeights,
    scenario: &Scenario,
    state: &EnvState,
    prev_grid_kw: Option<f64>,
    raw: ActionKw,
) -> OracleStep {
    let clamp = |x: f64, lo: f64, hi: f64| {
        if x < lo {
            lo
        } else if x > hi {
            hi
        } else {
            x
        }
    };
    // commanded powers inside their boxes
    let p1 = clamp(raw.p_hp_l_kw, cfg.heat_pump_low.p_min_kw, cfg.heat_pump_low.p_max_kw);
    let p2_cmd = clamp(raw.p_hp_h_kw, cfg.heat_pump_high.p_min_kw, cfg.heat_pump_high.p_max_kw);
    let p3 = clamp(raw.p_cp_kw, cfg.compressor.p_min_kw, cfg.compressor.p_max_kw);

    // heat pump heat production and tank-side derating
    let q_l_in = cfg.heat_pump_low.cop * p1;
    let source_need = (cfg.heat_pump_high.cop - 1.0) * p2_cmd;
    let tank_available = state.hsd_l_kwh + q_l_in - cfg.water_tank.hsd_min_kwh;
    let p2 = if source_need > tank_available && source_need > 0.0 {
        p2_cmd * (tank_available / source_need)
    } else {
        p2_cmd
    };
    let q_l_out = (cfg.heat_pump_high.cop - 1.0) * p2;
    let q_h_in = cfg.heat_pump_high.cop * p2;

    // compressor contribution and steam draw
    let compressor_heat = cfg.compressor.eta_cp * p3;
    let acc_available = f64::max(state.hsd_h_kwh + q_h_in - cfg.steam_accumulator.hsd_min_kwh, 0.0);
    let q_h_out = f64::min(f64::max(state.h_load_kw - compressor_heat, 0.0), acc_available);
    let delivered = compressor_heat + q_h_out;
    let p_loss_h = f64::max(state.h_load_kw - delivered, 0.0);
    let mut p_ex_h = f64::max(delivered - state.h_load_kw, 0.0);

    // storage balances with clamping
    let raw_l = state.hsd_l_kwh + q_l_in - q_l_out;
    let hsd_l_next = clamp(raw_l, cfg.water_tank.hsd_min_kwh, cfg.water_tank.hsd_max_kwh);
    p_ex_h += f64::max(raw_l - cfg.water_tank.hsd_max_kwh, 0.0);
    let raw_h = state.hsd_h_kwh + q_h_in - q_h_out;
    let hsd_h_next = clamp(
        raw_h,
        cfg.steam_accumulator.hsd_min_kwh,
        cfg.steam_accumulator.hsd_max_kwh,
    );
    p_ex_h += f64::max(raw_h - cfg.steam_accumulator.hsd_max_kwh, 0.0);

    // grid slack and electric deviations
    let grid_kw = p1 + p2 + p3 + state.e_load_kw - state.pv_kw - state.wind_kw;
    let p_ex_e = f64::max(-grid_kw, 0.0);
    let p_loss_e = f64::max(grid_kw - cfg.grid.capacity_kw, 0.0);

    // cost and reward terms
    let c1_step = if grid_kw >= 0.0 {
        w.k1 * f64::min(grid_kw, cfg.grid.capacity_kw) * scenario.buy_price_per_kwh[state.t]
    } else {
        w.k1 * grid_kw * scenario.sell_price_per_kwh[state.t]
    };
    let done = state.t + 1 == cfg.horizon;
    let c2_terminal = if done {
        w.k2 * f64::abs(hsd_l_next - cfg.water_tank.hsd_init_kwh)
            + w.k3 * f64::abs(hsd_h_next - cfg.steam_accumulator.hsd_init_kwh)
    } else {
        0.0
    };
    let delta_p = match prev_grid_kw {
        Some(prev) => f64::abs(grid_kw - prev),
        None => 0.0,
    };
    let pen_e_ex = w.l1 * p_ex_e;
    let pen_e_loss = w.l2 * p_loss_e;
    let pen_h_ex = w.l3 * p_ex_h;
    let pen_h_loss = w.l4 * p_loss_h;
    let pen_delta_p = w.l5 * delta_p;
    let total =
        -c1_step - c2_terminal - pen_e_ex - pen_e_loss - pen_h_ex - pen_h_loss - pen_delta_p;

    // next-step renewables straight from the generation equations
    let src = usize::min(state.t + 1, cfg.horizon - 1);
    let next_pv_kw =
        cfg.pv.eta_pv * cfg.pv.eta_inv * cfg.pv.area_m2 * scenario.irradiance_w_m2[src] / 1000.0;
    let v = scenario.wind_speed_ms[src];
    let next_wind_kw = if v < cfg.wind.v_in_ms || v > cfg.wind.v_out_ms {
        0.0
    } else if v < cfg.wind.v_r_ms {
        (v - cfg.wind.v_in_ms) / (cfg.wind.v_r_ms - cfg.wind.v_in_ms) * cfg.wind.cap_kw
    } else {
        cfg.wind.cap_kw
    };

    OracleStep {
        grid_kw,
        hsd_l_next,
        hsd_h_next,
        next_pv_kw,
        next_wind_kw,
        c1_step,
        c2_terminal,
        pen_e_ex,
        pen_e_loss,
        pen_h_ex,
        pen_h_loss,
        pen_delta_p,
        total,
    }
}

/// Relative discrepancy with a unit floor.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Which reward configuration a cached training run used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Bundled defaults (fluctuation penalty active).
    Pvtd3,
    /// l5 = 0.
    Td3,
    /// k2 = k3 = 0.
    NoTerminalCost,
}

pub fn variant_config(variant: Variant) -> SystemConfig {
    let mut cfg = SystemConfig::default();
    match variant {
        Variant::Pvtd3 => {}
        Variant::Td3 => cfg.weights = cfg.weights.ablate_peak_penalty(),
        Variant::NoTerminalCost => {
            cfg.weights.k2 = 0.0;
            cfg.weights.k3 = 0.0;
        }
    }
    cfg
}

type Cache = Mutex<HashMap<(Variant, u64), Arc<OnceLock<Arc<TrainOutput>>>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Trains (once per process) and returns the run for (variant, seed).
pub fn trained(variant: Variant, seed: u64) -> Arc<TrainOutput> {
    let slot = {
        let mut map = cache().lock().unwrap();
        map.entry((variant, seed)).or_default().clone()
    };
    slot.get_or_init(|| {
        let cfg = variant_config(variant);
        Arc::new(train(&cfg, seed).expect("training run"))
    })
    .clone()
}
