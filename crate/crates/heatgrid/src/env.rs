//! The dispatch environment: state construction, action application,
//! device physics, reward shaping and episode cost accounting.
//!
//! Heat topology: the low-temperature heat pump charges the water tank;
//! the high-temperature heat pump draws `(COP_H - 1) * P` from the tank
//! as its source and delivers `COP_H * P` to the steam accumulator; the
//! compressor draws steam from the accumulator and adds `eta_CP * P_CP`
//! of its own, together serving the heat load. Electricity is balanced
//! by the grid: whatever the devices and the electric load need beyond
//! PV and wind is purchased, any surplus is sold.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::device;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Observation dimension of [`normalize_state`].
pub const STATE_DIM: usize = 7;
/// Dispatch action dimension.
pub const ACTION_DIM: usize = 3;

/// MDP state: step index, exogenous signals and both storage levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub e_load_kw: f64,
    pub h_load_kw: f64,
    pub pv_kw: f64,
    pub wind_kw: f64,
    /// Water tank level [kWh].
    pub hsd_l_kwh: f64,
    /// Steam accumulator level [kWh].
    pub hsd_h_kwh: f64,
}

/// Dispatch action in physical units [kW].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionKw {
    pub p_hp_l_kw: f64,
    pub p_hp_h_kw: f64,
    pub p_cp_kw: f64,
}

impl ActionKw {
    /// Maps a normalized action in [-1, 1]^3 onto the device power boxes.
    pub fn from_normalized(a: [f64; ACTION_DIM], config: &SystemConfig) -> Self {
        let map = |x: f64, lo: f64, hi: f64| lo + (x + 1.0) * 0.5 * (hi - lo);
        Self {
            p_hp_l_kw: map(a[0], config.heat_pump_low.p_min_kw, config.heat_pump_low.p_max_kw),
            p_hp_h_kw: map(a[1], config.heat_pump_high.p_min_kw, config.heat_pump_high.p_max_kw),
            p_cp_kw: map(a[2], config.compressor.p_min_kw, config.compressor.p_max_kw),
        }
    }

    /// Every action held at the box midpoint; reference policy.
    pub fn midbox(config: &SystemConfig) -> Self {
        Self::from_normalized([0.0; ACTION_DIM], config)
    }

    /// Every action held at the box minimum; reference policy.
    pub fn zero(config: &SystemConfig) -> Self {
        Self::from_normalized([-1.0; ACTION_DIM], config)
    }
}

/// Cost weights of the objective and the reward penalties.
///
/// `l5 > 0` is the peak-shaving (PVTD3) mode; `l5 = 0` is the plain TD3
/// baseline. All other terms are shared.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardWeights {
    /// Grid energy cost factor.
    #[serde(default = "d_k1")]
    pub k1: f64,
    /// Water-tank terminal deviation cost factor.
    #[serde(default = "d_k2")]
    pub k2: f64,
    /// Accumulator terminal deviation cost factor.
    #[serde(default = "d_k3")]
    pub k3: f64,
    /// Exported-electricity penalty factor.
    #[serde(default = "d_l1")]
    pub l1: f64,
    /// Unserved-electricity penalty factor.
    #[serde(default = "d_l2")]
    pub l2: f64,
    /// Excess-heat penalty factor.
    #[serde(default = "d_l3")]
    pub l3: f64,
    /// Unserved-heat penalty factor.
    #[serde(default = "d_l4")]
    pub l4: f64,
    /// Grid-purchase fluctuation penalty factor.
    #[serde(default = "d_l5")]
    pub l5: f64,
}

fn d_k1() -> f64 {
    0.1
}
fn d_k2() -> f64 {
    0.055
}
fn d_k3() -> f64 {
    0.1
}
fn d_l1() -> f64 {
    1.1
}
fn d_l2() -> f64 {
    1.0
}
fn d_l3() -> f64 {
    1.2
}
fn d_l4() -> f64 {
    1.0
}
fn d_l5() -> f64 {
    1.5
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            k1: d_k1(),
            k2: d_k2(),
            k3: d_k3(),
            l1: d_l1(),
            l2: d_l2(),
            l3: d_l3(),
            l4: d_l4(),
            l5: d_l5(),
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("weights.k1", self.k1),
            ("weights.k2", self.k2),
            ("weights.k3", self.k3),
            ("weights.l1", self.l1),
            ("weights.l2", self.l2),
            ("weights.l3", self.l3),
            ("weights.l4", self.l4),
            ("weights.l5", self.l5),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(name, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// True when the grid-fluctuation penalty is active.
    pub fn is_pvtd3(&self) -> bool {
        self.l5 > 0.0
    }

    /// The same weights with the fluctuation penalty removed: the TD3
    /// baseline.
    pub fn ablate_peak_penalty(mut self) -> Self {
        self.l5 = 0.0;
        self
    }
}

/// Signed reward decomposition for one step.
///
/// `total` is always `-c1_step - c2_terminal - pen_e_ex - pen_e_loss -
/// pen_h_ex - pen_h_loss - pen_delta_p`, evaluated left to right, so it
/// reconstructs bit-exactly from the components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    /// Grid energy cost this step (negative when selling).
    pub c1_step: f64,
    /// Terminal storage-deviation cost; zero except on the last step.
    pub c2_terminal: f64,
    /// Weighted exported-electricity penalty.
    pub pen_e_ex: f64,
    /// Weighted unserved-electricity penalty.
    pub pen_e_loss: f64,
    /// Weighted excess-heat penalty.
    pub pen_h_ex: f64,
    /// Weighted unserved-heat penalty.
    pub pen_h_loss: f64,
    /// Weighted grid-purchase-change penalty.
    pub pen_delta_p: f64,
    pub total: f64,
}

/// Thermal flows of one step, for conservation checks and analysis [kWh].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatFlows {
    pub q_l_in: f64,
    pub q_l_out: f64,
    pub q_h_in: f64,
    pub q_h_out: f64,
    pub overflow_l: f64,
    pub shortfall_l: f64,
    pub overflow_h: f64,
    pub shortfall_h: f64,
}

/// Everything one environment step produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    /// Signed grid exchange [kW]; positive is purchase, negative is sale.
    pub grid_kw: f64,
    pub done: bool,
    /// The dispatch actually executed, after clamping and source-side
    /// derating of the high-temperature heat pump.
    pub applied: ActionKw,
    pub flows: HeatFlows,
}

/// Initial state for a scenario: step zero exogenous signals and the
/// configured initial storage levels.
pub fn reset(scenario: &Scenario, config: &SystemConfig) -> Result<EnvState> {
    if scenario.horizon() != config.horizon {
        return Err(Error::InputMismatch(format!(
            "scenario horizon {} != configured horizon {}",
            scenario.horizon(),
            config.horizon
        )));
    }
    Ok(EnvState {
        t: 0,
        e_load_kw: scenario.electric_load_kw[0],
        h_load_kw: scenario.heat_load_kw[0],
        pv_kw: device::pv_output(&config.pv, scenario.irradiance_w_m2[0])?,
        wind_kw: device::wind_output(&config.wind, scenario.wind_speed_ms[0])?,
        hsd_l_kwh: config.water_tank.hsd_init_kwh,
        hsd_h_kwh: config.steam_accumulator.hsd_init_kwh,
    })
}

/// Applies one action to one state: the full physics and reward pipeline
/// as a pure function. `prev_grid_kw` is the previous step's grid
/// exchange, `None` on the first step of an episode.
pub fn apply_action(
    state: &EnvState,
    raw: ActionKw,
    scenario: &Scenario,
    config: &SystemConfig,
    weights: &RewardWeights,
    prev_grid_kw: Option<f64>,
) -> StepOutcome {
    let horizon = config.horizon;
    assert!(state.t < horizon, "apply_action called after the episode ended");
    let tank = &config.water_tank;
    let acc = &config.steam_accumulator;
    assert!(
        tank.hsd_min_kwh <= state.hsd_l_kwh && state.hsd_l_kwh <= tank.hsd_max_kwh,
        "water tank state outside bounds"
    );
    assert!(
        acc.hsd_min_kwh <= state.hsd_h_kwh && state.hsd_h_kwh <= acc.hsd_max_kwh,
        "accumulator state outside bounds"
    );

    // 1. clamp the commanded powers into their boxes
    let p_hp_l = raw
        .p_hp_l_kw
        .clamp(config.heat_pump_low.p_min_kw, config.heat_pump_low.p_max_kw);
    let p_hp_h_cmd = raw
        .p_hp_h_kw
        .clamp(config.heat_pump_high.p_min_kw, config.heat_pump_high.p_max_kw);
    let p_cp = raw
        .p_cp_kw
        .clamp(config.compressor.p_min_kw, config.compressor.p_max_kw);

    // 2. low-temperature heat pump charges the tank
    let q_l_in = device::heat_pump_heat(&config.heat_pump_low, p_hp_l);

    // 3. high-temperature heat pump draws (COP_H - 1) per kW from the
    //    tank; derate proportionally when the tank cannot supply it
    let draw_per_kw = config.heat_pump_high.cop - 1.0;
    let avail_l = state.hsd_l_kwh + q_l_in - tank.hsd_min_kwh;
    let q_l_out_req = draw_per_kw * p_hp_h_cmd;
    let p_hp_h = if q_l_out_req > avail_l && q_l_out_req > 0.0 {
        p_hp_h_cmd * (avail_l / q_l_out_req)
    } else {
        p_hp_h_cmd
    };
    let q_l_out = draw_per_kw * p_hp_h;
    let q_h_in = config.heat_pump_high.cop * p_hp_h;

    // 4. compressor adds its own heat and draws steam for the remainder
    //    of the heat load, capped at what the accumulator can supply
    let added = device::compressor_added_heat(&config.compressor, p_cp);
    let avail_h = (state.hsd_h_kwh + q_h_in - acc.hsd_min_kwh).max(0.0);
    let q_h_out = (state.h_load_kw - added).max(0.0).min(avail_h);
    let delivered = added + q_h_out;
    let p_loss_h = (state.h_load_kw - delivered).max(0.0);
    let mut p_ex_h = (delivered - state.h_load_kw).max(0.0);

    // 5. storage updates; clamped-away energy is wasted heat
    let tank_step = device::storage_step(tank, state.hsd_l_kwh, q_l_in, q_l_out);
    let acc_step = device::storage_step(acc, state.hsd_h_kwh, q_h_in, q_h_out);
    p_ex_h += tank_step.overflow_kwh + acc_step.overflow_kwh;

    // 6. grid slack closes the electrical balance
    let grid_kw = p_hp_l + p_hp_h + p_cp + state.e_load_kw - state.pv_kw - state.wind_kw;
    let p_ex_e = (-grid_kw).max(0.0);
    let p_loss_e = (grid_kw - config.grid.capacity_kw).max(0.0);

    // 7. reward
    let buy = scenario.buy_price_per_kwh[state.t];
    let sell = scenario.sell_price_per_kwh[state.t];
    let c1_step = if grid_kw >= 0.0 {
        weights.k1 * grid_kw.min(config.grid.capacity_kw) * buy
    } else {
        weights.k1 * grid_kw * sell
    };
    let delta_p = prev_grid_kw.map_or(0.0, |prev| (grid_kw - prev).abs());
    let done = state.t + 1 == horizon;
    let c2_terminal = if done {
        weights.k2 * (tank_step.hsd_next_kwh - tank.hsd_init_kwh).abs()
            + weights.k3 * (acc_step.hsd_next_kwh - acc.hsd_init_kwh).abs()
    } else {
        0.0
    };
    let pen_e_ex = weights.l1 * p_ex_e;
    let pen_e_loss = weights.l2 * p_loss_e;
    let pen_h_ex = weights.l3 * p_ex_h;
    let pen_h_loss = weights.l4 * p_loss_h;
    let pen_delta_p = weights.l5 * delta_p;
    let total =
        -c1_step - c2_terminal - pen_e_ex - pen_e_loss - pen_h_ex - pen_h_loss - pen_delta_p;

    // exogenous signals for the next step; the terminal marker state
    // repeats the last step's signals and is never acted on
    let next_t = state.t + 1;
    let src = next_t.min(horizon - 1);
    let next_state = EnvState {
        t: next_t,
        e_load_kw: scenario.electric_load_kw[src],
        h_load_kw: scenario.heat_load_kw[src],
        pv_kw: device::pv_output(&config.pv, scenario.irradiance_w_m2[src])
            .expect("scenario irradiance validated"),
        wind_kw: device::wind_output(&config.wind, scenario.wind_speed_ms[src])
            .expect("scenario wind speed validated"),
        hsd_l_kwh: tank_step.hsd_next_kwh,
        hsd_h_kwh: acc_step.hsd_next_kwh,
    };

    StepOutcome {
        next_state,
        reward: total,
        breakdown: RewardBreakdown {
            c1_step,
            c2_terminal,
            pen_e_ex,
            pen_e_loss,
            pen_h_ex,
            pen_h_loss,
            pen_delta_p,
            total,
        },
        grid_kw,
        done,
        applied: ActionKw {
            p_hp_l_kw: p_hp_l,
            p_hp_h_kw: p_hp_h,
            p_cp_kw: p_cp,
        },
        flows: HeatFlows {
            q_l_in,
            q_l_out,
            q_h_in,
            q_h_out,
            overflow_l: tank_step.overflow_kwh,
            shortfall_l: tank_step.shortfall_kwh,
            overflow_h: acc_step.overflow_kwh,
            shortfall_h: acc_step.shortfall_kwh,
        },
    }
}

/// One episode's environment: wraps [`apply_action`] and carries the
/// previous-grid register across steps. Single caller per instance.
pub struct Env<'a> {
    pub scenario: &'a Scenario,
    pub config: &'a SystemConfig,
    pub weights: RewardWeights,
    prev_grid_kw: Option<f64>,
}

impl<'a> Env<'a> {
    pub fn new(scenario: &'a Scenario, config: &'a SystemConfig, weights: RewardWeights) -> Self {
        Self {
            scenario,
            config,
            weights,
            prev_grid_kw: None,
        }
    }

    pub fn reset(&mut self) -> Result<EnvState> {
        self.prev_grid_kw = None;
        reset(self.scenario, self.config)
    }

    pub fn step(&mut self, state: &EnvState, raw: ActionKw) -> StepOutcome {
        let out = apply_action(
            state,
            raw,
            self.scenario,
            self.config,
            &self.weights,
            self.prev_grid_kw,
        );
        self.prev_grid_kw = Some(out.grid_kw);
        out
    }
}

/// Maps a state onto the 7-dimensional observation vector in [0, 1]:
/// time, both loads and both renewables by their configured maxima, both
/// storage levels by their bounds.
pub fn normalize_state(state: &EnvState, config: &SystemConfig) -> [f64; STATE_DIM] {
    let nb = &config.normalization;
    let tank = &config.water_tank;
    let acc = &config.steam_accumulator;
    let span = |range: f64| if range > 0.0 { range } else { 1.0 };
    [
        state.t as f64 / config.horizon as f64,
        state.e_load_kw / nb.e_load_max_kw,
        state.h_load_kw / nb.h_load_max_kw,
        state.pv_kw / nb.pv_max_kw,
        state.wind_kw / nb.wind_max_kw,
        (state.hsd_l_kwh - tank.hsd_min_kwh) / span(tank.range_kwh()),
        (state.hsd_h_kwh - acc.hsd_min_kwh) / span(acc.range_kwh()),
    ]
}

/// Episode aggregates matching the comparison-table columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeCost {
    /// Grid energy cost plus terminal storage cost, unweighted by the
    /// penalty factors.
    pub c_s: f64,
    /// Total absolute step-to-step grid change [kW].
    pub delta_p_total: f64,
    pub hsd_l_t: f64,
    pub hsd_h_t: f64,
}

/// Sums a complete episode's dispatch cost and grid fluctuation.
pub fn episode_cost(outcomes: &[StepOutcome]) -> Result<EpisodeCost> {
    let last = outcomes.last().filter(|o| o.done).ok_or_else(|| {
        Error::InputMismatch("episode_cost requires a complete trajectory".into())
    })?;
    let c_s: f64 = outcomes
        .iter()
        .map(|o| o.breakdown.c1_step + o.breakdown.c2_terminal)
        .sum();
    let delta_p_total: f64 = outcomes
        .windows(2)
        .map(|w| (w[1].grid_kw - w[0].grid_kw).abs())
        .sum();
    Ok(EpisodeCost {
        c_s,
        delta_p_total,
        hsd_l_t: last.next_state.hsd_l_kwh,
        hsd_h_t: last.next_state.hsd_h_kwh,
    })
}

/// CSV export of one trajectory: the dispatch, storage and reward series.
pub fn trajectory_csv(outcomes: &[StepOutcome]) -> String {
    let mut out = String::from(
        "step,p_hp_l_kw,p_hp_h_kw,p_cp_kw,grid_kw,hsd_l_kwh,hsd_h_kwh,reward,\
         c1_step,c2_terminal,pen_e_ex,pen_e_loss,pen_h_ex,pen_h_loss,pen_delta_p,total\n",
    );
    for (t, o) in outcomes.iter().enumerate() {
        let b = &o.breakdown;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            t,
            o.applied.p_hp_l_kw,
            o.applied.p_hp_h_kw,
            o.applied.p_cp_kw,
            o.grid_kw,
            o.next_state.hsd_l_kwh,
            o.next_state.hsd_h_kwh,
            o.reward,
            b.c1_step,
            b.c2_terminal,
            b.pen_e_ex,
            b.pen_e_loss,
            b.pen_h_ex,
            b.pen_h_loss,
            b.pen_delta_p,
            b.total,
        ));
    }
    out
}
