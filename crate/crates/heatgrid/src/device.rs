//! Physical device models: photovoltaic array, wind turbine, heat pumps,
//! steam compressor and thermal storage.
//!
//! Every function here is a pure, stateless evaluation of one device
//! equation. Parameter structs validate their invariants at construction;
//! power-box violations are treated as caller bugs and panic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Photovoltaic array parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvParams {
    /// Photovoltaic conversion efficiency, in (0, 1].
    pub eta_pv: f64,
    /// Inverter efficiency, in (0, 1].
    pub eta_inv: f64,
    /// Effective light-collecting area [m^2].
    pub area_m2: f64,
}

/// Wind turbine parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindParams {
    /// Cut-in wind speed [m/s].
    pub v_in_ms: f64,
    /// Rated wind speed [m/s].
    pub v_r_ms: f64,
    /// Cut-out wind speed [m/s].
    pub v_out_ms: f64,
    /// Installed capacity [kW].
    pub cap_kw: f64,
}

/// Compression heat pump parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPumpParams {
    /// Coefficient of performance (heat out per unit electricity), >= 1.
    pub cop: f64,
    /// Lower bound of the electrical power box [kW].
    pub p_min_kw: f64,
    /// Upper bound of the electrical power box [kW].
    pub p_max_kw: f64,
}

/// Steam compressor parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompressorParams {
    /// Compression efficiency (thermal power added per unit electricity), > 0.
    pub eta_cp: f64,
    /// Lower bound of the electrical power box [kW].
    pub p_min_kw: f64,
    /// Upper bound of the electrical power box [kW].
    pub p_max_kw: f64,
}

/// Thermal storage device parameters (water tank or steam accumulator).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageParams {
    /// Minimum stored energy [kWh].
    pub hsd_min_kwh: f64,
    /// Maximum stored energy [kWh].
    pub hsd_max_kwh: f64,
    /// Stored energy at the start of a dispatch cycle [kWh].
    pub hsd_init_kwh: f64,
}

fn ensure(cond: bool, field: &str, message: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::config(field, message))
    }
}

impl PvParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        ensure(
            self.eta_pv.is_finite() && self.eta_pv > 0.0 && self.eta_pv <= 1.0,
            &format!("{prefix}.eta_pv"),
            "must be in (0, 1]",
        )?;
        ensure(
            self.eta_inv.is_finite() && self.eta_inv > 0.0 && self.eta_inv <= 1.0,
            &format!("{prefix}.eta_inv"),
            "must be in (0, 1]",
        )?;
        ensure(
            self.area_m2.is_finite() && self.area_m2 >= 0.0,
            &format!("{prefix}.area_m2"),
            "must be finite and >= 0",
        )
    }
}

impl WindParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let speeds_ok = self.v_in_ms.is_finite()
            && self.v_r_ms.is_finite()
            && self.v_out_ms.is_finite()
            && self.v_in_ms >= 0.0;
        ensure(speeds_ok, prefix, "wind speeds must be finite and >= 0")?;
        ensure(
            self.v_in_ms < self.v_r_ms,
            &format!("{prefix}.v_in_ms"),
            "cut-in speed must be below rated speed",
        )?;
        ensure(
            self.v_r_ms <= self.v_out_ms,
            &format!("{prefix}.v_r_ms"),
            "rated speed must not exceed cut-out speed",
        )?;
        ensure(
            self.cap_kw.is_finite() && self.cap_kw >= 0.0,
            &format!("{prefix}.cap_kw"),
            "must be finite and >= 0",
        )
    }
}

impl HeatPumpParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        ensure(
            self.cop.is_finite() && self.cop >= 1.0,
            &format!("{prefix}.cop"),
            "must be finite and >= 1",
        )?;
        validate_box(self.p_min_kw, self.p_max_kw, prefix)
    }
}

impl CompressorParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        ensure(
            self.eta_cp.is_finite() && self.eta_cp > 0.0,
            &format!("{prefix}.eta_cp"),
            "must be finite and > 0",
        )?;
        validate_box(self.p_min_kw, self.p_max_kw, prefix)
    }
}

impl StorageParams {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let finite =
            self.hsd_min_kwh.is_finite() && self.hsd_max_kwh.is_finite() && self.hsd_init_kwh.is_finite();
        ensure(finite, prefix, "storage bounds must be finite")?;
        ensure(
            self.hsd_min_kwh <= self.hsd_init_kwh && self.hsd_init_kwh <= self.hsd_max_kwh,
            &format!("{prefix}.hsd_init_kwh"),
            "initial state must lie within [hsd_min_kwh, hsd_max_kwh]",
        )
    }

    /// Usable range [kWh]; zero-width boxes are allowed.
    pub fn range_kwh(&self) -> f64 {
        self.hsd_max_kwh - self.hsd_min_kwh
    }
}

fn validate_box(p_min: f64, p_max: f64, prefix: &str) -> Result<()> {
    ensure(
        p_min.is_finite() && p_max.is_finite() && 0.0 <= p_min && p_min <= p_max,
        &format!("{prefix}.p_min_kw"),
        "power box must satisfy 0 <= p_min_kw <= p_max_kw",
    )
}

/// PV electrical output [kW] for a given irradiance [W/m^2].
///
/// Rejects non-finite or negative irradiance.
pub fn pv_output(p: &PvParams, irradiance_w_m2: f64) -> Result<f64> {
    if !irradiance_w_m2.is_finite() || irradiance_w_m2 < 0.0 {
        return Err(Error::config(
            "irradiance_w_m2",
            "irradiance must be finite and >= 0",
        ));
    }
    Ok(p.eta_pv * p.eta_inv * p.area_m2 * irradiance_w_m2 / 1000.0)
}

/// Wind turbine electrical output [kW] for a given wind speed [m/s].
///
/// Zero below cut-in and above cut-out, linear ramp between cut-in and
/// rated speed, flat at capacity between rated and cut-out. The rated
/// speed itself is served by the flat branch; both branches agree there.
pub fn wind_output(p: &WindParams, v_ms: f64) -> Result<f64> {
    if !v_ms.is_finite() || v_ms < 0.0 {
        return Err(Error::config(
            "wind_speed_ms",
            "wind speed must be finite and >= 0",
        ));
    }
    let out = if v_ms < p.v_in_ms || v_ms > p.v_out_ms {
        0.0
    } else if v_ms < p.v_r_ms {
        (v_ms - p.v_in_ms) / (p.v_r_ms - p.v_in_ms) * p.cap_kw
    } else {
        p.cap_kw
    };
    Ok(out)
}

/// Heat pump thermal output [kW] for electrical input `p_e_kw`.
///
/// `p_e_kw` must already be inside the power box; callers clamp first.
pub fn heat_pump_heat(p: &HeatPumpParams, p_e_kw: f64) -> f64 {
    assert!(
        p.p_min_kw <= p_e_kw && p_e_kw <= p.p_max_kw,
        "heat pump power {p_e_kw} kW outside box [{}, {}]",
        p.p_min_kw,
        p.p_max_kw
    );
    p.cop * p_e_kw
}

/// Thermal power the compressor itself adds [kW] for electrical input
/// `p_e_kw`. The steam it draws from the accumulator is accounted for by
/// the environment, not here.
pub fn compressor_added_heat(p: &CompressorParams, p_e_kw: f64) -> f64 {
    assert!(
        p.p_min_kw <= p_e_kw && p_e_kw <= p.p_max_kw,
        "compressor power {p_e_kw} kW outside box [{}, {}]",
        p.p_min_kw,
        p.p_max_kw
    );
    p.eta_cp * p_e_kw
}

/// One-step storage update.
///
/// Aggregates inflow and outflow, clamps to the state box and reports the
/// clamped-away energy as `overflow` (above the box) or `shortfall`
/// (below the box). At most one of the two is positive.
pub fn storage_step(p: &StorageParams, hsd_kwh: f64, q_in_kwh: f64, q_out_kwh: f64) -> StorageStep {
    assert!(
        p.hsd_min_kwh <= hsd_kwh && hsd_kwh <= p.hsd_max_kwh,
        "storage state {hsd_kwh} kWh outside [{}, {}]",
        p.hsd_min_kwh,
        p.hsd_max_kwh
    );
    assert!(q_in_kwh >= 0.0 && q_out_kwh >= 0.0, "flows must be >= 0");
    let raw = hsd_kwh + q_in_kwh - q_out_kwh;
    StorageStep {
        hsd_next_kwh: raw.clamp(p.hsd_min_kwh, p.hsd_max_kwh),
        overflow_kwh: (raw - p.hsd_max_kwh).max(0.0),
        shortfall_kwh: (p.hsd_min_kwh - raw).max(0.0),
    }
}

/// Result of [`storage_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StorageStep {
    /// State after clamping [kWh].
    pub hsd_next_kwh: f64,
    /// Energy that could not be stored [kWh].
    pub overflow_kwh: f64,
    /// Energy that could not be drawn [kWh].
    pub shortfall_kwh: f64,
}
