//! System configuration: every device, tariff, storage, reward and
//! training constant, loaded from a versioned TOML file.
//!
//! Unknown keys are rejected so that a typo cannot silently fall back to
//! a default and invalidate a comparison run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::{CompressorParams, HeatPumpParams, PvParams, StorageParams, WindParams};
use crate::env::RewardWeights;
use crate::error::{Error, Result};
use crate::scenario::{default_profile, TypicalDayProfile};
use crate::td3::Td3Config;

/// Schema version this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// Grid connection and pricing parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    /// Maximum purchase power [kW]; `inf` leaves the connection unbounded.
    #[serde(default = "default_grid_capacity")]
    pub capacity_kw: f64,
    /// Sell price as a fraction of the buy price, used when the profile
    /// does not list explicit sell prices.
    #[serde(default = "default_sell_ratio")]
    pub sell_price_ratio: f64,
}

fn default_grid_capacity() -> f64 {
    f64::INFINITY
}

fn default_sell_ratio() -> f64 {
    0.8
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            capacity_kw: default_grid_capacity(),
            sell_price_ratio: default_sell_ratio(),
        }
    }
}

/// Feature-scaling maxima used to map observations into [0, 1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormBounds {
    #[serde(default = "default_e_load_max")]
    pub e_load_max_kw: f64,
    #[serde(default = "default_h_load_max")]
    pub h_load_max_kw: f64,
    #[serde(default = "default_pv_max")]
    pub pv_max_kw: f64,
    #[serde(default = "default_wind_max")]
    pub wind_max_kw: f64,
}

fn default_e_load_max() -> f64 {
    1100.0
}
fn default_h_load_max() -> f64 {
    1400.0
}
fn default_pv_max() -> f64 {
    700.0
}
fn default_wind_max() -> f64 {
    700.0
}

impl Default for NormBounds {
    fn default() -> Self {
        Self {
            e_load_max_kw: default_e_load_max(),
            h_load_max_kw: default_h_load_max(),
            pv_max_kw: default_pv_max(),
            wind_max_kw: default_wind_max(),
        }
    }
}

/// Complete system description: devices, grid, reward weights, training
/// hyperparameters, feature scaling and the typical-day profile.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub schema_version: u32,
    /// Dispatch steps per cycle; one step is one hour, so kW and kWh per
    /// step are numerically interchangeable.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    pub pv: PvParams,
    pub wind: WindParams,
    pub heat_pump_low: HeatPumpParams,
    pub heat_pump_high: HeatPumpParams,
    pub compressor: CompressorParams,
    pub water_tank: StorageParams,
    pub steam_accumulator: StorageParams,
    #[serde(default)]
    pub grid: GridParams,
    #[serde(default)]
    pub weights: RewardWeights,
    #[serde(default)]
    pub td3: Td3Config,
    #[serde(default)]
    pub normalization: NormBounds,
    pub profile: TypicalDayProfile,
}

fn default_horizon() -> usize {
    24
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            horizon: 24,
            pv: PvParams {
                eta_pv: 0.18,
                eta_inv: 0.95,
                area_m2: 3000.0,
            },
            wind: WindParams {
                v_in_ms: 3.0,
                v_r_ms: 12.0,
                v_out_ms: 25.0,
                cap_kw: 500.0,
            },
            heat_pump_low: HeatPumpParams {
                cop: 3.0,
                p_min_kw: 0.0,
                p_max_kw: 400.0,
            },
            heat_pump_high: HeatPumpParams {
                cop: 3.5,
                p_min_kw: 0.0,
                p_max_kw: 400.0,
            },
            compressor: CompressorParams {
                eta_cp: 0.9,
                p_min_kw: 0.0,
                p_max_kw: 400.0,
            },
            water_tank: StorageParams {
                hsd_min_kwh: 0.0,
                hsd_max_kwh: 2000.0,
                hsd_init_kwh: 1000.0,
            },
            steam_accumulator: StorageParams {
                hsd_min_kwh: 0.0,
                hsd_max_kwh: 2000.0,
                hsd_init_kwh: 1000.0,
            },
            grid: GridParams::default(),
            weights: RewardWeights::default(),
            td3: Td3Config::default(),
            normalization: NormBounds::default(),
            profile: default_profile(),
        }
    }
}

impl SystemConfig {
    /// Parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Parses and validates configuration text.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: SystemConfig = toml::from_str(text)
            .map_err(|e| Error::config("config", e.to_string().replace('\n', " ")))?;
        cfg.resolve_sell_prices();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fills the sell-price array from the ratio when the profile does
    /// not list one.
    fn resolve_sell_prices(&mut self) {
        if self.profile.sell_price_per_kwh.is_empty() {
            self.profile.sell_price_per_kwh = self
                .profile
                .buy_price_per_kwh
                .iter()
                .map(|p| self.grid.sell_price_ratio * p)
                .collect();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.horizon < 2 {
            return Err(Error::config("horizon", "must be at least 2 steps"));
        }
        self.pv.validate("pv")?;
        self.wind.validate("wind")?;
        self.heat_pump_low.validate("heat_pump_low")?;
        self.heat_pump_high.validate("heat_pump_high")?;
        self.compressor.validate("compressor")?;
        self.water_tank.validate("water_tank")?;
        self.steam_accumulator.validate("steam_accumulator")?;
        if self.grid.capacity_kw.is_nan() || self.grid.capacity_kw <= 0.0 {
            return Err(Error::config("grid.capacity_kw", "must be > 0 (inf allowed)"));
        }
        if !(self.grid.sell_price_ratio.is_finite()
            && self.grid.sell_price_ratio >= 0.0
            && self.grid.sell_price_ratio <= 1.0)
        {
            return Err(Error::config("grid.sell_price_ratio", "must be in [0, 1]"));
        }
        self.weights.validate()?;
        self.td3.validate()?;
        let nb = &self.normalization;
        for (name, v) in [
            ("normalization.e_load_max_kw", nb.e_load_max_kw),
            ("normalization.h_load_max_kw", nb.h_load_max_kw),
            ("normalization.pv_max_kw", nb.pv_max_kw),
            ("normalization.wind_max_kw", nb.wind_max_kw),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, "must be finite and > 0"));
            }
        }
        self.profile.validate(self.horizon)
    }
}
