//! Typical-day profiles, time-of-use tariffs and perturbed uncertainty
//! scenarios.
//!
//! A profile is the 24-step base case; a scenario is the profile with
//! per-step multiplicative noise on the four physical series (loads,
//! irradiance, wind speed). Tariffs are never perturbed. Perturbation is
//! a pure function of (profile, tier, seed).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base-case day: per-step loads, weather and tariff arrays, all of
/// length `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalDayProfile {
    pub electric_load_kw: Vec<f64>,
    pub heat_load_kw: Vec<f64>,
    pub irradiance_w_m2: Vec<f64>,
    pub wind_speed_ms: Vec<f64>,
    pub buy_price_per_kwh: Vec<f64>,
    pub sell_price_per_kwh: Vec<f64>,
}

/// Uncertainty band `[lo, hi]` as fractions of the base value,
/// with `0 <= lo < hi <= 0.30`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTier {
    pub lo: f64,
    pub hi: f64,
}

impl UncertaintyTier {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 0.30) {
            return Err(Error::config(
                "tier",
                format!("uncertainty tier must satisfy 0 <= lo < hi <= 0.30, got [{lo}, {hi}]"),
            ));
        }
        Ok(Self { lo, hi })
    }

    /// The three evaluation bands: 0-10%, 10-20%, 20-30%.
    pub fn evaluation_tiers() -> [UncertaintyTier; 3] {
        [
            UncertaintyTier { lo: 0.0, hi: 0.10 },
            UncertaintyTier { lo: 0.10, hi: 0.20 },
            UncertaintyTier { lo: 0.20, hi: 0.30 },
        ]
    }

    /// The full training band, 0-30%.
    pub fn training_band() -> UncertaintyTier {
        UncertaintyTier { lo: 0.0, hi: 0.30 }
    }
}

/// A perturbed day: the profile arrays after noise, plus the seed and
/// tier that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub electric_load_kw: Vec<f64>,
    pub heat_load_kw: Vec<f64>,
    pub irradiance_w_m2: Vec<f64>,
    pub wind_speed_ms: Vec<f64>,
    pub buy_price_per_kwh: Vec<f64>,
    pub sell_price_per_kwh: Vec<f64>,
    pub seed: u64,
    pub tier: UncertaintyTier,
}

impl TypicalDayProfile {
    /// Number of dispatch steps in the day.
    pub fn horizon(&self) -> usize {
        self.electric_load_kw.len()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let arrays: [(&str, &[f64]); 6] = [
            ("electric_load_kw", &self.electric_load_kw),
            ("heat_load_kw", &self.heat_load_kw),
            ("irradiance_w_m2", &self.irradiance_w_m2),
            ("wind_speed_ms", &self.wind_speed_ms),
            ("buy_price_per_kwh", &self.buy_price_per_kwh),
            ("sell_price_per_kwh", &self.sell_price_per_kwh),
        ];
        for (name, arr) in arrays {
            if arr.len() != horizon {
                return Err(Error::config(
                    format!("profile.{name}"),
                    format!("expected {horizon} entries, got {}", arr.len()),
                ));
            }
            if let Some(i) = arr.iter().position(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::config(
                    format!("profile.{name}[{i}]"),
                    "entries must be finite and >= 0",
                ));
            }
        }
        for t in 0..horizon {
            if self.sell_price_per_kwh[t] > self.buy_price_per_kwh[t] {
                return Err(Error::config(
                    format!("profile.sell_price_per_kwh[{t}]"),
                    "sell price must not exceed buy price",
                ));
            }
        }
        Ok(())
    }
}

/// The bundled synthetic typical day (24 hourly steps).
///
/// Electric load peaks in the morning (~08:00-11:00) and evening
/// (~18:00-21:00) at 800 kW; heat load is elevated overnight and peaks at
/// 1000 kW in the early morning; irradiance is a daylight bell curve,
/// zero before 06:00 and from 18:00 on; wind is stronger at night.
/// Tariff: valley 00-07, flat 07-10, peak 10-15, flat 15-18, peak 18-21,
/// flat 21-24; sell price is 0.8x the buy price.
pub fn default_profile() -> TypicalDayProfile {
    let electric_load_kw = vec![
        320.0, 300.0, 290.0, 285.0, 290.0, 310.0, 380.0, 480.0, 620.0, 750.0, 800.0, 780.0,
        700.0, 650.0, 620.0, 600.0, 640.0, 720.0, 800.0, 790.0, 700.0, 560.0, 430.0, 350.0,
    ];
    let heat_load_kw = vec![
        820.0, 850.0, 880.0, 900.0, 950.0, 1000.0, 980.0, 900.0, 800.0, 650.0, 520.0, 450.0,
        420.0, 400.0, 420.0, 480.0, 560.0, 660.0, 760.0, 830.0, 870.0, 880.0, 860.0, 840.0,
    ];
    let irradiance_w_m2 = vec![
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 60.0, 240.0, 480.0, 690.0, 830.0, 900.0, 890.0, 800.0,
        640.0, 430.0, 210.0, 60.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ];
    let wind_speed_ms = vec![
        10.5, 11.0, 11.5, 12.0, 11.5, 11.0, 10.0, 9.0, 8.0, 7.0, 6.0, 5.5, 5.0, 5.0, 5.5, 6.0,
        6.5, 7.0, 7.5, 8.5, 9.0, 9.5, 10.0, 10.5,
    ];
    let buy_price_per_kwh = vec![
        0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.60, 0.60, 0.60, 1.10, 1.10, 1.10, 1.10,
        1.10, 0.60, 0.60, 0.60, 1.10, 1.10, 1.10, 0.60, 0.60, 0.60,
    ];
    let sell_price_per_kwh = buy_price_per_kwh.iter().map(|p| 0.8 * p).collect();
    TypicalDayProfile {
        electric_load_kw,
        heat_load_kw,
        irradiance_w_m2,
        wind_speed_ms,
        buy_price_per_kwh,
        sell_price_per_kwh,
    }
}

/// Perturbs the four physical series of `profile` with per-step
/// multiplicative noise in the tier band; tariffs are copied through.
///
/// For each entry an amplitude is drawn uniformly from `[lo, hi]` and a
/// sign uniformly from {-1, +1}; the entry becomes `base * (1 + s*a)`.
/// Draw order is fixed (series-major, step-minor) so a given
/// (profile, tier, seed) always yields the same scenario.
pub fn perturb(profile: &TypicalDayProfile, tier: UncertaintyTier, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturb_series = |base: &[f64]| -> Vec<f64> {
        base.iter()
            .map(|&v| {
                let amplitude = rng.random_range(tier.lo..=tier.hi);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                v * (1.0 + sign * amplitude)
            })
            .collect()
    };
    let electric_load_kw = perturb_series(&profile.electric_load_kw);
    let heat_load_kw = perturb_series(&profile.heat_load_kw);
    let irradiance_w_m2 = perturb_series(&profile.irradiance_w_m2);
    let wind_speed_ms = perturb_series(&profile.wind_speed_ms);
    Scenario {
        electric_load_kw,
        heat_load_kw,
        irradiance_w_m2,
        wind_speed_ms,
        buy_price_per_kwh: profile.buy_price_per_kwh.clone(),
        sell_price_per_kwh: profile.sell_price_per_kwh.clone(),
        seed,
        tier,
    }
}

/// `n` scenarios with consecutive seeds `base_seed .. base_seed + n`.
pub fn scenario_batch(
    profile: &TypicalDayProfile,
    tier: UncertaintyTier,
    n: usize,
    base_seed: u64,
) -> Vec<Scenario> {
    (0..n as u64)
        .map(|i| perturb(profile, tier, base_seed + i))
        .collect()
}

impl Scenario {
    pub fn horizon(&self) -> usize {
        self.electric_load_kw.len()
    }

    /// CSV export: one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,e_load_kw,h_load_kw,irradiance_w_m2,wind_ms,buy_price,sell_price\n");
        for t in 0..self.horizon() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                t,
                self.electric_load_kw[t],
                self.heat_load_kw[t],
                self.irradiance_w_m2[t],
                self.wind_speed_ms[t],
                self.buy_price_per_kwh[t],
                self.sell_price_per_kwh[t],
            ));
        }
        out
    }
}
