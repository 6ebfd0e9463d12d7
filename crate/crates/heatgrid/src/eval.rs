//! Multi-scenario evaluation and the TD3-vs-PVTD3 comparison table.
//!
//! Policies are rolled out noiselessly over a shared, seeded scenario
//! set (ten scenarios per uncertainty tier by default); the comparison
//! refuses reports built from different scenario sets so the pairing is
//! always exact.

use crate::config::SystemConfig;
use crate::env;
use crate::error::{Error, Result};
use crate::scenario::{scenario_batch, UncertaintyTier};
use crate::td3::Td3Agent;
use crate::train::rollout;

/// Benchmark comparison values appended to comparison CSVs for
/// context: comprehensive cost, grid fluctuation and terminal storage
/// per tier (10%/20%/30%), TD3 baseline vs the fluctuation-penalized
/// variant.
pub const BENCHMARK_TD3_C_S: [f64; 3] = [1014.1, 1052.1, 1151.1];
pub const BENCHMARK_PVTD3_C_S: [f64; 3] = [943.81, 918.69, 994.85];
pub const BENCHMARK_TD3_DELTA_P: [f64; 3] = [303.68, 306.67, 297.70];
pub const BENCHMARK_PVTD3_DELTA_P: [f64; 3] = [264.82, 268.57, 255.40];
pub const BENCHMARK_TD3_HSD_L_T: [f64; 3] = [80.78, 79.66, 83.26];
pub const BENCHMARK_PVTD3_HSD_L_T: [f64; 3] = [73.05, 70.07, 65.59];
pub const BENCHMARK_TD3_HSD_H_T: [f64; 3] = [4.76, 7.06, 7.49];
pub const BENCHMARK_PVTD3_HSD_H_T: [f64; 3] = [4.24, 4.25, 3.59];

/// Metrics of one evaluated scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioMetrics {
    pub tier: UncertaintyTier,
    pub seed: u64,
    pub c_s: f64,
    pub delta_p: f64,
    pub hsd_l_t: f64,
    pub hsd_h_t: f64,
    /// |HSD_L_T - HSD_L_0|
    pub abs_dev_l: f64,
    /// |HSD_H_T - HSD_H_0|
    pub abs_dev_h: f64,
}

/// Arithmetic means over one tier's scenarios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierSummary {
    pub tier: UncertaintyTier,
    pub mean_c_s: f64,
    pub mean_delta_p: f64,
    pub mean_hsd_l_t: f64,
    pub mean_hsd_h_t: f64,
    pub mean_abs_dev_l: f64,
    pub mean_abs_dev_h: f64,
}

/// Per-scenario rows plus per-tier means, sorted by tier then seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ScenarioMetrics>,
    pub tiers: Vec<TierSummary>,
}

/// Noiseless evaluation of a policy over `n_per_tier` scenarios in each
/// tier; tier `i` uses seeds `base_seed + i*n .. base_seed + (i+1)*n`.
pub fn evaluate(
    agent: &Td3Agent,
    config: &SystemConfig,
    tiers: &[UncertaintyTier],
    n_per_tier: usize,
    base_seed: u64,
) -> Result<EvalReport> {
    if n_per_tier == 0 || tiers.is_empty() {
        return Err(Error::config("evaluate", "need at least one tier and one scenario"));
    }
    let hsd_l_0 = config.water_tank.hsd_init_kwh;
    let hsd_h_0 = config.steam_accumulator.hsd_init_kwh;
    let mut rows = Vec::with_capacity(tiers.len() * n_per_tier);
    for (i, tier) in tiers.iter().enumerate() {
        let tier_base = base_seed + (i * n_per_tier) as u64;
        for scenario in scenario_batch(&config.profile, *tier, n_per_tier, tier_base) {
            let trajectory = rollout(agent, &scenario, config, config.weights, None)?;
            let cost = env::episode_cost(&trajectory.outcomes)?;
            rows.push(ScenarioMetrics {
                tier: *tier,
                seed: scenario.seed,
                c_s: cost.c_s,
                delta_p: cost.delta_p_total,
                hsd_l_t: cost.hsd_l_t,
                hsd_h_t: cost.hsd_h_t,
                abs_dev_l: (cost.hsd_l_t - hsd_l_0).abs(),
                abs_dev_h: (cost.hsd_h_t - hsd_h_0).abs(),
            });
        }
    }
    Ok(EvalReport::from_rows(rows))
}

impl EvalReport {
    /// Builds the per-tier summaries from rows grouped by tier.
    pub fn from_rows(rows: Vec<ScenarioMetrics>) -> Self {
        let mut tiers: Vec<TierSummary> = Vec::new();
        let mut start = 0;
        while start < rows.len() {
            let tier = rows[start].tier;
            let end = rows[start..]
                .iter()
                .position(|r| r.tier != tier)
                .map_or(rows.len(), |p| start + p);
            let group = &rows[start..end];
            let n = group.len() as f64;
            let mean = |f: fn(&ScenarioMetrics) -> f64| group.iter().map(f).sum::<f64>() / n;
            tiers.push(TierSummary {
                tier,
                mean_c_s: mean(|r| r.c_s),
                mean_delta_p: mean(|r| r.delta_p),
                mean_hsd_l_t: mean(|r| r.hsd_l_t),
                mean_hsd_h_t: mean(|r| r.hsd_h_t),
                mean_abs_dev_l: mean(|r| r.abs_dev_l),
                mean_abs_dev_h: mean(|r| r.abs_dev_h),
            });
            start = end;
        }
        Self { rows, tiers }
    }

    /// Per-scenario CSV, one row per scenario.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("tier_lo,tier_hi,seed,c_s,delta_p,hsd_l_t,hsd_h_t,abs_dev_l,abs_dev_h\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.tier.lo,
                r.tier.hi,
                r.seed,
                r.c_s,
                r.delta_p,
                r.hsd_l_t,
                r.hsd_h_t,
                r.abs_dev_l,
                r.abs_dev_h
            ));
        }
        out
    }

    /// Per-tier means CSV.
    pub fn means_csv(&self) -> String {
        let mut out = String::from(
            "tier_lo,tier_hi,mean_c_s,mean_delta_p,mean_hsd_l_t,mean_hsd_h_t,\
             mean_abs_dev_l,mean_abs_dev_h\n",
        );
        for t in &self.tiers {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                t.tier.lo,
                t.tier.hi,
                t.mean_c_s,
                t.mean_delta_p,
                t.mean_hsd_l_t,
                t.mean_hsd_h_t,
                t.mean_abs_dev_l,
                t.mean_abs_dev_h
            ));
        }
        out
    }

    /// Parses a per-scenario CSV back into a report.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| {
            Error::config(format!("report line {}", line + 1), msg.to_string())
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(0, "empty report"))?;
        if !header.starts_with("tier_lo,tier_hi,seed,") {
            return Err(bad(0, "unexpected header"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(bad(i, "expected 9 columns"));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k].parse().map_err(|_| bad(i, "bad number"))
            };
            rows.push(ScenarioMetrics {
                tier: UncertaintyTier {
                    lo: num(0)?,
                    hi: num(1)?,
                },
                seed: fields[2].parse().map_err(|_| bad(i, "bad seed"))?,
                c_s: num(3)?,
                delta_p: num(4)?,
                hsd_l_t: num(5)?,
                hsd_h_t: num(6)?,
                abs_dev_l: num(7)?,
                abs_dev_h: num(8)?,
            });
        }
        Ok(Self::from_rows(rows))
    }
}

/// `(a - b) / a` as a percentage: how much lower `b` is than `a`.
pub fn percent_reduction(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b) / a * 100.0
    }
}

/// One metric's side-by-side tier means and percentage reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricComparison {
    pub metric: &'static str,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub reduction_pct: Vec<f64>,
}

/// Side-by-side comparison of two paired reports (A is the baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub metrics: Vec<MetricComparison>,
    pub n_tiers: usize,
}

/// Compares two reports over the identical scenario set; refuses
/// mismatched seeds or tiers.
pub fn compare(a: &EvalReport, b: &EvalReport) -> Result<Comparison> {
    if a.rows.len() != b.rows.len() {
        return Err(Error::InputMismatch(format!(
            "reports cover {} vs {} scenarios",
            a.rows.len(),
            b.rows.len()
        )));
    }
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        if ra.seed != rb.seed || ra.tier != rb.tier {
            return Err(Error::InputMismatch(format!(
                "scenario sets differ: ({:?}, seed {}) vs ({:?}, seed {})",
                ra.tier, ra.seed, rb.tier, rb.seed
            )));
        }
    }
    let n_tiers = a.tiers.len();
    let build = |metric: &'static str, f: fn(&TierSummary) -> f64| MetricComparison {
        metric,
        a: a.tiers.iter().map(f).collect(),
        b: b.tiers.iter().map(f).collect(),
        reduction_pct: a
            .tiers
            .iter()
            .zip(&b.tiers)
            .map(|(ta, tb)| percent_reduction(f(ta), f(tb)))
            .collect(),
    };
    Ok(Comparison {
        metrics: vec![
            build("c_s", |t| t.mean_c_s),
            build("delta_p", |t| t.mean_delta_p),
            build("hsd_l_t", |t| t.mean_hsd_l_t),
            build("hsd_h_t", |t| t.mean_hsd_h_t),
            build("abs_dev_l", |t| t.mean_abs_dev_l),
            build("abs_dev_h", |t| t.mean_abs_dev_h),
        ],
        n_tiers,
    })
}

impl Comparison {
    /// CSV with one row per metric, side by side per tier, with the
    /// benchmark values appended as comment rows for context.
    pub fn to_csv(&self) -> String {
        let mut header = String::from("metric");
        for side in ["a", "b"] {
            for i in 1..=self.n_tiers {
                header.push_str(&format!(",{side}_t{i}"));
            }
        }
        for i in 1..=self.n_tiers {
            header.push_str(&format!(",reduction_pct_t{i}"));
        }
        header.push('\n');
        let mut out = header;
        for m in &self.metrics {
            out.push_str(m.metric);
            for v in m.a.iter().chain(&m.b).chain(&m.reduction_pct) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        let fmt3 = |v: &[f64; 3]| v.map(|x| x.to_string()).join(" ");
        out.push_str(&format!(
            "# benchmark c_s td3 {} pvtd3 {}\n",
            fmt3(&BENCHMARK_TD3_C_S),
            fmt3(&BENCHMARK_PVTD3_C_S)
        ));
        out.push_str(&format!(
            "# benchmark delta_p td3 {} pvtd3 {}\n",
            fmt3(&BENCHMARK_TD3_DELTA_P),
            fmt3(&BENCHMARK_PVTD3_DELTA_P)
        ));
        out.push_str(&format!(
            "# benchmark hsd_l_t td3 {} pvtd3 {}\n",
            fmt3(&BENCHMARK_TD3_HSD_L_T),
            fmt3(&BENCHMARK_PVTD3_HSD_L_T)
        ));
        out.push_str(&format!(
            "# benchmark hsd_h_t td3 {} pvtd3 {}\n",
            fmt3(&BENCHMARK_TD3_HSD_H_T),
            fmt3(&BENCHMARK_PVTD3_HSD_H_T)
        ));
        out
    }

    pub fn metric(&self, name: &str) -> Option<&MetricComparison> {
        self.metrics.iter().find(|m| m.metric == name)
    }
}
