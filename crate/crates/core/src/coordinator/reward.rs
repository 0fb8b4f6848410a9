//! Composite reward: correlated improvement minus uncorrelated drift.

use crate::error::{Error, Result};
use crate::telemetry::EpochTelemetry;

pub const REWARD_LIMIT: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardWeights {
    pub cycle: f64,
    pub llc_miss: f64,
    pub llc_lat: f64,
    pub load: f64,
    pub mbr: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { cycle: 1.6, llc_miss: 0.0, llc_lat: 0.0, load: 0.6, mbr: 1.0 }
    }
}

impl RewardWeights {
    /// Only the cycle term; used by the stateless ablation stages.
    pub fn cycles_only(cycle: f64) -> Self {
        Self { cycle, llc_miss: 0.0, llc_lat: 0.0, load: 0.0, mbr: 0.0 }
    }

    pub fn without_uncorrelated(self) -> Self {
        Self { load: 0.0, mbr: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_cycle", self.cycle),
            ("lambda_llc_miss", self.llc_miss),
            ("lambda_llc_lat", self.llc_lat),
            ("lambda_load", self.load),
            ("lambda_mbr", self.mbr),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(name, "must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

fn delta(prev: u64, curr: u64, n: f64) -> f64 {
    (prev as f64 - curr as f64) / n
}

pub fn compute_reward(prev: &EpochTelemetry, curr: &EpochTelemetry, w: &RewardWeights, epoch_length: u64) -> f64 {
    let n = epoch_length.max(1) as f64;
    let corr = w.cycle * delta(prev.cycles, curr.cycles, n)
        + w.llc_miss * delta(prev.llc_misses, curr.llc_misses, n)
        + w.llc_lat * delta(prev.llc_miss_latency_sum, curr.llc_miss_latency_sum, n);
    let uncorr = w.load * delta(prev.loads, curr.loads, n) + w.mbr * delta(prev.mispredicted_branches, curr.mispredicted_branches, n);
    (corr - uncorr).clamp(-REWARD_LIMIT, REWARD_LIMIT)
}
