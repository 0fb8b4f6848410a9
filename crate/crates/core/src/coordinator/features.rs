//! State measurement: per-epoch feature ratios, the Bloom-filter trackers
//! that feed them, and quantization into a 12-bit state vector.

use std::fmt;
use std::str::FromStr;

use super::bloom::BloomFilter;
use crate::error::{Error, Result};
use crate::mem::{bandwidth_usage, line_of, LlcEviction};
use crate::telemetry::EpochTelemetry;

/// Feature values for one epoch, all in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FeatureSnapshot {
    pub pf_accuracy: f64,
    pub ocp_accuracy: f64,
    pub bw_usage: f64,
    pub cache_pollution: f64,
    pub pf_bw_share: f64,
    pub ocp_bw_share: f64,
    pub demand_bw_share: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        (num as f64 / den as f64).clamp(0.0, 1.0)
    }
}

pub fn measure_features(epoch: &EpochTelemetry) -> FeatureSnapshot {
    let total = epoch.dram_requests_total();
    FeatureSnapshot {
        pf_accuracy: ratio(epoch.prefetch_demand_hits, epoch.prefetches_issued),
        ocp_accuracy: ratio(epoch.ocp_correct, epoch.ocp_predictions),
        bw_usage: bandwidth_usage(epoch, epoch.cycles),
        cache_pollution: ratio(epoch.pollution_hits, epoch.demand_llc_misses),
        pf_bw_share: ratio(epoch.dram_requests_prefetch, total),
        ocp_bw_share: ratio(epoch.dram_requests_ocp, total),
        demand_bw_share: ratio(epoch.dram_requests_demand, total),
    }
}

/// The seven candidate state features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Feature {
    PfAccuracy,
    OcpAccuracy,
    BwUsage,
    Pollution,
    PfBwShare,
    OcpBwShare,
    DemandBwShare,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::PfAccuracy,
        Feature::OcpAccuracy,
        Feature::BwUsage,
        Feature::Pollution,
        Feature::PfBwShare,
        Feature::OcpBwShare,
        Feature::DemandBwShare,
    ];

    pub fn value(self, f: &FeatureSnapshot) -> f64 {
        match self {
            Feature::PfAccuracy => f.pf_accuracy,
            Feature::OcpAccuracy => f.ocp_accuracy,
            Feature::BwUsage => f.bw_usage,
            Feature::Pollution => f.cache_pollution,
            Feature::PfBwShare => f.pf_bw_share,
            Feature::OcpBwShare => f.ocp_bw_share,
            Feature::DemandBwShare => f.demand_bw_share,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Feature::PfAccuracy => "pf_acc",
            Feature::OcpAccuracy => "ocp_acc",
            Feature::BwUsage => "bw",
            Feature::Pollution => "pollution",
            Feature::PfBwShare => "pf_bw",
            Feature::OcpBwShare => "ocp_bw",
            Feature::DemandBwShare => "demand_bw",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::config("state_features", format!("unknown feature `{s}`")))
    }
}

pub const BUCKET_BITS: u32 = 3;
pub const MAX_STATE_FEATURES: usize = 4;

/// 12-bit packed state: four 3-bit buckets, first feature in the high bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct QuantizedState(pub u16);

pub fn bucket(v: f64) -> u16 {
    ((v.clamp(0.0, 1.0) * 8.0).floor() as u16).min(7)
}

/// Ordered selection of up to four features forming the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateEncoder {
    features: Vec<Feature>,
}

impl Default for StateEncoder {
    fn default() -> Self {
        Self {
            features: vec![Feature::PfAccuracy, Feature::OcpAccuracy, Feature::BwUsage, Feature::Pollution],
        }
    }
}

impl StateEncoder {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.len() > MAX_STATE_FEATURES {
            return Err(Error::config("state_features", "at most four features fit the state vector"));
        }
        Ok(Self { features })
    }

    /// Empty state: every epoch maps to the same state.
    pub fn stateless() -> Self {
        Self { features: Vec::new() }
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn quantize(&self, f: &FeatureSnapshot) -> QuantizedState {
        let mut s = 0u16;
        for (i, feat) in self.features.iter().enumerate() {
            let shift = BUCKET_BITS * (MAX_STATE_FEATURES as u32 - 1 - i as u32);
            s |= bucket(feat.value(f)) << shift;
        }
        QuantizedState(s)
    }

    pub fn parse_list(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(Self::stateless());
        }
        Self::new(s.split(',').map(|p| p.trim().parse()).collect::<Result<_>>()?)
    }

    pub fn to_list(&self) -> String {
        if self.features.is_empty() {
            return "none".into();
        }
        self.features.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(",")
    }
}

/// Quantizes with the default feature order (pf, ocp, bw, pollution).
pub fn quantize_state(f: &FeatureSnapshot) -> QuantizedState {
    StateEncoder::default().quantize(f)
}

/// Prefetch-accuracy and pollution Bloom filters plus their counters.
#[derive(Debug, Clone, Default)]
pub struct MeasurementTracker {
    pub accuracy_filter: BloomFilter,
    pub pollution_filter: BloomFilter,
    prefetches_issued: u64,
    prefetch_demand_hits: u64,
    demand_llc_misses: u64,
    pollution_hits: u64,
}

impl MeasurementTracker {
    pub fn on_prefetch_issued(&mut self, addr: u64) {
        self.prefetches_issued += 1;
        self.accuracy_filter.insert(line_of(addr));
    }

    /// A demand access found a line brought in by a prefetch. It counts as
    /// a prefetch hit only if this epoch's filter remembers the prefetch.
    pub fn on_demand_prefetched_hit(&mut self, addr: u64) -> bool {
        let hit = self.accuracy_filter.query(line_of(addr));
        self.prefetch_demand_hits += u64::from(hit);
        hit
    }

    pub fn on_llc_eviction(&mut self, ev: LlcEviction) {
        if ev.by_prefetch {
            self.pollution_filter.insert(ev.addr);
        }
    }

    /// Demand LLC miss; returns whether it was caused by a prefetch eviction.
    pub fn on_demand_llc_miss(&mut self, addr: u64) -> bool {
        self.demand_llc_misses += 1;
        let hit = self.pollution_filter.query(line_of(addr));
        self.pollution_hits += u64::from(hit);
        hit
    }

    /// Moves the epoch counters into `t` and zeroes them.
    pub fn close_epoch(&mut self, t: &mut EpochTelemetry) {
        t.prefetches_issued += std::mem::take(&mut self.prefetches_issued);
        t.prefetch_demand_hits += std::mem::take(&mut self.prefetch_demand_hits);
        t.demand_llc_misses += std::mem::take(&mut self.demand_llc_misses);
        t.pollution_hits += std::mem::take(&mut self.pollution_hits);
    }

    pub fn reset_filters(&mut self) {
        self.accuracy_filter.reset();
        self.pollution_filter.reset();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_denominators_give_zero() {
        let f = measure_features(&EpochTelemetry::default());
        assert_eq!(f, FeatureSnapshot::default());
    }

    #[test]
    fn direct_ratios() {
        let e = EpochTelemetry {
            cycles: 1000,
            prefetch_demand_hits: 30,
            prefetches_issued: 60,
            pollution_hits: 5,
            demand_llc_misses: 50,
            ocp_predictions: 10,
            ocp_correct: 7,
            dram_busy_cycles: 400,
            dram_requests_demand: 2,
            dram_requests_prefetch: 1,
            dram_requests_ocp: 1,
            ..EpochTelemetry::default()
        };
        let f = measure_features(&e);
        assert_eq!(f.pf_accuracy, 0.5);
        assert_eq!(f.cache_pollution, 0.1);
        assert_eq!(f.ocp_accuracy, 0.7);
        assert_eq!(f.bw_usage, 0.4);
        assert_eq!(f.pf_bw_share + f.ocp_bw_share + f.demand_bw_share, 1.0);
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_state(&FeatureSnapshot::default()), QuantizedState(0));
        let ones = FeatureSnapshot { pf_accuracy: 1.0, ocp_accuracy: 1.0, bw_usage: 1.0, cache_pollution: 1.0, ..Default::default() };
        assert_eq!(quantize_state(&ones), QuantizedState(4095));
        let f = FeatureSnapshot { pf_accuracy: 0.5, ocp_accuracy: 0.25, bw_usage: 0.99, cache_pollution: 0.0, ..Default::default() };
        assert_eq!(quantize_state(&f), QuantizedState(0b100_010_111_000));
        assert_eq!(quantize_state(&f).0, 2232);
    }

    #[test]
    fn stateless_encoder_collapses_everything() {
        let enc = StateEncoder::stateless();
        let f = FeatureSnapshot { pf_accuracy: 0.9, bw_usage: 0.3, ..Default::default() };
        assert_eq!(enc.quantize(&f), QuantizedState(0));
        assert_eq!(StateEncoder::parse_list("none").unwrap(), enc);
    }

    #[test]
    fn encoder_list_roundtrip_and_limit() {
        let enc = StateEncoder::parse_list("pf_acc,bw").unwrap();
        assert_eq!(enc.to_list(), "pf_acc,bw");
        assert!(StateEncoder::parse_list("pf_acc,ocp_acc,bw,pollution,pf_bw").is_err());
        assert!(StateEncoder::parse_list("bogus").is_err());
    }

    #[test]
    fn tracker_counts_and_resets() {
        let mut t = MeasurementTracker::default();
        t.on_prefetch_issued(0x1000);
        assert!(t.on_demand_prefetched_hit(0x1010));
        t.on_llc_eviction(LlcEviction { addr: 0x2000, by_prefetch: true });
        t.on_llc_eviction(LlcEviction { addr: 0x3000, by_prefetch: false });
        assert!(t.on_demand_llc_miss(0x2000));
        assert!(!t.on_demand_llc_miss(0x3000));
        let mut e = EpochTelemetry::default();
        t.close_epoch(&mut e);
        assert_eq!((e.prefetches_issued, e.prefetch_demand_hits), (1, 1));
        assert_eq!((e.demand_llc_misses, e.pollution_hits), (2, 1));
        t.reset_filters();
        assert!(!t.accuracy_filter.query(0x1000));
        assert!(!t.pollution_filter.query(0x2000));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn features_in_unit_interval(
                a in 0u64..1000, b in 0u64..1000, c in 0u64..1000, d in 0u64..1000,
                busy in 0u64..5000, cycles in 0u64..3000, r in prop::array::uniform3(0u64..100),
            ) {
                let e = EpochTelemetry {
                    prefetch_demand_hits: a, prefetches_issued: b, ocp_correct: c, ocp_predictions: d,
                    dram_busy_cycles: busy, cycles,
                    dram_requests_demand: r[0], dram_requests_prefetch: r[1], dram_requests_ocp: r[2],
                    pollution_hits: a, demand_llc_misses: d,
                    ..EpochTelemetry::default()
                };
                let f = measure_features(&e);
                for feat in Feature::ALL {
                    let v = feat.value(&f);
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(quantize_state(&f).0 < 4096);
                if r.iter().sum::<u64>() > 0 {
                    prop_assert!((f.pf_bw_share + f.ocp_bw_share + f.demand_bw_share - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
