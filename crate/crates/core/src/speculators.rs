//! Degree-controllable prefetchers and off-chip load predictors.
//!
//! Speculators always train; the coordinator only gates whether their
//! requests are issued.

use crate::mem::{line_of, Hierarchy, Level, LINE_BYTES};
use crate::telemetry::EpochTelemetry;

pub const DEFAULT_MAX_DEGREE: u32 = 4;

/// A prefetcher attached to one cache level.
pub trait Prefetcher: Send {
    fn name(&self) -> &'static str;
    fn level(&self) -> Level;
    /// Trains on a trigger access and returns up to `degree` prefetch
    /// addresses.
    fn observe(&mut self, trigger_pc: u64, trigger_addr: u64, degree: u32) -> Vec<u64>;
}

#[inline]
fn fold_pc(pc: u64) -> u64 {
    let p = pc >> 2;
    p ^ (p >> 8) ^ (p >> 16) ^ (p >> 24)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StrideEntry {
    pub valid: bool,
    pub pc_tag: u64,
    pub last_addr: u64,
    pub last_stride: i64,
    /// 0..=3
    pub confidence: u8,
}

pub const STRIDE_ENTRIES: usize = 256;

/// PC-indexed stride prefetcher for the L1D.
#[derive(Debug, Clone)]
pub struct StridePrefetcher {
    table: Vec<StrideEntry>,
}

impl Default for StridePrefetcher {
    fn default() -> Self {
        Self { table: vec![StrideEntry::default(); STRIDE_ENTRIES] }
    }
}

impl StridePrefetcher {
    pub fn entry(&self, pc: u64) -> &StrideEntry {
        &self.table[(fold_pc(pc) as usize) % STRIDE_ENTRIES]
    }
}

impl Prefetcher for StridePrefetcher {
    fn name(&self) -> &'static str {
        "stride"
    }

    fn level(&self) -> Level {
        Level::L1D
    }

    fn observe(&mut self, pc: u64, addr: u64, degree: u32) -> Vec<u64> {
        let e = &mut self.table[(fold_pc(pc) as usize) % STRIDE_ENTRIES];
        if !e.valid || e.pc_tag != pc {
            *e = StrideEntry { valid: true, pc_tag: pc, last_addr: addr, last_stride: 0, confidence: 0 };
            return Vec::new();
        }
        let stride = addr.wrapping_sub(e.last_addr) as i64;
        if stride == e.last_stride && stride != 0 {
            e.confidence = (e.confidence + 1).min(3);
        } else {
            e.confidence = e.confidence.saturating_sub(1);
            if e.confidence == 0 {
                e.last_stride = stride;
                e.confidence = u8::from(stride != 0);
            }
        }
        e.last_addr = addr;
        if e.confidence < 2 || degree == 0 {
            return Vec::new();
        }
        (1..=degree as i64)
            .map(|k| addr.wrapping_add((k * e.last_stride) as u64))
            .collect()
    }
}

pub const STREAM_ENTRIES: usize = 16;
const REGION_SHIFT: u32 = 12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamEntry {
    pub region_base: u64,
    pub last_line: u64,
    /// -1, 0 (unknown) or +1
    pub direction: i8,
    pub trained: bool,
    lru: u64,
}

/// Region-based stream prefetcher for the L2C. An entry tracks one 4 KB
/// region and is trained once two consecutive line deltas agree in sign.
#[derive(Debug, Clone, Default)]
pub struct StreamPrefetcher {
    entries: Vec<StreamEntry>,
    stamp: u64,
}

impl StreamPrefetcher {
    pub fn entries(&self) -> &[StreamEntry] {
        &self.entries
    }
}

impl Prefetcher for StreamPrefetcher {
    fn name(&self) -> &'static str {
        "stream"
    }

    fn level(&self) -> Level {
        Level::L2C
    }

    fn observe(&mut self, _pc: u64, addr: u64, degree: u32) -> Vec<u64> {
        self.stamp += 1;
        let line = line_of(addr);
        let region = line >> REGION_SHIFT << REGION_SHIFT;
        let stamp = self.stamp;
        let idx = match self.entries.iter().position(|e| e.region_base == region) {
            Some(i) => i,
            None => {
                let fresh = StreamEntry { region_base: region, last_line: line, direction: 0, trained: false, lru: stamp };
                if self.entries.len() < STREAM_ENTRIES {
                    self.entries.push(fresh);
                } else {
                    let victim = (0..self.entries.len()).min_by_key(|&i| self.entries[i].lru).expect("non-empty");
                    self.entries[victim] = fresh;
                }
                return Vec::new();
            }
        };
        let e = &mut self.entries[idx];
        e.lru = stamp;
        if line == e.last_line {
            return Vec::new();
        }
        let dir: i8 = if line > e.last_line { 1 } else { -1 };
        e.trained = e.direction == dir;
        e.direction = dir;
        e.last_line = line;
        if !e.trained || degree == 0 {
            return Vec::new();
        }
        (1..=degree as i64)
            .map(|k| line.wrapping_add((k * dir as i64 * LINE_BYTES as i64) as u64))
            .collect()
    }
}

/// Binary off-chip predictor.
pub trait OffChipPredictor: Send {
    fn name(&self) -> &'static str;
    /// Side-effect free prediction.
    fn predict(&self, pc: u64, addr: u64) -> bool;
    fn train(&mut self, pc: u64, addr: u64, went_offchip: bool);
}

pub const PERCEPTRON_TABLE: usize = 256;
pub const WEIGHT_MIN: i8 = -32;
pub const WEIGHT_MAX: i8 = 31;

/// Hashed perceptron over four load features with 6-bit saturating weights.
#[derive(Debug, Clone)]
pub struct PerceptronOcp {
    tables: [[i8; PERCEPTRON_TABLE]; 4],
    history: u64,
    pub activation_threshold: i32,
    pub training_threshold: i32,
}

impl Default for PerceptronOcp {
    fn default() -> Self {
        Self { tables: [[0; PERCEPTRON_TABLE]; 4], history: 0, activation_threshold: 0, training_threshold: 14 }
    }
}

impl PerceptronOcp {
    /// Table indices for (pc, pc ^ line offset, byte offset, off-chip history).
    pub fn indices(&self, pc: u64, addr: u64) -> [usize; 4] {
        let h = fold_pc(pc);
        let line_in_page = (addr >> 6) & 63;
        [
            (h as usize) % PERCEPTRON_TABLE,
            ((h ^ (line_in_page << 2)) as usize) % PERCEPTRON_TABLE,
            (addr & 63) as usize,
            (self.history & 0xff) as usize,
        ]
    }

    pub fn sum(&self, pc: u64, addr: u64) -> i32 {
        self.indices(pc, addr)
            .iter()
            .enumerate()
            .map(|(f, &i)| self.tables[f][i] as i32)
            .sum()
    }

    pub fn weight_mut(&mut self, feature: usize, index: usize) -> &mut i8 {
        &mut self.tables[feature][index]
    }
}

impl OffChipPredictor for PerceptronOcp {
    fn name(&self) -> &'static str {
        "perceptron"
    }

    fn predict(&self, pc: u64, addr: u64) -> bool {
        self.sum(pc, addr) >= self.activation_threshold
    }

    fn train(&mut self, pc: u64, addr: u64, went_offchip: bool) {
        let sum = self.sum(pc, addr);
        let predicted = sum >= self.activation_threshold;
        if predicted != went_offchip || sum.abs() < self.training_threshold {
            for (f, i) in self.indices(pc, addr).into_iter().enumerate() {
                let w = &mut self.tables[f][i];
                *w = if went_offchip { (*w + 1).min(WEIGHT_MAX) } else { (*w - 1).max(WEIGHT_MIN) };
            }
        }
        self.history = (self.history << 1) | u64::from(went_offchip);
    }
}

pub const HISTORY_OCP_ENTRIES: usize = 4096;

/// gshare-style predictor over the global off-chip outcome history.
#[derive(Debug, Clone)]
pub struct HistoryOcp {
    counters: Vec<u8>,
    history: u64,
}

impl Default for HistoryOcp {
    fn default() -> Self {
        Self { counters: vec![1; HISTORY_OCP_ENTRIES], history: 0 }
    }
}

impl HistoryOcp {
    pub fn index(&self, pc: u64) -> usize {
        (((pc >> 2) ^ self.history) as usize) % HISTORY_OCP_ENTRIES
    }

    pub fn counter_mut(&mut self, index: usize) -> &mut u8 {
        &mut self.counters[index]
    }
}

impl OffChipPredictor for HistoryOcp {
    fn name(&self) -> &'static str {
        "history"
    }

    fn predict(&self, pc: u64, _addr: u64) -> bool {
        self.counters[self.index(pc)] >= 2
    }

    fn train(&mut self, pc: u64, _addr: u64, went_offchip: bool) {
        let i = self.index(pc);
        let c = &mut self.counters[i];
        *c = if went_offchip { (*c + 1).min(3) } else { c.saturating_sub(1) };
        self.history = ((self.history << 1) | u64::from(went_offchip)) & (HISTORY_OCP_ENTRIES as u64 - 1);
    }
}

/// Sends a speculative off-chip request that reaches the memory controller
/// `issue_latency` cycles after the prediction. Returns the arrival cycle,
/// or `None` if the request was dropped at a full queue.
pub fn ocp_issue(
    mem: &mut Hierarchy,
    addr: u64,
    predict_cycle: u64,
    issue_latency: u64,
    counters: &mut EpochTelemetry,
) -> Option<u64> {
    counters.ocp_predictions += 1;
    let arrival = predict_cycle + issue_latency;
    mem.ocp_request(addr, arrival).then_some(arrival)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mem::HierarchyConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stride_confidence_reaches_two_on_third_access() {
        let mut p = StridePrefetcher::default();
        assert!(p.observe(0x400, 0, 2).is_empty());
        assert!(p.observe(0x400, 64, 2).is_empty());
        assert_eq!(p.observe(0x400, 128, 2), vec![192, 256]);
    }

    #[test]
    fn stride_degree_zero_trains_silently() {
        let mut p = StridePrefetcher::default();
        for a in [0, 64, 128, 192] {
            p.observe(0x400, a, 4);
        }
        assert!(p.observe(0x400, 256, 0).is_empty());
        assert_eq!(p.entry(0x400).last_addr, 256);
        assert_eq!(p.observe(0x400, 320, 1), vec![384]);
    }

    #[test]
    fn stride_untrained_pc_emits_nothing() {
        let mut p = StridePrefetcher::default();
        assert!(p.observe(0x999, 4096, 4).is_empty());
    }

    #[test]
    fn stride_confidence_saturates() {
        let mut p = StridePrefetcher::default();
        for k in 0..20u64 {
            p.observe(0x10, k * 8, 4);
        }
        assert_eq!(p.entry(0x10).confidence, 3);
    }

    #[test]
    fn stream_trains_on_ascending_lines() {
        let mut p = StreamPrefetcher::default();
        assert!(p.observe(0, 0x10000, 2).is_empty());
        assert!(p.observe(0, 0x10040, 2).is_empty());
        assert_eq!(p.observe(0, 0x10080, 2), vec![0x100c0, 0x10100]);
        assert!(p.observe(0, 0x100c0, 0).is_empty());
        assert_eq!(p.observe(0, 0x10040, 1), Vec::<u64>::new());
        assert_eq!(p.observe(0, 0x10000, 1), vec![0x10000 - 64]);
    }

    #[test]
    fn stream_one_entry_per_region() {
        let mut p = StreamPrefetcher::default();
        for i in 0..100u64 {
            p.observe(0, (i % 40) * 4096 + (i % 7) * 64, 4);
            let mut regions: Vec<u64> = p.entries().iter().map(|e| e.region_base).collect();
            regions.sort_unstable();
            regions.dedup();
            assert_eq!(regions.len(), p.entries().len());
            assert!(p.entries().len() <= STREAM_ENTRIES);
        }
    }

    #[test]
    fn perceptron_zero_weights_predict_offchip() {
        assert!(PerceptronOcp::default().predict(0x40, 0x1234));
    }

    #[test]
    fn perceptron_negative_weights_predict_onchip() {
        let mut p = PerceptronOcp::default();
        let idx = p.indices(0x40, 0x1234);
        for (f, i) in idx.into_iter().enumerate() {
            *p.weight_mut(f, i) = -5;
        }
        assert_eq!(p.sum(0x40, 0x1234), -20);
        assert!(!p.predict(0x40, 0x1234));
    }

    #[test]
    fn perceptron_training_stops_past_threshold() {
        let mut p = PerceptronOcp::default();
        for _ in 0..20 {
            p.train(0x40, 0x1000, true);
        }
        let settled = p.sum(0x40, 0x1000);
        assert!(settled >= p.training_threshold);
        let snapshot = p.tables;
        p.train(0x40, 0x1000, true);
        assert_eq!(p.tables, snapshot);
    }

    #[test]
    fn perceptron_weights_saturate() {
        let mut p = PerceptronOcp::default();
        let [i0, ..] = p.indices(0x40, 0);
        *p.weight_mut(0, i0) = WEIGHT_MAX;
        p.training_threshold = i32::MAX;
        p.train(0x40, 0, true);
        assert_eq!(p.tables[0][i0], WEIGHT_MAX);
    }

    #[test]
    fn predict_has_no_side_effects() {
        let mut p = PerceptronOcp::default();
        p.train(0x40, 0x80, false);
        let before = p.tables;
        let a = p.predict(0x44, 0x1000);
        let b = p.predict(0x44, 0x1000);
        assert_eq!(a, b);
        assert_eq!(before, p.tables);
    }

    #[test]
    fn perceptron_learns_separable_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut p = PerceptronOcp::default();
        let hot = |pc: u64| fold_pc(pc) % 4 == 0;
        let mut correct_tail = 0;
        for step in 0..10_000 {
            let pc = 0x40_0000 + rng.gen_range(0..512u64) * 4;
            let addr = rng.gen::<u64>() & 0xffff_ffc0;
            let outcome = hot(pc);
            if step >= 9_000 && p.predict(pc, addr) == outcome {
                correct_tail += 1;
            }
            p.train(pc, addr, outcome);
        }
        assert!(correct_tail as f64 / 1000.0 > 0.95, "accuracy {correct_tail}/1000");
    }

    #[test]
    fn history_counter_gate_and_oscillation() {
        let mut h = HistoryOcp::default();
        let i = h.index(0x40);
        *h.counter_mut(i) = 3;
        assert!(h.predict(0x40, 0));

        // two-bit automaton under alternating outcomes starting weak
        let mut c: u8 = 1;
        let mut seen = Vec::new();
        for k in 0..20 {
            c = if k % 2 == 0 { (c + 1).min(3) } else { c.saturating_sub(1) };
            seen.push(c);
        }
        assert!(seen.iter().all(|&v| (1..=2).contains(&v)));
    }

    #[test]
    fn ocp_issue_latency() {
        let mut h = Hierarchy::new(HierarchyConfig::default()).unwrap();
        let mut t = EpochTelemetry::default();
        assert_eq!(ocp_issue(&mut h, 0x1000, 100, 6, &mut t), Some(106));
        assert_eq!(ocp_issue(&mut h, 0x2000, 100, 30, &mut t), Some(130));
        assert_eq!(t.ocp_predictions, 2);
        assert_eq!(h.dram.counters().ocp, 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn emission_bounded_by_degree(
                accesses in prop::collection::vec((0u64..4, 0u64..1 << 20), 1..200),
                degree in 0u32..=4,
            ) {
                let mut s = StridePrefetcher::default();
                let mut st = StreamPrefetcher::default();
                for (pc, addr) in accesses {
                    prop_assert!(s.observe(pc * 4, addr, degree).len() <= degree as usize);
                    prop_assert!(st.observe(pc * 4, addr, degree).len() <= degree as usize);
                }
            }
        }
    }
}
