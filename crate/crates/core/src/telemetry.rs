/// Per-epoch counters. Every state feature and every reward metric is
/// derived from these.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EpochTelemetry {
    pub cycles: u64,
    pub retired_instructions: u64,
    pub loads: u64,
    pub mispredicted_branches: u64,
    pub llc_misses: u64,
    pub llc_miss_latency_sum: u64,
    pub prefetches_issued: u64,
    pub prefetch_demand_hits: u64,
    pub ocp_predictions: u64,
    pub ocp_correct: u64,
    pub dram_requests_demand: u64,
    pub dram_requests_prefetch: u64,
    pub dram_requests_ocp: u64,
    pub dram_busy_cycles: u64,
    pub demand_llc_misses: u64,
    pub pollution_hits: u64,
    pub dropped_prefetches: u64,
    pub dropped_ocp: u64,
}

impl EpochTelemetry {
    pub fn dram_requests_total(&self) -> u64 {
        self.dram_requests_demand + self.dram_requests_prefetch + self.dram_requests_ocp
    }

    pub fn ipc(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.retired_instructions as f64 / self.cycles as f64
        }
    }

    /// Field-wise sum, used to aggregate a measured window.
    pub fn accumulate(&mut self, o: &EpochTelemetry) {
        self.cycles += o.cycles;
        self.retired_instructions += o.retired_instructions;
        self.loads += o.loads;
        self.mispredicted_branches += o.mispredicted_branches;
        self.llc_misses += o.llc_misses;
        self.llc_miss_latency_sum += o.llc_miss_latency_sum;
        self.prefetches_issued += o.prefetches_issued;
        self.prefetch_demand_hits += o.prefetch_demand_hits;
        self.ocp_predictions += o.ocp_predictions;
        self.ocp_correct += o.ocp_correct;
        self.dram_requests_demand += o.dram_requests_demand;
        self.dram_requests_prefetch += o.dram_requests_prefetch;
        self.dram_requests_ocp += o.dram_requests_ocp;
        self.dram_busy_cycles += o.dram_busy_cycles;
        self.demand_llc_misses += o.demand_llc_misses;
        self.pollution_hits += o.pollution_hits;
        self.dropped_prefetches += o.dropped_prefetches;
        self.dropped_ocp += o.dropped_ocp;
    }
}
