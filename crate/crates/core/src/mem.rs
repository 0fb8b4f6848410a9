//! Three-level inclusive cache hierarchy in front of a FIFO, bandwidth
//! limited DRAM channel.
//!
//! Fills are installed at request time with a `ready` cycle; a later hit on
//! a line whose data is still in flight completes no earlier than `ready`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::telemetry::EpochTelemetry;

pub const LINE_BYTES: u64 = 64;

#[inline]
pub fn line_of(addr: u64) -> u64 {
    addr & !(LINE_BYTES - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheLevelConfig {
    pub capacity: u64,
    pub associativity: u32,
    pub line_size: u64,
    pub round_trip_latency: u64,
    pub mshr_count: u32,
    /// Whether prefetches may target this level.
    pub fill_on_prefetch: bool,
}

impl CacheLevelConfig {
    pub fn new(capacity: u64, associativity: u32, latency: u64, mshr_count: u32) -> Self {
        Self {
            capacity,
            associativity,
            line_size: LINE_BYTES,
            round_trip_latency: latency,
            mshr_count,
            fill_on_prefetch: true,
        }
    }

    pub fn l1d() -> Self {
        Self::new(48 << 10, 12, 5, 16)
    }

    pub fn l2c() -> Self {
        Self::new(1280 << 10, 20, 15, 48)
    }

    pub fn llc() -> Self {
        Self::new(3 << 20, 12, 55, 64)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.line_size != LINE_BYTES {
            return Err(Error::config(name, "line_size is fixed at 64"));
        }
        if self.associativity == 0 || self.capacity == 0 {
            return Err(Error::config(name, "capacity and associativity must be >= 1"));
        }
        if self.capacity % (self.associativity as u64 * self.line_size) != 0 {
            return Err(Error::config(name, "capacity must be divisible by associativity * line_size"));
        }
        if self.round_trip_latency == 0 || self.mshr_count == 0 {
            return Err(Error::config(name, "latency and mshr_count must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheLine {
    pub tag: u64,
    pub valid: bool,
    pub prefetched: bool,
    pub lru_stamp: u64,
    pub ready: u64,
}

/// Set-associative LRU cache indexed by line address.
#[derive(Debug, Clone)]
pub struct Cache {
    cfg: CacheLevelConfig,
    sets: u64,
    ways: usize,
    lines: Vec<CacheLine>,
    stamp: u64,
    mshrs: BinaryHeap<Reverse<u64>>,
}

impl Cache {
    pub fn new(cfg: CacheLevelConfig) -> Self {
        let ways = cfg.associativity as usize;
        let sets = cfg.capacity / (cfg.associativity as u64 * cfg.line_size);
        Self {
            lines: vec![CacheLine::default(); sets as usize * ways],
            cfg,
            sets,
            ways,
            stamp: 0,
            mshrs: BinaryHeap::new(),
        }
    }

    pub fn config(&self) -> &CacheLevelConfig {
        &self.cfg
    }

    fn set_range(&self, line: u64) -> std::ops::Range<usize> {
        let set = ((line / LINE_BYTES) % self.sets) as usize;
        set * self.ways..(set + 1) * self.ways
    }

    fn find(&self, line: u64) -> Option<usize> {
        self.set_range(line).find(|&i| self.lines[i].valid && self.lines[i].tag == line)
    }

    pub fn contains(&self, line: u64) -> bool {
        self.find(line).is_some()
    }

    pub fn peek(&self, line: u64) -> Option<&CacheLine> {
        self.find(line).map(|i| &self.lines[i])
    }

    /// Looks the line up, refreshing its LRU position on a hit.
    pub fn touch(&mut self, line: u64) -> Option<CacheLine> {
        let i = self.find(line)?;
        self.stamp += 1;
        self.lines[i].lru_stamp = self.stamp;
        Some(self.lines[i])
    }

    /// Clears the prefetched bit; returns whether it was set.
    pub fn consume_prefetched(&mut self, line: u64) -> bool {
        match self.find(line) {
            Some(i) => std::mem::replace(&mut self.lines[i].prefetched, false),
            None => false,
        }
    }

    /// Installs a line and returns the address of a valid victim, if any.
    pub fn install(&mut self, line: u64, ready: u64, prefetched: bool) -> Option<u64> {
        self.stamp += 1;
        let new = CacheLine { tag: line, valid: true, prefetched, lru_stamp: self.stamp, ready };
        if let Some(i) = self.find(line) {
            let keep_flag = self.lines[i].prefetched && prefetched;
            self.lines[i] = CacheLine { prefetched: keep_flag, ready: self.lines[i].ready.min(ready), ..new };
            return None;
        }
        let range = self.set_range(line);
        let slot = range
            .clone()
            .find(|&i| !self.lines[i].valid)
            .unwrap_or_else(|| range.min_by_key(|&i| self.lines[i].lru_stamp).expect("ways >= 1"));
        let victim = self.lines[slot];
        self.lines[slot] = new;
        victim.valid.then_some(victim.tag)
    }

    pub fn invalidate(&mut self, line: u64) {
        if let Some(i) = self.find(line) {
            self.lines[i].valid = false;
            self.lines[i].prefetched = false;
        }
    }

    /// Delays a miss issued at `t` until an MSHR is free and reserves it
    /// until `completion` is known (see [`Cache::mshr_commit`]).
    fn mshr_admit(&mut self, t: u64) -> u64 {
        let mut t = t;
        loop {
            while self.mshrs.peek().is_some_and(|Reverse(c)| *c <= t) {
                self.mshrs.pop();
            }
            if self.mshrs.len() < self.cfg.mshr_count as usize {
                return t;
            }
            let Reverse(earliest) = *self.mshrs.peek().expect("non-empty");
            t = earliest;
        }
    }

    fn mshr_commit(&mut self, completion: u64) {
        self.mshrs.push(Reverse(completion));
    }

    pub fn valid_lines(&self) -> impl Iterator<Item = u64> + '_ {
        self.lines.iter().filter(|l| l.valid).map(|l| l.tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DramConfig {
    pub access_latency: u64,
    /// Bus cycles per 64-byte transfer.
    pub bus_occupancy: u64,
    pub queue_capacity: u32,
}

impl Default for DramConfig {
    fn default() -> Self {
        Self { access_latency: 100, bus_occupancy: 80, queue_capacity: 64 }
    }
}

/// Converts a per-core bandwidth in GB/s to bus cycles per line at 4 GHz.
pub fn occupancy_for_bandwidth(gbs: f64) -> u64 {
    (LINE_BYTES as f64 * 4.0 / gbs).round().max(1.0) as u64
}

pub fn bandwidth_for_occupancy(occupancy: u64) -> f64 {
    LINE_BYTES as f64 * 4.0 / occupancy as f64
}

impl DramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.access_latency == 0 || self.bus_occupancy == 0 || self.queue_capacity == 0 {
            return Err(Error::config("dram", "all DRAM parameters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequestClass {
    Demand,
    Prefetch,
    Ocp,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DramCounters {
    pub demand: u64,
    pub prefetch: u64,
    pub ocp: u64,
    pub busy_cycles: u64,
    pub dropped_prefetch: u64,
    pub dropped_ocp: u64,
}

impl DramCounters {
    pub fn transfers(&self) -> u64 {
        self.demand + self.prefetch + self.ocp
    }
}

/// FIFO memory channel: `completion = max(arrival + access, bus_free) + occupancy`.
#[derive(Debug, Clone)]
pub struct Dram {
    cfg: DramConfig,
    bus_free: u64,
    /// Completion cycles of scheduled transfers, nondecreasing.
    inflight: Vec<u64>,
    by_line: HashMap<u64, u64>,
    counters: DramCounters,
}

impl Dram {
    pub fn new(cfg: DramConfig) -> Self {
        Self { cfg, bus_free: 0, inflight: Vec::new(), by_line: HashMap::new(), counters: DramCounters::default() }
    }

    pub fn config(&self) -> &DramConfig {
        &self.cfg
    }

    pub fn counters(&self) -> DramCounters {
        self.counters
    }

    pub fn take_counters(&mut self) -> DramCounters {
        std::mem::take(&mut self.counters)
    }

    /// Completion cycle of an in-flight transfer of `line` still pending at `at`.
    pub fn pending(&self, line: u64, at: u64) -> Option<u64> {
        self.by_line.get(&line).copied().filter(|&c| c > at)
    }

    fn prune(&mut self, arrival: u64) {
        const SLACK: u64 = 1 << 16;
        if self.inflight.len() > 4 * self.cfg.queue_capacity as usize {
            let cut = self.inflight.partition_point(|&c| c + SLACK < arrival);
            self.inflight.drain(..cut);
        }
        if self.by_line.len() > 4096 {
            self.by_line.retain(|_, c| *c + SLACK >= arrival);
        }
    }

    /// Enqueues a request. Returns its completion cycle, or `None` when a
    /// speculative request finds the queue full and is dropped.
    pub fn enqueue(&mut self, line: u64, class: RequestClass, arrival: u64) -> Option<u64> {
        let line = line_of(line);
        if let Some(c) = self.pending(line, arrival) {
            return Some(c);
        }
        self.prune(arrival);
        let mut arrival = arrival;
        let first_live = self.inflight.partition_point(|&c| c <= arrival);
        let occupied = self.inflight.len() - first_live;
        let cap = self.cfg.queue_capacity as usize;
        if occupied >= cap {
            match class {
                RequestClass::Demand => arrival = self.inflight[first_live + occupied - cap],
                RequestClass::Prefetch => {
                    self.counters.dropped_prefetch += 1;
                    return None;
                }
                RequestClass::Ocp => {
                    self.counters.dropped_ocp += 1;
                    return None;
                }
            }
        }
        let start = (arrival + self.cfg.access_latency).max(self.bus_free);
        let completion = start + self.cfg.bus_occupancy;
        self.bus_free = completion;
        self.inflight.push(completion);
        self.by_line.insert(line, completion);
        self.counters.busy_cycles += self.cfg.bus_occupancy;
        match class {
            RequestClass::Demand => self.counters.demand += 1,
            RequestClass::Prefetch => self.counters.prefetch += 1,
            RequestClass::Ocp => self.counters.ocp += 1,
        }
        Some(completion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    L1D,
    L2C,
    Llc,
    Dram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub l1d: CacheLevelConfig,
    pub l2c: CacheLevelConfig,
    pub llc: CacheLevelConfig,
    pub dram: DramConfig,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            l1d: CacheLevelConfig::l1d(),
            l2c: CacheLevelConfig::l2c(),
            llc: CacheLevelConfig::llc(),
            dram: DramConfig::default(),
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        self.l1d.validate("l1d")?;
        self.l2c.validate("l2c")?;
        self.llc.validate("llc")?;
        self.dram.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DemandOutcome {
    pub completion: u64,
    pub level: Level,
    /// First demand use of a prefetched line.
    pub prefetched_hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefetchOutcome {
    Accepted { completion: u64, source: Level },
    /// Already present at the fill level (or the level refuses prefetches).
    Duplicate,
    /// The DRAM queue was full.
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LlcEviction {
    pub addr: u64,
    pub by_prefetch: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct HierarchyCounters {
    llc_misses: u64,
    llc_miss_latency_sum: u64,
}

/// L1D -> L2C -> LLC -> DRAM.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub l1d: Cache,
    pub l2c: Cache,
    pub llc: Cache,
    pub dram: Dram,
    counters: HierarchyCounters,
    evictions: Vec<LlcEviction>,
}

impl Hierarchy {
    pub fn new(cfg: HierarchyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            l1d: Cache::new(cfg.l1d),
            l2c: Cache::new(cfg.l2c),
            llc: Cache::new(cfg.llc),
            dram: Dram::new(cfg.dram),
            counters: HierarchyCounters::default(),
            evictions: Vec::new(),
        })
    }

    pub fn cache(&self, level: Level) -> Option<&Cache> {
        match level {
            Level::L1D => Some(&self.l1d),
            Level::L2C => Some(&self.l2c),
            Level::Llc => Some(&self.llc),
            Level::Dram => None,
        }
    }

    fn consume_prefetched(&mut self, line: u64) -> bool {
        let a = self.l1d.consume_prefetched(line);
        let b = self.l2c.consume_prefetched(line);
        let c = self.llc.consume_prefetched(line);
        a || b || c
    }

    /// Installs `line` into `level` and every level below it, keeping the
    /// hierarchy inclusive. LLC victims are reported as eviction events.
    fn fill(&mut self, line: u64, level: Level, ready: u64, prefetched: bool) {
        if level <= Level::Llc && !self.llc.contains(line) {
            if let Some(victim) = self.llc.install(line, ready, prefetched) {
                self.l2c.invalidate(victim);
                self.l1d.invalidate(victim);
                self.evictions.push(LlcEviction { addr: victim, by_prefetch: prefetched });
            }
        }
        if level <= Level::L2C && !self.l2c.contains(line) {
            if let Some(victim) = self.l2c.install(line, ready, prefetched) {
                self.l1d.invalidate(victim);
            }
        }
        if level <= Level::L1D && !self.l1d.contains(line) {
            self.l1d.install(line, ready, prefetched);
        }
    }

    /// Demand access: probes L1D, L2C, LLC in turn, adding each level's
    /// round-trip latency, and goes to DRAM on an LLC miss. Any in-flight
    /// DRAM transfer of the same line (e.g. an off-chip prediction) is
    /// joined rather than duplicated.
    pub fn demand_access(&mut self, addr: u64, issue: u64) -> DemandOutcome {
        let line = line_of(addr);
        let l1_lat = self.l1d.cfg.round_trip_latency;
        let l2_lat = self.l2c.cfg.round_trip_latency;
        let llc_lat = self.llc.cfg.round_trip_latency;

        if let Some(hit) = self.l1d.touch(line) {
            let prefetched_hit = self.consume_prefetched(line);
            return DemandOutcome { completion: (issue + l1_lat).max(hit.ready), level: Level::L1D, prefetched_hit };
        }
        let t = self.l1d.mshr_admit(issue);
        if let Some(hit) = self.l2c.touch(line) {
            let completion = (t + l1_lat + l2_lat).max(hit.ready);
            let prefetched_hit = self.consume_prefetched(line);
            self.l1d.mshr_commit(completion);
            self.fill(line, Level::L1D, completion, false);
            return DemandOutcome { completion, level: Level::L2C, prefetched_hit };
        }
        let t = self.l2c.mshr_admit(t);
        if let Some(hit) = self.llc.touch(line) {
            let completion = (t + l1_lat + l2_lat + llc_lat).max(hit.ready);
            let prefetched_hit = self.consume_prefetched(line);
            self.l1d.mshr_commit(completion);
            self.l2c.mshr_commit(completion);
            self.fill(line, Level::L1D, completion, false);
            return DemandOutcome { completion, level: Level::Llc, prefetched_hit };
        }
        let t = self.llc.mshr_admit(t);
        let arrival = t + l1_lat + l2_lat + llc_lat;
        let completion = self
            .dram
            .enqueue(line, RequestClass::Demand, arrival)
            .expect("demand requests are never dropped");
        self.counters.llc_misses += 1;
        self.counters.llc_miss_latency_sum += completion - arrival;
        self.l1d.mshr_commit(completion);
        self.l2c.mshr_commit(completion);
        self.llc.mshr_commit(completion);
        self.fill(line, Level::L1D, completion, false);
        DemandOutcome { completion, level: Level::Dram, prefetched_hit: false }
    }

    /// Prefetch into `fill_level` (L1D or L2C), sourcing the line from the
    /// nearest level below that holds it, else from DRAM.
    pub fn prefetch_fill(&mut self, addr: u64, fill_level: Level, issue: u64) -> PrefetchOutcome {
        let line = line_of(addr);
        let Some(target) = self.cache(fill_level) else {
            return PrefetchOutcome::Duplicate;
        };
        if !target.cfg.fill_on_prefetch || target.contains(line) {
            return PrefetchOutcome::Duplicate;
        }
        let mut t = issue;
        let mut found = None;
        for level in [Level::L2C, Level::Llc] {
            if level <= fill_level {
                continue;
            }
            let cache = self.cache(level).expect("cache level");
            t += cache.cfg.round_trip_latency;
            if let Some(l) = cache.peek(line) {
                found = Some((level, t.max(l.ready)));
                break;
            }
        }
        let (source, completion) = match found {
            Some(x) => x,
            None => match self.dram.enqueue(line, RequestClass::Prefetch, t) {
                Some(c) => (Level::Dram, c),
                None => return PrefetchOutcome::Dropped,
            },
        };
        self.fill(line, fill_level, completion, true);
        PrefetchOutcome::Accepted { completion, source }
    }

    /// Off-chip prediction request arriving at the memory controller.
    pub fn ocp_request(&mut self, addr: u64, arrival: u64) -> bool {
        self.dram.enqueue(line_of(addr), RequestClass::Ocp, arrival).is_some()
    }

    pub fn drain_evictions(&mut self) -> std::vec::Drain<'_, LlcEviction> {
        self.evictions.drain(..)
    }

    /// Moves hierarchy and DRAM counters into `t`.
    pub fn close_epoch(&mut self, t: &mut EpochTelemetry) {
        let c = std::mem::take(&mut self.counters);
        let d = self.dram.take_counters();
        t.llc_misses += c.llc_misses;
        t.llc_miss_latency_sum += c.llc_miss_latency_sum;
        t.dram_requests_demand += d.demand;
        t.dram_requests_prefetch += d.prefetch;
        t.dram_requests_ocp += d.ocp;
        t.dram_busy_cycles += d.busy_cycles;
        t.dropped_prefetches += d.dropped_prefetch;
        t.dropped_ocp += d.dropped_ocp;
    }
}

/// Fraction of the epoch the DRAM bus was busy, clamped to `[0, 1]`.
pub fn bandwidth_usage(epoch: &EpochTelemetry, epoch_cycles: u64) -> f64 {
    if epoch_cycles == 0 {
        return 0.0;
    }
    (epoch.dram_busy_cycles as f64 / epoch_cycles as f64).clamp(0.0, 1.0)
}
