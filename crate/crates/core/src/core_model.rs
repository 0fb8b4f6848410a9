//! Dispatch/retire timing core.
//!
//! Instructions are scheduled one at a time in program order. Each one gets
//! a dispatch cycle (bounded by dispatch width, window occupancy,
//! outstanding-load limit and branch-mispredict bubbles) and a retire cycle
//! (in order, bounded by retire width, loads wait for their data). Within a
//! cycle dispatch happens before retirement, so an instruction retiring in
//! cycle `c` frees its window slot for cycle `c + 1`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};
use crate::telemetry::EpochTelemetry;
use crate::trace::{Kind, TraceRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct CoreConfig {
    pub retire_width: u32,
    pub window_size: u32,
    pub max_outstanding_loads: u32,
    pub mispredict_penalty: u32,
    pub epoch_length: u64,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            retire_width: 6,
            window_size: 512,
            max_outstanding_loads: 16,
            mispredict_penalty: 17,
            epoch_length: 2000,
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("retire_width", self.retire_width as u64),
            ("window_size", self.window_size as u64),
            ("max_outstanding_loads", self.max_outstanding_loads as u64),
            ("mispredict_penalty", self.mispredict_penalty as u64),
            ("epoch_length", self.epoch_length),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::config(name, "must be >= 1"));
            }
        }
        if self.epoch_length < self.retire_width as u64 {
            return Err(Error::config("epoch_length", "must be >= retire_width"));
        }
        Ok(())
    }
}

/// The memory side as seen by the core.
pub trait MemoryPort {
    /// Issues a demand load at `cycle` and returns the cycle its data arrives.
    fn load(&mut self, pc: u64, addr: u64, cycle: u64) -> u64;
    /// Stores allocate in the hierarchy but are off the retirement path.
    fn store(&mut self, pc: u64, addr: u64, cycle: u64);
    /// Moves memory-side epoch counters into `t` and clears them.
    fn close_epoch(&mut self, t: &mut EpochTelemetry);
}

/// Fixed-latency memory for tests and examples.
#[derive(Debug, Clone, Default)]
pub struct FixedLatencyMemory {
    pub latency: u64,
}

impl MemoryPort for FixedLatencyMemory {
    fn load(&mut self, _pc: u64, _addr: u64, cycle: u64) -> u64 {
        cycle + self.latency
    }

    fn store(&mut self, _pc: u64, _addr: u64, _cycle: u64) {}

    fn close_epoch(&mut self, _t: &mut EpochTelemetry) {}
}

pub const GSHARE_ENTRIES: usize = 4096;
pub const GSHARE_HISTORY_BITS: u32 = 12;

/// gshare branch predictor: 2-bit counters indexed by `pc ^ history`.
#[derive(Debug, Clone)]
pub struct Gshare {
    counters: Vec<u8>,
    history: u64,
}

impl Default for Gshare {
    fn default() -> Self {
        // weakly not-taken
        Self { counters: vec![1; GSHARE_ENTRIES], history: 0 }
    }
}

impl Gshare {
    fn index(&self, pc: u64) -> usize {
        (((pc >> 2) ^ self.history) as usize) % GSHARE_ENTRIES
    }

    /// Predicts, trains on the true outcome and returns whether the
    /// prediction was wrong.
    pub fn predict_and_train(&mut self, pc: u64, taken: bool) -> bool {
        let idx = self.index(pc);
        let ctr = &mut self.counters[idx];
        let predicted = *ctr >= 2;
        if taken {
            *ctr = (*ctr + 1).min(3);
        } else {
            *ctr = ctr.saturating_sub(1);
        }
        let mask = (1u64 << GSHARE_HISTORY_BITS) - 1;
        self.history = ((self.history << 1) | u64::from(taken)) & mask;
        predicted != taken
    }
}

/// Timing state of one core.
#[derive(Debug, Clone)]
pub struct Core {
    cfg: CoreConfig,
    predictor: Gshare,
    dispatch_cycle: u64,
    dispatched_in_cycle: u32,
    dispatch_blocked_until: u64,
    retire_cycle: u64,
    retired_in_cycle: u32,
    /// Earliest cycle the next instruction may retire (epoch barrier).
    retire_floor: u64,
    window: VecDeque<u64>,
    outstanding_loads: BinaryHeap<Reverse<u64>>,
    epoch: EpochTelemetry,
    epoch_start: u64,
    any_retired: bool,
    total_retired: u64,
}

impl Core {
    pub fn new(cfg: CoreConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            window: VecDeque::with_capacity(cfg.window_size as usize),
            cfg,
            predictor: Gshare::default(),
            dispatch_cycle: 0,
            dispatched_in_cycle: 0,
            dispatch_blocked_until: 0,
            retire_cycle: 0,
            retired_in_cycle: 0,
            retire_floor: 0,
            outstanding_loads: BinaryHeap::new(),
            epoch: EpochTelemetry::default(),
            epoch_start: 0,
            any_retired: false,
            total_retired: 0,
        })
    }

    pub fn config(&self) -> &CoreConfig {
        &self.cfg
    }

    /// Cycle of the most recent retirement.
    pub fn now(&self) -> u64 {
        self.retire_cycle
    }

    pub fn total_retired(&self) -> u64 {
        self.total_retired
    }

    /// Advances the model by one instruction. Returns the completed epoch
    /// when this instruction's retirement closes one.
    pub fn step(&mut self, rec: &TraceRecord, mem: &mut dyn MemoryPort) -> Option<EpochTelemetry> {
        let width = self.cfg.retire_width;
        let mut t = self.dispatch_cycle.max(self.dispatch_blocked_until);
        if self.window.len() == self.cfg.window_size as usize {
            let oldest = self.window.pop_front().expect("full window");
            t = t.max(oldest + 1);
        }
        if rec.kind == Kind::Load {
            loop {
                while self.outstanding_loads.peek().is_some_and(|Reverse(c)| *c <= t) {
                    self.outstanding_loads.pop();
                }
                if self.outstanding_loads.len() < self.cfg.max_outstanding_loads as usize {
                    break;
                }
                let Reverse(earliest) = *self.outstanding_loads.peek().expect("non-empty");
                t = t.max(earliest);
            }
        }
        if t == self.dispatch_cycle && self.dispatched_in_cycle >= width {
            t += 1;
        }
        if t != self.dispatch_cycle {
            self.dispatch_cycle = t;
            self.dispatched_in_cycle = 0;
        }
        self.dispatched_in_cycle += 1;

        let ready = match rec.kind {
            Kind::Load => {
                self.epoch.loads += 1;
                let done = mem.load(rec.pc, rec.addr, t).max(t);
                self.outstanding_loads.push(Reverse(done));
                done
            }
            Kind::Store => {
                mem.store(rec.pc, rec.addr, t);
                t
            }
            Kind::CondBranch => {
                if self.predictor.predict_and_train(rec.pc, rec.taken) {
                    self.epoch.mispredicted_branches += 1;
                    self.dispatch_blocked_until = t + self.cfg.mispredict_penalty as u64 + 1;
                }
                t
            }
            Kind::Other => t,
        };

        let mut r = ready.max(self.retire_cycle).max(self.retire_floor);
        if self.any_retired && r == self.retire_cycle && self.retired_in_cycle >= width {
            r += 1;
        }
        if !self.any_retired || r != self.retire_cycle {
            self.retire_cycle = r;
            self.retired_in_cycle = 0;
        }
        self.any_retired = true;
        self.retired_in_cycle += 1;
        self.window.push_back(r);
        self.total_retired += 1;
        self.epoch.retired_instructions += 1;

        if self.epoch.retired_instructions == self.cfg.epoch_length {
            Some(self.close_epoch(mem))
        } else {
            None
        }
    }

    fn close_epoch(&mut self, mem: &mut dyn MemoryPort) -> EpochTelemetry {
        let end = self.retire_cycle + 1;
        let mut t = std::mem::take(&mut self.epoch);
        t.cycles = end - self.epoch_start;
        mem.close_epoch(&mut t);
        self.epoch_start = end;
        self.retire_floor = end;
        t
    }

    /// Closes the trailing partial epoch, if any instructions are pending.
    pub fn finish(&mut self, mem: &mut dyn MemoryPort) -> Option<EpochTelemetry> {
        (self.epoch.retired_instructions > 0).then(|| self.close_epoch(mem))
    }
}
