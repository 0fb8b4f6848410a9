//! One simulation: a trace replayed through the core, the hierarchy, the
//! speculators and a coordination policy.

use std::fmt;
use std::str::FromStr;

use crate::baselines::{naive_policy, tlp_filter, HpacController, HpacThresholds, Mab};
use crate::coordinator::{
    action_count, greedy_action, measure_features, select_prefetch_degree, Athena, AthenaConfig, CoordinationAction,
    Decision, MeasurementTracker, QuantizedState,
};
use crate::core_model::{Core, CoreConfig, MemoryPort};
use crate::error::{Error, Result};
use crate::mem::{Hierarchy, HierarchyConfig, Level, PrefetchOutcome};
use crate::speculators::{
    ocp_issue, HistoryOcp, OffChipPredictor, PerceptronOcp, Prefetcher, StreamPrefetcher, StridePrefetcher,
};
use crate::telemetry::EpochTelemetry;
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum L1dPrefetcher {
    None,
    Stride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum L2cPrefetcher {
    None,
    Stream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OcpKind {
    None,
    Perceptron,
    History,
}

macro_rules! named_enum {
    ($t:ty, $field:literal, $($v:path => $s:literal),+) => {
        impl $t {
            pub fn as_str(self) -> &'static str {
                match self { $($v => $s),+ }
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($v),)+
                    _ => Err(Error::config($field, format!("unknown value `{s}`"))),
                }
            }
        }
    };
}

named_enum!(L1dPrefetcher, "l1d_pf", L1dPrefetcher::None => "none", L1dPrefetcher::Stride => "stride");
named_enum!(L2cPrefetcher, "l2c_pf", L2cPrefetcher::None => "none", L2cPrefetcher::Stream => "stream");
named_enum!(OcpKind, "ocp", OcpKind::None => "none", OcpKind::Perceptron => "perceptron", OcpKind::History => "history");

/// Which coordinator drives the gating decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// A fixed lattice point at full degree.
    Static(CoordinationAction),
    Naive,
    Athena,
    Mab,
    Hpac,
}

impl Policy {
    pub const NONE: Policy = Policy::Static(CoordinationAction::NONE);
    pub const OCP_ONLY: Policy = Policy::Static(CoordinationAction::OCP_ONLY);
    pub const PF_ONLY: Policy = Policy::Static(CoordinationAction::PF_ONLY);

    /// Static policy enabling every prefetcher (and the OCP if `ocp`).
    pub fn static_parts(ocp: bool, num_prefetchers: usize, pf: bool) -> Policy {
        Policy::Static(CoordinationAction::from_parts(ocp, &vec![pf; num_prefetchers]))
    }

    pub fn name(&self) -> String {
        match self {
            Policy::Static(a) => match a.index {
                0 => "none".into(),
                1 => "ocp-only".into(),
                2 => "pf-only".into(),
                3 => "both".into(),
                i => format!("static:{i}"),
            },
            Policy::Naive => "naive".into(),
            Policy::Athena => "athena".into(),
            Policy::Mab => "mab".into(),
            Policy::Hpac => "hpac".into(),
        }
    }

    /// Resolves `pf-only` and `both` against the configured prefetcher count.
    pub fn resolve(self, num_prefetchers: usize) -> Policy {
        match self {
            Policy::Static(a) if a.index == 2 => Policy::static_parts(false, num_prefetchers, true),
            Policy::Static(a) if a.index == 3 => Policy::static_parts(true, num_prefetchers, true),
            p => p,
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Policy::NONE,
            "ocp-only" | "off-only" | "ocp" => Policy::OCP_ONLY,
            "pf-only" | "pf" => Policy::PF_ONLY,
            "both" => Policy::Static(CoordinationAction::BOTH),
            "naive" => Policy::Naive,
            "athena" => Policy::Athena,
            "mab" => Policy::Mab,
            "hpac" => Policy::Hpac,
            _ => match s.strip_prefix("static:").map(str::parse::<usize>) {
                Some(Ok(i)) => Policy::Static(CoordinationAction::new(i)),
                _ => return Err(Error::config("policy", format!("unknown policy `{s}`"))),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub core: CoreConfig,
    pub hierarchy: HierarchyConfig,
    pub l1d_pf: L1dPrefetcher,
    pub l2c_pf: L2cPrefetcher,
    pub ocp: OcpKind,
    pub ocp_issue_latency: u64,
    pub tlp_filter: bool,
    pub policy: Policy,
    pub athena: AthenaConfig,
    pub hpac: HpacThresholds,
    pub mab_discount: f64,
    pub mab_xi: f64,
    pub warmup_instructions: u64,
    pub sim_instructions: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            core: CoreConfig::default(),
            hierarchy: HierarchyConfig::default(),
            l1d_pf: L1dPrefetcher::None,
            l2c_pf: L2cPrefetcher::Stream,
            ocp: OcpKind::Perceptron,
            ocp_issue_latency: 6,
            tlp_filter: false,
            policy: Policy::Athena,
            athena: AthenaConfig::default(),
            hpac: HpacThresholds::default(),
            mab_discount: 0.99,
            mab_xi: 2.0,
            warmup_instructions: 100_000,
            sim_instructions: 1_000_000,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn num_prefetchers(&self) -> usize {
        usize::from(self.l1d_pf != L1dPrefetcher::None) + usize::from(self.l2c_pf != L2cPrefetcher::None)
    }

    pub fn action_count(&self) -> usize {
        action_count(self.num_prefetchers())
    }

    pub fn validate(&self) -> Result<()> {
        self.core.validate()?;
        self.hierarchy.validate()?;
        self.athena.validate()?;
        self.hpac.validate()?;
        if self.sim_instructions == 0 {
            return Err(Error::config("sim_instructions", "must be positive"));
        }
        if self.athena.epoch_length != self.core.epoch_length {
            return Err(Error::config("epoch_length", "core and coordinator epoch lengths differ"));
        }
        if self.warmup_instructions % self.core.epoch_length != 0 {
            return Err(Error::config("warmup_instructions", "must be a multiple of epoch_length"));
        }
        if let Policy::Static(a) = self.policy.resolve(self.num_prefetchers()) {
            if a.index >= self.action_count() {
                return Err(Error::config("policy", format!("action {} outside the {}-action lattice", a.index, self.action_count())));
            }
        }
        if !(self.mab_discount > 0.0 && self.mab_discount <= 1.0) {
            return Err(Error::config("mab_discount", "must lie in (0, 1]"));
        }
        if !(self.mab_xi >= 0.0 && self.mab_xi.is_finite()) {
            return Err(Error::config("mab_xi", "must be non-negative"));
        }
        Ok(())
    }
}

/// The memory side of one simulation, seen by the core as a [`MemoryPort`].
pub struct MemorySystem {
    pub hierarchy: Hierarchy,
    prefetchers: Vec<Box<dyn Prefetcher>>,
    ocp: Option<Box<dyn OffChipPredictor>>,
    ocp_issue_latency: u64,
    tlp: bool,
    pub tracker: MeasurementTracker,
    decision: Decision,
    pending: EpochTelemetry,
}

impl MemorySystem {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let mut prefetchers: Vec<Box<dyn Prefetcher>> = Vec::new();
        if cfg.l1d_pf == L1dPrefetcher::Stride {
            prefetchers.push(Box::new(StridePrefetcher::default()));
        }
        if cfg.l2c_pf == L2cPrefetcher::Stream {
            prefetchers.push(Box::new(StreamPrefetcher::default()));
        }
        let ocp: Option<Box<dyn OffChipPredictor>> = match cfg.ocp {
            OcpKind::None => None,
            OcpKind::Perceptron => Some(Box::new(PerceptronOcp::default())),
            OcpKind::History => Some(Box::new(HistoryOcp::default())),
        };
        Ok(Self {
            hierarchy: Hierarchy::new(cfg.hierarchy.clone())?,
            prefetchers,
            ocp,
            ocp_issue_latency: cfg.ocp_issue_latency,
            tlp: cfg.tlp_filter,
            tracker: MeasurementTracker::default(),
            decision: Decision { action: CoordinationAction::NONE, degree: 0 },
            pending: EpochTelemetry::default(),
        })
    }

    pub fn decision(&self) -> Decision {
        self.decision
    }

    pub fn set_decision(&mut self, d: Decision) {
        self.decision = d;
    }

    fn drain_evictions(&mut self) {
        for ev in self.hierarchy.drain_evictions() {
            self.tracker.on_llc_eviction(ev);
        }
    }

    fn run_prefetcher(&mut self, i: usize, pc: u64, addr: u64, issue: u64) {
        let degree = if self.decision.action.prefetcher_enabled(i) { self.decision.degree } else { 0 };
        let level = self.prefetchers[i].level();
        for pf in self.prefetchers[i].observe(pc, addr, degree) {
            if self.tlp {
                if let Some(ocp) = &self.ocp {
                    if tlp_filter(level, ocp.predict(pc, pf)) {
                        continue;
                    }
                }
            }
            if let PrefetchOutcome::Accepted { .. } = self.hierarchy.prefetch_fill(pf, level, issue) {
                self.tracker.on_prefetch_issued(pf);
            }
        }
        self.drain_evictions();
    }

    fn access(&mut self, pc: u64, addr: u64, cycle: u64, train: bool) -> u64 {
        let mut predicted = false;
        if train {
            if let Some(ocp) = &self.ocp {
                if self.decision.action.ocp_enabled() && ocp.predict(pc, addr) {
                    predicted = true;
                    ocp_issue(&mut self.hierarchy, addr, cycle, self.ocp_issue_latency, &mut self.pending);
                }
            }
        }
        let out = self.hierarchy.demand_access(addr, cycle);
        self.drain_evictions();
        let offchip = out.level == Level::Dram;
        if out.prefetched_hit {
            self.tracker.on_demand_prefetched_hit(addr);
        }
        if offchip {
            self.tracker.on_demand_llc_miss(addr);
        }
        if !train {
            return out.completion;
        }
        if let Some(ocp) = &mut self.ocp {
            ocp.train(pc, addr, offchip);
        }
        if predicted && offchip {
            self.pending.ocp_correct += 1;
        }
        let l1_latency = self.hierarchy.l1d.config().round_trip_latency;
        for i in 0..self.prefetchers.len() {
            match self.prefetchers[i].level() {
                Level::L1D => self.run_prefetcher(i, pc, addr, cycle),
                _ if out.level > Level::L1D => self.run_prefetcher(i, pc, addr, cycle + l1_latency),
                _ => {}
            }
        }
        out.completion
    }
}

impl MemoryPort for MemorySystem {
    fn load(&mut self, pc: u64, addr: u64, cycle: u64) -> u64 {
        self.access(pc, addr, cycle, true)
    }

    fn store(&mut self, pc: u64, addr: u64, cycle: u64) {
        self.access(pc, addr, cycle, false);
    }

    fn close_epoch(&mut self, t: &mut EpochTelemetry) {
        self.drain_evictions();
        self.hierarchy.close_epoch(t);
        self.tracker.close_epoch(t);
        t.ocp_predictions += std::mem::take(&mut self.pending.ocp_predictions);
        t.ocp_correct += std::mem::take(&mut self.pending.ocp_correct);
    }
}

/// The per-epoch decision maker.
pub enum Controller {
    Fixed(Decision),
    Athena(Box<Athena>),
    Mab { mab: Mab, arm: usize, prev_ipc: Option<f64>, num_prefetchers: usize, d_max: u32 },
    Hpac(HpacController),
}

fn arm_decision(arm: usize, d_max: u32) -> Decision {
    let action = CoordinationAction::new(arm);
    Decision { action, degree: if action.any_prefetcher() { d_max } else { 0 } }
}

impl Controller {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        let p = cfg.num_prefetchers();
        let d_max = cfg.athena.d_max;
        Ok(match cfg.policy.resolve(p) {
            Policy::Static(a) => Controller::Fixed(arm_decision(a.index, d_max)),
            Policy::Naive => Controller::Fixed(naive_policy(p, d_max)),
            Policy::Athena => Controller::Athena(Box::new(Athena::new(cfg.athena.clone(), cfg.action_count(), cfg.seed)?)),
            Policy::Mab => Controller::Mab {
                mab: Mab::new(cfg.action_count(), cfg.mab_discount, cfg.mab_xi)?,
                arm: 0,
                prev_ipc: None,
                num_prefetchers: p,
                d_max,
            },
            Policy::Hpac => Controller::Hpac(HpacController::new(cfg.hpac, p, d_max)),
        })
    }

    /// Decision in force before the first epoch completes.
    pub fn initial(&mut self) -> Decision {
        match self {
            Controller::Fixed(d) => *d,
            Controller::Athena(a) => {
                let s = QuantizedState(0);
                let action = greedy_action(a.store(), s);
                let c = a.config();
                Decision { action, degree: select_prefetch_degree(a.store(), s, action, c.tau, c.d_max) }
            }
            Controller::Mab { mab, arm, d_max, .. } => {
                *arm = mab.select();
                arm_decision(*arm, *d_max)
            }
            Controller::Hpac(h) => h.initial(),
        }
    }

    pub fn on_epoch(&mut self, epoch: &EpochTelemetry, tracker: &mut MeasurementTracker, now: u64) -> Decision {
        let d = match self {
            Controller::Fixed(d) => *d,
            Controller::Athena(a) => a.epoch_tick(epoch, tracker, now),
            Controller::Mab { mab, arm, prev_ipc, d_max, .. } => {
                let ipc = epoch.ipc();
                if let Some(prev) = *prev_ipc {
                    mab.update(*arm, ipc - prev);
                }
                *prev_ipc = Some(ipc);
                *arm = mab.select();
                arm_decision(*arm, *d_max)
            }
            Controller::Hpac(h) => h.step(&measure_features(epoch)),
        };
        tracker.reset_filters();
        d
    }

    pub fn athena(&self) -> Option<&Athena> {
        match self {
            Controller::Athena(a) => Some(a),
            _ => None,
        }
    }
}

/// Output of one simulation over the measured window.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub epochs: Vec<EpochTelemetry>,
    /// Decision in force during each measured epoch.
    pub decisions: Vec<Decision>,
    /// Global instruction index at which each measured epoch starts.
    pub epoch_starts: Vec<u64>,
    pub totals: EpochTelemetry,
    pub action_count: usize,
}

impl SimOutput {
    pub fn ipc(&self) -> f64 {
        self.totals.ipc()
    }

    pub fn action_histogram(&self) -> Vec<u64> {
        let mut h = vec![0; self.action_count];
        for d in &self.decisions {
            h[d.action.index] += 1;
        }
        h
    }
}

/// Replays `trace` (cyclically) for warm-up plus the measured window.
pub fn simulate(trace: &[TraceRecord], cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    if trace.is_empty() {
        return Err(Error::arg("trace is empty"));
    }
    let mut core = Core::new(cfg.core.clone())?;
    let mut mem = MemorySystem::new(cfg)?;
    let mut ctl = Controller::new(cfg)?;
    mem.set_decision(ctl.initial());

    let total = cfg.warmup_instructions + cfg.sim_instructions;
    let mut out = SimOutput {
        epochs: Vec::new(),
        decisions: Vec::new(),
        epoch_starts: Vec::new(),
        totals: EpochTelemetry::default(),
        action_count: cfg.action_count(),
    };
    let mut epoch_start = 0u64;
    let record = |epoch: EpochTelemetry, start: u64, d: Decision, out: &mut SimOutput| {
        if start >= cfg.warmup_instructions {
            out.totals.accumulate(&epoch);
            out.epochs.push(epoch);
            out.decisions.push(d);
            out.epoch_starts.push(start);
        }
    };
    for i in 0..total {
        let rec = &trace[(i % trace.len() as u64) as usize];
        if let Some(epoch) = core.step(rec, &mut mem) {
            let in_force = mem.decision();
            record(epoch, epoch_start, in_force, &mut out);
            epoch_start = i + 1;
            let next = ctl.on_epoch(&epoch, &mut mem.tracker, core.now());
            mem.set_decision(next);
        }
    }
    if let Some(epoch) = core.finish(&mut mem) {
        let in_force = mem.decision();
        record(epoch, epoch_start, in_force, &mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{generate_pointer_chase_trace, generate_stream_trace, ChaseParams, StreamParams};

    fn small(policy: Policy) -> SimConfig {
        SimConfig { policy, warmup_instructions: 10_000, sim_instructions: 40_000, ..SimConfig::default() }
    }

    fn stream() -> Vec<TraceRecord> {
        generate_stream_trace(&StreamParams { n: 60_000, stride: 8, footprint: 1 << 22, seed: 1, load_period: 4 }).unwrap()
    }

    #[test]
    fn policy_names_roundtrip() {
        for s in ["none", "ocp-only", "pf-only", "both", "naive", "athena", "mab", "hpac", "static:5"] {
            let p: Policy = s.parse().unwrap();
            assert_eq!(p.name(), s);
        }
        assert_eq!("off-only".parse::<Policy>().unwrap(), Policy::OCP_ONLY);
        assert!("bogus".parse::<Policy>().is_err());
    }

    #[test]
    fn pf_only_resolves_to_all_prefetchers() {
        assert_eq!(Policy::PF_ONLY.resolve(2), Policy::Static(CoordinationAction::new(6)));
        assert_eq!(Policy::Static(CoordinationAction::BOTH).resolve(2), Policy::Static(CoordinationAction::new(7)));
        assert_eq!(Policy::PF_ONLY.resolve(1), Policy::PF_ONLY);
    }

    #[test]
    fn measured_window_is_sim_instructions() {
        let out = simulate(&stream(), &small(Policy::NONE)).unwrap();
        assert_eq!(out.totals.retired_instructions, 40_000);
        assert_eq!(out.epochs.len(), 20);
        assert_eq!(out.epoch_starts[0], 10_000);
        assert!(out.epochs.iter().all(|e| e.retired_instructions == 2000));
    }

    #[test]
    fn disabled_speculators_issue_nothing() {
        let out = simulate(&stream(), &small(Policy::NONE)).unwrap();
        assert_eq!(out.totals.dram_requests_prefetch, 0);
        assert_eq!(out.totals.dram_requests_ocp, 0);
        assert_eq!(out.totals.prefetches_issued, 0);
        assert_eq!(out.totals.ocp_predictions, 0);
    }

    #[test]
    fn counters_respect_bounds() {
        for p in [Policy::Naive, Policy::Athena, Policy::Mab, Policy::Hpac] {
            let out = simulate(&stream(), &small(p)).unwrap();
            for e in &out.epochs {
                assert!(e.ocp_correct <= e.ocp_predictions, "{p}");
                assert!(e.pollution_hits <= e.demand_llc_misses, "{p}");
                assert!(e.cycles >= 2000 / 6);
            }
        }
    }

    #[test]
    fn prefetcher_helps_stream() {
        let none = simulate(&stream(), &small(Policy::NONE)).unwrap().ipc();
        let pf = simulate(&stream(), &small(Policy::PF_ONLY)).unwrap().ipc();
        assert!(pf > none, "pf {pf} none {none}");
    }

    #[test]
    fn deterministic() {
        let trace = generate_pointer_chase_trace(&ChaseParams::new(20_000, 1 << 14, 3)).unwrap();
        let a = simulate(&trace, &small(Policy::Athena)).unwrap();
        let b = simulate(&trace, &small(Policy::Athena)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn static_outside_lattice_rejected() {
        let cfg = SimConfig { policy: Policy::Static(CoordinationAction::new(6)), ..small(Policy::NONE) };
        assert!(simulate(&stream(), &cfg).is_err());
    }

    #[test]
    fn tlp_filter_only_affects_l1d() {
        let base = SimConfig { l1d_pf: L1dPrefetcher::Stride, l2c_pf: L2cPrefetcher::None, ..small(Policy::Naive) };
        let filtered = SimConfig { tlp_filter: true, ..base.clone() };
        let a = simulate(&stream(), &base).unwrap();
        let b = simulate(&stream(), &filtered).unwrap();
        assert!(b.totals.prefetches_issued <= a.totals.prefetches_issued);

        let l2 = SimConfig { l1d_pf: L1dPrefetcher::None, l2c_pf: L2cPrefetcher::Stream, ..small(Policy::Naive) };
        let l2f = SimConfig { tlp_filter: true, ..l2.clone() };
        assert_eq!(simulate(&stream(), &l2).unwrap(), simulate(&stream(), &l2f).unwrap());
    }
}
