//! Single runs and parallel run matrices.

use std::collections::HashMap;

use rayon::prelude::*;

use super::config::{LoadedTrace, RunConfig, TraceSpec};
use super::results::ResultRow;
use crate::coordinator::measure_features;
use crate::error::{Error, Result};
use crate::sim::{simulate, Policy, SimConfig, SimOutput};

pub const THREADS_ENV: &str = "ATHENA_SIM_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub config: RunConfig,
    pub output: SimOutput,
    /// IPC of the same configuration with every speculator off.
    pub baseline_ipc: f64,
}

impl RunResult {
    pub fn ipc(&self) -> f64 {
        self.output.ipc()
    }

    pub fn speedup(&self) -> f64 {
        if self.baseline_ipc > 0.0 {
            self.ipc() / self.baseline_ipc
        } else {
            0.0
        }
    }

    pub fn row(&self) -> ResultRow {
        let f = measure_features(&self.output.totals);
        let t = &self.output.totals;
        ResultRow {
            trace: self.config.trace.label(),
            policy: self.config.sim.policy.name(),
            pf: pf_label(&self.config.sim),
            ocp: self.config.sim.ocp.to_string(),
            bw_gbs: self.config.bw_gbs(),
            seed: self.config.sim.seed,
            metrics: Some(super::results::Metrics {
                ipc: self.ipc(),
                speedup: self.speedup(),
                pf_acc: f.pf_accuracy,
                ocp_acc: f.ocp_accuracy,
                bw_usage: f.bw_usage,
                pollution: f.cache_pollution,
                action_hist: self.output.action_histogram(),
                dram_demand: t.dram_requests_demand,
                dram_pf: t.dram_requests_prefetch,
                dram_ocp: t.dram_requests_ocp,
            }),
            status: "ok".into(),
        }
    }
}

/// `+`-joined names of the attached prefetchers, or `none`.
pub fn pf_label(sim: &SimConfig) -> String {
    use crate::sim::{L1dPrefetcher, L2cPrefetcher};
    let mut parts = Vec::new();
    if sim.l1d_pf != L1dPrefetcher::None {
        parts.push(sim.l1d_pf.to_string());
    }
    if sim.l2c_pf != L2cPrefetcher::None {
        parts.push(sim.l2c_pf.to_string());
    }
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join("+")
    }
}

fn baseline_of(cfg: &RunConfig) -> RunConfig {
    let mut b = cfg.clone();
    b.sim.policy = Policy::NONE;
    b
}

/// Runs `cfg` and its all-off baseline on an already loaded trace.
pub fn run_loaded(cfg: &RunConfig, trace: &LoadedTrace) -> Result<RunResult> {
    cfg.validate()?;
    let output = simulate(&trace.records, &cfg.sim)?;
    let baseline_ipc = if cfg.sim.policy == Policy::NONE {
        output.ipc()
    } else {
        simulate(&trace.records, &baseline_of(cfg).sim)?.ipc()
    };
    Ok(RunResult { config: cfg.clone(), output, baseline_ipc })
}

pub fn run_one(cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    run_loaded(cfg, &cfg.load_trace()?)
}

/// Worker count: `requested` (0 means all cores), capped by the
/// environment variable when it is set.
pub fn worker_count(requested: usize) -> usize {
    let hw = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut n = if requested == 0 { hw } else { requested };
    if let Some(cap) = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if cap > 0 {
            n = n.min(cap);
        }
    }
    n.max(1)
}

pub(crate) fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(worker_count(workers)).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

type TraceKey = (TraceSpec, u64, u64);

fn trace_key(cfg: &RunConfig) -> TraceKey {
    (cfg.trace.clone(), cfg.total_instructions(), cfg.sim.seed)
}

/// Runs every config, sharing trace generation and baseline runs between
/// cells. Results come back in input order.
pub fn run_configs(cfgs: &[RunConfig], workers: usize) -> Vec<Result<RunResult>> {
    with_pool(workers, || {
        let mut keys: Vec<TraceKey> = cfgs.iter().map(trace_key).collect();
        keys.sort();
        keys.dedup();
        let traces: HashMap<TraceKey, std::result::Result<LoadedTrace, String>> = keys
            .into_par_iter()
            .map(|k| {
                let t = k.0.load(k.1, k.2).map_err(|e| e.to_string());
                (k, t)
            })
            .collect();
        let trace_for = |c: &RunConfig| traces[&trace_key(c)].clone().map_err(Error::arg);

        // one baseline simulation per distinct baseline config
        let mut base_texts: Vec<String> =
            cfgs.iter().filter(|c| c.validate().is_ok()).map(|c| baseline_of(c).to_text()).collect();
        base_texts.sort();
        base_texts.dedup();
        let by_text: HashMap<String, RunConfig> =
            cfgs.iter().map(|c| (baseline_of(c).to_text(), baseline_of(c))).collect();
        let baselines: HashMap<String, std::result::Result<SimOutput, String>> = base_texts
            .into_par_iter()
            .map(|t| {
                let b = &by_text[&t];
                let out = trace_for(b).and_then(|tr| simulate(&tr.records, &b.sim)).map_err(|e| e.to_string());
                (t, out)
            })
            .collect();

        cfgs.par_iter()
            .map(|c| {
                c.validate()?;
                let base = baselines[&baseline_of(c).to_text()].clone().map_err(Error::arg)?;
                let output = if c.sim.policy == Policy::NONE {
                    base.clone()
                } else {
                    simulate(&trace_for(c)?.records, &c.sim)?
                };
                Ok(RunResult { config: c.clone(), output, baseline_ipc: base.ipc() })
            })
            .collect()
    })
}

/// A Cartesian product of config overrides on top of a base config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grid {
    pub base: RunConfig,
    /// Axes in declaration order; the first axis varies slowest.
    pub axes: Vec<(String, Vec<String>)>,
}

impl Grid {
    pub fn new(base: RunConfig) -> Self {
        Self { base, axes: Vec::new() }
    }

    pub fn axis(mut self, key: &str, values: &[&str]) -> Self {
        self.axes.push((key.to_string(), values.iter().map(|v| v.to_string()).collect()));
        self
    }

    /// Parses grid text: ordinary `key = value` lines set the base config,
    /// `axis key = v1 | v2 | ...` lines declare axes.
    pub fn parse(text: &str) -> Result<Self> {
        let mut grid = Grid::default();
        let mut base_lines = String::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            match line.strip_prefix("axis ") {
                Some(rest) => grid.add_axis_spec(rest)?,
                None => {
                    base_lines.push_str(line);
                    base_lines.push('\n');
                }
            }
        }
        grid.base.apply_text(&base_lines)?;
        Ok(grid)
    }

    /// `key=v1|v2|...`
    pub fn add_axis_spec(&mut self, spec: &str) -> Result<()> {
        let (k, vs) =
            spec.split_once('=').ok_or_else(|| Error::arg(format!("axis expects key=v1|v2, got `{spec}`")))?;
        let values: Vec<String> = vs.split('|').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        let key = k.trim().to_string();
        RunConfig::default().get(&key)?;
        self.axes.push((key, values));
        Ok(())
    }

    pub fn len(&self) -> usize {
        if self.axes.is_empty() {
            0
        } else {
            self.axes.iter().map(|(_, v)| v.len()).product()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell configs in canonical order. A cell whose override fails to
    /// apply is returned as an error in place.
    pub fn cells(&self) -> Vec<Result<RunConfig>> {
        let n = self.len();
        (0..n)
            .map(|mut i| {
                let mut picks = vec![0; self.axes.len()];
                for (a, (_, vals)) in self.axes.iter().enumerate().rev() {
                    picks[a] = i % vals.len();
                    i /= vals.len();
                }
                let mut cfg = self.base.clone();
                for (a, (k, vals)) in self.axes.iter().enumerate() {
                    cfg.set(k, &vals[picks[a]])?;
                }
                Ok(cfg)
            })
            .collect()
    }
}

/// Runs every grid cell. Failed cells become error rows; the bool is
/// `true` when every cell succeeded.
pub fn run_matrix(grid: &Grid, workers: usize) -> (Vec<ResultRow>, bool) {
    let cells = grid.cells();
    let ok: Vec<RunConfig> = cells.iter().filter_map(|c| c.as_ref().ok().cloned()).collect();
    let mut results = run_configs(&ok, workers).into_iter();
    let mut all_ok = true;
    let rows = cells
        .into_iter()
        .map(|cell| {
            let (cfg, r) = match cell {
                Ok(cfg) => {
                    let r = results.next().expect("one result per valid cell");
                    (cfg, r)
                }
                Err(e) => (grid.base.clone(), Err(e)),
            };
            r.map(|r| r.row()).unwrap_or_else(|e| {
                all_ok = false;
                ResultRow::error(&cfg, &e.to_string())
            })
        })
        .collect();
    (rows, all_ok)
}
