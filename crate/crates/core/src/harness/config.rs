//! Flat `key = value` run configuration and trace descriptors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::coordinator::StateEncoder;
use crate::error::{Error, Result};
use crate::mem::{bandwidth_for_occupancy, occupancy_for_bandwidth, CacheLevelConfig};
use crate::sim::SimConfig;
use crate::trace::{
    generate_phase_mix_trace, generate_pointer_chase_trace, generate_stream_trace, read_trace, write_trace, ChaseParams, MixParams,
    SegmentKind, SegmentManifest, StreamParams, TraceRecord,
};

/// Where a run's instructions come from: a trace file or a generator.
///
/// Generator descriptors look like `stream:stride=8,footprint=8388608`,
/// `chase:nodes=65536` or `mix:segment=200000,stride=8`. Unspecified
/// parameters take defaults; `n` defaults to the run length and `seed` to
/// the run seed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceSpec {
    File(PathBuf),
    Stream(BTreeMap<String, u64>),
    Chase(BTreeMap<String, u64>),
    Mix(BTreeMap<String, u64>),
}

const STREAM_KEYS: &[&str] = &["n", "seed", "stride", "footprint", "load_period"];
const CHASE_KEYS: &[&str] = &["n", "seed", "nodes", "spacing", "load_period"];
const MIX_KEYS: &[&str] =
    &["n", "seed", "segment", "stride", "footprint", "nodes", "spacing", "stream_load_period", "chase_load_period"];

fn parse_params(body: &str, allowed: &[&str]) -> Result<BTreeMap<String, u64>> {
    let mut out = BTreeMap::new();
    for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::config("trace", format!("expected key=value, got `{part}`")))?;
        let k = k.trim();
        if !allowed.contains(&k) {
            return Err(Error::config("trace", format!("unknown generator parameter `{k}`")));
        }
        let v = parse_u64(v.trim()).map_err(|m| Error::config("trace", format!("{k}: {m}")))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}

/// Integers with optional `k`/`m` (decimal) or `K`/`M` (binary) suffix.
pub fn parse_u64(s: &str) -> std::result::Result<u64, String> {
    let (num, mul) = match s.as_bytes().last() {
        Some(b'k') => (&s[..s.len() - 1], 1_000),
        Some(b'm') => (&s[..s.len() - 1], 1_000_000),
        Some(b'K') => (&s[..s.len() - 1], 1 << 10),
        Some(b'M') => (&s[..s.len() - 1], 1 << 20),
        _ => (s, 1),
    };
    let v: u64 = num.replace('_', "").parse().map_err(|e| format!("`{s}`: {e}"))?;
    v.checked_mul(mul).ok_or_else(|| format!("`{s}` overflows"))
}

impl FromStr for TraceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, body) = s.split_once(':').unwrap_or((s, ""));
        Ok(match kind {
            "stream" => TraceSpec::Stream(parse_params(body, STREAM_KEYS)?),
            "chase" => TraceSpec::Chase(parse_params(body, CHASE_KEYS)?),
            "mix" => TraceSpec::Mix(parse_params(body, MIX_KEYS)?),
            _ if s.is_empty() => return Err(Error::config("trace", "empty trace")),
            _ => TraceSpec::File(PathBuf::from(s.strip_prefix("file:").unwrap_or(s))),
        })
    }
}

impl fmt::Display for TraceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, params) = match self {
            TraceSpec::File(p) => return write!(f, "{}", p.display()),
            TraceSpec::Stream(p) => ("stream", p),
            TraceSpec::Chase(p) => ("chase", p),
            TraceSpec::Mix(p) => ("mix", p),
        };
        f.write_str(kind)?;
        for (i, (k, v)) in params.iter().enumerate() {
            write!(f, "{}{k}={v}", if i == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// A loaded trace plus its phase manifest when it has one.
#[derive(Debug, Clone)]
pub struct LoadedTrace {
    pub records: Arc<Vec<TraceRecord>>,
    pub manifest: Option<SegmentManifest>,
}

impl LoadedTrace {
    /// Writes the trace and, for phase mixes, its `.segments` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_trace(path, &self.records)?;
        if let Some(m) = &self.manifest {
            std::fs::write(manifest_path(path), m.to_text())?;
        }
        Ok(())
    }
}

pub fn manifest_path(trace: &Path) -> PathBuf {
    let mut p = trace.as_os_str().to_owned();
    p.push(".segments");
    PathBuf::from(p)
}

impl TraceSpec {
    /// Short label for the CSV `trace` column.
    pub fn label(&self) -> String {
        match self {
            TraceSpec::File(p) => p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            _ => self.to_string(),
        }
    }

    /// Materializes the trace. Generated traces default to `default_n`
    /// records and seed `seed`.
    pub fn load(&self, default_n: u64, seed: u64) -> Result<LoadedTrace> {
        let get = |p: &BTreeMap<String, u64>, k: &str, d: u64| p.get(k).copied().unwrap_or(d);
        let plain = |records| Ok(LoadedTrace { records: Arc::new(records), manifest: None });
        match self {
            TraceSpec::File(path) => {
                let records = read_trace(path)?;
                let mp = manifest_path(path);
                let manifest = if mp.exists() { Some(SegmentManifest::parse(&std::fs::read_to_string(mp)?)?) } else { None };
                Ok(LoadedTrace { records: Arc::new(records), manifest })
            }
            TraceSpec::Stream(p) => {
                let d = StreamParams::new(default_n, 8, 8 << 20, seed);
                plain(generate_stream_trace(&StreamParams {
                    n: get(p, "n", d.n),
                    seed: get(p, "seed", d.seed),
                    stride: get(p, "stride", d.stride),
                    footprint: get(p, "footprint", d.footprint),
                    load_period: get(p, "load_period", d.load_period),
                })?)
            }
            TraceSpec::Chase(p) => {
                let d = ChaseParams::new(default_n, 1 << 16, seed);
                plain(generate_pointer_chase_trace(&ChaseParams {
                    n: get(p, "n", d.n),
                    seed: get(p, "seed", d.seed),
                    nodes: get(p, "nodes", d.nodes),
                    node_spacing: get(p, "spacing", d.node_spacing),
                    load_period: get(p, "load_period", d.load_period),
                    base: d.base,
                })?)
            }
            TraceSpec::Mix(p) => {
                let d = MixParams::default();
                let params = MixParams {
                    stride: get(p, "stride", d.stride),
                    footprint: get(p, "footprint", d.footprint),
                    nodes: get(p, "nodes", d.nodes),
                    node_spacing: get(p, "spacing", d.node_spacing),
                    stream_load_period: get(p, "stream_load_period", d.stream_load_period),
                    chase_load_period: get(p, "chase_load_period", d.chase_load_period),
                };
                let segs = alternating_segments(get(p, "n", default_n), get(p, "segment", DEFAULT_SEGMENT))?;
                let (records, manifest) = generate_phase_mix_trace(&segs, get(p, "seed", seed), &params)?;
                Ok(LoadedTrace { records: Arc::new(records), manifest: Some(manifest) })
            }
        }
    }
}

pub const DEFAULT_SEGMENT: u64 = 200_000;

/// Stream, chase, stream, ... covering `n` records; the last segment may be
/// shorter.
pub fn alternating_segments(n: u64, segment: u64) -> Result<Vec<(SegmentKind, u64)>> {
    if n == 0 || segment == 0 {
        return Err(Error::config("trace", "mix needs n > 0 and segment > 0"));
    }
    let mut out = Vec::new();
    let mut left = n;
    while left > 0 {
        let kind = if out.len() % 2 == 0 { SegmentKind::Stream } else { SegmentKind::Chase };
        let len = left.min(segment);
        out.push((kind, len));
        left -= len;
    }
    Ok(out)
}

/// One fully specified run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub trace: TraceSpec,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { trace: TraceSpec::Stream(BTreeMap::new()), sim: SimConfig::default() }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "trace",
    "policy",
    "l1d_pf",
    "l2c_pf",
    "ocp",
    "ocp_issue_latency",
    "tlp_filter",
    "seed",
    "warmup_instructions",
    "sim_instructions",
    "retire_width",
    "window_size",
    "max_outstanding_loads",
    "mispredict_penalty",
    "epoch_length",
    "l1d_capacity",
    "l1d_assoc",
    "l1d_latency",
    "l1d_mshrs",
    "l1d_fill_on_prefetch",
    "l2c_capacity",
    "l2c_assoc",
    "l2c_latency",
    "l2c_mshrs",
    "l2c_fill_on_prefetch",
    "llc_capacity",
    "llc_assoc",
    "llc_latency",
    "llc_mshrs",
    "llc_fill_on_prefetch",
    "dram_access_latency",
    "dram_bus_occupancy",
    "dram_queue_capacity",
    "bw_gbs",
    "alpha",
    "gamma",
    "epsilon",
    "tau",
    "d_max",
    "q_init",
    "update_delay_cycles",
    "lambda_cycle",
    "lambda_llc_miss",
    "lambda_llc_lat",
    "lambda_load",
    "lambda_mbr",
    "state_features",
    "hpac_acc_pf_low",
    "hpac_acc_pf_high",
    "hpac_acc_ocp_low",
    "hpac_bw_high",
    "mab_discount",
    "mab_xi",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| Error::config(key, format!("`{v}`: {e}")))
}

fn int(key: &str, v: &str) -> Result<u64> {
    parse_u64(v).map_err(|m| Error::config(key, m))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(Error::config(key, format!("expected on/off, got `{v}`"))),
    }
}

fn u32_of(key: &str, v: &str) -> Result<u32> {
    u32::try_from(int(key, v)?).map_err(|_| Error::config(key, "too large"))
}

fn cache_field(c: &mut CacheLevelConfig, key: &str, field: &str, v: &str) -> Result<()> {
    match field {
        "capacity" => c.capacity = int(key, v)?,
        "assoc" => c.associativity = u32_of(key, v)?,
        "latency" => c.round_trip_latency = int(key, v)?,
        "mshrs" => c.mshr_count = u32_of(key, v)?,
        "fill_on_prefetch" => c.fill_on_prefetch = boolean(key, v)?,
        _ => return Err(Error::config(key, "unknown key")),
    }
    Ok(())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (k, v) = (key.trim(), value.trim());
        let s = &mut self.sim;
        match k {
            "trace" => self.trace = v.parse()?,
            "policy" => s.policy = v.parse()?,
            "l1d_pf" => s.l1d_pf = v.parse()?,
            "l2c_pf" => s.l2c_pf = v.parse()?,
            "ocp" => s.ocp = v.parse()?,
            "ocp_issue_latency" => s.ocp_issue_latency = int(k, v)?,
            "tlp_filter" => s.tlp_filter = boolean(k, v)?,
            "seed" => s.seed = int(k, v)?,
            "warmup_instructions" => s.warmup_instructions = int(k, v)?,
            "sim_instructions" => s.sim_instructions = int(k, v)?,
            "retire_width" => s.core.retire_width = u32_of(k, v)?,
            "window_size" => s.core.window_size = u32_of(k, v)?,
            "max_outstanding_loads" => s.core.max_outstanding_loads = u32_of(k, v)?,
            "mispredict_penalty" => s.core.mispredict_penalty = u32_of(k, v)?,
            "epoch_length" => {
                s.core.epoch_length = int(k, v)?;
                s.athena.epoch_length = s.core.epoch_length;
            }
            "dram_access_latency" => s.hierarchy.dram.access_latency = int(k, v)?,
            "dram_bus_occupancy" => s.hierarchy.dram.bus_occupancy = int(k, v)?,
            "dram_queue_capacity" => s.hierarchy.dram.queue_capacity = u32_of(k, v)?,
            "bw_gbs" => {
                let g: f64 = num(k, v)?;
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::config(k, "must be positive"));
                }
                s.hierarchy.dram.bus_occupancy = occupancy_for_bandwidth(g);
            }
            "alpha" => s.athena.alpha = num(k, v)?,
            "gamma" => s.athena.gamma = num(k, v)?,
            "epsilon" => s.athena.epsilon = num(k, v)?,
            "tau" => s.athena.tau = num(k, v)?,
            "d_max" => s.athena.d_max = u32_of(k, v)?,
            "q_init" => s.athena.q_init = num(k, v)?,
            "update_delay_cycles" => s.athena.update_delay_cycles = int(k, v)?,
            "lambda_cycle" => s.athena.weights.cycle = num(k, v)?,
            "lambda_llc_miss" => s.athena.weights.llc_miss = num(k, v)?,
            "lambda_llc_lat" => s.athena.weights.llc_lat = num(k, v)?,
            "lambda_load" => s.athena.weights.load = num(k, v)?,
            "lambda_mbr" => s.athena.weights.mbr = num(k, v)?,
            "state_features" => s.athena.encoder = StateEncoder::parse_list(v)?,
            "hpac_acc_pf_low" => s.hpac.acc_pf_low = num(k, v)?,
            "hpac_acc_pf_high" => s.hpac.acc_pf_high = num(k, v)?,
            "hpac_acc_ocp_low" => s.hpac.acc_ocp_low = num(k, v)?,
            "hpac_bw_high" => s.hpac.bw_high = num(k, v)?,
            "mab_discount" => s.mab_discount = num(k, v)?,
            "mab_xi" => s.mab_xi = num(k, v)?,
            _ => {
                let Some((level, field)) = k.split_once('_') else {
                    return Err(Error::config(k, "unknown key"));
                };
                let h = &mut s.hierarchy;
                let c = match level {
                    "l1d" => &mut h.l1d,
                    "l2c" => &mut h.l2c,
                    "llc" => &mut h.llc,
                    _ => return Err(Error::config(k, "unknown key")),
                };
                cache_field(c, k, field, v)?;
            }
        }
        Ok(())
    }

    /// Current value of `key`, formatted so that `set(key, get(key))` is a
    /// no-op.
    pub fn get(&self, key: &str) -> Result<String> {
        let s = &self.sim;
        let w = &s.athena.weights;
        let onoff = |b: bool| if b { "on" } else { "off" }.to_string();
        let cache = |c: &CacheLevelConfig, field: &str| -> Option<String> {
            Some(match field {
                "capacity" => c.capacity.to_string(),
                "assoc" => c.associativity.to_string(),
                "latency" => c.round_trip_latency.to_string(),
                "mshrs" => c.mshr_count.to_string(),
                "fill_on_prefetch" => onoff(c.fill_on_prefetch),
                _ => return None,
            })
        };
        Ok(match key {
            "trace" => self.trace.to_string(),
            "policy" => s.policy.name(),
            "l1d_pf" => s.l1d_pf.to_string(),
            "l2c_pf" => s.l2c_pf.to_string(),
            "ocp" => s.ocp.to_string(),
            "ocp_issue_latency" => s.ocp_issue_latency.to_string(),
            "tlp_filter" => onoff(s.tlp_filter),
            "seed" => s.seed.to_string(),
            "warmup_instructions" => s.warmup_instructions.to_string(),
            "sim_instructions" => s.sim_instructions.to_string(),
            "retire_width" => s.core.retire_width.to_string(),
            "window_size" => s.core.window_size.to_string(),
            "max_outstanding_loads" => s.core.max_outstanding_loads.to_string(),
            "mispredict_penalty" => s.core.mispredict_penalty.to_string(),
            "epoch_length" => s.core.epoch_length.to_string(),
            "dram_access_latency" => s.hierarchy.dram.access_latency.to_string(),
            "dram_bus_occupancy" => s.hierarchy.dram.bus_occupancy.to_string(),
            "dram_queue_capacity" => s.hierarchy.dram.queue_capacity.to_string(),
            "bw_gbs" => format_f64(self.bw_gbs()),
            "alpha" => format_f64(s.athena.alpha),
            "gamma" => format_f64(s.athena.gamma),
            "epsilon" => format_f64(s.athena.epsilon),
            "tau" => format_f64(s.athena.tau),
            "d_max" => s.athena.d_max.to_string(),
            "q_init" => format_f64(s.athena.q_init),
            "update_delay_cycles" => s.athena.update_delay_cycles.to_string(),
            "lambda_cycle" => format_f64(w.cycle),
            "lambda_llc_miss" => format_f64(w.llc_miss),
            "lambda_llc_lat" => format_f64(w.llc_lat),
            "lambda_load" => format_f64(w.load),
            "lambda_mbr" => format_f64(w.mbr),
            "state_features" => s.athena.encoder.to_list(),
            "hpac_acc_pf_low" => format_f64(s.hpac.acc_pf_low),
            "hpac_acc_pf_high" => format_f64(s.hpac.acc_pf_high),
            "hpac_acc_ocp_low" => format_f64(s.hpac.acc_ocp_low),
            "hpac_bw_high" => format_f64(s.hpac.bw_high),
            "mab_discount" => format_f64(s.mab_discount),
            "mab_xi" => format_f64(s.mab_xi),
            _ => {
                let found = key.split_once('_').and_then(|(level, field)| match level {
                    "l1d" => cache(&s.hierarchy.l1d, field),
                    "l2c" => cache(&s.hierarchy.l2c, field),
                    "llc" => cache(&s.hierarchy.llc, field),
                    _ => None,
                });
                return found.ok_or_else(|| Error::config(key, "unknown key"));
            }
        })
    }

    pub fn bw_gbs(&self) -> f64 {
        bandwidth_for_occupancy(self.sim.hierarchy.dram.bus_occupancy)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config("config", format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(c)
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::arg(format!("--set expects key=value, got `{kv}`")))?;
        self.set(k, v)
    }

    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .filter(|k| **k != "bw_gbs")
            .map(|k| format!("{k} = {}\n", self.get(k).expect("listed keys are readable")))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()
    }

    pub fn total_instructions(&self) -> u64 {
        self.sim.warmup_instructions + self.sim.sim_instructions
    }

    pub fn load_trace(&self) -> Result<LoadedTrace> {
        self.trace.load(self.total_instructions(), self.sim.seed)
    }
}

/// Shortest decimal that round-trips, so CSV and config text stay stable.
pub fn format_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}
