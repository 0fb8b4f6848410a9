//! Grid search over config keys, scored by geomean speedup on tuning traces.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::Write;

use super::config::{format_f64, RunConfig, TraceSpec};
use super::results::geomean;
use super::run::run_configs;
use crate::error::{Error, Result};

/// `n` evenly spaced points from `lo` to `hi` inclusive, rounded to 12
/// decimals so that `linspace(0, 1, 11)` prints as 0.1, 0.2, ...
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (v * 1e12).round() / 1e12
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchSpace {
    pub axes: Vec<(String, Vec<String>)>,
}

impl SearchSpace {
    pub fn axis(mut self, key: &str, values: &[f64]) -> Self {
        self.axes.push((key.to_string(), values.iter().map(|v| format_f64(*v)).collect()));
        self
    }

    /// `key=lo:hi:step` or `key=v1|v2|...`
    pub fn add_spec(&mut self, spec: &str) -> Result<()> {
        let (k, rest) = spec.split_once('=').ok_or_else(|| Error::arg(format!("expected key=..., got `{spec}`")))?;
        let key = k.trim();
        RunConfig::default().get(key)?;
        let values: Vec<String> = if let [lo, hi, step] = rest.split(':').collect::<Vec<&str>>()[..] {
            let p = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::config(key, format!("bad range `{rest}`")));
            let (lo, hi, step) = (p(lo)?, p(hi)?, p(step)?);
            if !(step > 0.0) || hi < lo {
                return Err(Error::config(key, format!("bad range `{rest}`")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
            linspace(lo, lo + step * (n - 1) as f64, n).into_iter().map(format_f64).collect()
        } else {
            rest.split('|').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
        };
        if values.is_empty() {
            return Err(Error::config(key, "axis has no values"));
        }
        self.axes.push((key.to_string(), values));
        Ok(())
    }

    pub fn points(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DseMode {
    Exhaustive,
    /// One axis at a time, sweeping until a full pass changes nothing.
    CoordinateDescent { max_passes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DseResult {
    pub keys: Vec<String>,
    /// Every evaluated point with its objective (`None` if a run failed),
    /// in evaluation order.
    pub scoreboard: Vec<(Vec<String>, Option<f64>)>,
    pub best: Vec<String>,
    pub best_score: f64,
    pub best_config: RunConfig,
    pub mode: DseMode,
}

fn cmp_value(a: &str, b: &str) -> Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

fn cmp_point(a: &[String], b: &[String]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| cmp_value(x, y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Higher score wins; ties go to the lexicographically smallest point.
fn better(a: (&[String], f64), b: (&[String], f64)) -> bool {
    a.1 > b.1 || (a.1 == b.1 && cmp_point(a.0, b.0) == Ordering::Less)
}

pub fn config_at(base: &RunConfig, keys: &[String], point: &[String]) -> Result<RunConfig> {
    let mut c = base.clone();
    for (k, v) in keys.iter().zip(point) {
        c.set(k, v)?;
    }
    Ok(c)
}

struct Evaluator<'a> {
    base: &'a RunConfig,
    keys: Vec<String>,
    traces: &'a [TraceSpec],
    workers: usize,
    cache: BTreeMap<Vec<String>, Option<f64>>,
    order: Vec<Vec<String>>,
}

impl Evaluator<'_> {
    fn eval(&mut self, points: &[Vec<String>]) {
        let fresh: Vec<&Vec<String>> = points.iter().filter(|p| !self.cache.contains_key(*p)).collect();
        let mut jobs = Vec::new();
        let mut owner = Vec::new();
        let mut broken = vec![false; fresh.len()];
        for (i, p) in fresh.iter().enumerate() {
            match config_at(self.base, &self.keys, p) {
                Ok(c) => {
                    for t in self.traces {
                        let mut tc = c.clone();
                        tc.trace = t.clone();
                        jobs.push(tc);
                        owner.push(i);
                    }
                }
                Err(_) => broken[i] = true,
            }
        }
        let mut speedups: Vec<Vec<f64>> = vec![Vec::new(); fresh.len()];
        for (r, &i) in run_configs(&jobs, self.workers).into_iter().zip(&owner) {
            match r {
                Ok(r) if r.speedup() > 0.0 => speedups[i].push(r.speedup()),
                _ => broken[i] = true,
            }
        }
        for (i, p) in fresh.into_iter().enumerate() {
            let score = (!broken[i] && !speedups[i].is_empty()).then(|| geomean(&speedups[i]));
            self.cache.insert(p.clone(), score);
            self.order.push(p.clone());
        }
    }

    fn best_of<'p>(&self, points: impl IntoIterator<Item = &'p Vec<String>>) -> Option<(Vec<String>, f64)> {
        let mut best: Option<(Vec<String>, f64)> = None;
        for p in points {
            if let Some(s) = self.cache[p] {
                if best.as_ref().map_or(true, |(bp, bs)| better((p, s), (bp, *bs))) {
                    best = Some((p.clone(), s));
                }
            }
        }
        best
    }
}

/// Searches `space` on top of `base`, scoring each point by the geomean
/// speedup over `tuning_traces`.
pub fn grid_search_dse(
    base: &RunConfig,
    space: &SearchSpace,
    tuning_traces: &[TraceSpec],
    mode: DseMode,
    workers: usize,
) -> Result<DseResult> {
    if tuning_traces.is_empty() {
        return Err(Error::arg("grid search needs at least one tuning trace"));
    }
    if space.axes.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::arg("grid search axis has no values"));
    }
    let keys: Vec<String> = space.axes.iter().map(|(k, _)| k.clone()).collect();
    let mut ev = Evaluator { base, keys: keys.clone(), traces: tuning_traces, workers, cache: BTreeMap::new(), order: Vec::new() };

    let best = match mode {
        DseMode::Exhaustive => {
            let n = space.points();
            let all: Vec<Vec<String>> = (0..n)
                .map(|mut i| {
                    let mut p = vec![String::new(); space.axes.len()];
                    for (a, (_, vals)) in space.axes.iter().enumerate().rev() {
                        p[a] = vals[i % vals.len()].clone();
                        i /= vals.len();
                    }
                    p
                })
                .collect();
            ev.eval(&all);
            ev.best_of(&all)
        }
        DseMode::CoordinateDescent { max_passes } => {
            // start from the base config's own value where the axis has it
            let mut cur: Vec<String> = space
                .axes
                .iter()
                .map(|(k, vals)| {
                    let now = base.get(k).unwrap_or_default();
                    vals.iter().find(|v| cmp_value(v, &now).is_eq()).unwrap_or(&vals[0]).clone()
                })
                .collect();
            ev.eval(std::slice::from_ref(&cur));
            for _ in 0..max_passes.max(1) {
                let before = cur.clone();
                for (a, (_, vals)) in space.axes.iter().enumerate() {
                    let line: Vec<Vec<String>> = vals
                        .iter()
                        .map(|v| {
                            let mut p = cur.clone();
                            p[a] = v.clone();
                            p
                        })
                        .collect();
                    ev.eval(&line);
                    if let Some((p, _)) = ev.best_of(&line) {
                        cur = p;
                    }
                }
                if cur == before {
                    break;
                }
            }
            let seen = ev.order.clone();
            ev.best_of(&seen)
        }
    };
    let (best, best_score) = best.ok_or_else(|| Error::arg("every grid point failed to run"))?;
    Ok(DseResult {
        best_config: config_at(base, &keys, &best)?,
        scoreboard: ev.order.iter().map(|p| (p.clone(), ev.cache[p])).collect(),
        keys,
        best,
        best_score,
        mode,
    })
}

impl DseResult {
    /// Scoreboard CSV: one column per axis, then `objective` and `status`.
    pub fn write_scoreboard<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut head = self.keys.clone();
        head.extend(["objective".to_string(), "status".to_string()]);
        w.write_record(&head)?;
        for (p, s) in &self.scoreboard {
            let mut rec = p.clone();
            match s {
                Some(v) => rec.extend([format_f64(*v), "ok".into()]),
                None => rec.extend([String::new(), "error".into()]),
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fails if any tuning trace is also an evaluation trace.
pub fn check_disjoint(tuning: &[TraceSpec], evaluation: &[TraceSpec]) -> Result<()> {
    match tuning.iter().find(|t| evaluation.contains(t)) {
        Some(t) => Err(Error::arg(format!("tuning trace `{t}` is also an evaluation trace"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> RunConfig {
        let mut c = RunConfig::default();
        c.apply_text("warmup_instructions = 4000\nsim_instructions = 16000\n").unwrap();
        c
    }

    #[test]
    fn linspace_matches_step() {
        let v = linspace(0.0, 1.0, 11);
        assert_eq!(v.len(), 11);
        assert_eq!(v[3], 0.3);
        assert_eq!(v[10], 1.0);
        let mut s = SearchSpace::default();
        s.add_spec("lambda_cycle=0:2:0.2").unwrap();
        assert_eq!(s.axes[0].1.len(), 11);
        assert_eq!(s.axes[0].1[7], "1.4");
        s.add_spec("alpha=0:1:0.1").unwrap();
        assert_eq!(s.points(), 121);
    }

    #[test]
    fn exhaustive_one_axis() {
        let space = SearchSpace::default().axis("alpha", &[0.0, 0.5, 1.0]);
        let traces = ["stream:n=20000".parse().unwrap()];
        let r = grid_search_dse(&quick(), &space, &traces, DseMode::Exhaustive, 1).unwrap();
        assert_eq!(r.scoreboard.len(), 3);
        let max = r.scoreboard.iter().filter_map(|(_, s)| *s).fold(f64::MIN, f64::max);
        assert_eq!(r.best_score, max);
        assert_eq!(r.best_config.sim.athena.alpha, r.best[0].parse::<f64>().unwrap());
    }

    #[test]
    fn ties_pick_smallest_point() {
        // epsilon is inert with a single-action lattice, so all scores tie
        let mut base = quick();
        base.apply_text("l2c_pf = none\nocp = none\n").unwrap();
        let space = SearchSpace::default().axis("gamma", &[0.9, 0.3, 0.6]);
        let traces = ["chase:n=20000".parse().unwrap()];
        let r = grid_search_dse(&base, &space, &traces, DseMode::Exhaustive, 1).unwrap();
        assert_eq!(r.best, vec!["0.3".to_string()]);
    }

    #[test]
    fn coordinate_descent_visits_fewer_points() {
        let space = SearchSpace::default().axis("alpha", &[0.2, 0.6]).axis("gamma", &[0.2, 0.6]).axis("tau", &[0.06, 0.12]);
        let traces = ["stream:n=20000".parse().unwrap()];
        let r = grid_search_dse(&quick(), &space, &traces, DseMode::CoordinateDescent { max_passes: 1 }, 1).unwrap();
        assert!(r.scoreboard.len() < 8);
        let mut buf = Vec::new();
        r.write_scoreboard(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("alpha,gamma,tau,objective,status\n"));
    }

    #[test]
    fn disjointness() {
        let a: TraceSpec = "stream".parse().unwrap();
        let b: TraceSpec = "chase".parse().unwrap();
        assert!(check_disjoint(&[a.clone()], &[b.clone()]).is_ok());
        assert!(check_disjoint(&[a.clone()], &[b, a]).is_err());
    }
}
