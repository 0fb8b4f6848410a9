//! CSV result rows and geometric-mean reporting.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::config::{format_f64, RunConfig};
use super::run::pf_label;
use crate::error::{Error, Result};

/// Bumped whenever columns change. Written as a leading comment line.
pub const SCHEMA_VERSION: u32 = 1;

const HEAD: &[&str] = &["trace", "policy", "pf", "ocp", "bw_gbs", "seed", "ipc", "speedup", "pf_acc", "ocp_acc", "bw_usage", "pollution"];
const TAIL: &[&str] = &["dram_demand", "dram_pf", "dram_ocp", "status"];

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub ipc: f64,
    pub speedup: f64,
    pub pf_acc: f64,
    pub ocp_acc: f64,
    pub bw_usage: f64,
    pub pollution: f64,
    pub action_hist: Vec<u64>,
    pub dram_demand: u64,
    pub dram_pf: u64,
    pub dram_ocp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub trace: String,
    pub policy: String,
    pub pf: String,
    pub ocp: String,
    pub bw_gbs: f64,
    pub seed: u64,
    /// `None` on error rows.
    pub metrics: Option<Metrics>,
    /// `ok` or `error: ...`
    pub status: String,
}

impl ResultRow {
    pub fn error(cfg: &RunConfig, message: &str) -> Self {
        Self {
            trace: cfg.trace.label(),
            policy: cfg.sim.policy.name(),
            pf: pf_label(&cfg.sim),
            ocp: cfg.sim.ocp.to_string(),
            bw_gbs: cfg.bw_gbs(),
            seed: cfg.sim.seed,
            metrics: None,
            status: format!("error: {message}"),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.metrics.is_some()
    }

    pub fn ipc(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.ipc)
    }
}

pub fn header(actions: usize) -> Vec<String> {
    let mut h: Vec<String> = HEAD.iter().map(|s| s.to_string()).collect();
    h.extend((0..actions).map(|i| format!("action_hist_{i}")));
    h.extend(TAIL.iter().map(|s| s.to_string()));
    h
}

/// Writes rows with one shared header. The histogram width is the widest
/// among the rows (4 when there are none); narrower histograms are padded
/// with zeros.
pub fn write_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    write_tagged(out, None, rows)
}

/// Like [`write_csv`] with an extra leading column, one value per row.
pub fn write_tagged<W: Write>(mut out: W, tag: Option<(&str, &[String])>, rows: &[ResultRow]) -> Result<()> {
    let actions = rows.iter().filter_map(|r| r.metrics.as_ref()).map(|m| m.action_hist.len()).max().unwrap_or(4);
    writeln!(out, "# athena-sim results v{SCHEMA_VERSION}")?;
    let mut w = csv::WriterBuilder::new().from_writer(out);
    let mut head = header(actions);
    if let Some((name, _)) = tag {
        head.insert(0, name.to_string());
    }
    w.write_record(head)?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec: Vec<String> = tag.map(|(_, vals)| vals[i].clone()).into_iter().collect();
        rec.extend([
            r.trace.clone(),
            r.policy.clone(),
            r.pf.clone(),
            r.ocp.clone(),
            format_f64(r.bw_gbs),
            r.seed.to_string(),
        ]);
        match &r.metrics {
            Some(m) => {
                for v in [m.ipc, m.speedup, m.pf_acc, m.ocp_acc, m.bw_usage, m.pollution] {
                    if !v.is_finite() {
                        return Err(Error::arg(format!("non-finite metric in row for `{}`", r.trace)));
                    }
                    rec.push(format_f64(v));
                }
                rec.extend((0..actions).map(|i| m.action_hist.get(i).copied().unwrap_or(0).to_string()));
                rec.extend([m.dram_demand, m.dram_pf, m.dram_ocp].map(|v| v.to_string()));
            }
            None => rec.extend(std::iter::repeat(String::new()).take(6 + actions + 3)),
        }
        rec.push(r.status.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let head: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        head.iter().position(|h| h == name).ok_or_else(|| Error::arg(format!("csv is missing column `{name}`")))
    };
    let mut idx = BTreeMap::new();
    for name in HEAD.iter().chain(TAIL) {
        idx.insert(*name, col(name)?);
    }
    let hist: Vec<usize> = (0..).map_while(|i| head.iter().position(|h| *h == format!("action_hist_{i}"))).collect();

    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |name: &str| rec.get(idx[name]).unwrap_or("");
        let bad = |name: &str| Error::arg(format!("csv row {}: bad `{name}`", n + 1));
        let float = |name: &str| field(name).parse::<f64>().map_err(|_| bad(name));
        let int = |name: &str| field(name).parse::<u64>().map_err(|_| bad(name));
        let status = field("status").to_string();
        let metrics = if status == "ok" {
            Some(Metrics {
                ipc: float("ipc")?,
                speedup: float("speedup")?,
                pf_acc: float("pf_acc")?,
                ocp_acc: float("ocp_acc")?,
                bw_usage: float("bw_usage")?,
                pollution: float("pollution")?,
                action_hist: hist
                    .iter()
                    .map(|&i| rec.get(i).unwrap_or("").parse::<u64>().map_err(|_| bad("action_hist")))
                    .collect::<Result<_>>()?,
                dram_demand: int("dram_demand")?,
                dram_pf: int("dram_pf")?,
                dram_ocp: int("dram_ocp")?,
            })
        } else {
            None
        };
        rows.push(ResultRow {
            trace: field("trace").into(),
            policy: field("policy").into(),
            pf: field("pf").into(),
            ocp: field("ocp").into(),
            bw_gbs: float("bw_gbs")?,
            seed: int("seed")?,
            metrics,
            status,
        });
    }
    Ok(rows)
}

pub fn geomean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    (values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64).exp()
}

/// Per-policy geomean speedup against `baseline`, pairing rows that share
/// trace, pf, ocp, bandwidth and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub baseline: String,
    /// (policy, number of paired rows, geomean speedup), in first-seen order.
    pub groups: Vec<(String, usize, f64)>,
    /// Geomean over every non-baseline row.
    pub overall: f64,
}

type PairKey = (String, String, String, String, u64);

fn pair_key(r: &ResultRow) -> PairKey {
    (r.trace.clone(), r.pf.clone(), r.ocp.clone(), format_f64(r.bw_gbs), r.seed)
}

pub fn geomean_report(rows: &[ResultRow], baseline: &str) -> Result<Report> {
    let mut base: BTreeMap<PairKey, f64> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.policy == baseline) {
        if let Some(ipc) = r.ipc() {
            base.insert(pair_key(r), ipc);
        }
    }
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in rows.iter().filter(|r| r.policy != baseline) {
        let Some(ipc) = r.ipc() else { continue };
        let b = base
            .get(&pair_key(r))
            .ok_or_else(|| Error::MissingBaseline(r.trace.clone()))?;
        let s = ipc / b;
        match groups.iter_mut().find(|(p, _)| *p == r.policy) {
            Some((_, v)) => v.push(s),
            None => groups.push((r.policy.clone(), vec![s])),
        }
    }
    let all: Vec<f64> = groups.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    Ok(Report {
        baseline: baseline.to_string(),
        groups: groups.into_iter().map(|(p, v)| (p, v.len(), geomean(&v))).collect(),
        overall: geomean(&all),
    })
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "geomean speedup vs {}", self.baseline)?;
        writeln!(f, "{:<16} {:>6} {:>10}", "policy", "rows", "geomean")?;
        for (p, n, g) in &self.groups {
            writeln!(f, "{p:<16} {n:>6} {g:>10.4}")?;
        }
        write!(f, "{:<16} {:>6} {:>10.4}", "overall", self.groups.iter().map(|g| g.1).sum::<usize>(), self.overall)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trace: &str, policy: &str, ipc: f64, hist: Vec<u64>) -> ResultRow {
        ResultRow {
            trace: trace.into(),
            policy: policy.into(),
            pf: "stream".into(),
            ocp: "perceptron".into(),
            bw_gbs: 3.2,
            seed: 1,
            metrics: Some(Metrics {
                ipc,
                speedup: 1.0,
                pf_acc: 0.5,
                ocp_acc: 0.25,
                bw_usage: 0.1,
                pollution: 0.0,
                action_hist: hist,
                dram_demand: 3,
                dram_pf: 2,
                dram_ocp: 1,
            }),
            status: "ok".into(),
        }
    }

    #[test]
    fn geomean_values() {
        assert!((geomean(&[2.0, 0.5]) - 1.0).abs() < 1e-12);
        assert!((geomean(&[1.1]) - 1.1).abs() < 1e-12);
        assert!((geomean(&[1.1, 1.21]) - 1.331f64.sqrt()).abs() < 1e-12);
        assert!((1.331f64.sqrt() - 1.1537).abs() < 1e-4);
    }

    #[test]
    fn csv_roundtrip_with_error_row() {
        let mut err = row("b", "athena", 0.0, vec![]);
        err.metrics = None;
        err.status = "error: config error in `alpha`: must lie in [0, 1]".into();
        let rows = vec![row("a,with comma", "none", 0.5, vec![1, 2, 3, 4]), err];
        let text = csv_string(&rows).unwrap();
        assert!(text.starts_with("# athena-sim results v1\ntrace,policy,pf,ocp,bw_gbs,seed,ipc,speedup"));
        assert!(text.lines().nth(1).unwrap().ends_with("action_hist_3,dram_demand,dram_pf,dram_ocp,status"));
        assert_eq!(read_csv(text.as_bytes()).unwrap(), rows);
    }

    #[test]
    fn header_only_for_no_rows() {
        let text = csv_string(&[]).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(read_csv(text.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn report_pairs_with_baseline() {
        let rows = vec![
            row("t1", "none", 1.0, vec![]),
            row("t1", "athena", 2.0, vec![]),
            row("t2", "none", 2.0, vec![]),
            row("t2", "athena", 1.0, vec![]),
            row("t2", "naive", 2.2, vec![]),
        ];
        let rep = geomean_report(&rows, "none").unwrap();
        assert_eq!(rep.groups[0], ("athena".into(), 2, 1.0));
        assert!((rep.groups[1].2 - 1.1).abs() < 1e-12);
        assert!((rep.overall - (2.0f64 * 0.5 * 1.1).powf(1.0 / 3.0)).abs() < 1e-12);
        match geomean_report(&rows[1..2], "none") {
            Err(Error::MissingBaseline(t)) => assert_eq!(t, "t1"),
            other => panic!("{other:?}"),
        }
    }
}
