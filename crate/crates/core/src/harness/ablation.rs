//! Progressive state-feature ablation.

use std::io::Write;

use super::config::RunConfig;
use super::results::{write_tagged, ResultRow};
use super::run::run_configs;
use crate::coordinator::{Feature, StateEncoder};
use crate::error::Result;
use crate::sim::Policy;

/// Stage configs: stateless with correlated reward only, then one more
/// feature per stage, then the uncorrelated reward terms switched back on.
/// The last stage is `base` with `features` as its state.
pub fn ablation_configs(base: &RunConfig, features: &[Feature]) -> Result<Vec<(String, RunConfig)>> {
    let full = base.sim.athena.weights;
    let mut stages = Vec::with_capacity(features.len() + 2);
    for k in 0..=features.len() {
        let mut c = base.clone();
        c.sim.policy = Policy::Athena;
        c.sim.athena.encoder = StateEncoder::new(features[..k].to_vec())?;
        c.sim.athena.weights = full.without_uncorrelated();
        let name = if k == 0 { "stateless".to_string() } else { format!("+{}", features[k - 1].as_str()) };
        stages.push((name, c));
    }
    let mut last = stages.last().expect("at least the stateless stage").1.clone();
    last.sim.athena.weights = full;
    stages.push(("+uncorrelated".into(), last));
    Ok(stages)
}

/// One row per stage, tagged with the stage name.
pub fn ablation_run(base: &RunConfig, features: &[Feature], workers: usize) -> Result<Vec<(String, ResultRow)>> {
    let stages = ablation_configs(base, features)?;
    let cfgs: Vec<RunConfig> = stages.iter().map(|(_, c)| c.clone()).collect();
    run_configs(&cfgs, workers)
        .into_iter()
        .zip(stages)
        .map(|(r, (name, cfg))| {
            let row = match r {
                Ok(r) => r.row(),
                Err(e) => ResultRow::error(&cfg, &e.to_string()),
            };
            Ok((name, row))
        })
        .collect()
}

pub fn write_ablation<W: Write>(out: W, rows: &[(String, ResultRow)]) -> Result<()> {
    let names: Vec<String> = rows.iter().map(|(n, _)| n.clone()).collect();
    let plain: Vec<ResultRow> = rows.iter().map(|(_, r)| r.clone()).collect();
    write_tagged(out, Some(("stage", &names)), &plain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::run_one;

    fn quick() -> RunConfig {
        let mut c = RunConfig::default();
        c.apply_text("trace = stream:n=20000\nwarmup_instructions = 4000\nsim_instructions = 12000\n").unwrap();
        c
    }

    #[test]
    fn six_stages_for_four_features() {
        let base = quick();
        let feats = base.sim.athena.encoder.features().to_vec();
        let stages = ablation_configs(&base, &feats).unwrap();
        let names: Vec<&str> = stages.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["stateless", "+pf_acc", "+ocp_acc", "+bw", "+pollution", "+uncorrelated"]);
        assert!(stages[0].1.sim.athena.encoder.features().is_empty());
        assert_eq!(stages[0].1.sim.athena.weights.load, 0.0);
        assert_eq!(stages[5].1, base);
    }

    #[test]
    fn stateless_stage_uses_one_row() {
        let base = quick();
        let (_, c) = &ablation_configs(&base, &[]).unwrap()[0];
        let r = run_one(c).unwrap();
        assert!(r.output.decisions.len() > 1);
        let st = StateEncoder::stateless();
        assert_eq!(st.quantize(&Default::default()).0, 0);
    }

    #[test]
    fn final_stage_matches_direct_run() {
        let base = quick();
        let feats = base.sim.athena.encoder.features().to_vec();
        let rows = ablation_run(&base, &feats, 1).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[5].1, run_one(&base).unwrap().row());
        let mut buf = Vec::new();
        write_ablation(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("stage,trace,policy"));
        assert!(text.lines().nth(2).unwrap().starts_with("stateless,"));
    }
}
