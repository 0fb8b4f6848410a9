//! Coordinate-descent search over two reward weights on tuning traces that
//! are kept apart from the evaluation trace.
//!
//! cargo run --release --example dse

use athena_sim::harness::dse::check_disjoint;
use athena_sim::harness::{grid_search_dse, linspace, DseMode, RunConfig, SearchSpace, TraceSpec};

fn main() -> athena_sim::Result<()> {
    let mut base = RunConfig::default();
    base.set("sim_instructions", "300000")?;

    let tuning: Vec<TraceSpec> = ["stream:seed=101", "chase:seed=102", "mix:segment=100000,seed=103"]
        .iter()
        .map(|s| s.parse())
        .collect::<athena_sim::Result<_>>()?;
    let evaluation: Vec<TraceSpec> = vec!["mix:segment=200000".parse()?];
    check_disjoint(&tuning, &evaluation)?;

    let space = SearchSpace::default()
        .axis("lambda_cycle", &linspace(0.0, 2.0, 11))
        .axis("lambda_mbr", &linspace(0.0, 1.0, 11));
    let r = grid_search_dse(&base, &space, &tuning, DseMode::CoordinateDescent { max_passes: 2 }, 0)?;

    println!("{} of {} grid points evaluated", r.scoreboard.len(), space.points());
    for (k, v) in r.keys.iter().zip(&r.best) {
        println!("{k} = {v}");
    }
    println!("tuning geomean speedup {:.4}", r.best_score);
    Ok(())
}
