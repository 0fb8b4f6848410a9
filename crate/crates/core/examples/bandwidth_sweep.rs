//! Sweeps DRAM bus occupancy on the pointer chase. As bandwidth shrinks,
//! blindly prefetching costs more, and Athena should stay close to the best
//! static combination at every point.
//!
//! cargo run --release --example bandwidth_sweep

use athena_sim::harness::{run_configs, RunConfig};

const STATICS: [&str; 4] = ["none", "ocp-only", "pf-only", "both"];

fn main() -> athena_sim::Result<()> {
    let occupancies = [160u64, 80, 40, 20];
    let policies = [&STATICS[..], &["naive", "athena"]].concat();
    let mut cfgs = Vec::new();
    for occ in occupancies {
        for p in &policies {
            let mut c = RunConfig::default();
            c.apply_text(&format!("trace = chase\npolicy = {p}\ndram_bus_occupancy = {occ}\n"))?;
            cfgs.push(c);
        }
    }
    let results = run_configs(&cfgs, 0).into_iter().collect::<athena_sim::Result<Vec<_>>>()?;

    println!("{:>5} {:>8} {:>14} {:>14}", "occ", "GB/s", "naive speedup", "athena/static");
    for (occ, row) in occupancies.iter().zip(results.chunks(policies.len())) {
        let best = row[..STATICS.len()].iter().map(|r| r.ipc()).fold(0.0, f64::max);
        let naive = &row[STATICS.len()];
        let athena = &row[STATICS.len() + 1];
        println!("{occ:>5} {:>8.2} {:>14.4} {:>14.4}", naive.config.bw_gbs(), naive.speedup(), athena.ipc() / best);
    }
    Ok(())
}
