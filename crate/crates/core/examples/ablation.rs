//! Feature ablation on the phase mix: stateless first, then each state
//! feature, then the uncorrelated reward terms.
//!
//! cargo run --release --example ablation

use athena_sim::harness::{ablation_run, RunConfig};

fn main() -> athena_sim::Result<()> {
    let mut base = RunConfig::default();
    base.set("trace", "mix:segment=200000")?;
    let order = base.sim.athena.encoder.features().to_vec();
    let rows = ablation_run(&base, &order, 0)?;
    println!("{:<15}{:>9}{:>10}", "stage", "ipc", "speedup");
    for (stage, row) in &rows {
        match &row.metrics {
            Some(m) => println!("{stage:<15}{:>9.4}{:>10.4}", m.ipc, m.speedup),
            None => println!("{stage:<15} {}", row.status),
        }
    }
    Ok(())
}
