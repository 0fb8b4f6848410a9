//! Every coordination policy on the stream/chase phase mix, with Athena's
//! action distribution.
//!
//! cargo run --release --example athena_vs_baselines [seed]

use athena_sim::coordinator::CoordinationAction;
use athena_sim::harness::{run_configs, RunConfig};

fn main() -> athena_sim::Result<()> {
    let seed = std::env::args().nth(1).unwrap_or_else(|| "1".into());
    let policies = ["none", "ocp-only", "pf-only", "both", "naive", "hpac", "mab", "athena"];
    let cfgs = policies
        .iter()
        .map(|p| {
            let mut c = RunConfig::default();
            c.apply_text(&format!("trace = mix:segment=200000\npolicy = {p}\nseed = {seed}\n"))?;
            Ok(c)
        })
        .collect::<athena_sim::Result<Vec<_>>>()?;
    let results = run_configs(&cfgs, 0).into_iter().collect::<athena_sim::Result<Vec<_>>>()?;

    let best_static = results[..4].iter().map(|r| r.ipc()).fold(0.0, f64::max);
    println!("{:<10}{:>9}{:>10}{:>13}", "policy", "ipc", "speedup", "/static-best");
    for (p, r) in policies.iter().zip(&results) {
        println!("{p:<10}{:>9.4}{:>10.4}{:>13.4}", r.ipc(), r.speedup(), r.ipc() / best_static);
    }

    let athena = results.last().expect("athena ran");
    let hist = athena.output.action_histogram();
    let total: u64 = hist.iter().sum();
    println!("\nathena epochs per action");
    for (i, n) in hist.iter().enumerate() {
        let a = CoordinationAction::new(i);
        println!("  {a:<10} {:>5.1}%", 100.0 * *n as f64 / total as f64);
    }
    Ok(())
}
