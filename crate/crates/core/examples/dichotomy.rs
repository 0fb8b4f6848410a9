//! Static speculator combinations on a stream and a pointer-chase trace.
//! Prefetching wins on the stream and loses on the chase, where off-chip
//! prediction is the better bet.
//!
//! cargo run --release --example dichotomy [occupancy]

use athena_sim::harness::{run_configs, RunConfig};

fn main() -> athena_sim::Result<()> {
    let occupancy = std::env::args().nth(1).unwrap_or_else(|| "80".into());
    let policies = ["none", "ocp-only", "pf-only", "both", "naive"];
    let traces = ["stream", "chase"];

    let mut cfgs = Vec::new();
    for t in traces {
        for p in policies {
            let mut c = RunConfig::default();
            c.set("trace", t)?;
            c.set("policy", p)?;
            c.set("dram_bus_occupancy", &occupancy)?;
            cfgs.push(c);
        }
    }
    let results = run_configs(&cfgs, 0).into_iter().collect::<athena_sim::Result<Vec<_>>>()?;

    println!("occupancy {occupancy} cycles/line, IPC");
    println!("{:<8}{}", "trace", policies.map(|p| format!("{p:>10}")).concat());
    for (t, chunk) in traces.iter().zip(results.chunks(policies.len())) {
        let mut line = format!("{t:<8}");
        for r in chunk {
            line += &format!("{:>10.4}", r.ipc());
        }
        println!("{line}");
    }
    Ok(())
}
