//! Writes the three synthetic workloads to disk: a unit-stride stream, a
//! pointer chase over a heap larger than the LLC, and a phase mix of the
//! two with its `.segments` sidecar.
//!
//! cargo run --release --example gen_trace [out_dir]

use std::path::PathBuf;

use athena_sim::harness::TraceSpec;
use athena_sim::trace::{read_trace, Kind};

fn main() -> athena_sim::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "traces".into()));
    std::fs::create_dir_all(&dir)?;
    for (name, spec) in [("stream", "stream:stride=8"), ("chase", "chase:nodes=65536"), ("mix", "mix:segment=200000")] {
        let spec: TraceSpec = spec.parse()?;
        let loaded = spec.load(1_100_000, 1)?;
        let path = dir.join(format!("{name}.atrc"));
        loaded.save(&path)?;

        let back = read_trace(&path)?;
        assert_eq!(back.len(), loaded.records.len());
        let loads = back.iter().filter(|r| r.kind == Kind::Load).count();
        print!("{:<24} {:>8} records {:>7} loads", path.display(), back.len(), loads);
        match &loaded.manifest {
            Some(m) => println!("  {} segments", m.segments.len()),
            None => println!(),
        }
    }
    Ok(())
}
