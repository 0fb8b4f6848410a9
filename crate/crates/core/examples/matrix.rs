//! A small run matrix through the library API: two traces, three policies
//! and two bandwidths, written as CSV and summarized as geomean speedup.
//!
//! cargo run --release --example matrix > results.csv

use athena_sim::harness::{geomean_report, run_matrix, write_csv, Grid, RunConfig};

fn main() -> athena_sim::Result<()> {
    let mut base = RunConfig::default();
    base.set("sim_instructions", "400000")?;
    let grid = Grid::new(base)
        .axis("trace", &["stream", "chase"])
        .axis("policy", &["none", "naive", "athena"])
        .axis("bw_gbs", &["3.2", "12.8"]);

    let (rows, ok) = run_matrix(&grid, 0);
    write_csv(std::io::stdout().lock(), &rows)?;
    eprintln!("{}", geomean_report(&rows, "none")?);
    if !ok {
        eprintln!("some cells failed");
        std::process::exit(1);
    }
    Ok(())
}
