//! Drives the coordinator directly, without the simulator. Epoch telemetry
//! is synthesized so that prefetching pays off only while the "workload" is
//! streaming; the agent should follow the phase changes.
//!
//! cargo run --release --example agent_loop

use athena_sim::coordinator::{Athena, AthenaConfig, CoordinationAction, MeasurementTracker};
use athena_sim::telemetry::EpochTelemetry;

fn epoch(streaming: bool, action: CoordinationAction) -> EpochTelemetry {
    let pf = action.any_prefetcher();
    let ocp = action.ocp_enabled();
    let cycles = match (streaming, pf, ocp) {
        (true, true, _) => 2_000,
        (true, false, true) => 5_200,
        (true, false, false) => 5_600,
        (false, true, _) => 9_000,
        (false, false, true) => 5_000,
        (false, false, false) => 5_600,
    };
    EpochTelemetry {
        cycles,
        retired_instructions: 2_000,
        loads: 500,
        prefetches_issued: if pf { 100 } else { 0 },
        prefetch_demand_hits: if pf && streaming { 95 } else { 3 },
        ..Default::default()
    }
}

fn main() -> athena_sim::Result<()> {
    // a little exploration lets it notice when a shelved action becomes good again
    let cfg = AthenaConfig { epsilon: 0.05, ..Default::default() };
    let mut agent = Athena::new(cfg, 4, 7)?;
    let mut tracker = MeasurementTracker::default();
    let mut action = CoordinationAction::NONE;
    let mut now = 0;
    for phase in 0..6 {
        let streaming = phase % 2 == 0;
        let mut counts = [0u32; 4];
        for _ in 0..200 {
            let e = epoch(streaming, action);
            now += e.cycles;
            action = agent.epoch_tick(&e, &mut tracker, now).action;
            counts[action.index] += 1;
        }
        println!("phase {phase} ({}): none/ocp/pf/both = {counts:?}", if streaming { "stream" } else { "chase " });
    }
    Ok(())
}
