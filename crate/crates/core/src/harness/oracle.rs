//! Per-phase oracle actions and how often a policy picks one.

use crate::coordinator::CoordinationAction;
use crate::sim::SimOutput;
use crate::trace::{SegmentKind, SegmentManifest};

/// Actions whose IPC is within `tolerance` (relative) of the best.
pub fn near_best(ipcs: &[(CoordinationAction, f64)], tolerance: f64) -> Vec<CoordinationAction> {
    let best = ipcs.iter().map(|&(_, v)| v).fold(f64::MIN, f64::max);
    ipcs.iter().filter(|&&(_, v)| v >= best * (1.0 - tolerance)).map(|&(a, _)| a).collect()
}

/// Oracle action sets for the two phase kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseOracle {
    pub stream: Vec<CoordinationAction>,
    pub chase: Vec<CoordinationAction>,
}

impl PhaseOracle {
    pub fn for_kind(&self, kind: SegmentKind) -> &[CoordinationAction] {
        match kind {
            SegmentKind::Stream => &self.stream,
            SegmentKind::Chase => &self.chase,
        }
    }

    /// Fraction of measured epochs whose decision is an oracle action for
    /// the phase the epoch starts in.
    pub fn hit_rate(&self, out: &SimOutput, manifest: &SegmentManifest) -> f64 {
        let mut hits = 0usize;
        let mut total = 0usize;
        for (d, &start) in out.decisions.iter().zip(&out.epoch_starts) {
            if let Some(seg) = manifest.segment_at(start) {
                total += 1;
                hits += usize::from(self.for_kind(seg.kind).contains(&d.action));
            }
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coordinator::Decision;
    use crate::trace::Segment;

    #[test]
    fn near_best_tolerance() {
        let a = |i| CoordinationAction::new(i);
        let ipcs = [(a(0), 0.25), (a(1), 0.34), (a(2), 0.40), (a(3), 0.395)];
        assert_eq!(near_best(&ipcs, 0.02), vec![a(2), a(3)]);
        assert_eq!(near_best(&ipcs, 0.0), vec![a(2)]);
    }

    #[test]
    fn hit_rate_follows_phases() {
        let manifest = SegmentManifest {
            segments: vec![
                Segment { kind: SegmentKind::Stream, start: 0, len: 100 },
                Segment { kind: SegmentKind::Chase, start: 100, len: 100 },
            ],
        };
        let oracle = PhaseOracle { stream: vec![CoordinationAction::PF_ONLY], chase: vec![CoordinationAction::NONE] };
        let d = |a| Decision { action: a, degree: 0 };
        let out = SimOutput {
            epochs: vec![Default::default(); 4],
            decisions: vec![d(CoordinationAction::PF_ONLY), d(CoordinationAction::PF_ONLY), d(CoordinationAction::NONE), d(CoordinationAction::NONE)],
            // the last epoch wraps around into the stream phase again
            epoch_starts: vec![0, 150, 180, 250],
            totals: Default::default(),
            action_count: 4,
        };
        assert_eq!(oracle.hit_rate(&out, &manifest), 0.5);
    }
}
