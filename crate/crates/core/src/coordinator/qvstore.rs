//! Partitioned Q-value store: eight hashed planes of 8-bit fixed-point
//! partial Q-values whose sum is the Q-value of a (state, action) pair.

use super::action::CoordinationAction;
use super::features::QuantizedState;

pub const PLANES: usize = 8;
pub const ROWS: usize = 64;
/// Fixed-point scale: one raw unit is 1/16.
pub const SCALE: f64 = 16.0;

/// Per-plane multiply-shift constants (odd, 32-bit).
pub const PLANE_SEEDS: [u32; PLANES] = [
    0x9e37_79b1,
    0x85eb_ca77,
    0xc2b2_ae3d,
    0x27d4_eb2f,
    0x1656_67b1,
    0xd3a2_646d,
    0xfd70_46c5,
    0xb55a_4f09,
];

#[inline]
pub fn plane_row(plane: usize, s: QuantizedState) -> usize {
    let h = u64::from(s.0).wrapping_mul(u64::from(PLANE_SEEDS[plane]));
    ((h >> 20) & (ROWS as u64 - 1)) as usize
}

pub fn to_raw(v: f64) -> i8 {
    (v * SCALE).round().clamp(i8::MIN as f64, i8::MAX as f64) as i8
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QvStore {
    actions: usize,
    /// plane-major, then row, then action.
    entries: Vec<i8>,
}

impl QvStore {
    pub fn new(actions: usize) -> Self {
        Self::with_init(actions, 0.0)
    }

    /// Every summed Q-value starts at `q_init` (split across planes).
    pub fn with_init(actions: usize, q_init: f64) -> Self {
        assert!(actions > 0, "need at least one action");
        let mut s = Self { actions, entries: vec![0; PLANES * ROWS * actions] };
        if q_init != 0.0 {
            let per_plane = split_raw(total_raw(q_init));
            for p in 0..PLANES {
                for i in 0..ROWS * actions {
                    s.entries[p * ROWS * actions + i] = per_plane[p];
                }
            }
        }
        s
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn byte_size(&self) -> usize {
        self.entries.len()
    }

    fn slot(&self, plane: usize, s: QuantizedState, a: CoordinationAction) -> usize {
        debug_assert!(a.index < self.actions);
        (plane * ROWS + plane_row(plane, s)) * self.actions + a.index
    }

    pub fn raw(&self, plane: usize, s: QuantizedState, a: CoordinationAction) -> i8 {
        self.entries[self.slot(plane, s, a)]
    }

    pub fn set_raw(&mut self, plane: usize, s: QuantizedState, a: CoordinationAction, v: i8) {
        let i = self.slot(plane, s, a);
        self.entries[i] = v;
    }

    pub fn lookup_raw(&self, s: QuantizedState, a: CoordinationAction) -> i32 {
        (0..PLANES).map(|p| i32::from(self.raw(p, s, a))).sum()
    }

    pub fn lookup(&self, s: QuantizedState, a: CoordinationAction) -> f64 {
        f64::from(self.lookup_raw(s, a)) / SCALE
    }

    pub fn q_row(&self, s: QuantizedState) -> Vec<f64> {
        CoordinationAction::range(self.actions).map(|a| self.lookup(s, a)).collect()
    }

    /// Adds `delta` to Q(s, a) spread across the planes with saturating
    /// arithmetic. Returns the raw change actually applied.
    pub fn add(&mut self, s: QuantizedState, a: CoordinationAction, delta: f64) -> i32 {
        let parts = split_raw(total_raw(delta));
        let mut applied = 0;
        for (p, &d) in parts.iter().enumerate() {
            let i = self.slot(p, s, a);
            let old = self.entries[i];
            let new = old.saturating_add(d);
            self.entries[i] = new;
            applied += i32::from(new) - i32::from(old);
        }
        applied
    }
}

fn total_raw(v: f64) -> i32 {
    let lim = (PLANES as f64) * 128.0;
    (v * SCALE).round().clamp(-lim, lim) as i32
}

/// Splits a raw total into eight near-equal parts; the remainder goes one
/// unit at a time to the lowest planes.
pub fn split_raw(total: i32) -> [i8; PLANES] {
    let n = PLANES as i32;
    let base = total.div_euclid(n);
    let rem = total.rem_euclid(n);
    let mut out = [0i8; PLANES];
    for (p, o) in out.iter_mut().enumerate() {
        let v = base + i32::from((p as i32) < rem);
        *o = v.clamp(i8::MIN as i32, i8::MAX as i32) as i8;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const A0: CoordinationAction = CoordinationAction::NONE;

    #[test]
    fn fresh_store_is_zero_and_2kb() {
        let q = QvStore::new(4);
        assert_eq!(q.byte_size(), 2048);
        for s in [0u16, 17, 4095] {
            for a in CoordinationAction::range(4) {
                assert_eq!(q.lookup(QuantizedState(s), a), 0.0);
            }
        }
    }

    #[test]
    fn single_plane_and_all_plane_sums() {
        let s = QuantizedState(2232);
        let mut q = QvStore::new(4);
        q.set_raw(3, s, A0, 16);
        assert_eq!(q.lookup(s, A0), 1.0);
        let mut q = QvStore::new(4);
        for p in 0..PLANES {
            q.set_raw(p, s, A0, 2);
        }
        assert_eq!(q.lookup(s, A0), 1.0);
    }

    #[test]
    fn rows_in_range_and_planes_differ() {
        let rows: Vec<_> = (0..PLANES).map(|p| plane_row(p, QuantizedState(2232))).collect();
        assert!(rows.iter().all(|&r| r < ROWS));
        assert!(rows.windows(2).any(|w| w[0] != w[1]));
    }

    #[test]
    fn saturates_without_wrapping() {
        let s = QuantizedState(5);
        let mut q = QvStore::new(4);
        for _ in 0..100 {
            q.add(s, A0, 3.0);
        }
        for p in 0..PLANES {
            assert_eq!(q.raw(p, s, A0), i8::MAX);
        }
        assert!(q.lookup(s, A0) > 0.0);
        for _ in 0..100 {
            q.add(s, A0, -3.0);
        }
        assert_eq!(q.lookup_raw(s, A0), 8 * i32::from(i8::MIN));
    }

    #[test]
    fn q_init_spreads_evenly() {
        let q = QvStore::with_init(4, 0.5);
        assert_eq!(q.lookup(QuantizedState(9), CoordinationAction::BOTH), 0.5);
    }

    #[test]
    fn split_sums_to_total() {
        for t in -1024..=1016 {
            let parts = split_raw(t);
            assert_eq!(parts.iter().map(|&x| i32::from(x)).sum::<i32>(), t);
            let max = parts.iter().max().unwrap();
            let min = parts.iter().min().unwrap();
            assert!(i32::from(*max) - i32::from(*min) <= 1);
        }
    }

    proptest! {
        #[test]
        fn add_tracks_delta_or_reports_saturation(
            s in 0u16..4096, a in 0usize..4, start in -3.0f64..3.0, delta in -6.0f64..6.0,
        ) {
            let s = QuantizedState(s);
            let a = CoordinationAction { index: a };
            let mut q = QvStore::new(4);
            q.add(s, a, start);
            let before = q.lookup_raw(s, a);
            let applied = q.add(s, a, delta);
            prop_assert_eq!(q.lookup_raw(s, a) - before, applied);
            let unsaturated = (0..PLANES).all(|p| q.raw(p, s, a) != i8::MAX && q.raw(p, s, a) != i8::MIN);
            if unsaturated {
                let err = (q.lookup(s, a) - f64::from(before) / SCALE - delta).abs();
                prop_assert!(err <= 8.0 * 0.5 / SCALE);
            }
        }
    }
}
