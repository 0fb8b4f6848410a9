//! The SARSA coordinator driven once per epoch.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::action::{CoordinationAction, Decision};
use super::features::{measure_features, FeatureSnapshot, MeasurementTracker, QuantizedState, StateEncoder};
use super::qvstore::QvStore;
use super::reward::{compute_reward, RewardWeights};
use crate::error::{Error, Result};
use crate::telemetry::EpochTelemetry;

#[derive(Debug, Clone, PartialEq)]
pub struct AthenaConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub tau: f64,
    pub d_max: u32,
    pub q_init: f64,
    pub update_delay_cycles: u64,
    pub weights: RewardWeights,
    pub epoch_length: u64,
    pub encoder: StateEncoder,
}

impl Default for AthenaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.6,
            gamma: 0.6,
            epsilon: 0.0,
            tau: 0.12,
            d_max: 4,
            q_init: 0.25,
            update_delay_cycles: 0,
            weights: RewardWeights::default(),
            epoch_length: 2000,
            encoder: StateEncoder::default(),
        }
    }
}

impl AthenaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("gamma", self.gamma), ("epsilon", self.epsilon)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must lie in [0, 1]"));
            }
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau", "must be positive"));
        }
        if !self.q_init.is_finite() || self.q_init.abs() > 8.0 {
            return Err(Error::config("q_init", "must lie in [-8, 8]"));
        }
        if self.epoch_length == 0 {
            return Err(Error::config("epoch_length", "must be positive"));
        }
        self.weights.validate()
    }
}

/// ε-greedy choice; ties go to the lowest index.
pub fn select_action(store: &QvStore, s: QuantizedState, epsilon: f64, rng: &mut ChaCha8Rng) -> CoordinationAction {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return CoordinationAction::new(rng.gen_range(0..store.actions()));
    }
    greedy_action(store, s)
}

pub fn greedy_action(store: &QvStore, s: QuantizedState) -> CoordinationAction {
    let mut best = CoordinationAction::NONE;
    let mut best_q = i32::MIN;
    for a in CoordinationAction::range(store.actions()) {
        let q = store.lookup_raw(s, a);
        if q > best_q {
            best = a;
            best_q = q;
        }
    }
    best
}

/// Degree from the Q-value margin of `chosen` over the mean of the rest.
pub fn prefetch_degree(q_row: &[f64], chosen: CoordinationAction, tau: f64, d_max: u32) -> u32 {
    if !chosen.any_prefetcher() || d_max == 0 {
        return 0;
    }
    let others: Vec<f64> = q_row.iter().enumerate().filter(|&(i, _)| i != chosen.index).map(|(_, &q)| q).collect();
    let mean = if others.is_empty() { 0.0 } else { others.iter().sum::<f64>() / others.len() as f64 };
    let r = ((q_row[chosen.index] - mean) / tau).clamp(0.0, 1.0);
    // the epsilon keeps exact ratios like 0.06/0.12 from rounding down
    ((r * f64::from(d_max) + 1e-9).floor() as u32).clamp(1, d_max)
}

pub fn select_prefetch_degree(store: &QvStore, s: QuantizedState, chosen: CoordinationAction, tau: f64, d_max: u32) -> u32 {
    prefetch_degree(&store.q_row(s), chosen, tau, d_max)
}

/// The temporal-difference step for Q(s_prev, a_prev).
pub fn sarsa_delta(
    store: &QvStore,
    s_prev: QuantizedState,
    a_prev: CoordinationAction,
    reward: f64,
    s_curr: QuantizedState,
    a_curr: CoordinationAction,
    alpha: f64,
    gamma: f64,
) -> f64 {
    alpha * (reward + gamma * store.lookup(s_curr, a_curr) - store.lookup(s_prev, a_prev))
}

#[allow(clippy::too_many_arguments)]
pub fn sarsa_update(
    store: &mut QvStore,
    s_prev: QuantizedState,
    a_prev: CoordinationAction,
    reward: f64,
    s_curr: QuantizedState,
    a_curr: CoordinationAction,
    alpha: f64,
    gamma: f64,
) {
    let d = sarsa_delta(store, s_prev, a_prev, reward, s_curr, a_curr, alpha, gamma);
    store.add(s_prev, a_prev, d);
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PendingUpdate {
    due: u64,
    state: QuantizedState,
    action: CoordinationAction,
    delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Previous {
    state: QuantizedState,
    action: CoordinationAction,
    telemetry: EpochTelemetry,
}

/// What the agent saw and did at the last tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TickRecord {
    pub features: FeatureSnapshot,
    pub state: QuantizedState,
    pub reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Athena {
    cfg: AthenaConfig,
    store: QvStore,
    rng: ChaCha8Rng,
    prev: Option<Previous>,
    pending: VecDeque<PendingUpdate>,
    last: TickRecord,
}

impl Athena {
    pub fn new(cfg: AthenaConfig, actions: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            store: QvStore::with_init(actions, cfg.q_init),
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
            prev: None,
            pending: VecDeque::new(),
            last: TickRecord::default(),
        })
    }

    pub fn config(&self) -> &AthenaConfig {
        &self.cfg
    }

    pub fn store(&self) -> &QvStore {
        &self.store
    }

    pub fn last_tick(&self) -> &TickRecord {
        &self.last
    }

    pub fn pending_updates(&self) -> usize {
        self.pending.len()
    }

    /// Applies every delayed update whose time has come.
    pub fn advance(&mut self, now: u64) {
        while let Some(u) = self.pending.front().copied() {
            if u.due > now {
                break;
            }
            self.pending.pop_front();
            self.store.add(u.state, u.action, u.delta);
        }
    }

    /// One coordination step at the end of an epoch. `epoch` must already
    /// include the tracker's counters; the tracker's filters are reset.
    pub fn epoch_tick(&mut self, epoch: &EpochTelemetry, tracker: &mut MeasurementTracker, now: u64) -> Decision {
        self.advance(now);
        let features = measure_features(epoch);
        let state = self.cfg.encoder.quantize(&features);
        let action = select_action(&self.store, state, self.cfg.epsilon, &mut self.rng);
        let degree = select_prefetch_degree(&self.store, state, action, self.cfg.tau, self.cfg.d_max);

        let mut reward = None;
        if let Some(p) = self.prev {
            let r = compute_reward(&p.telemetry, epoch, &self.cfg.weights, self.cfg.epoch_length);
            let delta = sarsa_delta(&self.store, p.state, p.action, r, state, action, self.cfg.alpha, self.cfg.gamma);
            if self.cfg.update_delay_cycles == 0 {
                self.store.add(p.state, p.action, delta);
            } else {
                self.pending.push_back(PendingUpdate {
                    due: now + self.cfg.update_delay_cycles,
                    state: p.state,
                    action: p.action,
                    delta,
                });
            }
            reward = Some(r);
        }

        tracker.reset_filters();
        self.prev = Some(Previous { state, action, telemetry: *epoch });
        self.last = TickRecord { features, state, reward };
        Decision { action, degree }
    }
}
