//! The reinforcement-learning coordinator and its hardware structures.

pub mod action;
pub mod agent;
pub mod bloom;
pub mod features;
pub mod qvstore;
pub mod reward;

pub use action::{action_count, CoordinationAction, Decision};
pub use agent::{greedy_action, prefetch_degree, sarsa_update, select_action, select_prefetch_degree, Athena, AthenaConfig};
pub use bloom::BloomFilter;
pub use features::{measure_features, quantize_state, Feature, FeatureSnapshot, MeasurementTracker, QuantizedState, StateEncoder};
pub use qvstore::QvStore;
pub use reward::{compute_reward, RewardWeights};
