//! Theory-of-mind inference over the target vehicle's intent.

pub mod malice;
pub mod network;

pub use malice::{
    default_malice_network, fit_cpts, infer_malice, tom_reward, LabeledEpisode, Observation, ObservationThresholds,
    TargetObserver,
};
pub use network::{variable_elimination, BeliefNetwork, Node, Variable};
