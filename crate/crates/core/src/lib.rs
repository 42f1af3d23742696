//! Weak common coins from strong ones.
//!
//! The parties are split into `q` fixed committees. Each committee tosses a
//! strong coin internally, publishes the bit through a crusader agreement and
//! a sparse bipartite graph, and every party outputs the majority bit it
//! hears. This crate holds the parameter calculus ([`params`]), the random
//! committee and graph objects with their verifiers ([`combinatorics`]), a
//! deterministic discrete-event simulator with a strongly adaptive adversary
//! ([`simnet`]), the protocol state machines ([`protocols`]) and exact and
//! statistical checks ([`analysis`]).

pub mod analysis;
pub mod combinatorics;
pub mod config;
pub mod experiment;
pub mod params;
pub mod protocols;
pub mod simnet;

pub use analysis::{
    audit_transcript, estimate_fairness, verify_anticoncentration, AuditLimits, FairnessEstimate,
};
pub use combinatorics::{CommitteeLayout, PublishGraph, Verification};
pub use config::ExperimentConfig;
pub use params::{derive_params, CoinParams, CostPoly, CostReport, DerivedParams, ParamOverrides};
pub use simnet::{run_simulation, Adversary, TrialReport};

/// Party identifier, `0..n`.
pub type PartyId = usize;
