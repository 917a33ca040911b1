//! Molecule optimization as a step-limited deterministic MDP, solved with
//! bootstrapped double deep-Q learning.

pub mod molgraph;
pub mod actions;
pub mod fingerprint;
pub mod properties;
pub mod rewards;
pub mod qlearn;
pub mod env;
