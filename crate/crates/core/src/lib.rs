//! Mean-field multi-armed bandit model of distributed uplink cell association
//! by energy-harvesting devices in dense small cell networks.
//!
//! Devices are bandit agents and small base stations (SBSs) are arms. A
//! device's reward on SBS `m` is a successful transmission, whose probability
//! falls as the fraction `f_m` of devices sharing that SBS grows.
//!
//! * [`model`]: configuration and domain records
//! * [`stochastics`]: reproducible streams, samplers, `erf`
//! * [`physics`]: rate, minimum power, success probability, reward draws
//! * [`policy`]: UCB1, uniform and informed-greedy selection
//! * [`dynamics`]: the finite-population simulation
//! * [`equilibrium`]: uniqueness bound, Lipschitz estimate, fixed-point solver
//! * [`baselines`]: centralized/random assignment and throughput comparison
//! * [`report`]: CSV and key-value output formats
//! * [`cli`]: command-line entry point

pub mod baselines;
pub mod cli;
pub mod dynamics;
pub mod equilibrium;
pub mod model;
pub mod physics;
pub mod policy;
pub mod report;
pub mod stochastics;
