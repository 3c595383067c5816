//! Benchmarking and depolarizing-noise modeling for gate-based quantum
//! processors with all-to-all connectivity.
//!
//! The crate covers the whole analysis loop for a trapped-ion style device:
//!
//! * [`circuit`]: native-gate circuit IR with canonical JSON serialization.
//! * [`compiler`]: lowering to `{X90, Y90, RZ, ZZ}` and randomized variants.
//! * [`appsuite`]: application-benchmark generators and ingestion.
//! * [`simulator`]: state-vector trajectories under per-gate depolarizing noise,
//!   plus an exact density-matrix channel for small widths.
//! * [`drb`]: direct randomized benchmarking, decay fitting and bootstrap.
//! * [`mitigation`]: simple aggregation and plurality voting over variants.
//! * [`analysis`]: Hellinger fidelity, #AQ scoring, volumetric tables, timing.
//! * [`oracles`]: brute-force references used by the self-check and tests.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the default
//! `parallel` feature is enabled. All randomness is drawn from
//! [`rng::SeedStream`]s, so results are identical for any worker count.

pub mod analysis;
pub mod appsuite;
pub mod circuit;
pub mod clifford;
pub mod compiler;
pub mod drb;
pub mod linalg;
pub mod mitigation;
pub mod oracles;
pub mod outcome;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod simulator;

pub use circuit::{Circuit, Gate, GateKind};
pub use outcome::{Distribution, Histogram};
pub use simulator::NoiseModel;
