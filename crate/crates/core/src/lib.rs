//! Method-of-images millimeter-wave ray tracer with quasi-deterministic
//! diffuse components, MIMO link evaluation and tools for measuring how
//! much accuracy reflection-order caps and path-gain thresholds cost.
//!
//! Pipeline per (timestep, tx, rx): [`raytracer::trace_pair`] ->
//! [`qd::expand_ray`] -> [`simplify`] filters -> [`scenario::ChannelInstance`],
//! then [`link::evaluate_links`] builds channel matrices, SVD beams and
//! SINR.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod link;
pub mod metrics;
pub mod presets;
pub mod qd;
pub mod raytracer;
pub mod rng;
pub mod scenario;
pub mod scenes;
pub mod simplify;
pub mod trace;

pub use error::{Error, Result};
pub use geometry::{Triangle, TriangleMesh, Vec3};
pub use qd::{MaterialTable, Mpc, MpcKind, QdMaterialParams};
pub use raytracer::{trace_pair, DeterministicRay, OpCounter, TraceConfig};
pub use scenario::{run, ChannelInstance, Scenario, ScenarioConfig};
