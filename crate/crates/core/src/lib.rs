//! Simulation and verification engine for self-similar growth-fragmentation
//! processes.
//!
//! The crate builds the cell system of a growth-fragmentation from its
//! cumulant, simulates the driving Lévy processes and their Lamperti
//! transforms, and measures the intrinsic area. Most functionality is tuned
//! to the stable-maps family `κ_θ`, `θ ∈ (1, 3/2]`.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cellsystem;
pub mod cumulant;
pub mod harness;
pub mod lamperti;
pub mod levy;
pub mod quad;
pub mod rng;
pub mod special;
pub mod spine;
pub mod stats;
