//! Jump measures for the growth-fragmentation family, their spine tilts,
//! and compound-Poisson sampling of Lévy path skeletons.

mod measure;
mod sampler;
mod table;
mod tail;

use thiserror::Error;

use crate::quad::QuadError;

pub use measure::{
    c_minus, c_plus, canonical_lambda, ln_abs_one_minus_exp, spine_measure, HypergeometricDensity, JumpDensity,
    JumpMeasureSpec, NoJumps, Side, SpineSign, SplitMapping, UniformDensity,
};
pub use sampler::{
    sample_jump, sample_path, DriftPolicy, Event, EventClock, LevySampler, PathSkeleton, SamplerOptions, SmallJumps,
};
pub use table::{jump_table, weighted_small_table, InverseCdfTable, TABLE_CELLS};
pub use tail::{tail_equivalence_check, RegularVariationFit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevyError {
    #[error("theta = {0} outside (1, 3/2]")]
    ThetaOutOfRange(f64),
    #[error("jump cutoff must be positive, got {0}")]
    InvalidCutoff(f64),
    #[error("invalid support interval [{0}, {1}]")]
    InvalidSupport(f64, f64),
    #[error("jump measure {0} fails the integrability check")]
    NotIntegrable(String),
    #[error("jump measure {0} has no mass above the cutoff on the requested side")]
    EmptySupport(String),
    #[error("total jump rate {rate:.3e} exceeds the budget {budget:.3e}; increase the cutoff")]
    RateOverflow { rate: f64, budget: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}
