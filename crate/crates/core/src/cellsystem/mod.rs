//! The Ulam-Harris cell system, its intrinsic-area martingale and the area
//! profile `A(t)`, under explicit truncation policies.
//!
//! Every cell that is not followed to its end (too small, past the horizon,
//! past the generation cap) is replaced by a [`MassAtom`] carrying the exact
//! conditional mean `y^{ω₋}` of everything its future subtree contributes.

mod area;
mod format;
mod grow;
mod label;

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::cumulant::CumulantError;
use crate::spine::IDistribution;

pub use area::{area_martingale, area_profile, conditional_area, markov_branching_resample, AreaProfile};
pub use format::{parse_tree_text, profile_csv, tree_text, FormatError};
pub use grow::{grow_tree, TreeEngine, TreeResolution};
pub use label::CellLabel;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("invalid truncation policy: {0}")]
    InvalidPolicy(String),
    #[error("cell budget of {budget} exceeded ({cells} cells grown)")]
    BudgetExceeded { cells: usize, budget: usize, partial: Box<CellTree> },
    #[error(transparent)]
    Cumulant(#[from] CumulantError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationPolicy {
    /// Cells are stopped once their size drops below this.
    pub x_min: f64,
    /// Cells of this generation are recorded but not simulated.
    pub max_generation: u32,
    pub max_cells: usize,
    /// Cells are stopped at this growth-fragmentation time.
    pub horizon: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { x_min: 1e-2, max_generation: u32::MAX, max_cells: 10_000_000, horizon: f64::INFINITY }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<(), TreeError> {
        if !(self.x_min > 0.0 && self.x_min.is_finite()) {
            return Err(TreeError::InvalidPolicy("x_min must be positive and finite".into()));
        }
        if self.max_cells == 0 || self.max_generation == 0 {
            return Err(TreeError::InvalidPolicy("max_cells and max_generation must be positive".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(TreeError::InvalidPolicy("horizon must be positive".into()));
        }
        Ok(())
    }
}

/// Why a cell was not followed further.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Truncation {
    KilledBelow(f64),
    GenerationCapped,
    Horizon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub label: CellLabel,
    pub birth_time: f64,
    pub birth_size: f64,
    /// Local (growth-fragmentation) time the cell was followed for.
    pub age: f64,
    pub truncation: Truncation,
}

impl CellRecord {
    pub fn generation(&self) -> usize {
        self.label.generation()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AtomKind {
    /// A cell (or a child born) below `x_min`.
    Killed,
    /// Aggregate of the children below the jump cutoff along one path piece.
    Diffuse,
    /// A cell stopped at the horizon.
    Horizon,
    /// A cell of the capped generation.
    Capped,
}

/// Stand-in for an unexplored subtree: a cell of current size `size` at
/// growth-fragmentation time `time`, whose future descendants contribute
/// `mass` to every later generation and to `𝓜` in expectation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassAtom {
    /// First generation whose martingale level includes this atom.
    pub first_generation: u32,
    pub kind: AtomKind,
    pub time: f64,
    pub size: f64,
    pub mass: f64,
    /// Where the atom's mass is placed on the time axis of `A`.
    pub height: f64,
}

/// Where the mass of an unexplored subtree is placed in time.
#[derive(Debug, Clone)]
pub enum KillPlacement {
    /// At the truncation time itself. Biased early by `O(size^{|α|})`.
    BirthHeight,
    /// At `time + size^{|α|}·I` with `I` drawn from the pool: the exact law of
    /// the extinction height of a lone cell, and exact in mean for a subtree.
    Smeared(Arc<IDistribution>),
}

#[derive(Debug, Clone, Serialize)]
pub struct CellTree {
    pub x: f64,
    pub alpha: f64,
    pub omega_minus: f64,
    pub policy: TruncationPolicy,
    pub records: Vec<CellRecord>,
    pub atoms: Vec<MassAtom>,
    /// Key of the generator stream the tree was grown from, when known.
    pub stream_key: Option<u64>,
}

impl CellTree {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `Σ x_kill^{ω₋}` over all stand-ins, i.e. the total area `𝓜`.
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn max_generation(&self) -> usize {
        self.records.iter().map(CellRecord::generation).max().unwrap_or(0)
    }

    pub fn is_closed_under_parent(&self) -> bool {
        let labels: std::collections::HashSet<&CellLabel> = self.records.iter().map(|r| &r.label).collect();
        self.records.iter().all(|r| r.label.parent().is_none_or(|p| labels.contains(&p)))
    }
}
