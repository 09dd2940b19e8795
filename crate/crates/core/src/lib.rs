//! Numerical laboratory for a two-dimensional relativistic particle–field
//! model with an ultraviolet-renormalized interaction: jump-path sampling,
//! closed-form path functionals, Feynman–Kac averages, and analytic
//! ground-state energy bounds.

// Numerical kernels favor explicit indexed loops over coupled arrays and
// full-precision minimax coefficient tables; validation guards use the
// negated-comparison form `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod action;
pub mod bounds;
pub mod error;
pub mod estimator;
pub mod fock;
pub mod kspace;
pub mod levy;
pub mod quad;
pub mod special;
pub mod stats;

pub use action::{ActionEvaluator, ActionLadderPoint};
pub use bounds::{lower_bound, renormalized_upper_bound, BoundConstants, LowerBoundVariant};
pub use error::{Error, Result};
pub use estimator::{ground_energy, kac_ladder, KacConfig, PotentialSpec, WeightSpec};
pub use kspace::{dispersion, omega, psi, renorm_energy, t_norm, u_process};
pub use kspace::{FieldFunction, GridSpec, MemorySign, ModelParams, RadialGrid};
pub use levy::{sample_increment, sample_jump_path, split_path};
pub use levy::{JumpTable, LevyPath, PathEvent, RngStream, Segment, Vec2};
