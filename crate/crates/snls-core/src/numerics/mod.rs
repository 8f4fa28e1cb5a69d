//! Lattice numerics: kernels, diagram evaluation, Monte Carlo oracles,
//! scaling degrees and directional Fourier decay.

pub mod decay;
pub mod estimate;
pub mod evaluate;
pub mod kernel;
pub mod lattice;
pub mod scaling;
pub mod simulate;

pub use decay::{directional_decay_test, DecayRow, DecayWindow};
pub use estimate::{Accumulator, Estimate, ExactSum};
pub use evaluate::{evaluate_diagram, evaluate_diagrams, Bindings};
pub use kernel::{coeff_c, kernel_g, kernel_q, Extension, KernelGrid, KernelKind, Propagator, QKernel};
pub use lattice::{BumpParams, Cutoff, Field, LatticeSpec, SignConvention, TestFunction};
pub use scaling::{scaling_degree_estimate, ScalingEstimate, ScalingKernel};
pub use simulate::{simulate_first_order, simulate_linear, FirstOrderSimulator, LinearReport};

use crate::diagram::Decoration;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NumericsError {
    #[error("invalid lattice: {0}")]
    InvalidSpec(String),
    #[error("unsupported spatial dimension {0}")]
    UnsupportedDimension(u32),
    #[error("decoration {0:?} has no bound grid")]
    Unbound(Decoration),
    #[error("diagram has {expected} external vertices but {got} test functions were given")]
    SlotMismatch { expected: usize, got: usize },
    #[error("unsupported diagram: {0}")]
    Unsupported(String),
    #[error("need at least {min} realizations, got {got}")]
    TooFewRealizations { min: usize, got: usize },
}
