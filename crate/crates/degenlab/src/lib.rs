//! degenlab: a numerical laboratory for degenerate diffusion equations
//! `sigma(|Du|) F(D^2 u) = f`.
//!
//! The crate certifies Dini conditions on moduli of continuity, builds the
//! c0 modulator sequences that keep l1 norms stable under division, analyses
//! collapsing families of degeneracy laws, runs the shoring-up
//! renormalization that produces a C^1 modulus of continuity, and solves the
//! equations on grids to measure the predicted tangent-plane decay.
//!
//! Start from the runnable examples (`cargo run --example <name>`); each
//! demonstrates one capability end to end. The `degenlab` binary drives the
//! same machinery from JSON experiment configs.

// `!(x > 0.0)` validations are deliberate: unlike `x <= 0.0` they reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bisect;
pub mod collapse;
pub mod experiment;
pub mod minimax;
pub mod modulus;
pub mod pde;
pub mod renorm;
pub mod sequences;
pub mod svg;

pub use collapse::{CollapseError, CollapseReport, ModulusFamily, ShoringReport};
pub use experiment::{ExperimentConfig, ExperimentError};
pub use pde::{DecayReport, GridSolution, PdeError, ProblemSpec, SolveOptions};
pub use modulus::{DegeneracyLaw, DiniCertificate, DiniVerdict, Modulus, ModulusError};
pub use renorm::{RenormError, RenormParams, RenormalizationTrace};
pub use sequences::{Certified, Modulator, ModulatorResult, SequenceError, SummableSequence};
