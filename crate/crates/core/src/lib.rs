//! Nonnegative tensor ring (NTR) decomposition and its graph-regularized
//! variant (GNTR), fitted core by core with an accelerated proximal gradient
//! method.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`] and [`matrix`]: dense row-major storage and the multilinear
//!   primitives (inner product, mode-n product, unfoldings, contraction,
//!   spectral norm).
//! - [`ring`]: the tensor-ring model (cores, subchains, reconstruction).
//! - [`graph`]: mutual p-nearest-neighbour sample graph and its Laplacian.
//! - [`apg`]: the per-core APG solver and the outer fitting loop.
//! - [`eval`]: sparseness, clustering accuracy, NMI, k-means and k-NN.

pub mod apg;
pub mod error;
pub mod eval;
pub mod graph;
pub mod matrix;
pub mod ring;
pub mod tensor;

pub use apg::{fit, fit_with_observer, FitReport, SolverConfig, Termination};
pub use error::{Error, Result};
pub use graph::{GraphConfig, NeighborGraph};
pub use matrix::Matrix;
pub use ring::{RankVector, Subchain, TrCores};
pub use tensor::{DenseTensor, Shape};
