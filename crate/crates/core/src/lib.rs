//! Radio tomographic imaging of shadowing-loss fields.
//!
//! The crate models a wireless network around a voxelized region, synthesizes
//! link measurements of a loss field and recovers the field by one of three
//! convex programs: sparsity in a separable DCT basis, low rank of a two-way
//! field, or low n-rank of a multi-way field.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod matrix;
pub mod seeds;
pub mod solvers;
pub mod tensor;
pub mod transforms;

pub use error::{Error, Result};
pub use geometry::{place_nodes, Link, NodeSet, SensingOperator, VoxelGrid};
pub use matrix::Matrix;
pub use solvers::{solve, Solver, SolverConfig, SolverReport};
pub use tensor::{DenseTensor, TensorShape};
