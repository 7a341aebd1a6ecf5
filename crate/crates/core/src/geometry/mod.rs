//! Voxel grid, node placement, ray tracing and the sensing operator.

mod grid;
mod operator;
mod trace;

pub use grid::{distance, place_nodes, Link, NodeSet, Point, VoxelGrid};
pub use operator::{OperatorRow, SensingOperator};
pub use trace::{inside_length, trace_link};

/// Convenience wrapper around [`SensingOperator::build`].
pub fn build_operator(
    grid: &VoxelGrid,
    nodes: &NodeSet,
    links: &[Link],
    intervals: usize,
) -> crate::Result<SensingOperator> {
    SensingOperator::build(grid, nodes, links, intervals)
}
