//! P1 finite elements with mass lumping.

pub mod assembly;
pub mod qoi;
pub mod sparse;

pub use assembly::{
    assemble_1d, assemble_2d, cfl_dt, max_eigenvalue, max_eigenvalue_with, normalize,
    power_iteration, project_initial, DiscreteOperator, POWER_MAX_ITERATIONS, POWER_TOLERANCE,
};
pub use qoi::{
    extract_line_qoi, restrict_to_grid, Interpolator, OutputGrid, PointLocator, QoIVector,
};
pub use sparse::CsrMatrix;
