//! Periodic grids, Fourier-coefficient fields and spectral operators.

mod field;
mod grid;
mod ops;

pub use field::{SpectralField, VectorField};
pub use grid::{make_grid, Grid};
pub use ops::{
    advect, advect_vector, curl, derivative, divergence, dx, dy, gradient, gradient_part,
    heat_propagate, heat_propagate_vector, inverse_laplacian, laplacian, leray_project,
    MEAN_TOLERANCE,
};
