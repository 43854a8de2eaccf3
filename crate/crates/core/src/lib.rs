//! High-order positivity-preserving finite-volume solver for a reduced 2D
//! angiogenesis model: coupled convection-diffusion-reaction equations for
//! the marginal vessel-tip density and the angiogenic-factor concentration,
//! with the nonlocal-in-time sink carried as an auxiliary integral field.
//! Space is discretized with WENO5 reconstruction over double cell averages;
//! time stepping uses strong-stability-preserving integrators.

pub mod diagnostics;
pub mod flux;
pub mod grid;
pub mod model;
pub mod quadrature;
pub mod ssp;
pub mod weno;

pub mod config;
pub mod driver;
pub mod snapshot;

pub use grid::{build_grid, double_average, make_quadrature, AveragedField, GridSpec};
pub use model::{ModelParams, SystemState};
