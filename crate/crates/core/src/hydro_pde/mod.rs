//! Hydrodynamic reaction-diffusion equation: grids, explicit solver and the
//! weak-form, energy and L¹-contraction diagnostics.

mod diagnostics;
mod grid;
mod solver;

pub use diagnostics::{
    current_consistency, energy, energy_lower_bound, l1_contraction_check, weak_residual,
    ContractionReport, L1_STEP_SLACK,
};
pub use grid::{
    bond_conductivity, bond_gradient, bond_inner, node_inner, node_integral, FieldGrid, Grid,
    Levels, TrajectoryGrid,
};
pub use solver::{solve_hydro, HydroProblem, RANGE_SLACK};

/// Smallest time-step count satisfying `Δt ≤ fraction · Δx²`.
pub fn stable_steps(nx: usize, t_final: f64, fraction: f64) -> usize {
    let dx = 2.0 / nx as f64;
    (t_final / (fraction * dx * dx)).ceil().max(1.0) as usize
}
