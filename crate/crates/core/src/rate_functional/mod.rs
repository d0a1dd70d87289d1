//! Large-deviation functionals of density and current trajectories: the
//! reaction cost `Φ`, the explicit rate `I₀ = I₁ + I₂`, the variational
//! functional `J_{G,H}`, drift recovery and the initial cost.
//!
//! Discretization follows the solver: transport terms live on bonds, reaction
//! terms on nodes, and time integrals use the left-endpoint rule, so that
//! `J_{G,H}` evaluated at the recovered drifts reproduces `I₀` exactly on the grid.

mod functional;
mod phi;

pub use functional::{
    conservation_residual, convex_decomposition_check, evaluate_i0_explicit, evaluate_i0_with,
    evaluate_j_gh, evaluate_j_parts, initial_cost, initial_cost_profiles, recover_drifts,
    shifted_rate, sine_basis, ConvexityReport, RateBreakdown, CONVEXITY_SLACK, DEFAULT_BASIS_MODES,
};
pub use phi::{phi, phi_legendre_oracle};
