use crate::error::{Error, Result};
use crate::hydro_pde::grid::{
    bond_conductivity, bond_gradient, bond_inner, node_inner, FieldGrid, TrajectoryGrid,
};
use crate::rates::{check_assumptions, CylinderRate, DEFAULT_CHECK_POINTS};

/// Per-step slack allowed by the L¹ monotonicity check.
pub const L1_STEP_SLACK: f64 = 1e-8;

/// Difference between the two sides of the weak formulation at time level
/// `level`, for a test function vanishing at ±1:
///
/// `⟨ρ_t φ_t⟩ - ⟨ρ_0 φ_0⟩ - ∫⟨ρ ∂_s φ⟩
///   = ∫⟨(-½∇ρ + σ(ρ)∇H) ∇φ⟩ + ∫⟨(C(ρ)e^G - A(ρ)e^{-G}) φ⟩`.
pub fn weak_residual(
    traj: &TrajectoryGrid,
    rate: &CylinderRate,
    g: &FieldGrid,
    h: &FieldGrid,
    phi: &FieldGrid,
    level: usize,
) -> Result<f64> {
    let grid = traj.grid;
    grid.ensure_same(g.grid())?;
    grid.ensure_same(h.grid())?;
    grid.ensure_same(phi.grid())?;
    if level > grid.nt {
        return Err(Error::Domain(format!("time level {level} beyond nt = {}", grid.nt)));
    }
    for n in 0..grid.levels() {
        let row = phi.row(n);
        if row[0].abs() > 1e-12 || row[grid.nx].abs() > 1e-12 {
            return Err(Error::Validation(
                "test function must vanish at x = ±1".into(),
            ));
        }
    }
    let coeffs = rate.coefficients();
    let dx = grid.dx();
    let dt = grid.dt();

    let mut lhs = node_inner(traj.rho.row(level), phi.row(level), dx)
        - node_inner(traj.rho.row(0), phi.row(0), dx);
    let mut rhs = 0.0;
    for n in 0..level {
        let dphi: Vec<f64> = phi
            .row(n + 1)
            .iter()
            .zip(phi.row(n))
            .map(|(a, b)| a - b)
            .collect();
        lhs -= node_inner(traj.rho.row(n + 1), &dphi, dx);

        let rho = traj.rho.row(n);
        let grad_rho = bond_gradient(rho, dx);
        let grad_h = bond_gradient(h.row(n), dx);
        let grad_phi = bond_gradient(phi.row(n), dx);
        let sig = bond_conductivity(rho);
        let flux: Vec<f64> = grad_rho
            .iter()
            .zip(&grad_h)
            .zip(&sig)
            .map(|((dr, dh), s)| -0.5 * dr + s * dh)
            .collect();
        let reaction: Vec<f64> = rho
            .iter()
            .zip(g.row(n))
            .map(|(&r, &gv)| coeffs.creation(r) * gv.exp() - coeffs.annihilation(r) * (-gv).exp())
            .collect();
        rhs += dt * (bond_inner(&flux, &grad_phi, dx) + node_inner(&reaction, phi.row(n), dx));
    }
    Ok(lhs - rhs)
}

/// Largest pointwise defect of `∂_t ρ + D Q̇ - K̇ = 0` over interior nodes,
/// with forward time differences.
pub fn current_consistency(traj: &TrajectoryGrid) -> f64 {
    let grid = traj.grid;
    let (dx, dt) = (grid.dx(), grid.dt());
    let mut worst: f64 = 0.0;
    for n in 0..grid.nt {
        let q = traj.qdot.row(n);
        let k = traj.kdot.row(n);
        for j in 1..grid.nx {
            let drho = (traj.rho.get(n + 1, j) - traj.rho.get(n, j)) / dt;
            worst = worst.max((drho + (q[j] - q[j - 1]) / dx - k[j]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    /// `‖ρ¹_t - ρ²_t‖₁` at every time level.
    pub distances: Vec<f64>,
    /// No step increased the distance by more than [`L1_STEP_SLACK`].
    pub nonincreasing: bool,
    /// Largest single-step increase observed.
    pub worst_increase: f64,
    /// Whether the rate satisfies the monotonicity hypothesis (L2).
    pub rate_satisfies_l2: bool,
}

/// L¹ distances between two solutions on the same grid.
pub fn l1_contraction_check(
    first: &TrajectoryGrid,
    second: &TrajectoryGrid,
    rate: &CylinderRate,
) -> Result<ContractionReport> {
    first.grid.ensure_same(&second.grid)?;
    if (first.rho_minus - second.rho_minus).abs() > 1e-12
        || (first.rho_plus - second.rho_plus).abs() > 1e-12
    {
        return Err(Error::GridMismatch(
            "trajectories have different boundary densities".into(),
        ));
    }
    let grid = first.grid;
    let dx = grid.dx();
    let distances: Vec<f64> = (0..grid.levels())
        .map(|n| {
            let diff: Vec<f64> = first
                .rho
                .row(n)
                .iter()
                .zip(second.rho.row(n))
                .map(|(a, b)| (a - b).abs())
                .collect();
            crate::hydro_pde::grid::node_integral(&diff, dx)
        })
        .collect();
    let worst_increase = distances
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ContractionReport {
        nonincreasing: worst_increase <= L1_STEP_SLACK,
        worst_increase,
        distances,
        rate_satisfies_l2: check_assumptions(rate, DEFAULT_CHECK_POINTS).l2_ok,
    })
}

/// `½ ∫∫ (∇ρ)²` with bond gradients and the left-endpoint time rule.
pub fn energy(traj: &TrajectoryGrid) -> f64 {
    let grid = traj.grid;
    let dx = grid.dx();
    grid.time_weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(n, &w)| {
            let grad = bond_gradient(traj.rho.row(n), dx);
            w * 0.5 * bond_inner(&grad, &grad, dx)
        })
        .sum()
}

/// Lower bound on the energy from its variational form, with the supremum
/// taken over test functions spanned by `e_k = cos(kπ(x+1)/2)`, `k < modes`.
///
/// For each time the optimum over coefficients `a` of
/// `Σ a_k b_k - ½ aᵀ M a` is `½ bᵀ M⁻¹ b`, where
/// `b_k = ∫ ρ e_k' - (ρ̄₊ e_k(1) - ρ̄₋ e_k(-1))` and `M = diag(2, 1, 1, …)`.
/// The integral is exact for the piecewise-linear interpolant of `ρ`.
pub fn energy_lower_bound(traj: &TrajectoryGrid, modes: usize) -> f64 {
    use std::f64::consts::PI;
    let grid = traj.grid;
    let dx = grid.dx();
    let xs = grid.xs();
    // ∫ over each bond of e_k, and e_k at ±1
    let basis: Vec<(Vec<f64>, f64, f64, f64)> = (0..modes)
        .map(|k| {
            let w = k as f64 * PI / 2.0;
            let bond_integrals: Vec<f64> = if k == 0 {
                vec![dx; grid.nx]
            } else {
                xs.windows(2)
                    .map(|p| ((w * (p[1] + 1.0)).sin() - (w * (p[0] + 1.0)).sin()) / w)
                    .collect()
            };
            let mass = if k == 0 { 2.0 } else { 1.0 };
            (bond_integrals, 1.0, (2.0 * w).cos(), mass)
        })
        .collect();
    grid.time_weights()
        .iter()
        .enumerate()
        .filter(|(_, &w)| w != 0.0)
        .map(|(n, &w)| {
            let rho = traj.rho.row(n);
            let grad = bond_gradient(rho, dx);
            let value: f64 = basis
                .iter()
                .map(|(ints, left, right, mass)| {
                    // ∫ ρ e' = [ρ e] - ∫ ∇ρ e
                    let by_parts = rho[grid.nx] * right - rho[0] * left
                        - grad.iter().zip(ints).map(|(g, i)| g * i).sum::<f64>();
                    let b = by_parts - (traj.rho_plus * right - traj.rho_minus * left);
                    0.5 * b * b / mass
                })
                .sum();
            w * value
        })
        .sum()
}
