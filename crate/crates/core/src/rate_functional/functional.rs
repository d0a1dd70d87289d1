use serde::Serialize;

use crate::error::{Error, Result};
use crate::hydro_pde::{
    bond_conductivity, bond_gradient, bond_inner, energy, node_inner, FieldGrid, Grid, Levels,
    TrajectoryGrid,
};
use crate::profile::Profile;
use crate::rate_functional::phi::{log_tilt, phi};
use crate::rates::{check_assumptions, CylinderRate, MacroscopicCoefficients, DEFAULT_CHECK_POINTS};

/// Number of sine modes in the default test basis.
pub const DEFAULT_BASIS_MODES: usize = 8;

/// Pieces of the rate functional of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub i0: f64,
    pub i1: f64,
    pub i2: f64,
    pub h_gamma: f64,
    pub total: f64,
    pub energy: f64,
    pub conservation_residual: f64,
    pub feasible: bool,
}

impl RateBreakdown {
    /// Adds the cost `h` of the initial profile.
    pub fn with_initial_cost(mut self, h: f64) -> Self {
        self.h_gamma = h;
        self.total = self.i0 + h;
        self
    }
}

/// Time-independent test functions `sin(kπ(x+1)/2)`, `k = 1..=modes`.
pub fn sine_basis(grid: Grid, modes: usize) -> Vec<FieldGrid> {
    (1..=modes as u32)
        .map(|k| {
            let p = Profile::Sine { amp: 1.0, k };
            FieldGrid::from_fn(grid, move |_, x| p.eval(x))
        })
        .collect()
}

/// Largest violation of the integrated conservation law
/// `⟨ρ_t φ_t⟩ - ⟨ρ_0 φ_0⟩ - ∫⟨ρ ∂_s φ⟩ = ⟨Q_t ∇φ_t⟩ - ∫⟨Q ∂_s ∇φ⟩ + ⟨K_t φ_t⟩ - ∫⟨K ∂_s φ⟩`
/// over the basis and all time levels. Time integrals are discrete sums by parts.
pub fn conservation_residual(traj: &TrajectoryGrid, basis: &[FieldGrid]) -> Result<f64> {
    let grid = traj.grid;
    let dx = grid.dx();
    let mut worst: f64 = 0.0;
    for phi in basis {
        grid.ensure_same(phi.grid())?;
        let mut drift = 0.0;
        for n in 0..grid.levels() {
            let row = phi.row(n);
            if n > 0 {
                let dphi: Vec<f64> = row.iter().zip(phi.row(n - 1)).map(|(a, b)| a - b).collect();
                let dgrad = bond_gradient(&dphi, dx);
                drift += node_inner(traj.rho.row(n), &dphi, dx)
                    - bond_inner(traj.q.row(n), &dgrad, dx)
                    - node_inner(traj.k.row(n), &dphi, dx);
            }
            let lhs = node_inner(traj.rho.row(n), row, dx) - node_inner(traj.rho.row(0), phi.row(0), dx);
            let rhs = bond_inner(traj.q.row(n), &bond_gradient(row, dx), dx)
                + node_inner(traj.k.row(n), row, dx);
            worst = worst.max((lhs - drift - rhs).abs());
        }
    }
    Ok(worst)
}

/// `G` and `H` that make `(ρ, Q̇, K̇)` the hydrodynamic solution of the tilted
/// dynamics, with `H(t, -1) = 0`.
pub fn recover_drifts(traj: &TrajectoryGrid, rate: &CylinderRate) -> Result<(FieldGrid, FieldGrid)> {
    traj.ensure_interior()?;
    let grid = traj.grid;
    let coeffs = rate.coefficients();
    let dx = grid.dx();
    let mut g = Levels::zeros(grid.levels(), grid.nodes());
    let mut h = Levels::zeros(grid.levels(), grid.nodes());
    for n in 0..grid.levels() {
        let rho = traj.rho.row(n);
        for (j, (&r, &kappa)) in rho.iter().zip(traj.kdot.row(n)).enumerate() {
            let value = reaction_drift(coeffs.creation(r), coeffs.annihilation(r), kappa)
                .map_err(|message| Error::Infeasible { t: n, x: j, message })?;
            g.set(n, j, value);
        }
        let grad_rho = bond_gradient(rho, dx);
        let sig = bond_conductivity(rho);
        let row = h.row_mut(n);
        for (b, ((&q, &dr), &s)) in traj.qdot.row(n).iter().zip(&grad_rho).zip(&sig).enumerate() {
            row[b + 1] = row[b] + dx * (q + 0.5 * dr) / s;
        }
    }
    Ok((FieldGrid::from_levels(grid, g)?, FieldGrid::from_levels(grid, h)?))
}

/// Solves `C e^G - A e^{-G} = κ` for `G`.
fn reaction_drift(c: f64, a: f64, kappa: f64) -> std::result::Result<f64, String> {
    match (c > 0.0, a > 0.0) {
        (true, true) => Ok(log_tilt(c, a, kappa, kappa.hypot(2.0 * (a * c).sqrt()))),
        (false, true) if kappa < 0.0 => Ok(-(-kappa / a).ln()),
        (true, false) if kappa > 0.0 => Ok((kappa / c).ln()),
        (false, false) if kappa == 0.0 => Ok(0.0),
        (false, true) => Err(format!("net creation {kappa} with zero creation rate")),
        (true, false) => Err(format!("net creation {kappa} with zero annihilation rate")),
        (false, false) => Err(format!("net creation {kappa} with no reactions")),
    }
}

fn transport_cost(traj: &TrajectoryGrid) -> f64 {
    let grid = traj.grid;
    let dx = grid.dx();
    let mut total = 0.0;
    for (n, w) in grid.time_weights().into_iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let rho = traj.rho.row(n);
        let grad_rho = bond_gradient(rho, dx);
        let sig = bond_conductivity(rho);
        let mut slice = 0.0;
        for ((&q, &dr), &s) in traj.qdot.row(n).iter().zip(&grad_rho).zip(&sig) {
            let num = q + 0.5 * dr;
            slice += if s > 0.0 {
                num * num / (2.0 * s)
            } else if num == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
        }
        total += w * dx * slice;
    }
    total
}

fn reaction_cost(traj: &TrajectoryGrid, coeffs: &MacroscopicCoefficients) -> Result<f64> {
    let grid = traj.grid;
    let weights = grid.node_weights();
    let mut total = 0.0;
    for (n, w) in grid.time_weights().into_iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (j, (&r, &kappa)) in traj.rho.row(n).iter().zip(traj.kdot.row(n)).enumerate() {
            let v = phi(coeffs.creation(r), coeffs.annihilation(r), kappa)?;
            if v.is_infinite() {
                return Err(Error::Infeasible {
                    t: n,
                    x: j,
                    message: format!("net creation {kappa} cannot be realized at density {r}"),
                });
            }
            total += w * weights[j] * v;
        }
    }
    Ok(total)
}

/// Explicit rate `I₀ = I₁ + I₂` with the conservation law checked against the
/// default sine basis at threshold `10(Δx² + Δt)`.
pub fn evaluate_i0_explicit(traj: &TrajectoryGrid, rate: &CylinderRate) -> Result<RateBreakdown> {
    let grid = traj.grid;
    evaluate_i0_with(traj, rate, &sine_basis(grid, DEFAULT_BASIS_MODES), 10.0 * grid.error_scale())
}

pub fn evaluate_i0_with(
    traj: &TrajectoryGrid,
    rate: &CylinderRate,
    basis: &[FieldGrid],
    threshold: f64,
) -> Result<RateBreakdown> {
    traj.ensure_interior()?;
    let residual = conservation_residual(traj, basis)?;
    let i1 = transport_cost(traj);
    let i2 = reaction_cost(traj, &rate.coefficients())?;
    let feasible = residual <= threshold;
    let i0 = if feasible { i1 + i2 } else { f64::INFINITY };
    Ok(RateBreakdown {
        i0,
        i1,
        i2,
        h_gamma: 0.0,
        total: i0,
        energy: energy(traj),
        conservation_residual: residual,
        feasible,
    })
}

/// The two halves `(J¹_H, J²_G)` of the variational functional.
pub fn evaluate_j_parts(
    traj: &TrajectoryGrid,
    g: &FieldGrid,
    h: &FieldGrid,
    rate: &CylinderRate,
) -> Result<(f64, f64)> {
    let grid = traj.grid;
    grid.ensure_same(g.grid())?;
    grid.ensure_same(h.grid())?;
    let coeffs = rate.coefficients();
    let (nx, nt, dx, dt) = (grid.nx, grid.nt, grid.dx(), grid.dt());

    let grads: Vec<Vec<f64>> = (0..grid.levels()).map(|n| bond_gradient(h.row(n), dx)).collect();
    let mut j1 = bond_inner(traj.q.row(nt), &grads[nt], dx);
    let mut j2 = node_inner(traj.k.row(nt), g.row(nt), dx);
    for n in 0..nt {
        let dgrad: Vec<f64> = grads[n + 1].iter().zip(&grads[n]).map(|(a, b)| a - b).collect();
        j1 -= bond_inner(traj.q.row(n + 1), &dgrad, dx);

        let rho = traj.rho.row(n);
        let laplacian: f64 = (1..nx).map(|j| rho[j] * (grads[n][j] - grads[n][j - 1])).sum();
        j1 -= 0.5 * dt * laplacian;
        let sig = bond_conductivity(rho);
        let squares: Vec<f64> = grads[n].iter().map(|v| v * v).collect();
        j1 -= 0.5 * dt * bond_inner(&sig, &squares, dx);
        j1 += 0.5 * dt * (traj.rho_plus * grads[n][nx - 1] - traj.rho_minus * grads[n][0]);

        let dg: Vec<f64> = g.row(n + 1).iter().zip(g.row(n)).map(|(a, b)| a - b).collect();
        j2 -= node_inner(traj.k.row(n + 1), &dg, dx);
        let reaction: Vec<f64> = rho
            .iter()
            .zip(g.row(n))
            .map(|(&r, &gv)| coeffs.creation(r) * gv.exp_m1() + coeffs.annihilation(r) * (-gv).exp_m1())
            .collect();
        j2 -= dt * crate::hydro_pde::node_integral(&reaction, dx);
    }
    Ok((j1, j2))
}

/// `J_{G,H}(ρ, Q, K) = J¹_H(ρ, Q) + J²_G(ρ, K)`.
pub fn evaluate_j_gh(traj: &TrajectoryGrid, g: &FieldGrid, h: &FieldGrid, rate: &CylinderRate) -> Result<f64> {
    let (j1, j2) = evaluate_j_parts(traj, g, h, rate)?;
    Ok(j1 + j2)
}

/// Relative entropy `h_γ(m) = ∫ m log(m/γ) + (1-m) log((1-m)/(1-γ))` of node
/// samples, by the trapezoid rule.
pub fn initial_cost(m: &[f64], gamma: &[f64], dx: f64) -> Result<f64> {
    if m.len() != gamma.len() {
        return Err(Error::Shape {
            expected: gamma.len(),
            got: m.len(),
        });
    }
    let mut density = Vec::with_capacity(m.len());
    for (&mv, &gv) in m.iter().zip(gamma) {
        if !(gv > 0.0 && gv < 1.0) {
            return Err(Error::Domain(format!("reference profile value {gv} must lie in (0, 1)")));
        }
        if !(0.0..=1.0).contains(&mv) {
            return Err(Error::Domain(format!("profile value {mv} is outside [0, 1]")));
        }
        let xlogy = |p: f64, q: f64| if p == 0.0 { 0.0 } else { p * (p / q).ln() };
        density.push(xlogy(mv, gv) + xlogy(1.0 - mv, 1.0 - gv));
    }
    Ok(crate::hydro_pde::node_integral(&density, dx))
}

/// [`initial_cost`] of two profiles sampled on `nx` cells.
pub fn initial_cost_profiles(m: &Profile, gamma: &Profile, nx: usize) -> Result<f64> {
    let xs: Vec<f64> = (0..=nx).map(|j| -1.0 + 2.0 * j as f64 / nx as f64).collect();
    initial_cost(&m.sample(&xs), &gamma.sample(&xs), 2.0 / nx as f64)
}

/// `Ĩ₀ = I₀ - ∫⟨C(ρ) + A(ρ)⟩`.
pub fn shifted_rate(traj: &TrajectoryGrid, rate: &CylinderRate) -> Result<f64> {
    let breakdown = evaluate_i0_explicit(traj, rate)?;
    if !breakdown.feasible {
        return Err(Error::Validation(format!(
            "trajectory violates the conservation law (residual {})",
            breakdown.conservation_residual
        )));
    }
    let coeffs = rate.coefficients();
    let grid = traj.grid;
    let mut mass = 0.0;
    for (n, w) in grid.time_weights().into_iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let total: Vec<f64> = traj
            .rho
            .row(n)
            .iter()
            .map(|&r| coeffs.creation(r) + coeffs.annihilation(r))
            .collect();
        mass += w * crate::hydro_pde::node_integral(&total, grid.dx());
    }
    Ok(breakdown.i0 - mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    /// `Ĩ₀` at the midpoint.
    pub midpoint: f64,
    /// Average of `Ĩ₀` at the two ends.
    pub chord: f64,
    pub holds: bool,
    pub rate_satisfies_l1: bool,
}

/// Slack allowed by [`convex_decomposition_check`].
pub const CONVEXITY_SLACK: f64 = 1e-8;

/// Midpoint convexity of `Ĩ₀` between two feasible trajectories.
pub fn convex_decomposition_check(
    first: &TrajectoryGrid,
    second: &TrajectoryGrid,
    rate: &CylinderRate,
) -> Result<ConvexityReport> {
    let a = shifted_rate(first, rate)?;
    let b = shifted_rate(second, rate)?;
    let midpoint = shifted_rate(&first.midpoint(second)?, rate)?;
    let chord = 0.5 * (a + b);
    Ok(ConvexityReport {
        midpoint,
        chord,
        holds: midpoint <= chord + CONVEXITY_SLACK,
        rate_satisfies_l1: check_assumptions(rate, DEFAULT_CHECK_POINTS).l1_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro_pde::{solve_hydro, stable_steps, HydroProblem};

    fn grid(nx: usize, t: f64) -> Grid {
        Grid::new(nx, stable_steps(nx, t, 0.5), t).unwrap()
    }

    fn bump(g: Grid) -> HydroProblem {
        HydroProblem::new(g, CylinderRate::constant(), |x| 0.5 + 0.25 * (1.0 - x * x), 0.5, 0.5)
    }

    fn tilted(nx: usize) -> (TrajectoryGrid, FieldGrid, FieldGrid) {
        let g = grid(nx, 0.2);
        let g0 = FieldGrid::from_fn(g, |t, x| 0.3 * (1.0 + t) * (std::f64::consts::PI * x / 2.0).cos());
        let h0 = FieldGrid::from_fn(g, |t, x| 0.25 * (1.0 + t) * (x + 1.0) + 0.1 * (3.0 * x).sin());
        let traj = solve_hydro(&bump(g).with_drifts(g0.clone(), h0.clone())).unwrap();
        (traj, g0, h0)
    }

    #[test]
    fn recovered_drifts_round_trip() {
        let (traj, g0, h0) = tilted(32);
        let (g, h) = recover_drifts(&traj, &CylinderRate::constant()).unwrap();
        assert!(g.values().max_abs_diff(g0.values()) < 1e-11);
        let shifted = FieldGrid::from_fn(traj.grid, |t, x| {
            0.25 * (1.0 + t) * (x + 1.0) + 0.1 * (3.0 * x).sin() + 0.1 * 3f64.sin()
        });
        assert!(h.values().max_abs_diff(shifted.values()) < 1e-11);
        assert!(h0.values().max_abs_diff(shifted.values()) > 0.01);
    }

    #[test]
    fn zero_drift_is_recovered_from_untilted_solution() {
        let traj = solve_hydro(&bump(grid(24, 0.2))).unwrap();
        let (g, h) = recover_drifts(&traj, &CylinderRate::constant()).unwrap();
        assert!(g.values().data().iter().all(|v| v.abs() < 1e-13));
        assert!(h.values().data().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn stationary_reaction_drift() {
        // C = 1, A = ¼, κ = 0 ⇒ e^G = ½
        assert!((reaction_drift(1.0, 0.25, 0.0).unwrap() + 2f64.ln()).abs() < 1e-15);
        assert!(reaction_drift(0.0, 1.0, 0.5).is_err());
        assert!((reaction_drift(0.0, 2.0, -1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn j_vanishes_without_drifts() {
        let (traj, _, _) = tilted(16);
        let zero = FieldGrid::zeros(traj.grid);
        assert_eq!(evaluate_j_gh(&traj, &zero, &zero, &CylinderRate::constant()).unwrap(), 0.0);
    }

    #[test]
    fn j_at_recovered_drifts_equals_i0() {
        let (traj, g0, h0) = tilted(32);
        let rate = CylinderRate::constant();
        let b = evaluate_i0_explicit(&traj, &rate).unwrap();
        assert!(b.feasible);
        let j = evaluate_j_gh(&traj, &g0, &h0, &rate).unwrap();
        assert!((j - b.i0).abs() < 1e-10 * b.i0, "{j} vs {}", b.i0);
    }

    #[test]
    fn i0_matches_drift_cost() {
        let (traj, g0, h0) = tilted(32);
        let rate = CylinderRate::constant();
        let coeffs = rate.coefficients();
        let g = traj.grid;
        let mut expected = 0.0;
        for (n, w) in g.time_weights().into_iter().enumerate() {
            let rho = traj.rho.row(n);
            let dh = bond_gradient(h0.row(n), g.dx());
            let sq: Vec<f64> = dh.iter().map(|v| v * v).collect();
            expected += w * 0.5 * bond_inner(&bond_conductivity(rho), &sq, g.dx());
            let reaction: Vec<f64> = rho
                .iter()
                .zip(g0.row(n))
                .map(|(&r, &gv)| {
                    let (c, a) = (coeffs.creation(r), coeffs.annihilation(r));
                    c * (1.0 - gv.exp() + gv * gv.exp()) + a * (1.0 - (-gv).exp() - gv * (-gv).exp())
                })
                .collect();
            expected += w * crate::hydro_pde::node_integral(&reaction, g.dx());
        }
        let b = evaluate_i0_explicit(&traj, &rate).unwrap();
        assert!((b.i0 - expected).abs() < 1e-12, "{} vs {expected}", b.i0);
        assert!((b.i0 - b.i1 - b.i2).abs() < 1e-15);
        assert_eq!(b.total, b.i0);
    }

    #[test]
    fn broken_conservation_is_infeasible() {
        let traj = solve_hydro(&bump(grid(16, 0.1))).unwrap();
        let mut k = traj.kdot.clone();
        let cell = 8;
        k.set(0, cell, k.get(0, cell) + 1.0 / traj.grid.dt() / traj.grid.dx());
        let broken = TrajectoryGrid::from_rates(traj.grid, traj.rho.clone(), traj.qdot.clone(), k, 0.5, 0.5).unwrap();
        let b = evaluate_i0_explicit(&broken, &CylinderRate::constant()).unwrap();
        assert!(!b.feasible);
        assert_eq!(b.total, f64::INFINITY);
    }

    #[test]
    fn conservation_residual_cases() {
        let traj = solve_hydro(&bump(grid(16, 0.1))).unwrap();
        let basis = sine_basis(traj.grid, 4);
        assert!(conservation_residual(&traj, &basis).unwrap() < 1e-13);

        let zero = Levels::zeros(traj.grid.levels(), traj.grid.nx);
        let no_q = TrajectoryGrid::from_rates(traj.grid, traj.rho.clone(), zero, traj.kdot.clone(), 0.5, 0.5).unwrap();
        assert!(conservation_residual(&no_q, &basis).unwrap() > 1e-3);

        let g = grid(8, 0.1);
        let flat = TrajectoryGrid::from_rates(
            g,
            Levels::from_rows(vec![vec![0.5; 9]; g.levels()]).unwrap(),
            Levels::zeros(g.levels(), 8),
            Levels::zeros(g.levels(), 9),
            0.5,
            0.5,
        )
        .unwrap();
        assert_eq!(conservation_residual(&flat, &sine_basis(g, 3)).unwrap(), 0.0);
    }

    #[test]
    fn time_dependent_test_functions_balance() {
        let (traj, _, _) = tilted(16);
        let phi = FieldGrid::from_fn(traj.grid, |t, x| (1.0 + 3.0 * t) * (1.0 - x * x));
        assert!(conservation_residual(&traj, &[phi]).unwrap() < 1e-13);
    }

    #[test]
    fn initial_cost_values() {
        let half = Profile::Constant(0.5);
        assert_eq!(initial_cost_profiles(&half, &half, 16).unwrap(), 0.0);
        let ln2 = 2f64.ln();
        let full = initial_cost_profiles(&Profile::Constant(1.0), &half, 16).unwrap();
        assert!((full - 2.0 * ln2).abs() < 1e-14);
        let empty = initial_cost_profiles(&Profile::Constant(0.0), &half, 16).unwrap();
        assert!((empty - 2.0 * ln2).abs() < 1e-14);
        assert!(initial_cost_profiles(&half, &Profile::Constant(1.0), 4).is_err());
    }

    #[test]
    fn h_perturbation_lowers_j_by_quadratic_form() {
        let (traj, g0, h0) = tilted(32);
        let rate = CylinderRate::constant();
        let base = evaluate_j_gh(&traj, &g0, &h0, &rate).unwrap();
        let f = FieldGrid::from_fn(traj.grid, |t, x| 0.2 * (1.0 - t) * (2.0 * x).sin() + 0.1 * x * x);
        let moved = evaluate_j_gh(&traj, &g0, &h0.add(&f), &rate).unwrap();
        let g = traj.grid;
        let mut quad = 0.0;
        for (n, w) in g.time_weights().into_iter().enumerate() {
            let df = bond_gradient(f.row(n), g.dx());
            let sq: Vec<f64> = df.iter().map(|v| v * v).collect();
            quad += w * 0.5 * bond_inner(&bond_conductivity(traj.rho.row(n)), &sq, g.dx());
        }
        assert!(((base - moved) - quad).abs() < 1e-8 * quad);
    }

    #[test]
    fn pieces_decouple() {
        let (traj, g0, h0) = tilted(16);
        let rate = CylinderRate::constant();
        let other = FieldGrid::from_fn(traj.grid, |_, x| x * x);
        let (a1, a2) = evaluate_j_parts(&traj, &g0, &h0, &rate).unwrap();
        let (b1, _) = evaluate_j_parts(&traj, &other, &h0, &rate).unwrap();
        let (_, c2) = evaluate_j_parts(&traj, &g0, &other, &rate).unwrap();
        assert_eq!(a1, b1);
        assert_eq!(a2, c2);
    }

    #[test]
    fn convexity_on_a_pair() {
        let rate = CylinderRate::constant();
        let (tilted_traj, _, _) = tilted(16);
        let plain = solve_hydro(&bump(tilted_traj.grid)).unwrap();
        let r = convex_decomposition_check(&plain, &tilted_traj, &rate).unwrap();
        assert!(r.holds && r.rate_satisfies_l1, "{r:?}");
        let same = convex_decomposition_check(&plain, &plain, &rate).unwrap();
        assert!((same.midpoint - same.chord).abs() < 1e-14);
    }
}
