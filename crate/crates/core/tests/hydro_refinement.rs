use std::f64::consts::PI;

use fluctlat::hydro_pde::{solve_hydro, stable_steps, Grid, HydroProblem};
use fluctlat::rates::CylinderRate;

/// Pure exclusion from `½ + a cos(πx/2)` decays as `½ + a e^{-π²t/8} cos(πx/2)`.
fn exact(t: f64, x: f64) -> f64 {
    0.5 + 0.3 * (-PI * PI * t / 8.0).exp() * (PI * x / 2.0).cos()
}

fn max_error(nx: usize) -> (f64, f64) {
    let t = 0.3;
    let grid = Grid::new(nx, stable_steps(nx, t, 0.25), t).unwrap();
    let traj = solve_hydro(&HydroProblem::new(grid, CylinderRate::zero(), |x| exact(0.0, x), 0.5, 0.5)).unwrap();
    let err = (0..grid.levels())
        .flat_map(|n| (0..grid.nodes()).map(move |j| (n, j)))
        .map(|(n, j)| (traj.rho.get(n, j) - exact(grid.t(n), grid.x(j))).abs())
        .fold(0.0, f64::max);
    (err, grid.error_scale())
}

#[test]
fn second_order_convergence_to_exact_decay() {
    let errors: Vec<(f64, f64)> = [16, 32, 64].into_iter().map(max_error).collect();
    for &(err, scale) in &errors {
        assert!(err < scale, "error {err} exceeds dx^2 + dt = {scale}");
    }
    for w in errors.windows(2) {
        let ratio = w[0].0 / w[1].0;
        assert!(ratio > 3.5 && ratio < 4.5, "refinement ratio {ratio}");
    }
}
