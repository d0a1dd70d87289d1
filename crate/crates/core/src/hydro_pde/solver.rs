use crate::error::{Error, Result};
use crate::hydro_pde::grid::{bond_conductivity, bond_gradient, FieldGrid, Grid, Levels, TrajectoryGrid};
use crate::rates::{CylinderRate, MacroscopicCoefficients};

/// Densities may leave `[0, 1]` by at most this much before the solve aborts.
pub const RANGE_SLACK: f64 = 1e-10;

/// Reaction-diffusion problem with Dirichlet reservoirs and optional drifts.
#[derive(Debug, Clone)]
pub struct HydroProblem {
    pub grid: Grid,
    pub initial: Vec<f64>,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub rate: CylinderRate,
    pub g: FieldGrid,
    pub h: FieldGrid,
}

impl HydroProblem {
    pub fn new(
        grid: Grid,
        rate: CylinderRate,
        initial: impl Fn(f64) -> f64,
        rho_minus: f64,
        rho_plus: f64,
    ) -> Self {
        Self {
            initial: grid.xs().into_iter().map(initial).collect(),
            grid,
            rho_minus,
            rho_plus,
            rate,
            g: FieldGrid::zeros(grid),
            h: FieldGrid::zeros(grid),
        }
    }

    pub fn with_drifts(mut self, g: FieldGrid, h: FieldGrid) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    fn validate(&self) -> Result<()> {
        let grid = &self.grid;
        let dx = grid.dx();
        if grid.dt() > dx * dx * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "explicit scheme needs dt <= dx^2: dt = {}, dx^2 = {} (raise nt to at least {})",
                grid.dt(),
                dx * dx,
                (grid.t_final / (dx * dx)).ceil()
            )));
        }
        if self.initial.len() != grid.nodes() {
            return Err(Error::Shape {
                expected: grid.nodes(),
                got: self.initial.len(),
            });
        }
        for (name, v) in [("rho_minus", self.rho_minus), ("rho_plus", self.rho_plus)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if let Some(v) = self.initial.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("initial density {v} is outside [0, 1]")));
        }
        let first = self.initial[0];
        let last = self.initial[grid.nx];
        if (first - self.rho_minus).abs() > 1e-9 || (last - self.rho_plus).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "initial profile ({first}, {last}) at ±1 does not match boundary densities ({}, {})",
                self.rho_minus, self.rho_plus
            )));
        }
        grid.ensure_same(self.g.grid())?;
        grid.ensure_same(self.h.grid())?;
        Ok(())
    }
}

/// Explicit finite-difference solve of
/// `∂_t ρ = ½Δρ - ∇(σ(ρ)∇H) + C(ρ)e^G - A(ρ)e^{-G}` with `ρ(t, ±1) = ρ̄±`.
///
/// Fluxes `-½D ρ + σ̄ D H` are evaluated on bonds with the arithmetic-mean
/// conductivity, so the update is in exact conservation form.
pub fn solve_hydro(problem: &HydroProblem) -> Result<TrajectoryGrid> {
    problem.validate()?;
    let grid = problem.grid;
    let coeffs = problem.rate.coefficients();
    let (nx, dx, dt) = (grid.nx, grid.dx(), grid.dt());

    let mut rho = Levels::zeros(grid.levels(), grid.nodes());
    let mut qdot = Levels::zeros(grid.levels(), nx);
    let mut kdot = Levels::zeros(grid.levels(), grid.nodes());
    rho.row_mut(0).copy_from_slice(&problem.initial);
    rho.set(0, 0, problem.rho_minus);
    rho.set(0, nx, problem.rho_plus);

    for n in 0..grid.levels() {
        let (flux, reaction) = currents(
            rho.row(n),
            problem.g.row(n),
            problem.h.row(n),
            &coeffs,
            dx,
        );
        qdot.row_mut(n).copy_from_slice(&flux);
        kdot.row_mut(n).copy_from_slice(&reaction);
        if n == grid.nt {
            break;
        }

        let mut next = vec![0.0; grid.nodes()];
        next[0] = problem.rho_minus;
        next[nx] = problem.rho_plus;
        let current = rho.row(n);
        for j in 1..nx {
            let v = current[j] + dt * (-(flux[j] - flux[j - 1]) / dx + reaction[j]);
            if !v.is_finite() {
                return Err(Error::Numerical {
                    step: n + 1,
                    message: format!("non-finite density at x = {}", grid.x(j)),
                });
            }
            if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
                return Err(Error::Numerical {
                    step: n + 1,
                    message: format!("density {v} left [0, 1] at x = {}", grid.x(j)),
                });
            }
            next[j] = v.clamp(0.0, 1.0);
        }
        rho.row_mut(n + 1).copy_from_slice(&next);
    }

    TrajectoryGrid::from_rates(grid, rho, qdot, kdot, problem.rho_minus, problem.rho_plus)
}

/// Bond fluxes and node reaction rates for one time level.
pub(crate) fn currents(
    rho: &[f64],
    g: &[f64],
    h: &[f64],
    coeffs: &MacroscopicCoefficients,
    dx: f64,
) -> (Vec<f64>, Vec<f64>) {
    let grad_rho = bond_gradient(rho, dx);
    let grad_h = bond_gradient(h, dx);
    let sig = bond_conductivity(rho);
    let flux = grad_rho
        .iter()
        .zip(&grad_h)
        .zip(&sig)
        .map(|((dr, dh), s)| -0.5 * dr + s * dh)
        .collect();
    let reaction = rho
        .iter()
        .zip(g)
        .map(|(&r, &gv)| coeffs.creation(r) * gv.exp() - coeffs.annihilation(r) * (-gv).exp())
        .collect();
    (flux, reaction)
}
