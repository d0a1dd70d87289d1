use crate::error::{Error, Result};
use crate::rates::sigma;

/// Uniform space-time grid on `[0, T] × [-1, 1]` with `nt` time steps and
/// `nx` spatial intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub nt: usize,
    pub t_final: f64,
}

impl Grid {
    pub fn new(nx: usize, nt: usize, t_final: f64) -> Result<Self> {
        if nx < 2 || nt < 1 {
            return Err(Error::Config(format!(
                "grid needs nx >= 2 and nt >= 1 (got nx={nx}, nt={nt})"
            )));
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::Config(format!("final time {t_final} must be positive")));
        }
        Ok(Self { nx, nt, t_final })
    }

    pub fn dx(&self) -> f64 {
        2.0 / self.nx as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -1.0 + j as f64 * self.dx()
    }

    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..=self.nx).map(|j| self.x(j)).collect()
    }

    pub fn nodes(&self) -> usize {
        self.nx + 1
    }

    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    /// `Δx² + Δt`, the scale of the scheme's truncation error.
    pub fn error_scale(&self) -> f64 {
        self.dx() * self.dx() + self.dt()
    }

    /// Trapezoid weights for node sums over `[-1, 1]`.
    pub fn node_weights(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut w = vec![dx; self.nodes()];
        w[0] = 0.5 * dx;
        w[self.nx] = 0.5 * dx;
        w
    }

    /// Time quadrature weights over levels `0..=nt`. Time integrals use the
    /// left-endpoint rule, which matches the explicit Euler update and the
    /// Euler accumulation of the integrated currents.
    pub fn time_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dt(); self.levels()];
        w[self.nt] = 0.0;
        w
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.nx == other.nx && self.nt == other.nt && (self.t_final - other.t_final).abs() <= 1e-12 * self.t_final
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if !self.same_shape(other) {
            return Err(Error::GridMismatch(format!(
                "{}x{} on [0,{}] vs {}x{} on [0,{}]",
                self.nt, self.nx, self.t_final, other.nt, other.nx, other.t_final
            )));
        }
        Ok(())
    }
}

/// Row-major table with one row per time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Levels {
    cols: usize,
    data: Vec<f64>,
}

impl Levels {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Shape {
                expected: cols,
                got: bad.len(),
            });
        }
        Ok(Self {
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn get(&self, n: usize, j: usize) -> f64 {
        self.data[n * self.cols + j]
    }

    pub fn set(&mut self, n: usize, j: usize, v: f64) {
        self.data[n * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `(1-s) self + s other`.
    pub fn lerp(&self, other: &Levels, s: f64) -> Self {
        Self {
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Levels) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Forward differences `(v[j+1] - v[j]) / Δx`, one per bond.
pub fn bond_gradient(values: &[f64], dx: f64) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]) / dx).collect()
}

/// Arithmetic mean of `σ` at the two ends of each bond.
pub fn bond_conductivity(rho: &[f64]) -> Vec<f64> {
    rho.windows(2)
        .map(|w| 0.5 * (sigma(w[0]) + sigma(w[1])))
        .collect()
}

/// `Σ w_j a_j b_j` with trapezoid node weights.
pub fn node_inner(a: &[f64], b: &[f64], dx: f64) -> f64 {
    let n = a.len();
    let interior: f64 = (1..n - 1).map(|j| a[j] * b[j]).sum();
    dx * (interior + 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]))
}

pub fn node_integral(a: &[f64], dx: f64) -> f64 {
    let n = a.len();
    let interior: f64 = a[1..n - 1].iter().sum();
    dx * (interior + 0.5 * (a[0] + a[n - 1]))
}

/// `Σ_b Δx a_b c_b` over bonds.
pub fn bond_inner(a: &[f64], c: &[f64], dx: f64) -> f64 {
    dx * a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>()
}

/// A scalar field sampled on a [`Grid`]: drifts, test functions, perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    grid: Grid,
    values: Levels,
}

impl FieldGrid {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: Levels::zeros(grid.levels(), grid.nodes()),
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Levels::zeros(grid.levels(), grid.nodes());
        for n in 0..grid.levels() {
            let t = grid.t(n);
            for (j, v) in values.row_mut(n).iter_mut().enumerate() {
                *v = f(t, grid.x(j));
            }
        }
        Self { grid, values }
    }

    pub fn from_levels(grid: Grid, values: Levels) -> Result<Self> {
        if values.rows() != grid.levels() || values.cols() != grid.nodes() {
            return Err(Error::GridMismatch(format!(
                "field of {}x{} values on a grid of {}x{} nodes",
                values.rows(),
                values.cols(),
                grid.levels(),
                grid.nodes()
            )));
        }
        if values.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("field contains non-finite values".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn nt(&self) -> usize {
        self.grid.nt
    }

    pub fn values(&self) -> &Levels {
        &self.values
    }

    pub fn row(&self, n: usize) -> &[f64] {
        self.values.row(n)
    }

    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values.get(n, j)
    }

    pub fn set(&mut self, n: usize, j: usize, v: f64) {
        self.values.set(n, j, v);
    }

    pub fn is_zero(&self) -> bool {
        self.values.data().iter().all(|&v| v == 0.0)
    }

    pub fn add(&self, other: &FieldGrid) -> FieldGrid {
        let data = self
            .values
            .data()
            .iter()
            .zip(other.values.data())
            .map(|(a, b)| a + b);
        let cols = self.values.cols();
        let rows = data.collect::<Vec<_>>().chunks(cols).map(<[f64]>::to_vec).collect();
        FieldGrid {
            grid: self.grid,
            values: Levels::from_rows(rows).expect("same shape"),
        }
    }

    /// Bilinear interpolation, clamped to the grid.
    pub fn interpolate(&self, t: f64, x: f64) -> f64 {
        let g = &self.grid;
        let ft = (t / g.dt()).clamp(0.0, g.nt as f64);
        let fx = ((x + 1.0) / g.dx()).clamp(0.0, g.nx as f64);
        let n0 = (ft.floor() as usize).min(g.nt.saturating_sub(1));
        let j0 = (fx.floor() as usize).min(g.nx - 1);
        let st = ft - n0 as f64;
        let sx = fx - j0 as f64;
        let n1 = (n0 + 1).min(g.nt);
        let v = |n: usize, j: usize| self.values.get(n, j);
        let lo = (1.0 - sx) * v(n0, j0) + sx * v(n0, j0 + 1);
        let hi = (1.0 - sx) * v(n1, j0) + sx * v(n1, j0 + 1);
        (1.0 - st) * lo + st * hi
    }
}

/// A density trajectory with its conservative and non-conservative currents.
///
/// Conservative currents live on bonds: entry `b` of a `qdot`/`q` row is the
/// current through `[x_b, x_{b+1}]`, the same indexing as the microscopic
/// `Q(x)` for the bond `(x, x+1)`. Densities and non-conservative currents
/// live on nodes. The integrated currents are accumulated with the explicit
/// Euler rule `Q^{n+1} = Q^n + Δt Q̇^n`, so that the discrete conservation law
/// `ρ^n - ρ^0 = -D Q^n + K^n` holds exactly for solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    pub grid: Grid,
    pub rho: Levels,
    pub qdot: Levels,
    pub kdot: Levels,
    pub q: Levels,
    pub k: Levels,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl TrajectoryGrid {
    /// Assembles a trajectory from densities and instantaneous currents and
    /// accumulates the integrated currents.
    pub fn from_rates(
        grid: Grid,
        rho: Levels,
        qdot: Levels,
        kdot: Levels,
        rho_minus: f64,
        rho_plus: f64,
    ) -> Result<Self> {
        let check = |name: &str, l: &Levels, cols: usize| -> Result<()> {
            if l.rows() != grid.levels() || l.cols() != cols {
                return Err(Error::GridMismatch(format!(
                    "{name} has {}x{} entries, expected {}x{}",
                    l.rows(),
                    l.cols(),
                    grid.levels(),
                    cols
                )));
            }
            Ok(())
        };
        check("rho", &rho, grid.nodes())?;
        check("qdot", &qdot, grid.nx)?;
        check("kdot", &kdot, grid.nodes())?;
        let (q, k) = accumulate(&grid, &qdot, &kdot);
        Ok(Self {
            grid,
            rho,
            qdot,
            kdot,
            q,
            k,
            rho_minus,
            rho_plus,
        })
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn nt(&self) -> usize {
        self.grid.nt
    }

    pub fn rho_row(&self, n: usize) -> &[f64] {
        self.rho.row(n)
    }

    pub fn rho_range(&self) -> (f64, f64) {
        self.rho
            .data()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Requires `ε ≤ ρ ≤ 1-ε` for some `ε > 0` on every node.
    pub fn ensure_interior(&self) -> Result<()> {
        for n in 0..self.grid.levels() {
            for (j, &v) in self.rho.row(n).iter().enumerate() {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::Singularity { t: n, x: j, value: v });
                }
            }
        }
        Ok(())
    }

    /// Midpoint `(self + other)/2` of two trajectories on the same grid.
    pub fn midpoint(&self, other: &TrajectoryGrid) -> Result<TrajectoryGrid> {
        self.grid.ensure_same(&other.grid)?;
        Ok(TrajectoryGrid {
            grid: self.grid,
            rho: self.rho.lerp(&other.rho, 0.5),
            qdot: self.qdot.lerp(&other.qdot, 0.5),
            kdot: self.kdot.lerp(&other.kdot, 0.5),
            q: self.q.lerp(&other.q, 0.5),
            k: self.k.lerp(&other.k, 0.5),
            rho_minus: 0.5 * (self.rho_minus + other.rho_minus),
            rho_plus: 0.5 * (self.rho_plus + other.rho_plus),
        })
    }
}

pub(crate) fn accumulate(grid: &Grid, qdot: &Levels, kdot: &Levels) -> (Levels, Levels) {
    let dt = grid.dt();
    let mut q = Levels::zeros(grid.levels(), qdot.cols());
    let mut k = Levels::zeros(grid.levels(), kdot.cols());
    for n in 0..grid.nt {
        for b in 0..qdot.cols() {
            q.set(n + 1, b, q.get(n, b) + dt * qdot.get(n, b));
        }
        for j in 0..kdot.cols() {
            k.set(n + 1, j, k.get(n, j) + dt * kdot.get(n, j));
        }
    }
    (q, k)
}
