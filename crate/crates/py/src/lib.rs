//! Python bindings: rates, the reaction cost, the hydrodynamic solver, rate
//! functional evaluation, the density contraction and the lattice simulator.

use std::path::Path;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fluctlat::cli_harness::{self, ExperimentConfig, MicroAverages};
use fluctlat::density_contraction::{solve_optimal_drift, suboptimality_audit};
use fluctlat::hydro_pde::{self, FieldGrid, Grid, HydroProblem, Levels, TrajectoryGrid};
use fluctlat::profile::{Drift, Profile};
use fluctlat::rate_functional;
use fluctlat::rates::{self, CylinderRate, RateSpec};
use fluctlat::simulator::{self, SimParams};

fn err(e: fluctlat::Error) -> PyErr {
    match e {
        fluctlat::Error::Numerical { .. } | fluctlat::Error::Iteration { .. } | fluctlat::Error::Io(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn profile(text: &str) -> PyResult<Profile> {
    text.parse().map_err(err)
}

fn drift(text: Option<&str>) -> PyResult<Drift> {
    Ok(match text {
        Some(t) => Drift::Static(profile(t)?),
        None => Drift::Zero,
    })
}

type Matrix = Vec<Vec<f64>>;

fn rows(levels: &Levels) -> Matrix {
    levels.iter_rows().map(<[f64]>::to_vec).collect()
}

/// A finite-range creation/annihilation rate.
#[pyclass(name = "CylinderRate", module = "pyfluctlat", from_py_object)]
#[derive(Clone)]
struct PyRate {
    inner: CylinderRate,
}

#[pymethods]
impl PyRate {
    /// Built-in rate by name: `constant`, `neighbor-sum` or `zero`.
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        let inner = rates::build_cylinder_rate(&RateSpec::Named(name.to_string())).map_err(err)?;
        Ok(Self { inner })
    }

    /// Rate given by a table over the `2^(2·range+1)` window configurations.
    #[staticmethod]
    fn custom(range: usize, table: Vec<f64>) -> PyResult<Self> {
        let inner = rates::build_cylinder_rate(&RateSpec::Table { range, table }).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn range(&self) -> usize {
        self.inner.range()
    }

    #[getter]
    fn table(&self) -> Vec<f64> {
        self.inner.table().to_vec()
    }

    fn creation(&self, alpha: f64) -> f64 {
        self.inner.coefficients().creation(alpha)
    }

    fn annihilation(&self, alpha: f64) -> f64 {
        self.inner.coefficients().annihilation(alpha)
    }

    /// `(l1_ok, l2_ok)` for the monotonicity hypotheses.
    fn check_assumptions(&self) -> (bool, bool) {
        let r = rates::check_assumptions(&self.inner, rates::DEFAULT_CHECK_POINTS);
        (r.l1_ok, r.l2_ok)
    }

    fn __repr__(&self) -> String {
        format!("CylinderRate({:?}, range={})", self.inner.name(), self.inner.range())
    }
}

/// Densities and currents on a uniform space-time grid.
#[pyclass(name = "Trajectory", module = "pyfluctlat", from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    inner: TrajectoryGrid,
    g: FieldGrid,
    h: FieldGrid,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn nx(&self) -> usize {
        self.inner.grid.nx
    }

    #[getter]
    fn nt(&self) -> usize {
        self.inner.grid.nt
    }

    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.grid.t_final
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.grid.xs()
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        (0..self.inner.grid.levels()).map(|n| self.inner.grid.t(n)).collect()
    }

    #[getter]
    fn rho(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.rho)
    }

    #[getter]
    fn qdot(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.qdot)
    }

    #[getter]
    fn kdot(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.kdot)
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.q)
    }

    #[getter]
    fn k(&self) -> Vec<Vec<f64>> {
        rows(&self.inner.k)
    }

    #[getter]
    fn g(&self) -> Vec<Vec<f64>> {
        rows(self.g.values())
    }

    #[getter]
    fn h(&self) -> Vec<Vec<f64>> {
        rows(self.h.values())
    }

    fn energy(&self) -> f64 {
        hydro_pde::energy(&self.inner)
    }

    /// Writes `t,x,rho,qdot,kdot,g,h`.
    fn write_fields(&self, path: &str) -> PyResult<()> {
        std::fs::write(path, cli_harness::output::fields_csv(&self.inner, &self.g, &self.h))
            .map_err(|e| err(e.into()))
    }

    #[staticmethod]
    fn read_fields(path: &str) -> PyResult<Self> {
        let (inner, g, h) = cli_harness::read_fields_csv(Path::new(path)).map_err(err)?;
        Ok(Self { inner, g, h })
    }
}

/// Reaction cost `Φ(C, A, κ)`.
#[pyfunction]
fn phi(c: f64, a: f64, kappa: f64) -> PyResult<f64> {
    rate_functional::phi(c, a, kappa).map_err(err)
}

/// `Φ` by direct numerical maximization of the Legendre problem.
#[pyfunction]
fn phi_legendre_oracle(c: f64, a: f64, kappa: f64) -> PyResult<f64> {
    rate_functional::phi_legendre_oracle(c, a, kappa).map_err(err)
}

/// Explicit finite-difference solve with optional drift profiles.
#[pyfunction]
#[pyo3(signature = (rate, initial, t_final, nx, nt=None, rho_minus=0.5, rho_plus=0.5, g=None, h=None))]
#[allow(clippy::too_many_arguments)]
fn solve_hydro(
    py: Python<'_>,
    rate: &PyRate,
    initial: &str,
    t_final: f64,
    nx: usize,
    nt: Option<usize>,
    rho_minus: f64,
    rho_plus: f64,
    g: Option<&str>,
    h: Option<&str>,
) -> PyResult<PyTrajectory> {
    let nt = nt.unwrap_or_else(|| hydro_pde::stable_steps(nx, t_final, 0.5));
    let grid = Grid::new(nx, nt, t_final).map_err(err)?;
    let initial = profile(initial)?;
    let (g, h) = (drift(g)?, drift(h)?);
    let g = FieldGrid::from_fn(grid, |t, x| g.eval(t, x));
    let h = FieldGrid::from_fn(grid, |t, x| h.eval(t, x));
    let problem = HydroProblem::new(grid, rate.inner.clone(), |x| initial.eval(x), rho_minus, rho_plus)
        .with_drifts(g.clone(), h.clone());
    let inner = py.detach(|| hydro_pde::solve_hydro(&problem)).map_err(err)?;
    Ok(PyTrajectory { inner, g, h })
}

/// Rate functional breakdown as a dict, with the cost of the initial profile
/// relative to `gamma` when given.
#[pyfunction]
#[pyo3(signature = (trajectory, rate, gamma=None))]
fn evaluate_rate(py: Python<'_>, trajectory: &PyTrajectory, rate: &PyRate, gamma: Option<&str>) -> PyResult<Py<PyAny>> {
    let traj = &trajectory.inner;
    let mut b = rate_functional::evaluate_i0_explicit(traj, &rate.inner).map_err(err)?;
    if let Some(gamma) = gamma {
        let gamma = profile(gamma)?.sample(&traj.grid.xs());
        b = b.with_initial_cost(rate_functional::initial_cost(traj.rho.row(0), &gamma, traj.grid.dx()).map_err(err)?);
    }
    to_python(py, &b)
}

/// Drifts `(g, h)` that reproduce the trajectory's currents.
#[pyfunction]
fn recover_drifts(trajectory: &PyTrajectory, rate: &PyRate) -> PyResult<(Matrix, Matrix)> {
    let (g, h) = rate_functional::recover_drifts(&trajectory.inner, &rate.inner).map_err(err)?;
    Ok((rows(g.values()), rows(h.values())))
}

/// `J_{G,H}` at the trajectory's own drifts.
#[pyfunction]
fn evaluate_j(trajectory: &PyTrajectory, rate: &PyRate) -> PyResult<f64> {
    rate_functional::evaluate_j_gh(&trajectory.inner, &trajectory.g, &trajectory.h, &rate.inner).map_err(err)
}

/// Optimal drift for the trajectory's density. Returns a dict with `f_rho`,
/// `h_opt`, Newton statistics and, if `audits > 0`, the audit report.
#[pyfunction]
#[pyo3(signature = (trajectory, rate, tol=1e-10, max_iters=50, audits=0, seed=0))]
fn contract(
    py: Python<'_>,
    trajectory: &PyTrajectory,
    rate: &PyRate,
    tol: f64,
    max_iters: usize,
    audits: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let (traj, rate) = (&trajectory.inner, &rate.inner);
    let (result, audit) = py
        .detach(|| -> fluctlat::Result<_> {
            let result = solve_optimal_drift(traj, rate, tol, max_iters)?;
            let audit = if audits > 0 {
                Some(suboptimality_audit(&result, rate, audits, seed)?)
            } else {
                None
            };
            Ok((result, audit))
        })
        .map_err(err)?;
    let value = serde_json::json!({
        "f_rho": result.f_rho,
        "h_opt": rows(result.h_opt.values()),
        "newton": result.stats(),
        "audit": audit,
    });
    json_to_python(py, &value)
}

/// Replica-averaged occupancies and counters. Returns a dict with `times`,
/// `x`, `density`, `q`, `k` and `run_count`.
#[pyfunction]
#[pyo3(signature = (n, t_final, rate, replicas=1, seed=0, samples=11, initial="const 0.5", beta_minus=1.0, beta_plus=1.0, g=None, h=None))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    py: Python<'_>,
    n: usize,
    t_final: f64,
    rate: &PyRate,
    replicas: usize,
    seed: u64,
    samples: usize,
    initial: &str,
    beta_minus: f64,
    beta_plus: f64,
    g: Option<&str>,
    h: Option<&str>,
) -> PyResult<Py<PyAny>> {
    let mut p = SimParams::new(n, t_final, rate.inner.clone()).uniform_samples(samples);
    p.seed = seed;
    p.initial = profile(initial)?;
    p.beta_minus = beta_minus;
    p.beta_plus = beta_plus;
    p.tilt_g = drift(g)?;
    p.tilt_h = drift(h)?;
    let micro = py
        .detach(|| -> fluctlat::Result<MicroAverages> {
            let runs = simulator::run_replicas(&p, replicas, |_, out| out.snapshots)?;
            MicroAverages::from_runs(n, &p.sample_times, &runs)
        })
        .map_err(err)?;
    let x: Vec<f64> = (0..p.sites()).map(|i| p.position(i)).collect();
    let value = serde_json::json!({
        "run_count": micro.run_count,
        "times": micro.times,
        "x": x,
        "density": micro.density,
        "q": micro.q,
        "k": micro.k,
    });
    json_to_python(py, &value)
}

/// Exact `E[dP̃/dP]` for a small lattice with static drift profiles.
#[pyfunction]
#[pyo3(signature = (n, t_final, rate, g=None, h=None, initial="const 0.5", omega=None))]
fn exact_tilted_moment(
    n: usize,
    t_final: f64,
    rate: &PyRate,
    g: Option<&str>,
    h: Option<&str>,
    initial: &str,
    omega: Option<&str>,
) -> PyResult<f64> {
    let mut p = SimParams::new(n, t_final, rate.inner.clone());
    p.initial = profile(initial)?;
    p.tilt_g = drift(g)?;
    p.tilt_h = drift(h)?;
    let omega = match omega {
        Some(o) => profile(o)?,
        None => p.initial.clone(),
    };
    simulator::exact_tilted_moment(&p, &omega).map_err(err)
}

/// Runs a configuration given as text and returns `(passed, summary)`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str, out_dir: &str) -> PyResult<(bool, Py<PyAny>)> {
    let config = ExperimentConfig::parse(config).map_err(err)?;
    let report = py
        .detach(|| cli_harness::run_experiment(&config, Path::new(out_dir)))
        .map_err(err)?;
    Ok((report.passed, json_to_python(py, &report.summary)?))
}

/// Decimal text with 17 significant digits, as written to CSV artifacts.
#[pyfunction]
fn format_number(v: f64) -> String {
    cli_harness::format_number(v)
}

fn to_python(py: Python<'_>, value: &impl serde::Serialize) -> PyResult<Py<PyAny>> {
    let value = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_python(py, &value)
}

fn json_to_python(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pymodule]
fn pyfluctlat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyRate>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(phi_legendre_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(solve_hydro, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_rate, m)?)?;
    m.add_function(wrap_pyfunction!(recover_drifts, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_j, m)?)?;
    m.add_function(wrap_pyfunction!(contract, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(exact_tilted_moment, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(format_number, m)?)?;
    Ok(())
}
