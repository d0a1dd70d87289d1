use serde::Serialize;

use crate::error::{Error, Result};
use crate::hydro_pde::TrajectoryGrid;
use crate::profile::Profile;
use crate::simulator::LatticeState;

use super::output::SeriesTable;

/// Replica means of occupancies and integrated counters at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroAverages {
    pub n: usize,
    pub run_count: usize,
    pub times: Vec<f64>,
    /// Mean occupancy per site, `2N + 1` entries per sample.
    pub density: Vec<Vec<f64>>,
    /// Mean bond transfer count `Q(x)` for bonds `(x, x+1)`, `2N` entries.
    pub q: Vec<Vec<f64>>,
    /// Mean net creation count `K(x)` per site.
    pub k: Vec<Vec<f64>>,
}

impl MicroAverages {
    pub fn empty(n: usize, times: Vec<f64>) -> Self {
        let s = times.len();
        Self {
            n,
            run_count: 0,
            density: vec![vec![0.0; 2 * n + 1]; s],
            q: vec![vec![0.0; 2 * n]; s],
            k: vec![vec![0.0; 2 * n + 1]; s],
            times,
        }
    }

    /// Averages snapshot series, one series per replica.
    pub fn from_runs(n: usize, times: &[f64], runs: &[Vec<LatticeState>]) -> Result<Self> {
        let mut out = Self::empty(n, times.to_vec());
        let mut sums = vec![(vec![0i64; 2 * n + 1], vec![0i64; 2 * n], vec![0i64; 2 * n + 1]); times.len()];
        for run in runs {
            if run.len() != times.len() {
                return Err(Error::Shape {
                    expected: times.len(),
                    got: run.len(),
                });
            }
            for (snap, (eta, q, k)) in run.iter().zip(sums.iter_mut()) {
                if snap.n != n {
                    return Err(Error::Consistency(format!("snapshot has N = {}, expected {n}", snap.n)));
                }
                eta.iter_mut().zip(&snap.occupancy).for_each(|(a, &b)| *a += b as i64);
                q.iter_mut().zip(&snap.q).for_each(|(a, &b)| *a += b);
                k.iter_mut().zip(&snap.k).for_each(|(a, &b)| *a += b);
            }
        }
        let r = runs.len();
        out.run_count = r;
        if r > 0 {
            let mean = |v: &[i64]| v.iter().map(|&s| s as f64 / r as f64).collect::<Vec<_>>();
            for (s, (eta, q, k)) in sums.iter().enumerate() {
                out.density[s] = mean(eta);
                out.q[s] = mean(q);
                out.k[s] = mean(k);
            }
        }
        Ok(out)
    }

    fn x(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) / self.n as f64
    }

    /// `⟨ρᴺ φ⟩` of the mean configuration at sample `s`.
    pub fn density_pairing(&self, s: usize, phi: impl Fn(f64) -> f64) -> f64 {
        (0..2 * self.n).map(|i| self.density[s][i] * phi(self.x(i))).sum::<f64>() / self.n as f64
    }

    /// `⟨Qᴺ φ⟩ = N⁻² Σ Q(x) φ(x/N)` at sample `s`.
    pub fn current_pairing(&self, s: usize, phi: impl Fn(f64) -> f64) -> f64 {
        let nn = (self.n * self.n) as f64;
        self.q[s].iter().enumerate().map(|(i, &q)| q * phi(self.x(i))).sum::<f64>() / nn
    }

    /// `⟨Kᴺ φ⟩ = N⁻¹ Σ K(x) φ(x/N)` at sample `s`.
    pub fn reaction_pairing(&self, s: usize, phi: impl Fn(f64) -> f64) -> f64 {
        self.k[s].iter().enumerate().map(|(i, &k)| k * phi(self.x(i))).sum::<f64>() / self.n as f64
    }

    fn table(&self, rows: &[Vec<f64>]) -> SeriesTable {
        let mut table = SeriesTable::default();
        if self.run_count == 0 {
            return table;
        }
        for (s, row) in rows.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                table.rows.push((self.run_count, self.times[s], self.x(i), v));
            }
        }
        table
    }

    pub fn rho_table(&self) -> SeriesTable {
        self.table(&self.density)
    }

    pub fn q_table(&self) -> SeriesTable {
        self.table(&self.q)
    }

    pub fn k_table(&self) -> SeriesTable {
        self.table(&self.k)
    }
}

/// Gaps for one test function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub test_function: String,
    /// `|∫⟨ρᴺ φ⟩dt - ∫⟨ρ̄ φ⟩dt|`
    pub density: f64,
    /// `|⟨Q_Tᴺ φ⟩ - ∫⟨Q̇ φ⟩dt|`
    pub current: f64,
    /// `|⟨K_Tᴺ φ⟩ - ∫⟨K̇ φ⟩dt|`
    pub reaction: f64,
}

/// `sin(kπ(x+1)/2)` for `k = 1, 2, 3`; the first is `cos(πx/2)`.
pub fn default_test_functions() -> Vec<Profile> {
    (1..=3).map(|k| Profile::Sine { amp: 1.0, k }).collect()
}

/// Time integral of `t ↦ Σ_j w_j f(n, j)` with trapezoid weights in time.
fn space_time_integral(traj: &TrajectoryGrid, cols: usize, weight: &[f64], f: impl Fn(usize, usize) -> f64) -> f64 {
    let grid = traj.grid;
    let dt = grid.dt();
    (0..grid.levels())
        .map(|n| {
            let w = if n == 0 || n == grid.nt { 0.5 * dt } else { dt };
            w * (0..cols).map(|j| weight[j] * f(n, j)).sum::<f64>()
        })
        .sum()
}

/// Compares replica averages with a macroscopic trajectory over the same
/// time horizon and boundary data.
pub fn compare_micro_macro(micro: &MicroAverages, macro_: &TrajectoryGrid, tests: &[Profile]) -> Result<Vec<GapRow>> {
    let grid = macro_.grid;
    let (Some(&first), Some(&last)) = (micro.times.first(), micro.times.last()) else {
        return Err(Error::Consistency("no sample times".into()));
    };
    if first != 0.0 || (last - grid.t_final).abs() > 1e-12 * grid.t_final.max(1.0) {
        return Err(Error::Consistency(format!(
            "samples span [{first}, {last}] but the macroscopic horizon is [0, {}]",
            grid.t_final
        )));
    }
    let s_end = micro.times.len() - 1;
    let dx = grid.dx();
    let node_w = grid.node_weights();
    Ok(tests
        .iter()
        .map(|phi| {
            let at_nodes: Vec<f64> = grid.xs().iter().map(|&x| phi.eval(x)).collect();
            let at_bonds: Vec<f64> = (0..grid.nx).map(|b| dx * phi.eval(grid.x(b) + 0.5 * dx)).collect();
            let node_weighted: Vec<f64> = at_nodes.iter().zip(&node_w).map(|(a, w)| a * w).collect();

            let micro_rho: Vec<f64> = (0..micro.times.len())
                .map(|s| micro.density_pairing(s, |x| phi.eval(x)))
                .collect();
            let micro_rho = crate::empirical::trapezoid(&micro.times, &micro_rho);
            let macro_rho = space_time_integral(macro_, grid.nodes(), &node_weighted, |n, j| macro_.rho.get(n, j));
            let macro_q = space_time_integral(macro_, grid.nx, &at_bonds, |n, j| macro_.qdot.get(n, j));
            let macro_k = space_time_integral(macro_, grid.nodes(), &node_weighted, |n, j| macro_.kdot.get(n, j));
            GapRow {
                test_function: phi.to_string(),
                density: (micro_rho - macro_rho).abs(),
                current: (micro.current_pairing(s_end, |x| phi.eval(x)) - macro_q).abs(),
                reaction: (micro.reaction_pairing(s_end, |x| phi.eval(x)) - macro_k).abs(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro_pde::{solve_hydro, stable_steps, Grid, HydroProblem};
    use crate::rates::CylinderRate;
    use crate::simulator::{run_replicas, SimParams};

    #[test]
    fn empty_lattice_has_zero_gaps() {
        let mut p = SimParams::new(8, 0.2, CylinderRate::zero()).uniform_samples(5);
        p.beta_plus = 0.0;
        p.beta_minus = 0.0;
        p.initial = Profile::Constant(0.0);
        let runs = run_replicas(&p, 3, |_, out| out.snapshots).unwrap();
        let micro = MicroAverages::from_runs(8, &p.sample_times, &runs).unwrap();
        let grid = Grid::new(16, stable_steps(16, 0.2, 0.5), 0.2).unwrap();
        let traj = solve_hydro(&HydroProblem::new(grid, CylinderRate::zero(), |_| 0.0, 0.0, 0.0)).unwrap();
        for row in compare_micro_macro(&micro, &traj, &default_test_functions()).unwrap() {
            assert_eq!((row.density, row.current, row.reaction), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn horizon_mismatch_is_rejected() {
        let micro = MicroAverages::empty(4, vec![0.0, 0.5]);
        let grid = Grid::new(8, stable_steps(8, 1.0, 0.5), 1.0).unwrap();
        let traj = solve_hydro(&HydroProblem::new(grid, CylinderRate::zero(), |_| 0.5, 0.5, 0.5)).unwrap();
        assert!(compare_micro_macro(&micro, &traj, &default_test_functions()).is_err());
    }

    #[test]
    fn stationary_half_gaps_are_small() {
        let p = SimParams::new(64, 0.25, CylinderRate::constant()).uniform_samples(11);
        let runs = run_replicas(&p, 20, |_, out| out.snapshots).unwrap();
        let micro = MicroAverages::from_runs(64, &p.sample_times, &runs).unwrap();
        let grid = Grid::new(64, stable_steps(64, 0.25, 0.5), 0.25).unwrap();
        let traj = solve_hydro(&HydroProblem::new(grid, CylinderRate::constant(), |_| 0.5, 0.5, 0.5)).unwrap();
        for row in compare_micro_macro(&micro, &traj, &default_test_functions()).unwrap() {
            assert!(row.density < 0.05 && row.current < 0.05 && row.reaction < 0.05, "{row:?}");
        }
    }

    #[test]
    fn averages_are_header_only_without_runs() {
        let micro = MicroAverages::from_runs(4, &[0.0, 1.0], &[]).unwrap();
        assert!(micro.rho_table().rows.is_empty());
    }
}
