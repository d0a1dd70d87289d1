//! Empirical measures of microscopic snapshots and local-equilibrium statistics.
//!
//! Pairings follow the lattice conventions: `⟨ρᴺ φ⟩ = (1/N) Σ_{x=-N}^{N-1} η(x) φ(x/N)`,
//! `⟨Kᴺ φ⟩ = (1/N) Σ K(x) φ(x/N)` over the bulk window, and
//! `⟨Qᴺ ∇φ⟩ = (1/N) Σ_{x=-N}^{N-1} Q(x) [φ((x+1)/N) - φ(x/N)]`.

use crate::error::{Error, Result};
use crate::rates::Cylinder;
use crate::simulator::LatticeState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SiteMeasure {
    Density,
    Reaction,
}

/// Counters and occupancy of one snapshot, ready for pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTriple {
    pub n: usize,
    pub t: f64,
    pub eta: Vec<u8>,
    pub q: Vec<i64>,
    pub k: Vec<i64>,
}

impl EmpiricalTriple {
    pub fn from_state(state: &LatticeState) -> Self {
        Self {
            n: state.n,
            t: state.t,
            eta: state.occupancy.clone(),
            q: state.q.clone(),
            k: state.k.clone(),
        }
    }

    fn x(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) / self.n as f64
    }

    pub fn density(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = (0..2 * self.n)
            .filter(|&i| self.eta[i] == 1)
            .map(|i| phi(self.x(i)))
            .sum();
        sum / self.n as f64
    }

    pub fn reaction(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self
            .k
            .iter()
            .enumerate()
            .filter(|(_, &k)| k != 0)
            .map(|(i, &k)| k as f64 * phi(self.x(i)))
            .sum();
        sum / self.n as f64
    }

    pub fn current_gradient(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self
            .q
            .iter()
            .enumerate()
            .filter(|(_, &q)| q != 0)
            .map(|(i, &q)| q as f64 * (phi(self.x(i + 1)) - phi(self.x(i))))
            .sum();
        sum / self.n as f64
    }

    /// `⟨Qᴺ φ⟩ = (1/N²) Σ Q(x) φ(x/N)`.
    pub fn current(&self, phi: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self
            .q
            .iter()
            .enumerate()
            .filter(|(_, &q)| q != 0)
            .map(|(i, &q)| q as f64 * phi(self.x(i)))
            .sum();
        sum / (self.n * self.n) as f64
    }
}

pub fn pair_site_measure(state: &LatticeState, kind: SiteMeasure, phi: impl Fn(f64) -> f64) -> f64 {
    let triple = EmpiricalTriple::from_state(state);
    match kind {
        SiteMeasure::Density => triple.density(phi),
        SiteMeasure::Reaction => triple.reaction(phi),
    }
}

pub fn pair_q_gradient(state: &LatticeState, phi: impl Fn(f64) -> f64) -> f64 {
    EmpiricalTriple::from_state(state).current_gradient(phi)
}

pub fn pair_q(state: &LatticeState, phi: impl Fn(f64) -> f64) -> f64 {
    EmpiricalTriple::from_state(state).current(phi)
}

/// Mean occupancy over `{y : |y - x| <= l}`, clipped to the lattice.
pub fn local_average(state: &LatticeState, x: i64, l: usize) -> f64 {
    local_average_raw(&state.occupancy, state.n, x, l)
}

fn local_average_raw(occ: &[u8], n: usize, x: i64, l: usize) -> f64 {
    let n = n as i64;
    let lo = (x - l as i64).max(-n);
    let hi = (x + l as i64).min(n);
    let count: u32 = (lo..=hi).map(|y| occ[(y + n) as usize] as u32).sum();
    count as f64 / (hi - lo + 1) as f64
}

/// Trapezoidal integral of samples at times `ts`.
pub fn trapezoid(ts: &[f64], values: &[f64]) -> f64 {
    ts.windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// Time integral of `(2(N-R))⁻¹ Σ_x φ(s, x/N) [ψ(τ_x η_s) - ν_{η̄^l(x)}(ψ)]`
/// over the snapshots, with `l = ⌊εN⌋` and the sum over `|x| <= N - R`.
pub fn local_equilibrium_statistic(
    snapshots: &[LatticeState],
    psi: &Cylinder,
    phi: impl Fn(f64, f64) -> f64,
    epsilon: f64,
) -> Result<f64> {
    let Some(first) = snapshots.first() else {
        return Err(Error::Validation("no snapshots".into()));
    };
    let n = first.n;
    let range = psi.range();
    let l = (epsilon * n as f64).floor() as usize;
    if l < range {
        return Err(Error::Window { window: l, range });
    }
    if n <= range {
        return Err(Error::Window { window: n, range });
    }
    if snapshots.iter().any(|s| s.n != n) {
        return Err(Error::Validation("snapshots come from different lattices".into()));
    }
    let ts: Vec<f64> = snapshots.iter().map(|s| s.t).collect();
    if ts.len() > 2 {
        let h = ts[1] - ts[0];
        if ts.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1.0)) {
            return Err(Error::Validation("snapshots must be equally spaced in time".into()));
        }
    }

    let norm = 1.0 / (2 * (n - range)) as f64;
    let values: Vec<f64> = snapshots
        .iter()
        .map(|s| {
            let sum: f64 = (range..=2 * n - range)
                .map(|i| {
                    let x = i as i64 - n as i64;
                    let local = local_average_raw(&s.occupancy, n, x, l);
                    let w = phi(s.t, x as f64 / n as f64);
                    w * (psi.eval_at(&s.occupancy, i) - psi.bernoulli_mean(local))
                })
                .sum();
            norm * sum
        })
        .collect();
    Ok(trapezoid(&ts, &values))
}

/// Per-site residual of the microscopic conservation identity.
pub fn conservation_residual_micro(state: &LatticeState) -> Vec<i64> {
    state.conservation_residual()
}

/// Fails on the first site where the conservation identity is violated.
pub fn verify_bookkeeping(state: &LatticeState) -> Result<()> {
    match state
        .conservation_residual()
        .iter()
        .enumerate()
        .find(|(_, &r)| r != 0)
    {
        Some((i, &r)) => Err(Error::Bookkeeping {
            site: i as i64 - state.n as i64,
            residual: r,
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Profile;
    use crate::rates::CylinderRate;
    use crate::simulator::{run, SimParams};
    use proptest::prelude::*;

    fn state(n: usize, occ: Vec<u8>) -> LatticeState {
        LatticeState::from_occupancy(n, occ).unwrap()
    }

    #[test]
    fn density_pairings() {
        let full = state(50, vec![1; 101]);
        assert!((pair_site_measure(&full, SiteMeasure::Density, |_| 1.0) - 2.0).abs() < 1e-12);
        let empty = state(5, vec![0; 11]);
        assert_eq!(pair_site_measure(&empty, SiteMeasure::Density, |x| x.exp()), 0.0);
        let s = state(2, vec![1, 0, 1, 0, 1]);
        assert_eq!(pair_site_measure(&s, SiteMeasure::Density, |x| x), -0.5);
    }

    #[test]
    fn current_gradient_pairing() {
        let mut s = state(2, vec![0; 5]);
        assert_eq!(pair_q_gradient(&s, |x| x), 0.0);
        s.q = vec![1, 1, 1, 1];
        assert_eq!(pair_q_gradient(&s, |x| x), 1.0);
        assert_eq!(pair_q_gradient(&s, |_| 3.0), 0.0);
    }

    #[test]
    fn local_averages() {
        assert_eq!(local_average(&state(4, vec![1; 9]), 0, 3), 1.0);
        let s = state(3, vec![0, 0, 1, 0, 1, 0, 0]);
        assert!((local_average(&s, 0, 1) - 2.0 / 3.0).abs() < 1e-15);
        let alt = state(100, (0..201).map(|i| (i % 2) as u8).collect());
        assert!((local_average(&alt, 0, 60) - 0.5).abs() < 0.01);
        // clipped at the edge: sites -3, -2
        assert_eq!(local_average(&s, -3, 1), 0.0);
    }

    #[test]
    fn frozen_full_lattice_has_zero_statistic() {
        let s0 = state(20, vec![1; 41]);
        let mut s1 = s0.clone();
        s1.t = 1.0;
        let pair = Cylinder::from_fn(1, |w| (w[1] * w[2]) as f64).unwrap();
        let v = local_equilibrium_statistic(&[s0, s1], &pair, |_, _| 1.0, 0.2).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn small_window_is_rejected() {
        let s = state(20, vec![1; 41]);
        let pair = Cylinder::from_fn(1, |w| (w[1] * w[2]) as f64).unwrap();
        assert!(matches!(
            local_equilibrium_statistic(&[s.clone(), s], &pair, |_, _| 1.0, 0.01),
            Err(Error::Window { .. })
        ));
    }

    #[test]
    fn injected_fault_is_located() {
        let mut s = state(3, vec![0, 1, 0, 1, 0, 1, 0]);
        assert!(conservation_residual_micro(&s).iter().all(|&r| r == 0));
        s.k[3] += 1;
        let r = conservation_residual_micro(&s);
        assert_eq!(r[3], -1);
        assert!(matches!(
            verify_bookkeeping(&s),
            Err(Error::Bookkeeping { site: 0, residual: -1 })
        ));
    }

    #[test]
    fn simulated_triple_satisfies_the_balance_exactly() {
        let mut p = SimParams::new(24, 0.2, CylinderRate::neighbor_sum());
        p.initial = Profile::Bump { base: 0.2, amp: 0.5 };
        p.beta_plus = 2.0;
        p.seed = 4;
        let out = run(&p).unwrap();
        let (s0, s1) = (&out.snapshots[0], &out.snapshots[1]);
        let phi = |x: f64| 1.0 - x * x;
        let lhs = pair_site_measure(s1, SiteMeasure::Density, phi)
            - pair_site_measure(s0, SiteMeasure::Density, phi);
        let rhs = pair_q_gradient(s1, phi) + pair_site_measure(s1, SiteMeasure::Reaction, phi);
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        verify_bookkeeping(s1).unwrap();
    }

    proptest! {
        #[test]
        fn density_pairing_is_bounded(occ in proptest::collection::vec(0u8..2, 21), a in -3.0f64..3.0) {
            let s = state(10, occ);
            let phi = |x: f64| a * (3.0 * x).sin();
            let v = pair_site_measure(&s, SiteMeasure::Density, phi);
            prop_assert!(v.abs() <= 2.0 * a.abs() + 1e-12);
        }

        #[test]
        fn pairings_are_linear(q in proptest::collection::vec(-50i64..50, 16), a in -2.0f64..2.0) {
            let mut s = state(8, vec![0; 17]);
            s.q = q;
            let f = |x: f64| x * x;
            let g = |x: f64| (2.0 * x).cos();
            let combined = pair_q_gradient(&s, |x| f(x) + a * g(x));
            let split = pair_q_gradient(&s, f) + a * pair_q_gradient(&s, g);
            prop_assert!((combined - split).abs() < 1e-9);
        }
    }
}
