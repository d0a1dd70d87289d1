use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::profile::{Drift, Profile};
use crate::rates::CylinderRate;

/// Default cap on the number of recorded events.
pub const DEFAULT_EVENT_CAP: usize = 100_000_000;

/// Parameters of one simulation run.
#[derive(Debug, Clone)]
pub struct SimParams {
    /// Scale: sites `-N..=N`.
    pub n: usize,
    /// Final macroscopic time.
    pub t_final: f64,
    pub beta_plus: f64,
    pub beta_minus: f64,
    pub rate: CylinderRate,
    pub tilt_g: Drift,
    pub tilt_h: Drift,
    /// Initial product-measure profile `γ`.
    pub initial: Profile,
    pub seed: u64,
    pub sample_times: Vec<f64>,
    /// Freezing interval for time-dependent tilts; `None` means `T/1000`.
    pub substep: Option<f64>,
    pub record_events: bool,
    pub event_cap: usize,
}

impl SimParams {
    /// Untilted run from `γ ≡ ½` with unit reservoirs, sampled at `0` and `T`.
    pub fn new(n: usize, t_final: f64, rate: CylinderRate) -> Self {
        Self {
            n,
            t_final,
            beta_plus: 1.0,
            beta_minus: 1.0,
            rate,
            tilt_g: Drift::Zero,
            tilt_h: Drift::Zero,
            initial: Profile::Constant(0.5),
            seed: 0,
            sample_times: vec![0.0, t_final],
            substep: None,
            record_events: false,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    /// `count` equally spaced sample times covering `[0, T]`.
    pub fn uniform_samples(mut self, count: usize) -> Self {
        let count = count.max(2);
        self.sample_times = (0..count)
            .map(|k| self.t_final * k as f64 / (count - 1) as f64)
            .collect();
        self
    }

    /// Copy of the parameters for replica `r`, seeded with `seed ^ r`.
    pub fn for_replica(&self, r: u64) -> Self {
        let mut p = self.clone();
        p.seed = self.seed ^ r;
        p
    }

    pub fn sites(&self) -> usize {
        2 * self.n + 1
    }

    pub fn is_tilted(&self) -> bool {
        !(self.tilt_g.is_zero() && self.tilt_h.is_zero())
    }

    pub fn is_time_dependent(&self) -> bool {
        self.tilt_g.is_time_dependent() || self.tilt_h.is_time_dependent()
    }

    pub fn substep_len(&self) -> f64 {
        self.substep.unwrap_or(self.t_final / 1000.0)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.rate.range();
        if self.n < m + 1 {
            return Err(Error::Config(format!(
                "N = {} must be at least M + 1 = {}",
                self.n,
                m + 1
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("T = {} must be positive", self.t_final)));
        }
        for (name, b) in [("beta_plus", self.beta_plus), ("beta_minus", self.beta_minus)] {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::Config(format!("{name} = {b} must be a nonnegative number")));
            }
        }
        for i in 0..self.sites() {
            let g = self.initial.eval(self.position(i));
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::Config(format!(
                    "initial profile value {g} at x = {} is outside [0, 1]",
                    self.position(i)
                )));
            }
        }
        if self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("sample times must be sorted".into()));
        }
        if let Some(s) = self
            .sample_times
            .iter()
            .find(|s| !(0.0..=self.t_final).contains(*s))
        {
            return Err(Error::Config(format!("sample time {s} is outside [0, T]")));
        }
        if self.is_time_dependent() && !(self.substep_len() > 0.0) {
            return Err(Error::Config("substep must be positive".into()));
        }
        Ok(())
    }

    /// Macroscopic position `x/N` of array index `i`.
    pub fn position(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) / self.n as f64
    }

    pub(crate) fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Microscopic configuration with current counters.
///
/// Arrays are indexed from the left end: site `x` lives at index `x + N`,
/// bond `(x, x+1)` at index `x + N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub n: usize,
    pub occupancy: Vec<u8>,
    /// Occupancy at time zero, shared between snapshots of one run.
    pub initial: Arc<[u8]>,
    /// Net number of particles that crossed each bond to the right.
    pub q: Vec<i64>,
    /// Net bulk creations per site.
    pub k: Vec<i64>,
    /// Net injections by the right reservoir.
    pub r_plus: i64,
    /// Net injections by the left reservoir.
    pub r_minus: i64,
    pub t: f64,
}

impl LatticeState {
    /// Fresh state with zero counters.
    pub fn from_occupancy(n: usize, occupancy: Vec<u8>) -> Result<Self> {
        if occupancy.len() != 2 * n + 1 {
            return Err(Error::Shape {
                expected: 2 * n + 1,
                got: occupancy.len(),
            });
        }
        if occupancy.iter().any(|&b| b > 1) {
            return Err(Error::Validation("occupancy entries must be 0 or 1".into()));
        }
        Ok(Self {
            n,
            initial: occupancy.clone().into(),
            occupancy,
            q: vec![0; 2 * n],
            k: vec![0; 2 * n + 1],
            r_plus: 0,
            r_minus: 0,
            t: 0.0,
        })
    }

    pub fn sites(&self) -> usize {
        2 * self.n + 1
    }

    /// Occupancy of site `x ∈ [-N, N]`.
    pub fn eta(&self, x: i64) -> u8 {
        self.occupancy[(x + self.n as i64) as usize]
    }

    pub fn particles(&self) -> usize {
        self.occupancy.iter().map(|&b| b as usize).sum()
    }

    /// Per-site residual of `η_t - η_0 - [Q(x-1) - Q(x)] - K(x)`, with the
    /// reservoir counters subtracted at the end sites.
    pub fn conservation_residual(&self) -> Vec<i64> {
        let last = 2 * self.n;
        (0..=last)
            .map(|i| {
                let inflow = if i > 0 { self.q[i - 1] } else { 0 };
                let outflow = if i < last { self.q[i] } else { 0 };
                let mut r = self.occupancy[i] as i64 - self.initial[i] as i64 - (inflow - outflow)
                    - self.k[i];
                if i == 0 {
                    r -= self.r_minus;
                }
                if i == last {
                    r -= self.r_plus;
                }
                r
            })
            .collect()
    }
}

/// Draws independent Bernoulli(`γ(x/N)`) occupancies from the run's seed.
///
/// [`run`](super::run) starts from exactly this configuration.
pub fn sample_initial(params: &SimParams) -> Result<LatticeState> {
    params.validate()?;
    Ok(sample_initial_with(params, &mut params.rng()))
}

pub(crate) fn sample_initial_with(params: &SimParams, rng: &mut impl Rng) -> LatticeState {
    let occupancy = (0..params.sites())
        .map(|i| {
            let g = params.initial.eval(params.position(i));
            u8::from(rng.random::<f64>() < g)
        })
        .collect();
    LatticeState::from_occupancy(params.n, occupancy).expect("occupancy has the right length")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extreme_profiles() {
        let mut p = SimParams::new(10, 1.0, CylinderRate::constant());
        p.initial = Profile::Constant(1.0);
        assert!(sample_initial(&p).unwrap().occupancy.iter().all(|&b| b == 1));
        p.initial = Profile::Constant(0.0);
        assert!(sample_initial(&p).unwrap().occupancy.iter().all(|&b| b == 0));
    }

    #[test]
    fn half_filling_concentrates() {
        // Hoeffding: P(|mean - ½| > 0.05) <= 2 exp(-2 · 2001 · 0.0025) < 1e-4
        for seed in 0..20 {
            let mut p = SimParams::new(1000, 1.0, CylinderRate::constant());
            p.seed = seed;
            let s = sample_initial(&p).unwrap();
            let mean = s.particles() as f64 / s.sites() as f64;
            assert!((0.45..=0.55).contains(&mean), "seed {seed}: {mean}");
        }
    }

    #[test]
    fn validation() {
        let p = SimParams::new(1, 1.0, CylinderRate::neighbor_sum());
        assert!(matches!(p.validate(), Err(Error::Config(_))));
        let mut p = SimParams::new(4, 1.0, CylinderRate::constant());
        p.sample_times = vec![0.5, 0.2];
        assert!(p.validate().is_err());
        p.sample_times = vec![0.0, 1.5];
        assert!(p.validate().is_err());
        p.sample_times = vec![0.0, 1.0];
        p.beta_plus = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn fresh_state_balances() {
        let s = LatticeState::from_occupancy(3, vec![1, 0, 1, 1, 0, 0, 1]).unwrap();
        assert!(s.conservation_residual().iter().all(|&r| r == 0));
        assert_eq!(s.eta(-3), 1);
        assert_eq!(s.eta(3), 1);
    }
}
