use crate::simulator::state::{LatticeState, SimParams};
use crate::simulator::tree::RateTree;

/// Elementary event channel.
///
/// Channels are numbered bonds first (`0..2N`), then sites (`2N..4N+1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Exchange across bond `(i, i+1)` in array indices.
    Bond(usize),
    /// Flip at array index `i`: a bulk Glauber flip or a reservoir flip at the ends.
    Site(usize),
}

impl Channel {
    pub fn index(self, n: usize) -> usize {
        match self {
            Channel::Bond(b) => b,
            Channel::Site(i) => 2 * n + i,
        }
    }

    pub fn from_index(index: usize, n: usize) -> Option<Self> {
        if index < 2 * n {
            Some(Channel::Bond(index))
        } else if index < 4 * n + 1 {
            Some(Channel::Site(index - 2 * n))
        } else {
            None
        }
    }
}

pub fn channel_count(n: usize) -> usize {
    4 * n + 1
}

/// All rates of a configuration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCatalogue {
    /// Exchange rate per bond `(x, x+1)`, `x = -N..N-1`.
    pub bonds: Vec<f64>,
    /// `(x, rate)` for every bulk site.
    pub bulk: Vec<(i64, f64)>,
    /// Reservoir flip rates at `-N` and `+N`.
    pub boundary_minus: f64,
    pub boundary_plus: f64,
}

impl RateCatalogue {
    pub fn total(&self) -> f64 {
        self.bonds.iter().sum::<f64>()
            + self.bulk.iter().map(|(_, r)| r).sum::<f64>()
            + self.boundary_minus
            + self.boundary_plus
    }
}

/// Rates of every channel at time `state.t`, tilted when the parameters carry drifts.
pub fn jump_rates(state: &LatticeState, params: &SimParams) -> RateCatalogue {
    let mut engine = RateEngine::new(params, true);
    engine.freeze(state.t);
    let occ = &state.occupancy;
    let n = params.n;
    RateCatalogue {
        bonds: (0..2 * n).map(|b| engine.rate(occ, Channel::Bond(b))).collect(),
        bulk: engine
            .bulk_sites()
            .map(|i| (i as i64 - n as i64, engine.rate(occ, Channel::Site(i))))
            .collect(),
        boundary_minus: engine.rate(occ, Channel::Site(0)),
        boundary_plus: engine.rate(occ, Channel::Site(2 * n)),
    }
}

/// Channel rates with the tilt frozen at one time.
#[derive(Debug, Clone)]
pub(crate) struct RateEngine<'a> {
    params: &'a SimParams,
    tilted: bool,
    n: usize,
    range: usize,
    half_n2: f64,
    /// `exp(H((x+1)/N) - H(x/N))` per bond: factor for a jump to the right.
    right: Vec<f64>,
    left: Vec<f64>,
    exp_g: Vec<f64>,
    exp_minus_g: Vec<f64>,
}

impl<'a> RateEngine<'a> {
    pub fn new(params: &'a SimParams, tilted: bool) -> Self {
        let n = params.n;
        Self {
            params,
            tilted: tilted && params.is_tilted(),
            n,
            range: params.rate.range(),
            half_n2: 0.5 * (n * n) as f64,
            right: vec![1.0; 2 * n],
            left: vec![1.0; 2 * n],
            exp_g: vec![1.0; 2 * n + 1],
            exp_minus_g: vec![1.0; 2 * n + 1],
        }
    }

    pub fn freeze(&mut self, t: f64) {
        if !self.tilted {
            return;
        }
        let p = self.params;
        let h: Vec<f64> = (0..p.sites()).map(|i| p.tilt_h.eval(t, p.position(i))).collect();
        for b in 0..2 * self.n {
            let dh = h[b + 1] - h[b];
            self.right[b] = dh.exp();
            self.left[b] = (-dh).exp();
        }
        for i in 0..p.sites() {
            let g = p.tilt_g.eval(t, p.position(i));
            self.exp_g[i] = g.exp();
            self.exp_minus_g[i] = (-g).exp();
        }
    }

    pub fn bulk_sites(&self) -> std::ops::RangeInclusive<usize> {
        self.range + 1..=2 * self.n - self.range - 1
    }

    pub fn channels(&self) -> usize {
        channel_count(self.n)
    }

    pub fn rate(&self, occ: &[u8], channel: Channel) -> f64 {
        match channel {
            Channel::Bond(b) => match (occ[b], occ[b + 1]) {
                (1, 0) => self.half_n2 * self.right[b],
                (0, 1) => self.half_n2 * self.left[b],
                _ => 0.0,
            },
            Channel::Site(i) if i == 0 || i == 2 * self.n => {
                let beta = if i == 0 {
                    self.params.beta_minus
                } else {
                    self.params.beta_plus
                };
                if occ[i] == 1 {
                    self.half_n2
                } else {
                    self.half_n2 * beta
                }
            }
            Channel::Site(i) => {
                if i <= self.range || i + self.range >= 2 * self.n {
                    return 0.0;
                }
                let c = self.params.rate.at(occ, i);
                if c == 0.0 {
                    0.0
                } else if occ[i] == 1 {
                    c * self.exp_minus_g[i]
                } else {
                    c * self.exp_g[i]
                }
            }
        }
    }

    pub fn rate_at(&self, occ: &[u8], index: usize) -> f64 {
        self.rate(occ, Channel::from_index(index, self.n).expect("channel in range"))
    }

    pub fn fill(&self, occ: &[u8], tree: &mut RateTree) {
        tree.rebuild((0..self.channels()).map(|c| self.rate_at(occ, c)));
    }

    /// Recomputes the rates that can change when the sites in `lo..=hi` flip.
    pub fn refresh(&self, occ: &[u8], tree: &mut RateTree, lo: usize, hi: usize) {
        let last = 2 * self.n;
        for b in lo.saturating_sub(1)..hi.min(last) + 1 {
            if b < last {
                tree.set(b, self.rate(occ, Channel::Bond(b)));
            }
        }
        for i in lo.saturating_sub(self.range)..=(hi + self.range).min(last) {
            tree.set(2 * self.n + i, self.rate(occ, Channel::Site(i)));
        }
    }
}

/// Sites touched by a channel, as an inclusive index range.
pub(crate) fn touched(channel: Channel) -> (usize, usize) {
    match channel {
        Channel::Bond(b) => (b, b + 1),
        Channel::Site(i) => (i, i),
    }
}

/// Fires `channel` on `state`, updating the counters. Returns `+1` for a jump to
/// the right or a creation, `-1` for a jump to the left or an annihilation.
pub(crate) fn apply(state: &mut LatticeState, channel: Channel) -> i8 {
    match channel {
        Channel::Bond(b) => {
            let dir: i8 = if state.occupancy[b] == 1 { 1 } else { -1 };
            state.occupancy.swap(b, b + 1);
            state.q[b] += dir as i64;
            dir
        }
        Channel::Site(i) => {
            let dir: i8 = if state.occupancy[i] == 0 { 1 } else { -1 };
            state.occupancy[i] ^= 1;
            if i == 0 {
                state.r_minus += dir as i64;
            } else if i == 2 * state.n {
                state.r_plus += dir as i64;
            } else {
                state.k[i] += dir as i64;
            }
            dir
        }
    }
}

/// The direction `apply` would report, or `None` if the channel cannot fire.
pub(crate) fn direction(occ: &[u8], channel: Channel) -> Option<i8> {
    match channel {
        Channel::Bond(b) => match (occ[b], occ[b + 1]) {
            (1, 0) => Some(1),
            (0, 1) => Some(-1),
            _ => None,
        },
        Channel::Site(i) => Some(if occ[i] == 0 { 1 } else { -1 }),
    }
}
