use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::parallel;
use crate::simulator::engine::{apply, touched, Channel, RateEngine};
use crate::simulator::event_log::{Event, EventLog};
use crate::simulator::state::{sample_initial_with, LatticeState, SimParams};
use crate::simulator::tree::RateTree;

/// Snapshots at the requested times and, if asked for, the event log.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub snapshots: Vec<LatticeState>,
    pub log: Option<EventLog>,
}

/// Ends of the intervals on which the tilt is frozen.
pub(crate) fn freeze_points(params: &SimParams) -> Vec<f64> {
    if !params.is_time_dependent() {
        return vec![params.t_final];
    }
    let h = params.substep_len();
    let steps = (params.t_final / h).ceil() as usize;
    (1..=steps)
        .map(|k| (k as f64 * h).min(params.t_final))
        .collect()
}

/// Exact continuous-time simulation up to `T`.
pub fn run(params: &SimParams) -> Result<SimOutput> {
    params.validate()?;
    let mut rng = params.rng();
    let mut state = sample_initial_with(params, &mut rng);
    let n = params.n;
    let mut engine = RateEngine::new(params, true);
    let mut tree = RateTree::new(engine.channels());
    let mut events = Vec::new();
    let mut snapshots = Vec::with_capacity(params.sample_times.len());
    let mut pending = params.sample_times.iter().copied().peekable();

    let mut emit = |state: &LatticeState, upto: f64, inclusive: bool, out: &mut Vec<LatticeState>| {
        while let Some(&s) = pending.peek() {
            if s < upto || (inclusive && s <= upto) {
                let mut snap = state.clone();
                snap.t = s;
                out.push(snap);
                pending.next();
            } else {
                break;
            }
        }
    };

    let mut t = 0.0;
    for end in freeze_points(params) {
        engine.freeze(t);
        engine.fill(&state.occupancy, &mut tree);
        loop {
            let total = tree.total();
            if total <= 0.0 {
                break;
            }
            let wait = -(1.0 - rng.random::<f64>()).ln() / total;
            let next = t + wait;
            if next > end {
                break;
            }
            emit(&state, next, false, &mut snapshots);
            let index = tree.find(rng.random::<f64>() * total);
            let channel = Channel::from_index(index, n).expect("tree leaf is a channel");
            let direction = apply(&mut state, channel);
            t = next;
            state.t = t;
            if params.record_events {
                if events.len() >= params.event_cap {
                    return Err(Error::Capacity(format!(
                        "event log cap of {} events reached at t = {t}",
                        params.event_cap
                    )));
                }
                events.push(Event {
                    time: t,
                    channel: index as i32,
                    direction,
                });
            }
            let (lo, hi) = touched(channel);
            engine.refresh(&state.occupancy, &mut tree, lo, hi);
        }
        t = end;
        state.t = t;
        emit(&state, end, true, &mut snapshots);
    }

    let log = params.record_events.then(|| EventLog {
        n,
        t_final: params.t_final,
        initial: state.initial.to_vec(),
        events,
    });
    Ok(SimOutput { snapshots, log })
}

/// Runs replicas `0..replicas` (replica `r` seeded with `seed ^ r`) and maps
/// each output through `f`. Results come back in replica order.
pub fn run_replicas<T: Send>(
    params: &SimParams,
    replicas: usize,
    f: impl Fn(usize, SimOutput) -> T + Sync + Send,
) -> Result<Vec<T>> {
    params.validate()?;
    parallel::install(|| {
        (0..replicas)
            .into_par_iter()
            .map(|r| run(&params.for_replica(r as u64)).map(|out| f(r, out)))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{Drift, Profile};
    use crate::rates::CylinderRate;

    #[test]
    fn frozen_system_never_moves() {
        let mut p = SimParams::new(8, 1.0, CylinderRate::zero()).uniform_samples(5);
        p.beta_plus = 0.0;
        p.beta_minus = 0.0;
        p.initial = Profile::Constant(0.0);
        let out = run(&p).unwrap();
        assert_eq!(out.snapshots.len(), 5);
        for s in &out.snapshots {
            assert_eq!(s.particles(), 0);
            assert!(s.q.iter().all(|&v| v == 0) && s.k.iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn bookkeeping_is_exact_at_every_snapshot() {
        let mut p = SimParams::new(12, 0.3, CylinderRate::neighbor_sum()).uniform_samples(31);
        p.beta_plus = 3.0;
        p.beta_minus = 0.2;
        p.initial = Profile::Bump { base: 0.3, amp: 0.4 };
        p.tilt_h = Drift::space_time(|t, x| (1.0 + t) * x);
        p.tilt_g = Drift::Static(Profile::Constant(0.4));
        p.substep = Some(0.01);
        p.seed = 11;
        let out = run(&p).unwrap();
        assert_eq!(out.snapshots.len(), 31);
        for s in &out.snapshots {
            assert!(s.occupancy.iter().all(|&b| b <= 1));
            assert!(s.conservation_residual().iter().all(|&r| r == 0));
        }
        assert!(out.snapshots.last().unwrap().q.iter().any(|&v| v != 0));
    }

    #[test]
    fn same_seed_same_path() {
        let mut p = SimParams::new(6, 0.5, CylinderRate::constant());
        p.record_events = true;
        p.seed = 5;
        let a = run(&p).unwrap();
        let b = run(&p).unwrap();
        assert_eq!(a.log, b.log);
        assert!(!a.log.as_ref().unwrap().events.is_empty());
        p.seed = 6;
        assert_ne!(run(&p).unwrap().log, a.log);
    }

    #[test]
    fn replicas_match_sequential_runs() {
        let mut p = SimParams::new(5, 0.2, CylinderRate::constant());
        p.seed = 99;
        let par = run_replicas(&p, 4, |_, out| out.snapshots).unwrap();
        for (r, snaps) in par.iter().enumerate() {
            assert_eq!(&run(&p.for_replica(r as u64)).unwrap().snapshots, snaps);
        }
    }

    #[test]
    fn event_cap_is_enforced() {
        let mut p = SimParams::new(10, 1.0, CylinderRate::constant());
        p.record_events = true;
        p.event_cap = 10;
        assert!(matches!(run(&p), Err(Error::Capacity(_))));
    }

    #[test]
    fn snapshot_times_are_requested_times() {
        let p = SimParams::new(4, 0.4, CylinderRate::constant()).uniform_samples(9);
        let out = run(&p).unwrap();
        let ts: Vec<f64> = out.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, p.sample_times);
    }
}
