use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::profile::Profile;
use crate::simulator::engine::{apply, direction, touched, Channel, RateEngine};
use crate::simulator::event_log::EventLog;
use crate::simulator::run::freeze_points;
use crate::simulator::state::{LatticeState, SimParams};
use crate::simulator::tree::RateTree;

/// Largest `N` accepted by [`exact_tilted_moment`]: `2^(2N+1) <= 512` states.
pub const MAX_EXACT_N: usize = 4;

/// `log` of the Bernoulli likelihood ratio `dν_ω/dν_γ` at `occupancy`.
fn initial_log_ratio(params: &SimParams, omega: &Profile, occupancy: &[u8]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &eta) in occupancy.iter().enumerate() {
        let x = params.position(i);
        let (g, w) = (params.initial.eval(x), omega.eval(x));
        let (pg, pw) = if eta == 1 { (g, w) } else { (1.0 - g, 1.0 - w) };
        if pg <= 0.0 {
            return Err(Error::Consistency(format!(
                "initial occupancy {eta} at x = {x} has probability zero under the reference profile"
            )));
        }
        if pw != pg {
            total += (pw / pg).ln();
        }
    }
    Ok(total)
}

/// Log-likelihood ratio of the tilted dynamics started from `ν_ω` against the
/// untilted dynamics started from `ν_γ`, evaluated on a recorded untilted path.
///
/// Sum over events of `log(λ̃/λ)`, minus `∫(Λ̃ - Λ)ds` along the path, plus the
/// initial-measure term. Time-dependent tilts are frozen on the same substeps
/// as in [`run`](super::run).
pub fn log_radon_nikodym(log: &EventLog, params: &SimParams, omega: &Profile) -> Result<f64> {
    params.validate()?;
    let n = params.n;
    if log.n != n || log.initial.len() != params.sites() {
        return Err(Error::Consistency(format!(
            "event log for N = {} ({} sites) does not match N = {n}",
            log.n,
            log.initial.len()
        )));
    }
    if (log.t_final - params.t_final).abs() > 0.0 {
        return Err(Error::Consistency(format!(
            "event log covers T = {} but parameters have T = {}",
            log.t_final, params.t_final
        )));
    }
    let mut state = LatticeState::from_occupancy(n, log.initial.clone())
        .map_err(|e| Error::Consistency(format!("bad initial configuration: {e}")))?;
    let initial_term = initial_log_ratio(params, omega, &log.initial)?;

    let mut plain = RateEngine::new(params, false);
    let mut tilted = RateEngine::new(params, true);
    let mut plain_tree = RateTree::new(plain.channels());
    let mut tilted_tree = RateTree::new(tilted.channels());

    let mut jumps = 0.0;
    let mut compensator = 0.0;
    let mut t = 0.0;
    let mut events = log.events.iter().enumerate().peekable();
    for end in freeze_points(params) {
        plain.freeze(t);
        tilted.freeze(t);
        plain.fill(&state.occupancy, &mut plain_tree);
        tilted.fill(&state.occupancy, &mut tilted_tree);
        while let Some(&(k, e)) = events.peek() {
            if !(e.time >= t && e.time <= params.t_final) {
                return Err(Error::Consistency(format!(
                    "event {k} at time {} is out of order or beyond T",
                    e.time
                )));
            }
            if e.time > end {
                break;
            }
            events.next();
            compensator += (tilted_tree.total() - plain_tree.total()) * (e.time - t);
            t = e.time;

            let channel = usize::try_from(e.channel)
                .ok()
                .and_then(|c| Channel::from_index(c, n))
                .ok_or_else(|| Error::Consistency(format!("event {k} has unknown channel {}", e.channel)))?;
            let index = channel.index(n);
            let (lambda, lambda_tilted) = (plain_tree.get(index), tilted_tree.get(index));
            if lambda <= 0.0 || direction(&state.occupancy, channel) != Some(e.direction) {
                return Err(Error::Consistency(format!(
                    "event {k} on channel {} (direction {}) cannot occur in the logged configuration",
                    e.channel, e.direction
                )));
            }
            jumps += (lambda_tilted / lambda).ln();
            apply(&mut state, channel);
            let (lo, hi) = touched(channel);
            plain.refresh(&state.occupancy, &mut plain_tree, lo, hi);
            tilted.refresh(&state.occupancy, &mut tilted_tree, lo, hi);
        }
        compensator += (tilted_tree.total() - plain_tree.total()) * (end - t);
        t = end;
    }
    if let Some((k, e)) = events.next() {
        return Err(Error::Consistency(format!("event {k} at time {} is beyond T", e.time)));
    }
    Ok(jumps - compensator + initial_term)
}

/// `E[dP̃/dP]` computed exactly on the full state space, with the
/// Feynman–Kac generator built from the same rates and log-weights as
/// [`log_radon_nikodym`].
pub fn exact_tilted_moment(params: &SimParams, omega: &Profile) -> Result<f64> {
    params.validate()?;
    let n = params.n;
    if n > MAX_EXACT_N {
        return Err(Error::Capacity(format!(
            "exact moment needs N <= {MAX_EXACT_N} (2^(2N+1) <= 512 states), got N = {n}"
        )));
    }
    if params.is_time_dependent() {
        return Err(Error::Domain("exact moment requires a time-independent tilt".into()));
    }
    let sites = params.sites();
    let states = 1usize << sites;
    let mut plain = RateEngine::new(params, false);
    let mut tilted = RateEngine::new(params, true);
    plain.freeze(0.0);
    tilted.freeze(0.0);

    let decode = |s: usize| -> Vec<u8> { (0..sites).map(|i| ((s >> i) & 1) as u8).collect() };
    let encode = |occ: &[u8]| -> usize {
        occ.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum()
    };

    let mut generator = DMatrix::<f64>::zeros(states, states);
    let mut start = DVector::<f64>::zeros(states);
    for s in 0..states {
        let occ = decode(s);
        let mut escape = 0.0;
        let mut escape_tilted = 0.0;
        for index in 0..plain.channels() {
            let lambda = plain.rate_at(&occ, index);
            if lambda <= 0.0 {
                continue;
            }
            let lambda_tilted = tilted.rate_at(&occ, index);
            let weight = (lambda_tilted / lambda).ln();
            let mut next = LatticeState::from_occupancy(n, occ.clone())?;
            apply(&mut next, Channel::from_index(index, n).expect("channel in range"));
            generator[(s, encode(&next.occupancy))] += lambda * weight.exp();
            escape += lambda;
            escape_tilted += lambda_tilted;
        }
        generator[(s, s)] -= escape + (escape_tilted - escape);

        let reference: f64 = occ
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let g = params.initial.eval(params.position(i));
                if b == 1 { g } else { 1.0 - g }
            })
            .product();
        if reference > 0.0 {
            start[s] = reference * initial_log_ratio(params, omega, &occ)?.exp();
        }
    }

    let propagator = (generator * params.t_final).exp();
    let ones = DVector::<f64>::from_element(states, 1.0);
    Ok((start.transpose() * propagator * ones)[(0, 0)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::Drift;
    use crate::rates::CylinderRate;
    use crate::simulator::run::run;

    fn logged(n: usize, t: f64, seed: u64) -> SimParams {
        let mut p = SimParams::new(n, t, CylinderRate::constant());
        p.record_events = true;
        p.seed = seed;
        p.initial = Profile::Bump { base: 0.3, amp: 0.4 };
        p
    }

    #[test]
    fn untilted_path_has_zero_log_ratio() {
        let p = logged(6, 0.3, 1);
        let log = run(&p).unwrap().log.unwrap();
        assert_eq!(log_radon_nikodym(&log, &p, &p.initial).unwrap(), 0.0);
    }

    #[test]
    fn constant_bond_drift_is_invisible() {
        let mut p = logged(6, 0.3, 2);
        let log = run(&p).unwrap().log.unwrap();
        p.tilt_h = Drift::Static(Profile::Constant(1.7));
        assert_eq!(log_radon_nikodym(&log, &p, &p.initial.clone()).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_log_is_rejected() {
        let p = logged(3, 0.2, 3);
        let mut log = run(&p).unwrap().log.unwrap();
        let other = logged(4, 0.2, 3);
        assert!(matches!(
            log_radon_nikodym(&log, &other, &p.initial),
            Err(Error::Consistency(_))
        ));
        if let Some(e) = log.events.first_mut() {
            e.direction = -e.direction;
        }
        assert!(matches!(
            log_radon_nikodym(&log, &p, &p.initial),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn moment_without_tilt_is_one() {
        let p = SimParams::new(2, 0.4, CylinderRate::neighbor_sum());
        let m = exact_tilted_moment(&p, &p.initial).unwrap();
        assert!((m - 1.0).abs() < 1e-12, "{m}");
    }

    #[test]
    fn moment_with_static_tilt_is_one() {
        let mut p = SimParams::new(3, 0.1, CylinderRate::constant());
        p.tilt_h = Drift::Static(Profile::Poly(vec![0.0, 1.0]));
        p.tilt_g = Drift::Static(Profile::Constant(0.3));
        p.beta_plus = 2.0;
        let omega = Profile::Constant(0.6);
        let m = exact_tilted_moment(&p, &omega).unwrap();
        assert!((m - 1.0).abs() < 1e-8, "{m}");
    }

    #[test]
    fn frozen_system_moment() {
        let mut p = SimParams::new(1, 1.0, CylinderRate::zero());
        p.beta_minus = 0.0;
        p.beta_plus = 0.0;
        p.initial = Profile::Constant(0.0);
        p.tilt_g = Drift::Static(Profile::Constant(5.0));
        assert!((exact_tilted_moment(&p, &p.initial).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moment_limits() {
        let p = SimParams::new(5, 0.1, CylinderRate::constant());
        assert!(matches!(exact_tilted_moment(&p, &p.initial), Err(Error::Capacity(_))));
        let mut p = SimParams::new(2, 0.1, CylinderRate::constant());
        p.tilt_h = Drift::space_time(|t, x| t * x);
        assert!(matches!(exact_tilted_moment(&p, &p.initial), Err(Error::Domain(_))));
    }
}
