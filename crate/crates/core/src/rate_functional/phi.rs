use crate::error::{Error, Result};

fn check(c: f64, a: f64, kappa: f64) -> Result<()> {
    if !(c >= 0.0 && a >= 0.0) || !c.is_finite() || !a.is_finite() {
        return Err(Error::Domain(format!("rates must be finite and nonnegative, got C = {c}, A = {a}")));
    }
    if kappa.is_nan() {
        return Err(Error::Domain("kappa is NaN".into()));
    }
    Ok(())
}

/// Reaction cost `Φ(C, A, κ)` of observing the net creation rate `κ` when
/// particles are created at rate `C` and annihilated at rate `A`.
///
/// Returns `+∞` where the rate cannot be realized (`κ > 0` without creation,
/// `κ < 0` without annihilation).
pub fn phi(c: f64, a: f64, kappa: f64) -> Result<f64> {
    check(c, a, kappa)?;
    let value = match (c == 0.0, a == 0.0) {
        (true, true) => {
            if kappa == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        (true, false) => {
            if kappa > 0.0 {
                f64::INFINITY
            } else if kappa == 0.0 {
                a
            } else {
                a + kappa - kappa * (-kappa / a).ln()
            }
        }
        (false, true) => {
            if kappa < 0.0 {
                f64::INFINITY
            } else if kappa == 0.0 {
                c
            } else {
                c - kappa + kappa * (kappa / c).ln()
            }
        }
        (false, false) => {
            let root = kappa.hypot(2.0 * (a * c).sqrt());
            c + a - root + kappa * log_tilt(c, a, kappa, root)
        }
    };
    Ok(value.max(0.0))
}

/// `log((√(κ²+4AC) + κ) / (2C))`, the maximizing `λ` of the Legendre problem.
/// For `κ < 0` the numerator is rewritten as `4AC / (√(κ²+4AC) - κ)`.
pub(crate) fn log_tilt(c: f64, a: f64, kappa: f64, root: f64) -> f64 {
    if kappa >= 0.0 {
        ((root + kappa) / (2.0 * c)).ln()
    } else {
        (2.0 * a / (root - kappa)).ln()
    }
}

/// `sup_λ {κλ - C(e^λ - 1) - A(e^{-λ} - 1)}` by golden-section search.
pub fn phi_legendre_oracle(c: f64, a: f64, kappa: f64) -> Result<f64> {
    check(c, a, kappa)?;
    if c == 0.0 || a == 0.0 {
        return Err(Error::Domain("the Legendre oracle needs C > 0 and A > 0".into()));
    }
    let f = |l: f64| kappa * l - c * l.exp_m1() - a * (-l).exp_m1();
    let slope = |l: f64| kappa - c * l.exp() + a * (-l).exp();

    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while slope(lo) <= 0.0 {
        lo *= 2.0;
        if lo < -1e3 {
            return Err(Error::Numerical { step: 0, message: "no lower bracket for the Legendre maximizer".into() });
        }
    }
    while slope(hi) >= 0.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(Error::Numerical { step: 0, message: "no upper bracket for the Legendre maximizer".into() });
        }
    }

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..400 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        }
    }
    let best = f(0.5 * (lo + hi)).max(f1).max(f2);
    if !best.is_finite() {
        return Err(Error::Numerical { step: 0, message: "Legendre objective is not finite".into() });
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_values() {
        assert!(phi(0.7, 0.2, 0.5).unwrap().abs() < 1e-15);
        assert!((phi(1.0, 0.25, 0.0).unwrap() - 0.25).abs() < 1e-15);
        let expected = 1.0 - 1.25 + 0.75 * 2f64.ln();
        assert!((phi(0.5, 0.5, 0.75).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.269860).abs() < 1e-6);
        assert_eq!(phi(0.0, 1.0, -1.0).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_branches() {
        assert_eq!(phi(0.0, 1.0, 0.5).unwrap(), f64::INFINITY);
        assert_eq!(phi(2.0, 0.0, -0.5).unwrap(), f64::INFINITY);
        assert_eq!(phi(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(phi(0.0, 0.0, 1e-9).unwrap(), f64::INFINITY);
        assert_eq!(phi(0.0, 2.0, 0.0).unwrap(), 2.0);
        // C = 0: A + κ - κ log(-κ/A)
        let v = phi(0.0, 2.0, -3.0).unwrap();
        assert!((v - (2.0 - 3.0 + 3.0 * 1.5f64.ln())).abs() < 1e-14);
        assert!(matches!(phi(-1.0, 1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn degenerate_branch_is_the_limit() {
        for kappa in [-2.0, -0.5, -0.01] {
            let limit = phi(0.0, 1.5, kappa).unwrap();
            let near = phi(1e-12, 1.5, kappa).unwrap();
            assert!((limit - near).abs() < 1e-9, "{kappa}: {limit} vs {near}");
        }
    }

    #[test]
    fn oracle_agrees_on_fixed_points() {
        for (c, a, k) in [(0.5, 0.5, 0.75), (1.0, 0.25, 0.0), (3.0, 0.1, 2.9), (0.01, 7.0, -20.0)] {
            let d = (phi(c, a, k).unwrap() - phi_legendre_oracle(c, a, k).unwrap()).abs();
            assert!(d < 1e-9, "({c}, {a}, {k}): {d}");
        }
    }

    proptest! {
        #[test]
        fn nonnegative_and_zero_only_at_typical_rate(c in 1e-3f64..10.0, a in 1e-3f64..10.0, k in -20.0f64..20.0) {
            let v = phi(c, a, k).unwrap();
            prop_assert!(v >= 0.0);
            prop_assert!(phi(c, a, c - a).unwrap() < 1e-12);
            if (k - (c - a)).abs() > 1e-3 {
                prop_assert!(v > 0.0);
            }
        }

        #[test]
        fn convex_in_kappa(c in 1e-2f64..5.0, a in 1e-2f64..5.0, k in -5.0f64..5.0) {
            let h = 1e-2;
            let second = phi(c, a, k + h).unwrap() - 2.0 * phi(c, a, k).unwrap() + phi(c, a, k - h).unwrap();
            prop_assert!(second > -1e-12);
        }
    }
}
