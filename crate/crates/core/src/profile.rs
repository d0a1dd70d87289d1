//! Spatial profiles on `[-1, 1]` and space-time drift fields.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hydro_pde::FieldGrid;

/// A closed-form function of `x ∈ [-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Constant(f64),
    /// Straight line from `left` at -1 to `right` at +1.
    Linear { left: f64, right: f64 },
    /// `base + amp (1 - x²)`.
    Bump { base: f64, amp: f64 },
    /// `base + amp cos(πx/2)`.
    Cosine { base: f64, amp: f64 },
    /// `amp sin(kπ(x+1)/2)`; vanishes at both ends for integer `k`.
    Sine { amp: f64, k: u32 },
    /// `Σ c_i x^i`.
    Poly(Vec<f64>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Profile::Constant(c) => *c,
            Profile::Linear { left, right } => left + (right - left) * (x + 1.0) / 2.0,
            Profile::Bump { base, amp } => base + amp * (1.0 - x * x),
            Profile::Cosine { base, amp } => base + amp * (PI * x / 2.0).cos(),
            Profile::Sine { amp, k } => amp * (*k as f64 * PI * (x + 1.0) / 2.0).sin(),
            Profile::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
        }
    }

    pub fn sample(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Constant(c) => write!(f, "const {c}"),
            Profile::Linear { left, right } => write!(f, "linear {left} {right}"),
            Profile::Bump { base, amp } => write!(f, "bump {base} {amp}"),
            Profile::Cosine { base, amp } => write!(f, "cosine {base} {amp}"),
            Profile::Sine { amp, k } => write!(f, "sine {amp} {k}"),
            Profile::Poly(c) => {
                write!(f, "poly")?;
                for ci in c {
                    write!(f, " {ci}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let kind = parts
            .next()
            .ok_or_else(|| Error::Config("empty profile".into()))?;
        let args: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number {p:?} in profile {s:?}")))
            })
            .collect::<Result<_>>()?;
        let want = |n: usize| -> Result<()> {
            if args.len() != n {
                return Err(Error::Config(format!(
                    "profile {kind:?} takes {n} arguments, got {}",
                    args.len()
                )));
            }
            Ok(())
        };
        match kind {
            "const" => {
                want(1)?;
                Ok(Profile::Constant(args[0]))
            }
            "linear" => {
                want(2)?;
                Ok(Profile::Linear {
                    left: args[0],
                    right: args[1],
                })
            }
            "bump" => {
                want(2)?;
                Ok(Profile::Bump {
                    base: args[0],
                    amp: args[1],
                })
            }
            "cosine" => {
                want(2)?;
                Ok(Profile::Cosine {
                    base: args[0],
                    amp: args[1],
                })
            }
            "sine" => {
                want(2)?;
                if args[1] < 0.0 || args[1].fract() != 0.0 {
                    return Err(Error::Config("sine mode must be a nonnegative integer".into()));
                }
                Ok(Profile::Sine {
                    amp: args[0],
                    k: args[1] as u32,
                })
            }
            "poly" => {
                if args.is_empty() {
                    return Err(Error::Config("poly needs at least one coefficient".into()));
                }
                Ok(Profile::Poly(args))
            }
            other => Err(Error::Config(format!("unknown profile kind {other:?}"))),
        }
    }
}

type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A drift field `(t, x) ↦ value` used to tilt the dynamics.
#[derive(Clone, Default)]
pub enum Drift {
    #[default]
    Zero,
    Static(Profile),
    /// Arbitrary closure of `(t, x)`.
    SpaceTime(SpaceTimeFn),
    /// Bilinear interpolation of a grid.
    Grid(Arc<FieldGrid>),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "Zero"),
            Drift::Static(p) => write!(f, "Static({p})"),
            Drift::SpaceTime(_) => write!(f, "SpaceTime(..)"),
            Drift::Grid(g) => write!(f, "Grid({}x{})", g.nt(), g.nx()),
        }
    }
}

impl Drift {
    pub fn space_time(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Drift::SpaceTime(Arc::new(f))
    }

    pub fn from_grid(grid: FieldGrid) -> Self {
        Drift::Grid(Arc::new(grid))
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Static(p) => p.eval(x),
            Drift::SpaceTime(f) => f(t, x),
            Drift::Grid(g) => g.interpolate(t, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Drift::Zero)
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, Drift::SpaceTime(_) | Drift::Grid(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "const 0.5",
            "linear 0 1",
            "bump 0.5 0.25",
            "cosine 0 1",
            "sine 0.3 2",
            "poly 1 -2 0.5",
        ] {
            let p: Profile = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
            assert_eq!(p.to_string().parse::<Profile>().unwrap(), p);
        }
        assert!("bump 1".parse::<Profile>().is_err());
        assert!("wiggle 1".parse::<Profile>().is_err());
    }

    #[test]
    fn profile_values() {
        let bump: Profile = "bump 0.5 0.25".parse().unwrap();
        assert_eq!(bump.eval(0.0), 0.75);
        assert_eq!(bump.eval(1.0), 0.5);
        let lin: Profile = "linear 0 1".parse().unwrap();
        assert_eq!(lin.eval(0.0), 0.5);
        let poly = Profile::Poly(vec![1.0, 2.0, 3.0]);
        assert_eq!(poly.eval(2.0), 1.0 + 4.0 + 12.0);
        let sine = Profile::Sine { amp: 1.0, k: 1 };
        assert!(sine.eval(-1.0).abs() < 1e-15 && sine.eval(1.0).abs() < 1e-15);
    }
}
