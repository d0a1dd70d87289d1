//! Creation/annihilation rates and the macroscopic coefficients they induce.
//!
//! A rate of range `M` is a table over the `2^(2M+1)` local windows
//! `(η(-M), …, η(M))`, indexed by reading the window as a binary number with
//! `η(-M)` as the most significant bit.

use crate::error::{Error, Result};

/// Largest supported range. Tables of range 6 already hold 8192 entries.
pub const MAX_RANGE: usize = 6;

/// A cylinder function of range `R` on `{0,1}^{2R+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cylinder {
    range: usize,
    table: Vec<f64>,
}

impl Cylinder {
    pub fn new(range: usize, table: Vec<f64>) -> Result<Self> {
        if range > MAX_RANGE {
            return Err(Error::Validation(format!(
                "range {range} exceeds the supported maximum {MAX_RANGE}"
            )));
        }
        let expected = 1usize << (2 * range + 1);
        if table.len() != expected {
            return Err(Error::Shape {
                expected,
                got: table.len(),
            });
        }
        if let Some(v) = table.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite table entry {v}")));
        }
        Ok(Self { range, table })
    }

    /// Builds a cylinder by evaluating `f` on every window; `f` receives the
    /// window as a slice `[η(-R), …, η(R)]`.
    pub fn from_fn(range: usize, f: impl Fn(&[u8]) -> f64) -> Result<Self> {
        let width = 2 * range + 1;
        let mut window = vec![0u8; width];
        let table = (0..1usize << width)
            .map(|idx| {
                decode_window(idx, &mut window);
                f(&window)
            })
            .collect();
        Self::new(range, table)
    }

    pub fn range(&self) -> usize {
        self.range
    }

    pub fn width(&self) -> usize {
        2 * self.range + 1
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Value on a window given as `[η(-R), …, η(R)]`.
    pub fn eval(&self, window: &[u8]) -> f64 {
        debug_assert_eq!(window.len(), self.width());
        self.table[encode_window(window)]
    }

    /// Value on the window of `occupancy` centred at array index `center`.
    /// The caller guarantees the window lies inside the array.
    pub fn eval_at(&self, occupancy: &[u8], center: usize) -> f64 {
        let lo = center - self.range;
        self.table[encode_window(&occupancy[lo..=center + self.range])]
    }

    /// `ν_α(f)` by enumeration over all windows.
    pub fn bernoulli_mean(&self, alpha: f64) -> f64 {
        let width = self.width();
        let mut window = vec![0u8; width];
        self.table
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                decode_window(idx, &mut window);
                v * bernoulli_weight(&window, alpha)
            })
            .sum()
    }
}

pub(crate) fn encode_window(window: &[u8]) -> usize {
    window
        .iter()
        .fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1))
}

pub(crate) fn decode_window(index: usize, window: &mut [u8]) {
    let width = window.len();
    for (j, slot) in window.iter_mut().enumerate() {
        *slot = ((index >> (width - 1 - j)) & 1) as u8;
    }
}

fn bernoulli_weight(window: &[u8], alpha: f64) -> f64 {
    window
        .iter()
        .map(|&b| if b == 1 { alpha } else { 1.0 - alpha })
        .product()
}

/// Identifies a rate either by builtin name or by an explicit table.
#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    Named(String),
    Table { range: usize, table: Vec<f64> },
}

/// Translation-invariant creation/annihilation rate `c(x, η) = c(τ_x η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CylinderRate {
    name: String,
    cylinder: Cylinder,
}

impl CylinderRate {
    pub fn new(name: impl Into<String>, range: usize, table: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = table.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Validation(format!(
                "rate table entry {i} is negative ({v})"
            )));
        }
        Ok(Self {
            name: name.into(),
            cylinder: Cylinder::new(range, table)?,
        })
    }

    /// `c ≡ 1`, range 0.
    pub fn constant() -> Self {
        Self::new("constant", 0, vec![1.0, 1.0]).expect("builtin table is valid")
    }

    /// `c(η) = η(-1) + η(1)`, range 1.
    pub fn neighbor_sum() -> Self {
        let cyl = Cylinder::from_fn(1, |w| f64::from(w[0]) + f64::from(w[2]))
            .expect("builtin table is valid");
        Self {
            name: "neighbor-sum".into(),
            cylinder: cyl,
        }
    }

    /// `c ≡ 0`: pure exclusion with reservoirs.
    pub fn zero() -> Self {
        Self::new("zero", 0, vec![0.0, 0.0]).expect("builtin table is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn range(&self) -> usize {
        self.cylinder.range()
    }

    pub fn table(&self) -> &[f64] {
        self.cylinder.table()
    }

    pub fn cylinder(&self) -> &Cylinder {
        &self.cylinder
    }

    pub fn max_rate(&self) -> f64 {
        self.table().iter().copied().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.table().iter().all(|&v| v == 0.0)
    }

    /// Rate at array index `center` of an occupancy vector.
    pub fn at(&self, occupancy: &[u8], center: usize) -> f64 {
        self.cylinder.eval_at(occupancy, center)
    }

    pub fn coefficients(&self) -> MacroscopicCoefficients {
        MacroscopicCoefficients::new(self)
    }
}

pub fn build_cylinder_rate(spec: &RateSpec) -> Result<CylinderRate> {
    match spec {
        RateSpec::Named(name) => match name.as_str() {
            "constant" => Ok(CylinderRate::constant()),
            "neighbor-sum" => Ok(CylinderRate::neighbor_sum()),
            "zero" => Ok(CylinderRate::zero()),
            other => Err(Error::Validation(format!("unknown rate family {other:?}"))),
        },
        RateSpec::Table { range, table } => CylinderRate::new("custom", *range, table.clone()),
    }
}

fn check_unit(alpha: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("{what} = {alpha} is outside [0, 1]")));
    }
    Ok(())
}

/// `(C(α), A(α))` by exact Bernoulli-weighted enumeration of the local windows.
pub fn macroscopic_rates(rate: &CylinderRate, alpha: f64) -> Result<(f64, f64)> {
    check_unit(alpha, "density")?;
    let width = rate.cylinder.width();
    let center = rate.range();
    let mut window = vec![0u8; width];
    let mut creation = 0.0;
    let mut annihilation = 0.0;
    for (idx, &c) in rate.table().iter().enumerate() {
        decode_window(idx, &mut window);
        let w = c * bernoulli_weight(&window, alpha);
        if window[center] == 1 {
            annihilation += w;
        } else {
            creation += w;
        }
    }
    Ok((creation, annihilation))
}

pub fn conductivity(alpha: f64) -> Result<f64> {
    check_unit(alpha, "density")?;
    Ok(sigma(alpha))
}

/// `α(1-α)` without domain checking, for inner loops.
#[inline]
pub fn sigma(alpha: f64) -> f64 {
    alpha * (1.0 - alpha)
}

/// Density `β/(1+β)` imposed by a reservoir of intensity `β`.
pub fn boundary_density(beta: f64) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!(
            "reservoir intensity {beta} must be finite and nonnegative"
        )));
    }
    Ok(beta / (1.0 + beta))
}

/// `C`, `A` and `σ` in a form cheap enough for PDE inner loops.
///
/// Both rates are polynomials `(1-α) Σ_j c_j α^j (1-α)^{2M-j}` and
/// `α Σ_j a_j α^j (1-α)^{2M-j}`, where `c_j` (`a_j`) sums the table over windows
/// with an empty (occupied) centre and `j` occupied neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroscopicCoefficients {
    others: i32,
    creation_by_count: Vec<f64>,
    annihilation_by_count: Vec<f64>,
}

impl MacroscopicCoefficients {
    pub fn new(rate: &CylinderRate) -> Self {
        let width = rate.cylinder.width();
        let center = rate.range();
        let others = width - 1;
        let mut creation_by_count = vec![0.0; others + 1];
        let mut annihilation_by_count = vec![0.0; others + 1];
        let mut window = vec![0u8; width];
        for (idx, &c) in rate.table().iter().enumerate() {
            decode_window(idx, &mut window);
            let occupied: usize = window.iter().map(|&b| b as usize).sum();
            if window[center] == 1 {
                annihilation_by_count[occupied - 1] += c;
            } else {
                creation_by_count[occupied] += c;
            }
        }
        Self {
            others: others as i32,
            creation_by_count,
            annihilation_by_count,
        }
    }

    fn mix(&self, weights: &[f64], alpha: f64) -> f64 {
        let beta = 1.0 - alpha;
        weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(j, &w)| w * alpha.powi(j as i32) * beta.powi(self.others - j as i32))
            .sum()
    }

    pub fn creation(&self, alpha: f64) -> f64 {
        (1.0 - alpha) * self.mix(&self.creation_by_count, alpha)
    }

    pub fn annihilation(&self, alpha: f64) -> f64 {
        alpha * self.mix(&self.annihilation_by_count, alpha)
    }

    pub fn conductivity(&self, alpha: f64) -> f64 {
        sigma(alpha)
    }

    pub fn creation_is_zero(&self) -> bool {
        self.creation_by_count.iter().all(|&w| w == 0.0)
    }

    pub fn annihilation_is_zero(&self) -> bool {
        self.annihilation_by_count.iter().all(|&w| w == 0.0)
    }
}

/// Default number of grid points for the assumption checks.
pub const DEFAULT_CHECK_POINTS: usize = 257;
/// Slack used by the finite-difference assumption checks.
pub const CHECK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub l1_ok: bool,
    pub l2_ok: bool,
    /// First density where each failed check was observed.
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub check: &'static str,
    pub alpha: f64,
}

/// Samples `C` and `A` on a uniform grid and tests concavity/positivity (L1)
/// and monotonicity (L2) by finite differences.
pub fn check_assumptions(rate: &CylinderRate, grid_points: usize) -> AssumptionReport {
    let n = grid_points.max(3);
    let coeffs = rate.coefficients();
    let alphas: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let creation: Vec<f64> = alphas.iter().map(|&a| coeffs.creation(a)).collect();
    let annihilation: Vec<f64> = alphas.iter().map(|&a| coeffs.annihilation(a)).collect();
    let mut witnesses = Vec::new();

    let mut l1_ok = true;
    for (label, values) in [("L1:A", &annihilation), ("L1:C", &creation)] {
        if let Some(alpha) = l1_violation(&alphas, values) {
            l1_ok = false;
            witnesses.push(Witness {
                check: label,
                alpha,
            });
        }
    }

    let mut l2_ok = true;
    let a_decrease = annihilation
        .windows(2)
        .position(|w| w[1] - w[0] < -CHECK_TOLERANCE);
    if let Some(i) = a_decrease {
        l2_ok = false;
        witnesses.push(Witness {
            check: "L2:A",
            alpha: alphas[i],
        });
    }
    let c_increase = creation
        .windows(2)
        .position(|w| w[1] - w[0] > CHECK_TOLERANCE);
    if let Some(i) = c_increase {
        l2_ok = false;
        witnesses.push(Witness {
            check: "L2:C",
            alpha: alphas[i],
        });
    }

    AssumptionReport {
        l1_ok,
        l2_ok,
        witnesses,
    }
}

fn l1_violation(alphas: &[f64], values: &[f64]) -> Option<f64> {
    if values.iter().all(|v| v.abs() <= CHECK_TOLERANCE) {
        return None;
    }
    let n = values.len();
    if let Some(i) = (1..n - 1).find(|&i| values[i] <= 0.0) {
        return Some(alphas[i]);
    }
    (1..n - 1)
        .find(|&i| values[i + 1] - 2.0 * values[i] + values[i - 1] > CHECK_TOLERANCE)
        .map(|i| alphas[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn builtin_tables() {
        let c = build_cylinder_rate(&RateSpec::Named("constant".into())).unwrap();
        assert_eq!(c.range(), 0);
        assert_eq!(c.table(), &[1.0, 1.0]);

        let ns = build_cylinder_rate(&RateSpec::Named("neighbor-sum".into())).unwrap();
        assert_eq!(ns.range(), 1);
        // windows (η-1, η0, η1) as binary numbers
        assert_eq!(ns.table(), &[0.0, 1.0, 0.0, 1.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_bad_tables() {
        let neg = build_cylinder_rate(&RateSpec::Table {
            range: 0,
            table: vec![1.0, -1.0],
        });
        assert!(matches!(neg, Err(Error::Validation(_))));
        let short = build_cylinder_rate(&RateSpec::Table {
            range: 1,
            table: vec![1.0; 4],
        });
        assert!(matches!(short, Err(Error::Shape { expected: 8, got: 4 })));
        assert!(build_cylinder_rate(&RateSpec::Named("nope".into())).is_err());
    }

    #[test]
    fn macroscopic_values() {
        let (c, a) = macroscopic_rates(&CylinderRate::constant(), 0.3).unwrap();
        assert_abs_diff_eq!(c, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.3, epsilon = 1e-15);

        let (c, a) = macroscopic_rates(&CylinderRate::neighbor_sum(), 0.5).unwrap();
        assert_abs_diff_eq!(c, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-15);

        let (_, a) = macroscopic_rates(&CylinderRate::neighbor_sum(), 0.0).unwrap();
        assert_eq!(a, 0.0);
        assert!(macroscopic_rates(&CylinderRate::constant(), 1.5).is_err());
    }

    #[test]
    fn conductivity_and_boundary() {
        assert_eq!(conductivity(0.5).unwrap(), 0.25);
        assert_eq!(conductivity(0.0).unwrap(), 0.0);
        assert_eq!(conductivity(1.0).unwrap(), 0.0);
        assert!(conductivity(-0.1).is_err());
        assert_eq!(boundary_density(1.0).unwrap(), 0.5);
        assert_eq!(boundary_density(0.0).unwrap(), 0.0);
        assert_eq!(boundary_density(3.0).unwrap(), 0.75);
        assert!(boundary_density(-1.0).is_err());
    }

    #[test]
    fn constant_family_is_linear() {
        let coeffs = CylinderRate::constant().coefficients();
        for i in 0..=100 {
            let a = i as f64 / 100.0;
            assert_abs_diff_eq!(coeffs.creation(a), 1.0 - a, epsilon = 1e-15);
            assert_abs_diff_eq!(coeffs.annihilation(a), a, epsilon = 1e-15);
        }
    }

    #[test]
    fn assumption_checks() {
        let r = check_assumptions(&CylinderRate::constant(), DEFAULT_CHECK_POINTS);
        assert!(r.l1_ok && r.l2_ok);

        let r = check_assumptions(&CylinderRate::neighbor_sum(), DEFAULT_CHECK_POINTS);
        assert!(!r.l2_ok);
        // C(α) = 2α(1-α) increases below ½
        let w = r.witnesses.iter().find(|w| w.check == "L2:C").unwrap();
        assert!(w.alpha < 0.5);
        let h = 1e-6;
        let slope = (2.0 * (w.alpha + h) * (1.0 - w.alpha - h) - 2.0 * w.alpha * (1.0 - w.alpha)) / h;
        assert!(slope > 0.0);

        let r = check_assumptions(&CylinderRate::zero(), DEFAULT_CHECK_POINTS);
        assert!(r.l1_ok && r.l2_ok);
    }

    fn arb_rate() -> impl Strategy<Value = CylinderRate> {
        (0usize..=2).prop_flat_map(|m| {
            proptest::collection::vec(0.0f64..5.0, 1 << (2 * m + 1))
                .prop_map(move |t| CylinderRate::new("custom", m, t).unwrap())
        })
    }

    proptest! {
        #[test]
        fn rates_bounded_and_sum_identity(rate in arb_rate(), alpha in 0.0f64..=1.0) {
            let (c, a) = macroscopic_rates(&rate, alpha).unwrap();
            let max = rate.max_rate();
            prop_assert!(c >= 0.0 && a >= 0.0);
            prop_assert!(c <= max + 1e-12 && a <= max + 1e-12);
            // ν_α(c) computed without splitting on η(0)
            let total = rate.cylinder().bernoulli_mean(alpha);
            prop_assert!((c + a - total).abs() < 1e-12);
            // fast polynomial form agrees with enumeration
            let k = rate.coefficients();
            prop_assert!((k.creation(alpha) - c).abs() < 1e-12);
            prop_assert!((k.annihilation(alpha) - a).abs() < 1e-12);
        }

        #[test]
        fn conductivity_symmetric(alpha in 0.0f64..=1.0) {
            prop_assert!((sigma(alpha) - sigma(1.0 - alpha)).abs() < 1e-15);
        }
    }
}
