//! ACM compact-model primitives.
//!
//! The ACM model normalizes drain current by the specific sheet current,
//! `I_D = I_SQ * S * (i_f - i_r)`, and ties each inversion level to the
//! pinch-off-to-source voltage through one universal curve:
//!
//! ```text
//! (V_P - V_S)/U_T = F(i) = sqrt(1+i) - 2 + ln(sqrt(1+i) - 1)
//! ```
//!
//! `F` is strictly increasing with F(3) = 0; weak inversion is i << 1,
//! moderate inversion roughly 1..100. This module provides the thermal
//! voltage, the `I_SQ(T)` power law, `F` and its numerical inverse. All
//! functions are pure.

use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, CELSIUS_OFFSET, ELEMENTARY_CHARGE, T_REF_KELVIN};
use crate::error::{Error, Result};
use crate::solver;

/// Absolute temperature. Constructible only with a positive kelvin value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn from_kelvin(kelvin: f64) -> Result<Self> {
        if kelvin.is_finite() && kelvin > 0.0 {
            Ok(Temperature(kelvin))
        } else {
            Err(Error::Domain(format!(
                "temperature must be > 0 K, got {kelvin} K"
            )))
        }
    }

    pub fn from_celsius(celsius: f64) -> Result<Self> {
        Self::from_kelvin(celsius + CELSIUS_OFFSET)
    }

    pub fn kelvin(self) -> f64 {
        self.0
    }

    pub fn celsius(self) -> f64 {
        self.0 - CELSIUS_OFFSET
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;
    fn try_from(kelvin: f64) -> Result<Self> {
        Temperature::from_kelvin(kelvin)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// Build a strictly increasing temperature grid in degC (inclusive bounds).
pub fn temperature_grid(min_c: f64, max_c: f64, step_c: f64) -> Result<Vec<Temperature>> {
    if !(step_c > 0.0 && max_c > min_c) {
        return Err(Error::InvalidInput(format!(
            "bad temperature grid: [{min_c}, {max_c}] step {step_c}"
        )));
    }
    let n = ((max_c - min_c) / step_c).round() as usize;
    let mut grid = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let c = min_c + step_c * k as f64;
        if c > max_c + 1e-9 {
            break;
        }
        grid.push(Temperature::from_celsius(c)?);
    }
    if grid.len() < 2 {
        return Err(Error::InvalidInput(
            "temperature grid needs at least 2 points".into(),
        ));
    }
    Ok(grid)
}

/// Technology-level constants of the model.
///
/// Two specific sheet currents are stored because the model uses two
/// normalizations that the underlying process data does not reconcile:
/// `isq_ref` normalizes the drain-current equation (SCM and mirror sizing),
/// while `isq_weak_ref` normalizes the weak-inversion gate-voltage law used
/// by the bias generator. Mobility and oxide capacitance never appear on
/// their own; they are subsumed by `isq_*` and the exponent `m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TechProfile {
    /// Subthreshold slope factor (dimensionless, > 1).
    pub n: f64,
    /// Mobility temperature exponent; I_SQ(T) ~ T^(2-m).
    pub m: f64,
    /// Specific sheet current at `t_ref` (A), drain-current normalization.
    pub isq_ref: f64,
    /// Specific sheet current at `t_ref` (A), weak-inversion V_SG law.
    pub isq_weak_ref: f64,
    /// Reference temperature (K).
    pub t_ref: f64,
    /// Back-gate body factor for the linear threshold law (V/V).
    pub body_factor_linear: f64,
    /// Body factor for the square-root bulk law (sqrt(V)).
    pub body_factor_sqrt: f64,
    /// 2*phi_fp at `t_ref` (V), bulk body-effect knee.
    pub fermi_2phi: f64,
    /// Optional linear drift of 2*phi_fp (V/K); zero keeps it constant.
    pub fermi_2phi_tempco: f64,
    /// Default-flavor threshold magnitude at `t_ref` (V), used for headroom
    /// estimates.
    pub vt0: f64,
    /// Default-flavor threshold drift (V/K).
    pub vt0_tempco: f64,
}

impl TechProfile {
    /// Generic profile (n = 1.2, m = 1.25, I_SQ = 100 nA at 25 degC) used
    /// for desk studies when no process data is loaded.
    pub fn generic() -> Self {
        TechProfile {
            n: 1.2,
            m: 1.25,
            isq_ref: 100e-9,
            isq_weak_ref: 100e-9,
            t_ref: T_REF_KELVIN,
            body_factor_linear: 0.165,
            body_factor_sqrt: 0.4,
            fermi_2phi: 0.8,
            fermi_2phi_tempco: 0.0,
            vt0: 0.45,
            vt0_tempco: -0.7e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 1.0) {
            return Err(Error::Domain(format!("n must be > 1, got {}", self.n)));
        }
        if !(self.m > 0.0 && self.m < 3.0) {
            return Err(Error::Domain(format!(
                "m must be in (0, 3), got {}",
                self.m
            )));
        }
        if !(self.isq_ref > 0.0 && self.isq_weak_ref > 0.0) {
            return Err(Error::Domain("specific sheet currents must be > 0".into()));
        }
        if !(self.fermi_2phi > 0.0) {
            return Err(Error::Domain("2*phi_fp must be > 0".into()));
        }
        if !(self.t_ref > 0.0) {
            return Err(Error::Domain("t_ref must be > 0 K".into()));
        }
        Ok(())
    }

    pub fn t_ref_temperature(&self) -> Temperature {
        Temperature(self.t_ref)
    }
}

/// Forward (or reverse) inversion level, strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct InversionLevel(f64);

impl InversionLevel {
    pub fn new(i_f: f64) -> Result<Self> {
        if i_f.is_finite() && i_f > 0.0 {
            Ok(InversionLevel(i_f))
        } else {
            Err(Error::Domain(format!(
                "inversion level must be > 0, got {i_f}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Thermal voltage k_B*T/q (V).
pub fn thermal_voltage(t: Temperature) -> f64 {
    BOLTZMANN * t.kelvin() / ELEMENTARY_CHARGE
}

/// Specific sheet current at temperature T: `isq_ref * (T/t_ref)^(2-m)`.
pub fn isq_at(tech: &TechProfile, t: Temperature) -> f64 {
    tech.isq_ref * (t.kelvin() / tech.t_ref).powf(2.0 - tech.m)
}

/// Weak-inversion-law specific sheet current, same power law on
/// `isq_weak_ref`.
pub fn isq_weak_at(tech: &TechProfile, t: Temperature) -> f64 {
    tech.isq_weak_ref * (t.kelvin() / tech.t_ref).powf(2.0 - tech.m)
}

/// sqrt(1+x) - 1 without cancellation for x << 1.
#[inline]
pub(crate) fn sqrt1p_m1(x: f64) -> f64 {
    x / ((1.0 + x).sqrt() + 1.0)
}

/// ln(sqrt(1+x) - 1), computed as ln(x) - ln(sqrt(1+x) + 1) so the
/// weak-inversion tail stays accurate down to the smallest levels the
/// sizing exercises.
#[inline]
pub(crate) fn ln_sqrt1p_m1(x: f64) -> f64 {
    x.ln() - ((1.0 + x).sqrt() + 1.0).ln()
}

/// The ACM voltage curve `F(i_f) = sqrt(1+i_f) - 2 + ln(sqrt(1+i_f) - 1)`,
/// in units of U_T. Strictly increasing with F(3) = 0.
pub fn acm_voltage_of_if(i_f: f64) -> Result<f64> {
    if !(i_f.is_finite() && i_f > 0.0) {
        return Err(Error::Domain(format!(
            "acm_voltage_of_if requires i_f > 0, got {i_f}"
        )));
    }
    Ok(sqrt1p_m1(i_f) - 1.0 + ln_sqrt1p_m1(i_f))
}

/// Numerical inverse of [`acm_voltage_of_if`].
///
/// Unique by monotonicity; the bracket starts at [1e-12, 1e4] and expands
/// geometrically when the target lies outside. The returned level satisfies
/// `|F(i_f) - v| < 1e-12`.
pub fn if_of_acm_voltage(v: f64) -> Result<InversionLevel> {
    if !v.is_finite() {
        return Err(Error::Domain(format!("target voltage not finite: {v}")));
    }
    let f = |i: f64| sqrt1p_m1(i) - 1.0 + ln_sqrt1p_m1(i) - v;
    let (lo, hi) = solver::expand_bracket(&f, 1e-12, 1e4, 1e3, 1e-300, 1e300)?;
    let i_f = solver::solve_increasing(f, lo, hi, 1e-12)?;
    InversionLevel::new(i_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T25: f64 = 298.15;

    #[test]
    fn thermal_voltage_at_25c() {
        let t = Temperature::from_kelvin(T25).unwrap();
        // k_B * 298.15 / q with the exact SI constants.
        assert!((thermal_voltage(t) - 25.692_579_121e-3).abs() < 1e-12);
    }

    #[test]
    fn thermal_voltage_linear_in_t() {
        let t1 = Temperature::from_kelvin(T25).unwrap();
        let t2 = Temperature::from_kelvin(2.0 * T25).unwrap();
        assert_eq!(thermal_voltage(t2), 2.0 * thermal_voltage(t1));
    }

    #[test]
    fn zero_kelvin_unconstructible() {
        assert!(Temperature::from_kelvin(0.0).is_err());
        assert!(Temperature::from_kelvin(-1.0).is_err());
        assert!(Temperature::from_celsius(-273.15).is_err());
        assert!(Temperature::from_kelvin(f64::NAN).is_err());
    }

    #[test]
    fn celsius_kelvin_conversion_exact() {
        let t = Temperature::from_celsius(25.0).unwrap();
        assert_eq!(t.kelvin(), 298.15);
        assert_eq!(t.celsius(), 25.0 + 273.15 - 273.15);
    }

    #[test]
    fn isq_identity_and_scaling() {
        let mut tech = TechProfile::generic();
        let tref = tech.t_ref_temperature();
        assert_eq!(isq_at(&tech, tref), tech.isq_ref);

        // m = 2 makes it temperature-independent.
        tech.m = 2.0;
        let hot = Temperature::from_kelvin(400.0).unwrap();
        assert_eq!(isq_at(&tech, hot), tech.isq_ref);

        // m = 1: linear in T.
        tech.m = 1.0;
        let t2 = Temperature::from_kelvin(2.0 * tech.t_ref).unwrap();
        assert!((isq_at(&tech, t2) - 2.0 * tech.isq_ref).abs() < 1e-22);
    }

    #[test]
    fn acm_voltage_known_points() {
        // F(3) = sqrt(4) - 2 + ln(1) = 0 exactly.
        assert!(acm_voltage_of_if(3.0).unwrap().abs() < 1e-15);
        // F(8) = 1 + ln 2.
        assert!((acm_voltage_of_if(8.0).unwrap() - (1.0 + 2f64.ln())).abs() < 1e-14);
        // Weak-inversion tail, high-precision external value.
        assert!((acm_voltage_of_if(0.01).unwrap() - (-6.295_820_481_179_926)).abs() < 1e-12);
        // Strong inversion.
        assert!((acm_voltage_of_if(1e4).unwrap() - 102.600_170_227_654).abs() < 1e-10);
    }

    #[test]
    fn acm_voltage_finite_deep_weak_inversion() {
        let v = acm_voltage_of_if(1e-12).unwrap();
        assert!(v.is_finite());
        assert!((v - (-29.324_168_296_488_244)).abs() < 1e-10);
    }

    #[test]
    fn acm_voltage_rejects_nonpositive() {
        assert!(acm_voltage_of_if(0.0).is_err());
        assert!(acm_voltage_of_if(-1.0).is_err());
    }

    #[test]
    fn inverse_known_points() {
        assert!((if_of_acm_voltage(0.0).unwrap().get() - 3.0).abs() < 1e-9);
        assert!((if_of_acm_voltage(1.693_147_2).unwrap().get() - 8.0).abs() < 1e-6);
        // Deep weak inversion, pinned by an external bisection oracle.
        let i = if_of_acm_voltage(-10.0).unwrap().get();
        assert!((i - 2.468_043_800_728_34e-4).abs() / i < 1e-9);
        assert!((acm_voltage_of_if(i).unwrap() + 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn round_trip_log_uniform(exp in -6.0f64..4.0) {
            let i_f = 10f64.powf(exp);
            let v = acm_voltage_of_if(i_f).unwrap();
            let back = if_of_acm_voltage(v).unwrap().get();
            prop_assert!((back - i_f).abs() / i_f < 1e-9);
        }

        #[test]
        fn strictly_increasing(exp in -6.0f64..3.9) {
            let i = 10f64.powf(exp);
            let j = i * 1.05;
            prop_assert!(acm_voltage_of_if(j).unwrap() > acm_voltage_of_if(i).unwrap());
        }

        #[test]
        fn isq_power_law(tk in 200.0f64..420.0) {
            let tech = TechProfile::generic();
            let t = Temperature::from_kelvin(tk).unwrap();
            let ratio = isq_at(&tech, t) / tech.isq_ref;
            let expect = (tk / tech.t_ref).powf(2.0 - tech.m);
            prop_assert!((ratio - expect).abs() <= f64::EPSILON * expect.abs() * 4.0);
        }
    }
}
