//! Body / back-gate bias generator: producing the CWT offset dV_T.
//!
//! The offset between the beta-multiplier devices M6-M7 comes from forward
//! body (bulk) or back-gate (FDSOI) biasing of M6. The bias voltage V_SB6 is
//! generated by a weak-inversion V_SG difference between two flavors
//! (M8 vs M9):
//!
//! ```text
//! V_SG      = |V_T0(T)| + n*U_T*ln(I_SD/(I_SQ(T)*S))
//! V_X-V_B6  = |V_T08(T) - V_T09(T)| + n*U_T*ln(I_SQ9*S9/(I_SQ8*S8))
//! ```
//!
//! The first term is PTAT or CTAT depending on the threshold tempcos; the
//! second is tunable through S9/S8 and flips sign at I_SQ9*S9 = I_SQ8*S8.
//! Step 1 of the sizing methodology sweeps that ratio and keeps the point
//! whose dV_T(T) has minimum box TC.
//!
//! Threshold laws here are linear in T (`vt0 + vt0_tempco*(T - t_ref)`); the
//! process data this abstracts only pins the value at one temperature, and a
//! first-order law is enough to tune the TC of dV_T.

use serde::{Deserialize, Serialize};

use crate::acm::{thermal_voltage, TechProfile, Temperature};
use crate::error::{Error, Result};
use crate::metrics::{box_tc, BoxSeries};

/// One device flavor of the technology (LVT/RVT/HVT core, ULL I/O, ...).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceFlavor {
    pub name: String,
    /// Threshold magnitude at t_ref (V).
    pub vt0: f64,
    /// Linear threshold drift (V/K).
    pub vt0_tempco: f64,
    /// Weak-inversion specific sheet current at t_ref (A).
    pub isq_ref: f64,
    /// Subthreshold slope factor.
    pub n: f64,
}

impl DeviceFlavor {
    pub fn validate(&self) -> Result<()> {
        if !(self.isq_ref > 0.0) {
            return Err(Error::Domain(format!(
                "flavor '{}': isq_ref must be > 0",
                self.name
            )));
        }
        if !(self.n > 1.0) {
            return Err(Error::Domain(format!(
                "flavor '{}': n must be > 1",
                self.name
            )));
        }
        Ok(())
    }

    /// |V_T0| at temperature T under the linear law.
    pub fn vt0_at(&self, t: Temperature, t_ref: f64) -> f64 {
        self.vt0 + self.vt0_tempco * (t.kelvin() - t_ref)
    }
}

/// Sizing of the M8-M9 voltage reference branch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasGenSizing {
    pub s8: f64,
    pub s9: f64,
    pub flavor8: DeviceFlavor,
    pub flavor9: DeviceFlavor,
    /// Ideal-source branch current M*I_REF (A).
    pub branch_current: f64,
}

impl BiasGenSizing {
    pub fn validate(&self) -> Result<()> {
        self.flavor8.validate()?;
        self.flavor9.validate()?;
        if !(self.s8 > 0.0 && self.s9 > 0.0) {
            return Err(Error::Domain("aspect ratios must be > 0".into()));
        }
        if !(self.branch_current > 0.0) {
            return Err(Error::Domain("branch current must be > 0".into()));
        }
        if (self.flavor8.n - self.flavor9.n).abs() > 1e-9 {
            return Err(Error::Domain(
                "the V_SB6 expression assumes both flavors share n".into(),
            ));
        }
        Ok(())
    }
}

/// How the body terminal turns V_SB6 into a threshold shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BodyBiasLaw {
    /// FDSOI back gate: dV_T = gamma_b * V_SB6, gamma_b constant over T.
    Fdsoi { gamma_b: f64 },
    /// Bulk junction body effect with 2*phi_fp optionally drifting in T.
    Bulk {
        gamma_b_sqrt: f64,
        two_phi_f: f64,
        two_phi_f_tempco: f64,
        t_ref: f64,
    },
}

impl BodyBiasLaw {
    pub fn from_tech_fdsoi(tech: &TechProfile) -> Self {
        BodyBiasLaw::Fdsoi {
            gamma_b: tech.body_factor_linear,
        }
    }

    pub fn from_tech_bulk(tech: &TechProfile) -> Self {
        BodyBiasLaw::Bulk {
            gamma_b_sqrt: tech.body_factor_sqrt,
            two_phi_f: tech.fermi_2phi,
            two_phi_f_tempco: tech.fermi_2phi_tempco,
            t_ref: tech.t_ref,
        }
    }

    /// dV_T produced by a forward body bias `v_sb6` at temperature T.
    pub fn delta_vt(&self, v_sb6: f64, t: Temperature) -> Result<f64> {
        match *self {
            BodyBiasLaw::Fdsoi { gamma_b } => delta_vt_fdsoi(gamma_b, v_sb6),
            BodyBiasLaw::Bulk {
                gamma_b_sqrt,
                two_phi_f,
                two_phi_f_tempco,
                t_ref,
            } => {
                let phi_t = two_phi_f + two_phi_f_tempco * (t.kelvin() - t_ref);
                delta_vt_bulk(gamma_b_sqrt, phi_t, v_sb6)
            }
        }
    }
}

/// Gate-source voltage of a weak-inversion transistor in saturation:
/// `V_SG = |V_T0(T)| + n*U_T*ln(I_SD/(I_SQ(T)*S))`.
pub fn vsg_weak_inversion(
    flavor: &DeviceFlavor,
    tech: &TechProfile,
    i_sd: f64,
    s: f64,
    t: Temperature,
) -> Result<f64> {
    if !(i_sd > 0.0) {
        return Err(Error::Domain(format!("i_sd must be > 0, got {i_sd}")));
    }
    if !(s > 0.0) {
        return Err(Error::Domain(format!("aspect ratio must be > 0, got {s}")));
    }
    let isq_t = flavor.isq_ref * (t.kelvin() / tech.t_ref).powf(2.0 - tech.m);
    Ok(flavor.vt0_at(t, tech.t_ref).abs()
        + flavor.n * thermal_voltage(t) * (i_sd / (isq_t * s)).ln())
}

/// The reference voltage `V_X - V_B6` of the M8-M9 stack. The I_SQ ratio is
/// temperature-independent (both flavors share the T^(2-m) law), so the
/// second term is exactly PTAT.
pub fn vsb6_reference(sizing: &BiasGenSizing, tech: &TechProfile, t: Temperature) -> Result<f64> {
    sizing.validate()?;
    let dvt0 = (sizing.flavor8.vt0_at(t, tech.t_ref) - sizing.flavor9.vt0_at(t, tech.t_ref)).abs();
    let ratio = (sizing.flavor9.isq_ref * sizing.s9) / (sizing.flavor8.isq_ref * sizing.s8);
    Ok(dvt0 + sizing.flavor8.n * thermal_voltage(t) * ratio.ln())
}

/// FDSOI back-gate law: dV_T = gamma_b * V_SB6.
pub fn delta_vt_fdsoi(gamma_b: f64, v_sb6: f64) -> Result<f64> {
    if v_sb6 < 0.0 {
        return Err(Error::Domain(format!("v_sb6 must be >= 0, got {v_sb6}")));
    }
    Ok(gamma_b * v_sb6)
}

/// Bulk body-effect law: dV_T = gamma_b*(sqrt(2phi_fp) - sqrt(2phi_fp - V_FBB)),
/// positive for forward bias; domain error at or beyond the 2phi_fp knee.
pub fn delta_vt_bulk(gamma_b_sqrt: f64, two_phi_f: f64, v_fbb: f64) -> Result<f64> {
    if v_fbb < 0.0 {
        return Err(Error::Domain(format!("v_fbb must be >= 0, got {v_fbb}")));
    }
    if v_fbb >= two_phi_f {
        return Err(Error::Domain(format!(
            "v_fbb = {v_fbb} must stay below 2*phi_fp = {two_phi_f}"
        )));
    }
    Ok(gamma_b_sqrt * (two_phi_f.sqrt() - (two_phi_f - v_fbb).sqrt()))
}

/// A dV_T(T) curve supplied directly as samples, linearly interpolated and
/// clamped at the ends.
///
/// This is how the alternative offset implementations (different V_T types,
/// same type with different lengths) enter what-if sweeps: as data, not as
/// device models, since neither is used for the actual design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaVtTable {
    /// (temperature K, dV_T V) samples, strictly increasing in T.
    pub samples: Vec<(f64, f64)>,
}

impl DeltaVtTable {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empty dV_T table".into()));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidInput(
                    "dV_T table temperatures must be strictly increasing".into(),
                ));
            }
        }
        Ok(DeltaVtTable { samples })
    }

    pub fn at(&self, t: Temperature) -> f64 {
        let tk = t.kelvin();
        let s = &self.samples;
        if tk <= s[0].0 {
            return s[0].1;
        }
        if tk >= s[s.len() - 1].0 {
            return s[s.len() - 1].1;
        }
        let j = s.partition_point(|&(x, _)| x < tk);
        let (t0, v0) = s[j - 1];
        let (t1, v1) = s[j];
        v0 + (v1 - v0) * (tk - t0) / (t1 - t0)
    }
}

/// Result of the step-1 sweep over S9/S8.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaVtTuning {
    /// Chosen S9/S8 ratio.
    pub ratio: f64,
    /// dV_T over the grid at the chosen ratio (V).
    pub delta_vt_series: Vec<f64>,
    /// Box TC of dV_T (ppm/degC).
    pub delta_vt_tc: f64,
    /// V_SB6 over the grid at the chosen ratio (V).
    pub vsb6_series: Vec<f64>,
    /// Box TC of V_SB6 (ppm/degC).
    pub vsb6_tc: f64,
    /// Mean dV_T over the grid (V), the value fed to steps 2-4.
    pub delta_vt_mean: f64,
}

/// Step 1: sweep S9/S8 and keep the ratio minimizing the box TC of dV_T(T).
///
/// Ratios whose V_SB6 goes non-positive anywhere on the grid, or violates
/// the body-law domain, are skipped; an all-infeasible sweep errors.
pub fn minimize_delta_vt_tc(
    base: &BiasGenSizing,
    tech: &TechProfile,
    law: &BodyBiasLaw,
    grid: &[Temperature],
    ratios: &[f64],
) -> Result<DeltaVtTuning> {
    base.validate()?;
    if ratios.is_empty() {
        return Err(Error::InvalidInput("empty S9/S8 sweep range".into()));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidInput("grid needs >= 2 points".into()));
    }
    let axis: Vec<f64> = grid.iter().map(|t| t.kelvin()).collect();

    let mut best: Option<DeltaVtTuning> = None;
    for &r in ratios {
        if !(r > 0.0) {
            continue;
        }
        let sizing = BiasGenSizing {
            s9: base.s8 * r,
            ..base.clone()
        };
        let mut vsb6 = Vec::with_capacity(grid.len());
        let mut dvt = Vec::with_capacity(grid.len());
        let mut ok = true;
        for &t in grid {
            let v = vsb6_reference(&sizing, tech, t)?;
            if !(v > 0.0) {
                ok = false;
                break;
            }
            match law.delta_vt(v, t) {
                Ok(d) => {
                    vsb6.push(v);
                    dvt.push(d);
                }
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let tc = box_tc(&BoxSeries::new(axis.clone(), dvt.clone())?)?;
        if best.as_ref().is_none_or(|b| tc < b.delta_vt_tc) {
            let vsb6_tc = box_tc(&BoxSeries::new(axis.clone(), vsb6.clone())?)?;
            let mean = dvt.iter().sum::<f64>() / dvt.len() as f64;
            best = Some(DeltaVtTuning {
                ratio: r,
                delta_vt_series: dvt,
                delta_vt_tc: tc,
                vsb6_series: vsb6,
                vsb6_tc,
                delta_vt_mean: mean,
            });
        }
    }
    best.ok_or_else(|| {
        Error::InfeasibleDesign("no S9/S8 ratio yields a valid dV_T over the grid".into())
    })
}
