//! Small-signal line-sensitivity formulas.
//!
//! Around the operating point the SCM behaves as a resistor
//! `r_SCM = 1/(I_REF*S_IREF)`. The supply dependence of V_X is set by the
//! output conductances of M5 and M6 (assuming g_m >> g_d):
//!
//! ```text
//! without cascode:  |dV_X/dV_DD| = (g_d5/J + g_d6)/g_m6
//! with M6C cascode: |dV_X/dV_DD| = (g_d5/J)/g_m6
//! ```
//!
//! and the relative LS of I_REF is S_IREF times the V_X sensitivity.
//! Conductances are extracted quantities supplied by the user; they are
//! not derived from the compact model here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extracted small-signal parameters plus the loop constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmallSignalSet {
    /// Transconductance of M6 (S).
    pub gm6: f64,
    /// Transconductance of the cascode device M6C (S).
    pub gm6c: f64,
    /// Output conductance of M5 (S).
    pub gd5: f64,
    /// Output conductance of M6 (S).
    pub gd6: f64,
    /// Transconductance of M8 (S).
    pub gm8: f64,
    /// Output conductance of M8 (S).
    pub gd8: f64,
    /// Mirror ratio J feeding the diode branch.
    pub j_ratio: f64,
    /// Miller compensation capacitor (F).
    pub c_f: f64,
    /// DC differential gain of the buffer OTA.
    pub av_ota: f64,
}

impl SmallSignalSet {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gm6", self.gm6),
            ("gm6c", self.gm6c),
            ("gd5", self.gd5),
            ("gd6", self.gd6),
            ("gm8", self.gm8),
            ("gd8", self.gd8),
            ("j_ratio", self.j_ratio),
            ("c_f", self.c_f),
        ] {
            if !(v > 0.0) {
                return Err(Error::Domain(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.av_ota >= 1.0) {
            return Err(Error::Domain(format!(
                "av_ota must be >= 1, got {}",
                self.av_ota
            )));
        }
        Ok(())
    }
}

/// Equivalent SCM resistance `1/(I_REF*S_IREF)` (ohm).
pub fn r_scm(i_ref: f64, s_iref: f64) -> Result<f64> {
    if !(i_ref > 0.0 && s_iref > 0.0) {
        return Err(Error::Domain(
            "r_scm requires positive I_REF and S_IREF".into(),
        ));
    }
    Ok(1.0 / (i_ref * s_iref))
}

/// Absolute LS of V_X without cascoding: `(g_d5/J + g_d6)/g_m6` (V/V).
pub fn ls_vx_basic(ss: &SmallSignalSet) -> Result<f64> {
    ss.validate()?;
    Ok((ss.gd5 / ss.j_ratio + ss.gd6) / ss.gm6)
}

/// Absolute LS of V_X with the M6C cascode, in the approximate form the
/// analysis carries forward: `(g_d5/J)/g_m6` (V/V).
pub fn ls_vx_cascoded(ss: &SmallSignalSet) -> Result<f64> {
    ss.validate()?;
    Ok(ss.gd5 / ss.j_ratio / ss.gm6)
}

/// Unapproximated cascoded LS: keeps the residual M6 term, suppressed by
/// the cascode gain and the SCM load, in the denominator:
/// `(g_d5/J)/(g_m6 + g_d6/(g_m6c*r_SCM))` (V/V).
pub fn ls_vx_cascoded_full(ss: &SmallSignalSet, r_scm: f64) -> Result<f64> {
    ss.validate()?;
    if !(r_scm > 0.0) {
        return Err(Error::Domain(format!("r_scm must be > 0, got {r_scm}")));
    }
    Ok(ss.gd5 / ss.j_ratio / (ss.gm6 + ss.gd6 / (ss.gm6c * r_scm)))
}

/// Relative LS of I_REF: `S_IREF * |dV_X/dV_DD| * 100` (%/V).
pub fn ls_iref(ls_vx: f64, s_iref: f64) -> Result<f64> {
    if ls_vx < 0.0 || s_iref < 0.0 {
        return Err(Error::Domain("ls_iref requires non-negative inputs".into()));
    }
    Ok(s_iref * ls_vx * 100.0)
}

/// Dominant pole added by the buffer: `(g_m8+g_d8)/(2*pi*C_F*A_v,OTA)` (Hz).
pub fn dominant_pole(ss: &SmallSignalSet) -> Result<f64> {
    ss.validate()?;
    Ok((ss.gm8 + ss.gd8) / (2.0 * std::f64::consts::PI * ss.c_f * ss.av_ota))
}

/// Weak-inversion transconductance estimate `g_m = I_D/(n*U_T)` (S).
/// A convenience only, and approximate; extracted values should be
/// preferred whenever available.
pub fn weak_inversion_gm(i_d: f64, n: f64, u_t: f64) -> Result<f64> {
    if !(i_d > 0.0 && n > 1.0 && u_t > 0.0) {
        return Err(Error::Domain(
            "weak_inversion_gm requires positive I_D, n > 1, U_T > 0".into(),
        ));
    }
    Ok(i_d / (n * u_t))
}
