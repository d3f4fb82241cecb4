//! Transistor sizing: ACM-based steps and the lookup-table route.
//!
//! Branch bookkeeping, with I_REF the unit output current: M2 carries
//! N*I_REF, M1 sinks everything entering the V_X node, (1+M+N)*I_REF; the
//! beta-multiplier unit branch (M4/M6) carries I_REF and its diode branch
//! (M5/M7) J*I_REF; the bias generator (M10, M8-M9) carries M*I_REF. The
//! aspect-ratio relation at the SCM follows:
//!
//! ```text
//! S1/S2 = (I_SQ2/I_SQ1) * (1+M+N)/N * 1/(alpha - beta)
//! ```
//!
//! The ACM route (steps a-e) converts chosen inversion levels into aspect
//! ratios through `I_D = I_SQ*S*i_f`. The lookup-table route replaces the
//! SCM steps with tabulated current densities: M1's gate voltage is swept
//! holding the intermediate node at V_X until the forward-density ratio
//! matches alpha, then widths follow from the branch current targets.
//! Tables use a body-grounded convention, so M2 (body tied to its source
//! at V_X) is queried at (v_g - V_X, 0) while M1's drain-side reverse
//! density is queried at (v_g, V_X).

use serde::{Deserialize, Serialize};

use crate::acm::{acm_voltage_of_if, if_of_acm_voltage, isq_at, thermal_voltage, TechProfile};
use crate::error::{Error, Result};
use crate::metrics::s_iref_closed_form;
use crate::reference::{vx_beta_multiplier, DesignPoint, OperatingPoint};
use crate::solver;

/// Minimum alpha - beta separation before the S1/S2 relation degenerates.
const DEGENERACY_GAP: f64 = 1e-9;

/// Designer-chosen inversion levels and optional headroom budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizingOptions {
    /// Inversion level for M6 (weak inversion, <= 0.1).
    pub i_f6: f64,
    /// Inversion level for the mirror devices M3-M5, M10.
    pub mirror_if: f64,
    /// Explicit V_DD,min budget; estimated from the model when absent.
    pub vdd_budget: Option<VddBudget>,
}

impl Default for SizingOptions {
    /// Bulk-like defaults (moderate-inversion mirrors).
    fn default() -> Self {
        SizingOptions {
            i_f6: 0.03,
            mirror_if: 0.69,
            vdd_budget: None,
        }
    }
}

impl SizingOptions {
    /// FDSOI-like defaults (deeper weak inversion, lighter mirrors).
    pub fn fdsoi_like() -> Self {
        SizingOptions {
            i_f6: 0.003,
            mirror_if: 0.25,
            vdd_budget: None,
        }
    }
}

/// Headroom stack inputs of the minimum-supply expression (all volts).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VddBudget {
    pub v_ds_sat: f64,
    pub v_sg1: f64,
    pub v_sg2: f64,
    pub v_sg7: f64,
    pub v_sg8: f64,
    pub v_gs4: f64,
    pub v_sd6c_sat: f64,
}

/// Minimum supply voltage: the worst branch of the stack,
/// `V_DS,sat + max(V_SG1, V_SG8+V_SG1-V_SG2, V_GS4+V_SD6C,sat+V_SG1-V_SG2, V_SG7)`.
pub fn vdd_min(b: &VddBudget) -> Result<f64> {
    for (name, v) in [
        ("v_ds_sat", b.v_ds_sat),
        ("v_sg1", b.v_sg1),
        ("v_sg2", b.v_sg2),
        ("v_sg7", b.v_sg7),
        ("v_sg8", b.v_sg8),
        ("v_gs4", b.v_gs4),
        ("v_sd6c_sat", b.v_sd6c_sat),
    ] {
        if v < 0.0 {
            return Err(Error::Domain(format!("{name} must be >= 0, got {v}")));
        }
    }
    let branches = [
        b.v_sg1,
        b.v_sg8 + b.v_sg1 - b.v_sg2,
        b.v_gs4 + b.v_sd6c_sat + b.v_sg1 - b.v_sg2,
        b.v_sg7,
    ];
    Ok(b.v_ds_sat + branches.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(x)))
}

/// Emitted sizes plus the state that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct SizingResult {
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
    pub s4: f64,
    pub s5: f64,
    pub s6: f64,
    pub s7: f64,
    pub s10: f64,
    pub i_f1: f64,
    pub i_f2: f64,
    pub i_r1: f64,
    pub beta: f64,
    pub i_f6: f64,
    /// Operating level of M7, J*K times i_f6.
    pub i_f7: f64,
    pub mirror_if: f64,
    pub delta_vt: f64,
    pub v_x: f64,
    pub s_iref_per_v: f64,
    pub v_dd_min: f64,
}

fn validate_ratios(design: &DesignPoint) -> Result<()> {
    if !(design.n_ratio > 0.0 && design.j_ratio > 0.0 && design.k_ratio > 0.0) {
        return Err(Error::Domain(
            "sizing requires strictly positive N, J, K ratios".into(),
        ));
    }
    Ok(())
}

fn check_weak_inversion(i_f6: f64) -> Result<()> {
    if !(i_f6 > 0.0 && i_f6 <= 0.1) {
        return Err(Error::Domain(format!(
            "i_f6 must be in weak inversion (0 < i_f6 <= 0.1), got {i_f6}"
        )));
    }
    Ok(())
}

/// Sizes of the beta-multiplier and mirror devices (steps d and e), shared
/// by both routes. Returns (s3, s4, s5, s6, s7, s10).
fn periphery_sizes(
    design: &DesignPoint,
    isq: f64,
    i_f6: f64,
    mirror_if: f64,
) -> (f64, f64, f64, f64, f64, f64) {
    let i_ref = design.i_ref_target;
    let s6 = i_ref / (isq * i_f6);
    let s7 = s6 / design.k_ratio;
    let s3 = design.n_ratio * i_ref / (isq * mirror_if);
    let s4 = i_ref / (isq * mirror_if);
    let s5 = design.j_ratio * i_ref / (isq * mirror_if);
    let s10 = design.m_ratio * i_ref / (isq * mirror_if);
    (s3, s4, s5, s6, s7, s10)
}

/// First-order headroom estimate when no explicit budget is given: every
/// gate-source magnitude from `|V_T0| + n*U_T*F(i_f)` with the default
/// flavor, saturation margins at 4*U_T. Mixed-flavor stacks should supply
/// an explicit budget instead.
fn estimate_budget(
    tech: &TechProfile,
    u_t: f64,
    i_f1: f64,
    i_f2: f64,
    i_f6: f64,
    i_f7: f64,
    mirror_if: f64,
) -> Result<VddBudget> {
    let vsg = |i: f64| -> Result<f64> {
        Ok((tech.vt0.abs() + tech.n * u_t * acm_voltage_of_if(i)?).max(0.0))
    };
    Ok(VddBudget {
        v_ds_sat: 4.0 * u_t,
        v_sg1: vsg(i_f1)?,
        v_sg2: vsg(i_f2)?,
        v_sg7: vsg(i_f7)?,
        v_sg8: vsg(i_f6)?,
        v_gs4: vsg(mirror_if)?,
        v_sd6c_sat: 4.0 * u_t,
    })
}

/// ACM-based sizing (steps a-e) from a solved operating point at t_ref.
pub fn size_acm(
    design: &DesignPoint,
    tech: &TechProfile,
    op25: &OperatingPoint,
    opts: &SizingOptions,
) -> Result<SizingResult> {
    design.validate()?;
    tech.validate()?;
    validate_ratios(design)?;
    check_weak_inversion(opts.i_f6)?;
    if (op25.temperature.kelvin() - tech.t_ref).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "sizing expects an operating point at t_ref = {} K, got {} K",
            tech.t_ref,
            op25.temperature.kelvin()
        )));
    }
    let gap = design.alpha - op25.beta;
    if gap < DEGENERACY_GAP {
        return Err(Error::DegenerateDesign { gap });
    }

    let isq = isq_at(tech, op25.temperature);
    let u_t = thermal_voltage(op25.temperature);
    let i_ref = design.i_ref_target;

    // Step b: S_2 from the drain-current equation; M2 carries N*I_REF.
    let s2 = design.n_ratio * i_ref / (isq * op25.i_f2);
    // Step c: S_1 from the KCL-driven ratio (same flavor, I_SQ2/I_SQ1 = 1).
    let s1 = s2 * (1.0 + design.m_ratio + design.n_ratio) / design.n_ratio / gap;
    // Steps d-e.
    let (s3, s4, s5, s6, s7, s10) = periphery_sizes(design, isq, opts.i_f6, opts.mirror_if);
    let i_f7 = design.j_ratio * design.k_ratio * opts.i_f6;

    let budget = match &opts.vdd_budget {
        Some(b) => *b,
        None => estimate_budget(
            tech,
            u_t,
            op25.i_f1,
            op25.i_f2,
            opts.i_f6,
            i_f7,
            opts.mirror_if,
        )?,
    };

    let result = SizingResult {
        s1,
        s2,
        s3,
        s4,
        s5,
        s6,
        s7,
        s10,
        i_f1: op25.i_f1,
        i_f2: op25.i_f2,
        i_r1: op25.i_r1,
        beta: op25.beta,
        i_f6: opts.i_f6,
        i_f7,
        mirror_if: opts.mirror_if,
        delta_vt: design.delta_vt,
        v_x: op25.v_x,
        s_iref_per_v: op25.s_iref,
        v_dd_min: vdd_min(&budget)?,
    };
    for (name, s) in [
        ("s1", s1),
        ("s2", s2),
        ("s3", s3),
        ("s4", s4),
        ("s5", s5),
        ("s6", s6),
        ("s7", s7),
        ("s10", s10),
    ] {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::Domain(format!("aspect ratio {name} = {s} invalid")));
        }
    }
    Ok(result)
}

/// Sampled current-density table for one device flavor.
///
/// Axes are strictly increasing; the density column is drain current per
/// unit width (A/m) at saturation, body grounded, and `gm_over_id` (1/V) is
/// carried alongside for reporting. Queries interpolate bilinearly.
#[derive(Debug, Clone)]
pub struct DeviceLut {
    vg: Vec<f64>,
    vs: Vec<f64>,
    /// Row-major over (vg, vs).
    id_per_w: Vec<f64>,
    gm_over_id: Vec<f64>,
    /// Channel length (m) giving S = W/length.
    pub length_m: f64,
}

impl DeviceLut {
    pub fn new(
        vg: Vec<f64>,
        vs: Vec<f64>,
        id_per_w: Vec<f64>,
        gm_over_id: Vec<f64>,
        length_m: f64,
    ) -> Result<Self> {
        for axis in [&vg, &vs] {
            if axis.len() < 2 {
                return Err(Error::InvalidInput("LUT axes need >= 2 points".into()));
            }
            for w in axis.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(Error::InvalidInput(
                        "LUT axes must be strictly increasing".into(),
                    ));
                }
            }
        }
        if id_per_w.len() != vg.len() * vs.len() || gm_over_id.len() != id_per_w.len() {
            return Err(Error::InvalidInput(format!(
                "LUT needs {}x{} samples, got {}",
                vg.len(),
                vs.len(),
                id_per_w.len()
            )));
        }
        if id_per_w.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidInput(
                "LUT current densities must be > 0".into(),
            ));
        }
        if !(length_m > 0.0) {
            return Err(Error::InvalidInput("LUT length must be > 0".into()));
        }
        Ok(DeviceLut {
            vg,
            vs,
            id_per_w,
            gm_over_id,
            length_m,
        })
    }

    /// Synthesize a table from the ACM equations (used for cross-validation
    /// and as a stand-in when no extracted table is available).
    pub fn from_acm(
        tech: &TechProfile,
        vt0: f64,
        vg: Vec<f64>,
        vs: Vec<f64>,
        length_m: f64,
    ) -> Result<Self> {
        let t = tech.t_ref_temperature();
        let u_t = thermal_voltage(t);
        let isq = isq_at(tech, t);
        let mut id_per_w = Vec::with_capacity(vg.len() * vs.len());
        let mut gm_over_id = Vec::with_capacity(vg.len() * vs.len());
        for &g in &vg {
            for &s in &vs {
                let f_target = ((g - vt0) / tech.n - s) / u_t;
                let i_f = if_of_acm_voltage(f_target)?.get();
                id_per_w.push(isq * i_f / length_m);
                // ACM transconductance efficiency in saturation.
                gm_over_id.push(2.0 / (tech.n * u_t * ((1.0 + i_f).sqrt() + 1.0)));
            }
        }
        DeviceLut::new(vg, vs, id_per_w, gm_over_id, length_m)
    }

    /// Parse the fixed CSV schema `vg_v, vs_v, id_per_w_a_per_m,
    /// gm_over_id_per_v`, row-major with vs varying fastest.
    pub fn from_csv_text(text: &str, length_m: f64) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty LUT CSV".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != ["vg_v", "vs_v", "id_per_w_a_per_m", "gm_over_id_per_v"] {
            return Err(Error::InvalidInput(format!(
                "LUT CSV header must be 'vg_v,vs_v,id_per_w_a_per_m,gm_over_id_per_v', got '{header}'"
            )));
        }
        let mut rows: Vec<[f64; 4]> = Vec::new();
        for (idx, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::InvalidInput(format!(
                    "LUT CSV row {}: expected 4 columns",
                    idx + 2
                )));
            }
            let mut row = [0.0; 4];
            for (k, f) in fields.iter().enumerate() {
                row[k] = f.parse().map_err(|_| {
                    Error::InvalidInput(format!("LUT CSV row {}: bad number '{f}'", idx + 2))
                })?;
            }
            rows.push(row);
        }
        let mut vg: Vec<f64> = Vec::new();
        for r in &rows {
            if vg.last() != Some(&r[0]) {
                vg.push(r[0]);
            }
        }
        vg.dedup();
        let n_vs = rows.len() / vg.len().max(1);
        if n_vs == 0 || vg.len() * n_vs != rows.len() {
            return Err(Error::InvalidInput(
                "LUT CSV is not a full row-major grid".into(),
            ));
        }
        let vs: Vec<f64> = rows[..n_vs].iter().map(|r| r[1]).collect();
        for (i, r) in rows.iter().enumerate() {
            if r[0] != vg[i / n_vs] || r[1] != vs[i % n_vs] {
                return Err(Error::InvalidInput(format!(
                    "LUT CSV row {} breaks the row-major grid ordering",
                    i + 2
                )));
            }
        }
        let id: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let gm: Vec<f64> = rows.iter().map(|r| r[3]).collect();
        DeviceLut::new(vg, vs, id, gm, length_m)
    }

    /// Render the table back into its CSV schema.
    pub fn to_csv_text(&self) -> String {
        let mut out = String::from("vg_v,vs_v,id_per_w_a_per_m,gm_over_id_per_v\n");
        for (i, &g) in self.vg.iter().enumerate() {
            for (j, &s) in self.vs.iter().enumerate() {
                let idx = i * self.vs.len() + j;
                out.push_str(&format!(
                    "{:e},{:e},{:e},{:e}\n",
                    g, s, self.id_per_w[idx], self.gm_over_id[idx]
                ));
            }
        }
        out
    }

    pub fn vg_range(&self) -> (f64, f64) {
        (self.vg[0], self.vg[self.vg.len() - 1])
    }

    pub fn vs_range(&self) -> (f64, f64) {
        (self.vs[0], self.vs[self.vs.len() - 1])
    }

    fn locate(axis: &[f64], x: f64) -> Result<(usize, f64)> {
        if x < axis[0] || x > axis[axis.len() - 1] {
            return Err(Error::LutRange(format!(
                "query {x} outside tabulated range [{}, {}]",
                axis[0],
                axis[axis.len() - 1]
            )));
        }
        let j = axis.partition_point(|&a| a <= x).min(axis.len() - 1);
        let j = j.max(1);
        let w = (x - axis[j - 1]) / (axis[j] - axis[j - 1]);
        Ok((j - 1, w))
    }

    /// Bilinear current density at (vg, vs) (A/m).
    pub fn id_per_w(&self, vg: f64, vs: f64) -> Result<f64> {
        let (i, wi) = Self::locate(&self.vg, vg)?;
        let (j, wj) = Self::locate(&self.vs, vs)?;
        let n = self.vs.len();
        let d00 = self.id_per_w[i * n + j];
        let d01 = self.id_per_w[i * n + j + 1];
        let d10 = self.id_per_w[(i + 1) * n + j];
        let d11 = self.id_per_w[(i + 1) * n + j + 1];
        Ok(d00 * (1.0 - wi) * (1.0 - wj)
            + d01 * (1.0 - wi) * wj
            + d10 * wi * (1.0 - wj)
            + d11 * wi * wj)
    }

    /// Scale every density by a factor (tooling for what-if studies).
    pub fn scaled(&self, factor: f64) -> Self {
        DeviceLut {
            vg: self.vg.clone(),
            vs: self.vs.clone(),
            id_per_w: self.id_per_w.iter().map(|d| d * factor).collect(),
            gm_over_id: self.gm_over_id.clone(),
            length_m: self.length_m,
        }
    }
}

/// Lookup-table sizing: replaces the SCM steps of [`size_acm`] by sweeping
/// M1's gate bias with the intermediate node held at V_X until the
/// forward-density ratio equals alpha, then sizing both SCM devices from
/// the branch-current targets. The periphery (M3-M7, M10) still follows
/// the ACM route.
pub fn size_lut(
    design: &DesignPoint,
    tech: &TechProfile,
    lut: &DeviceLut,
    opts: &SizingOptions,
) -> Result<SizingResult> {
    design.validate()?;
    tech.validate()?;
    validate_ratios(design)?;
    check_weak_inversion(opts.i_f6)?;

    let t = tech.t_ref_temperature();
    let u_t = thermal_voltage(t);
    let v_x = vx_beta_multiplier(design.k_ptat, design.delta_vt, tech.n, u_t);
    let (vs_lo, vs_hi) = lut.vs_range();
    if v_x < vs_lo || v_x > vs_hi {
        return Err(Error::LutRange(format!(
            "V_X = {v_x:.6} V outside the table's source-voltage range [{vs_lo}, {vs_hi}]"
        )));
    }
    let (vg_lo, vg_hi) = lut.vg_range();
    let lo = vg_lo + v_x;
    if lo >= vg_hi {
        return Err(Error::LutRange(
            "gate-voltage range too narrow for the V_X shift".into(),
        ));
    }

    // density ratio d(vg,0)/d(vg-V_X,0) falls from its weak-inversion
    // plateau toward 1; alpha is crossed exactly once.
    let mismatch = |vg: f64| -> f64 {
        let d_f1 = lut.id_per_w(vg, 0.0).unwrap_or(f64::NAN);
        let d_f2 = lut.id_per_w(vg - v_x, 0.0).unwrap_or(f64::NAN);
        design.alpha - d_f1 / d_f2
    };
    let f_lo = mismatch(lo + 1e-12);
    let f_hi = mismatch(vg_hi);
    if !(f_lo <= 0.0 && f_hi >= 0.0) {
        return Err(Error::LutRange(format!(
            "alpha = {} not bracketed by the table: density ratio spans [{:.4}, {:.4}]",
            design.alpha,
            design.alpha - f_hi,
            design.alpha - f_lo
        )));
    }
    let vg = solver::solve_increasing(mismatch, lo + 1e-12, vg_hi, 1e-10 * design.alpha)?;

    let d_f1 = lut.id_per_w(vg, 0.0)?;
    let d_r1 = lut.id_per_w(vg, v_x)?;
    let d_f2 = lut.id_per_w(vg - v_x, 0.0)?;
    let beta = d_r1 / d_f2;
    let gap = design.alpha - beta;
    if gap < DEGENERACY_GAP {
        return Err(Error::DegenerateDesign { gap });
    }
    if d_f1 <= d_r1 {
        return Err(Error::LutRange(
            "M1 forward density does not exceed its reverse density".into(),
        ));
    }

    let i_ref = design.i_ref_target;
    let i1 = (1.0 + design.m_ratio + design.n_ratio) * i_ref;
    let i2 = design.n_ratio * i_ref;
    let s1 = i1 / (d_f1 - d_r1) / lut.length_m;
    let s2 = i2 / d_f2 / lut.length_m;

    let isq = isq_at(tech, t);
    let (s3, s4, s5, s6, s7, s10) = periphery_sizes(design, isq, opts.i_f6, opts.mirror_if);
    let i_f7 = design.j_ratio * design.k_ratio * opts.i_f6;

    // Table-implied inversion levels (match the ACM ones for an unscaled
    // ACM-generated table).
    let i_f2 = d_f2 * lut.length_m / isq;
    let i_f1 = d_f1 * lut.length_m / isq;
    let i_r1 = d_r1 * lut.length_m / isq;
    let s_iref = s_iref_closed_form(i_f2, design.alpha, tech.n, u_t)?;

    let budget = match &opts.vdd_budget {
        Some(b) => *b,
        None => estimate_budget(tech, u_t, i_f1, i_f2, opts.i_f6, i_f7, opts.mirror_if)?,
    };

    Ok(SizingResult {
        s1,
        s2,
        s3,
        s4,
        s5,
        s6,
        s7,
        s10,
        i_f1,
        i_f2,
        i_r1,
        beta,
        i_f6: opts.i_f6,
        i_f7,
        mirror_if: opts.mirror_if,
        delta_vt: design.delta_vt,
        v_x,
        s_iref_per_v: s_iref,
        v_dd_min: vdd_min(&budget)?,
    })
}
