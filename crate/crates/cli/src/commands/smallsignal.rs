//! `scmref smallsignal`: line-sensitivity predictions from extracted
//! conductances, tied to the solved operating point through r_SCM.

use serde::Serialize;

use scmref::{
    dominant_pole, ls_iref, ls_vx_basic, ls_vx_cascoded, ls_vx_cascoded_full, model_s_iref, r_scm,
};

use crate::report::{persist, round9, to_json, OutFile};
use crate::{CliError, Ctx};

#[derive(Serialize)]
struct SmallSignalReport {
    command: &'static str,
    s_iref_per_v: f64,
    i_ref_a: f64,
    r_scm_ohm: f64,
    ls_vx_basic_mv_per_v: f64,
    ls_vx_cascoded_mv_per_v: f64,
    ls_vx_cascoded_full_mv_per_v: f64,
    ls_iref_basic_pct_per_v: f64,
    ls_iref_cascoded_pct_per_v: f64,
    dominant_pole_hz: f64,
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let ss = ctx
        .cfg
        .small_signal
        .ok_or_else(|| CliError::Config("smallsignal needs a [small_signal] section".into()))?;
    ss.validate().map_err(CliError::from_config_stage)?;
    let tech = ctx.cfg.tech_profile()?;
    let design = ctx.cfg.design_point()?;

    let s_iref = model_s_iref(&tech, design.delta_vt, design.alpha, design.k_ptat)?;
    let r = r_scm(design.i_ref_target, s_iref)?;
    let basic = ls_vx_basic(&ss)?;
    let casc = ls_vx_cascoded(&ss)?;
    let casc_full = ls_vx_cascoded_full(&ss, r)?;

    let report = SmallSignalReport {
        command: "smallsignal",
        s_iref_per_v: round9(s_iref),
        i_ref_a: round9(design.i_ref_target),
        r_scm_ohm: round9(r),
        ls_vx_basic_mv_per_v: round9(basic * 1e3),
        ls_vx_cascoded_mv_per_v: round9(casc * 1e3),
        ls_vx_cascoded_full_mv_per_v: round9(casc_full * 1e3),
        ls_iref_basic_pct_per_v: round9(ls_iref(basic, s_iref)?),
        ls_iref_cascoded_pct_per_v: round9(ls_iref(casc, s_iref)?),
        dominant_pole_hz: round9(dominant_pole(&ss)?),
    };
    persist(
        &ctx.out_dir,
        &[OutFile {
            name: "smallsignal.json".into(),
            content: to_json(&report)?,
        }],
    )?;
    println!(
        "smallsignal: LS(V_X) basic {} mV/V, cascoded {} mV/V",
        crate::report::sig9(basic * 1e3),
        crate::report::sig9(casc * 1e3)
    );
    Ok(())
}
