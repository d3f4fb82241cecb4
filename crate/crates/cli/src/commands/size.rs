//! `scmref size`: the step 2-4 methodology loop plus final sizes, with the
//! SCM either ACM-sized or lookup-table-sized.

use serde::Serialize;

use scmref::{
    methodology_loop, size_lut, DesignPoint, DeviceLut, MethodologyOptions, SizingOptions,
    SizingResult, ValleyFit,
};

use crate::config::SizingMode;
use crate::report::{persist, round9, to_json, OutFile};
use crate::{CliError, Ctx};

#[derive(Serialize)]
struct SizeReport {
    command: &'static str,
    method: &'static str,
    alpha_guess: f64,
    alpha_sim: f64,
    tc_at_guess_ppm_per_c: f64,
    tc_at_sim_ppm_per_c: f64,
    valley_fit: FitOut,
    sizes: SizesOut,
    inversion_levels: LevelsOut,
    v_x_v: f64,
    delta_vt_v: f64,
    s_iref_pct_per_mv: f64,
    v_dd_min_v: f64,
}

#[derive(Serialize)]
struct FitOut {
    slope: f64,
    offset: f64,
    r_squared: f64,
}

impl From<&ValleyFit> for FitOut {
    fn from(f: &ValleyFit) -> Self {
        FitOut {
            slope: round9(f.slope),
            offset: round9(f.offset),
            r_squared: round9(f.r_squared),
        }
    }
}

#[derive(Serialize)]
struct SizesOut {
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
    s5: f64,
    s6: f64,
    s7: f64,
    s10: f64,
}

#[derive(Serialize)]
struct LevelsOut {
    i_f1: f64,
    i_f2: f64,
    i_r1: f64,
    beta: f64,
    i_f6: f64,
    i_f7: f64,
    mirror_if: f64,
}

fn sizes_out(s: &SizingResult) -> SizesOut {
    SizesOut {
        s1: round9(s.s1),
        s2: round9(s.s2),
        s3: round9(s.s3),
        s4: round9(s.s4),
        s5: round9(s.s5),
        s6: round9(s.s6),
        s7: round9(s.s7),
        s10: round9(s.s10),
    }
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let tech = ctx.cfg.tech_profile()?;
    let design = ctx.cfg.design_point()?;
    let grid = ctx.cfg.temperatures()?;
    let s = &ctx.cfg.sizing;
    let opts = SizingOptions {
        i_f6: s.i_f6,
        mirror_if: s.mirror_if,
        vdd_budget: s.vdd_budget,
    };

    let mut mopts = MethodologyOptions::with_grid(grid, opts.clone());
    mopts.fit_alphas = ctx.cfg.alpha_grid()?;
    mopts.k_range = (ctx.cfg.sweeps.k_ptat_min, ctx.cfg.sweeps.k_ptat_max);
    let outcome = methodology_loop(&tech, &design, &mopts)?;

    let (method, sizing): (&'static str, SizingResult) = match s.mode {
        SizingMode::Acm => ("acm", outcome.sizing.clone()),
        SizingMode::Lut => {
            let path = s.lut_file.as_ref().ok_or_else(|| {
                CliError::Config("sizing mode 'lut' needs [sizing].lut_file".into())
            })?;
            let full = ctx.cfg.resolve(path);
            let text = std::fs::read_to_string(&full).map_err(|e| {
                CliError::Config(format!("cannot read LUT '{}': {e}", full.display()))
            })?;
            let lut = DeviceLut::from_csv_text(&text, s.lut_length_m)
                .map_err(CliError::from_config_stage)?;
            let final_design = DesignPoint {
                alpha: outcome.alpha_sim,
                ..design.clone()
            };
            ("lut", size_lut(&final_design, &tech, &lut, &opts)?)
        }
    };

    let report = SizeReport {
        command: "size",
        method,
        alpha_guess: round9(outcome.alpha_guess),
        alpha_sim: round9(outcome.alpha_sim),
        tc_at_guess_ppm_per_c: round9(outcome.tc_at_guess),
        tc_at_sim_ppm_per_c: round9(outcome.tc_at_sim),
        valley_fit: (&outcome.fit).into(),
        sizes: sizes_out(&sizing),
        inversion_levels: LevelsOut {
            i_f1: round9(sizing.i_f1),
            i_f2: round9(sizing.i_f2),
            i_r1: round9(sizing.i_r1),
            beta: round9(sizing.beta),
            i_f6: round9(sizing.i_f6),
            i_f7: round9(sizing.i_f7),
            mirror_if: round9(sizing.mirror_if),
        },
        v_x_v: round9(sizing.v_x),
        delta_vt_v: round9(sizing.delta_vt),
        s_iref_pct_per_mv: round9(sizing.s_iref_per_v / 10.0),
        v_dd_min_v: round9(sizing.v_dd_min),
    };

    persist(
        &ctx.out_dir,
        &[OutFile {
            name: "sizing.json".into(),
            content: to_json(&report)?,
        }],
    )?;
    println!(
        "size: alpha_guess = {}, alpha_sim = {}, V_DD,min = {} V ({method})",
        crate::report::sig9(outcome.alpha_guess),
        crate::report::sig9(outcome.alpha_sim),
        crate::report::sig9(sizing.v_dd_min),
    );
    Ok(())
}
