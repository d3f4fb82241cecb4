//! `scmref solve`: operating points over the temperature grid.

use serde::Serialize;

use scmref::{temperature_sweep, LeakagePerturbation, TemperatureSweep};

use crate::report::{persist, round9, to_json, Csv, CsvCell, OutFile};
use crate::{CliError, Ctx};

use super::s2_over_n_for_target;

#[derive(Serialize)]
struct SolveReport {
    command: &'static str,
    /// "ptat" when dV_T = 0 (pure T^(2-m) behavior), "cwt" otherwise.
    mode: &'static str,
    tc_ppm_per_c: f64,
    s2_over_n: f64,
    leakage_applied: bool,
    supply_grid: Option<crate::config::SupplySection>,
    points: Vec<PointRow>,
}

#[derive(Serialize)]
struct PointRow {
    t_c: f64,
    i_f2: f64,
    i_f1: f64,
    i_r1: f64,
    beta: f64,
    v_x_v: f64,
    i_ref_a: f64,
    i_ref_norm: f64,
    s_iref_per_v: f64,
}

fn load_leakage(ctx: &Ctx) -> Result<Option<LeakagePerturbation>, CliError> {
    let Some(section) = &ctx.cfg.leakage else {
        return Ok(None);
    };
    let read_samples = |p: &Option<std::path::PathBuf>| -> Result<Vec<(f64, f64)>, CliError> {
        match p {
            None => Ok(Vec::new()),
            Some(p) => {
                let full = ctx.cfg.resolve(p);
                let text = std::fs::read_to_string(&full).map_err(|e| {
                    CliError::Config(format!("cannot read leakage CSV '{}': {e}", full.display()))
                })?;
                LeakagePerturbation::samples_from_csv(&text).map_err(CliError::from_config_stage)
            }
        }
    };
    let vx = read_samples(&section.vx_csv)?;
    let vb6 = read_samples(&section.vb6_csv)?;
    LeakagePerturbation::new(vx, vb6)
        .map(Some)
        .map_err(CliError::from_config_stage)
}

pub fn sweep_for(ctx: &Ctx) -> Result<(TemperatureSweep, f64, bool), CliError> {
    let tech = ctx.cfg.tech_profile()?;
    let design = ctx.cfg.design_point()?;
    let grid = ctx.cfg.temperatures()?;
    let s2_over_n = s2_over_n_for_target(&design, &tech)?;
    let leak = load_leakage(ctx)?;
    let sweep = temperature_sweep(&design, &tech, &grid, s2_over_n, leak.as_ref(), None)?;
    Ok((sweep, s2_over_n, leak.is_some()))
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let design = ctx.cfg.design_point()?;
    let (sweep, s2_over_n, leakage_applied) = sweep_for(ctx)?;

    let i_ref_25 = design.i_ref_target;
    let points: Vec<PointRow> = sweep
        .points
        .iter()
        .map(|p| PointRow {
            t_c: round9(p.temperature.celsius()),
            i_f2: round9(p.i_f2),
            i_f1: round9(p.i_f1),
            i_r1: round9(p.i_r1),
            beta: round9(p.beta),
            v_x_v: round9(p.v_x),
            i_ref_a: round9(p.i_ref),
            i_ref_norm: round9(p.i_ref / i_ref_25),
            s_iref_per_v: round9(p.s_iref),
        })
        .collect();
    let report = SolveReport {
        command: "solve",
        mode: if design.delta_vt == 0.0 {
            "ptat"
        } else {
            "cwt"
        },
        tc_ppm_per_c: round9(sweep.tc_ppm_per_c),
        s2_over_n: round9(s2_over_n),
        leakage_applied,
        supply_grid: ctx.cfg.supply,
        points,
    };

    let mut files = vec![OutFile {
        name: "solve.json".into(),
        content: to_json(&report)?,
    }];
    if ctx.format == crate::config::OutputFormat::Csv {
        let mut csv = Csv::new(&["t_c", "i_f2", "beta", "v_x_v", "i_ref_a", "s_iref_per_v"]);
        for p in &sweep.points {
            csv.row(&[
                CsvCell::Num(p.temperature.celsius()),
                CsvCell::Num(p.i_f2),
                CsvCell::Num(p.beta),
                CsvCell::Num(p.v_x),
                CsvCell::Num(p.i_ref),
                CsvCell::Num(p.s_iref),
            ]);
        }
        files.push(OutFile {
            name: "tempsweep.csv".into(),
            content: csv.into_string(),
        });
    }
    persist(&ctx.out_dir, &files)?;
    println!(
        "solve: {} points, TC = {} ppm/degC ({} mode)",
        report.points.len(),
        crate::report::sig9(sweep.tc_ppm_per_c),
        report.mode
    );
    Ok(())
}
