//! `scmref valley`: TC maps, per-alpha valley extraction and affine fits,
//! one set per requested dV_T.

use serde::Serialize;

use scmref::{fit_valley, grid_tc_map, valley_for_alpha, ValleyPoint};

use crate::report::{persist, round9, to_json, Csv, CsvCell, OutFile};
use crate::{CliError, Ctx};

#[derive(Serialize)]
struct FitSummary {
    command: &'static str,
    entries: Vec<FitEntry>,
}

#[derive(Serialize)]
struct FitEntry {
    delta_vt_v: f64,
    valley_csv: String,
    tcmap_csv: Option<String>,
    slope: f64,
    offset: f64,
    r_squared: f64,
    min_tc_ppm_per_c: f64,
}

fn valley_csv(points: &[ValleyPoint]) -> String {
    let mut csv = Csv::new(&["alpha", "k_ptat_opt", "tc_ppm_per_c", "s_iref_pct_per_mv"]);
    for p in points {
        csv.row(&[
            CsvCell::Num(p.alpha),
            CsvCell::Num(p.k_ptat_opt),
            CsvCell::Num(p.tc_ppm_per_c),
            CsvCell::Num(p.s_iref_per_v / 10.0),
        ]);
    }
    csv.into_string()
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let tech = ctx.cfg.tech_profile()?;
    let grid = ctx.cfg.temperatures()?;
    let alphas = ctx.cfg.alpha_grid()?;
    let k_grid = ctx.cfg.k_ptat_grid()?;
    let k_range = (ctx.cfg.sweeps.k_ptat_min, ctx.cfg.sweeps.k_ptat_max);
    let dvt_values = ctx.cfg.delta_vt_values();

    let mut files = Vec::new();
    let mut entries = Vec::new();
    for (idx, &dvt) in dvt_values.iter().enumerate() {
        let points: Vec<ValleyPoint> = alphas
            .iter()
            .map(|&a| valley_for_alpha(&tech, dvt, a, k_range, &grid))
            .collect::<Result<_, _>>()?;
        let fit = fit_valley(&points)?;
        let min_tc = points
            .iter()
            .map(|p| p.tc_ppm_per_c)
            .fold(f64::INFINITY, f64::min);

        let valley_name = format!("valley_{idx:02}.csv");
        files.push(OutFile {
            name: valley_name.clone(),
            content: valley_csv(&points),
        });

        let tcmap_name = if ctx.format == crate::config::OutputFormat::Csv {
            let map = grid_tc_map(&tech, dvt, &alphas, &k_grid, &grid)?;
            let mut csv = Csv::new(&[
                "alpha",
                "k_ptat",
                "tc_ppm_per_c",
                "s_iref_pct_per_mv",
                "feasible",
            ]);
            for (ai, &alpha) in map.alphas.iter().enumerate() {
                for (ki, &k) in map.k_ptats.iter().enumerate() {
                    match map.cell(ai, ki) {
                        Some(cell) => csv.row(&[
                            CsvCell::Num(alpha),
                            CsvCell::Num(k),
                            CsvCell::Num(cell.tc_ppm_per_c),
                            CsvCell::Num(cell.s_iref_per_v / 10.0),
                            CsvCell::Int(1),
                        ]),
                        None => csv.row(&[
                            CsvCell::Num(alpha),
                            CsvCell::Num(k),
                            CsvCell::Text("nan".into()),
                            CsvCell::Text("nan".into()),
                            CsvCell::Int(0),
                        ]),
                    }
                }
            }
            let name = format!("tcmap_{idx:02}.csv");
            files.push(OutFile {
                name: name.clone(),
                content: csv.into_string(),
            });
            Some(name)
        } else {
            None
        };

        entries.push(FitEntry {
            delta_vt_v: round9(dvt),
            valley_csv: valley_name,
            tcmap_csv: tcmap_name,
            slope: round9(fit.slope),
            offset: round9(fit.offset),
            r_squared: round9(fit.r_squared),
            min_tc_ppm_per_c: round9(min_tc),
        });
    }

    files.push(OutFile {
        name: "valley_fits.json".into(),
        content: to_json(&FitSummary {
            command: "valley",
            entries,
        })?,
    });
    let written = persist(&ctx.out_dir, &files)?;
    println!(
        "valley: {} dV_T value(s), {} file(s) written",
        dvt_values.len(),
        written.len()
    );
    Ok(())
}
