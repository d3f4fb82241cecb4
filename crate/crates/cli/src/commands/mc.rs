//! `scmref mc`: variability, first-order or full nonlinear Monte Carlo.

use serde::Serialize;

use scmref::{first_order_variability, model_s_iref, monte_carlo_variability};

use crate::config::McMode;
use crate::report::{persist, round9, to_json, Csv, CsvCell, OutFile};
use crate::{CliError, Ctx};

#[derive(Serialize)]
struct McReport {
    command: &'static str,
    mode: &'static str,
    sigma_vx_v: f64,
    s_iref_per_v: f64,
    first_order_sigma_over_mu: f64,
    mc: Option<McOut>,
}

#[derive(Serialize)]
struct McOut {
    trials: u64,
    seed: u64,
    sigma_over_mu: f64,
    mean_a: f64,
    std_dev_a: f64,
    failures: usize,
    histogram: Vec<BinOut>,
}

#[derive(Serialize)]
struct BinOut {
    lo_a: f64,
    hi_a: f64,
    count: usize,
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let mc_cfg = ctx
        .cfg
        .mc
        .as_ref()
        .ok_or_else(|| CliError::Config("mc command needs an [mc] section".into()))?;
    if mc_cfg.trials < 100 {
        return Err(CliError::Config(format!(
            "[mc].trials must be >= 100, got {}",
            mc_cfg.trials
        )));
    }
    let tech = ctx.cfg.tech_profile()?;
    let design = ctx.cfg.design_point()?;

    // S_IREF: explicit override, else the model value at the design point.
    let s_iref = match mc_cfg.s_iref_per_v {
        Some(s) => s,
        None => model_s_iref(&tech, design.delta_vt, design.alpha, design.k_ptat)?,
    };
    let fo = first_order_variability(mc_cfg.sigma_vx, s_iref)?;

    let mut files = Vec::new();
    let mc_out = match mc_cfg.mode {
        McMode::FirstOrder => None,
        McMode::Nonlinear => {
            let seed = ctx.seed_override.or(mc_cfg.seed).ok_or_else(|| {
                CliError::Config("Monte Carlo needs a seed ([mc].seed or --seed)".into())
            })?;
            let t = tech.t_ref_temperature();
            let result =
                monte_carlo_variability(&design, &tech, t, mc_cfg.sigma_vx, mc_cfg.trials, seed)?;
            // Trials run at unit S_2/N; rescale currents onto the target.
            let scale = super::s2_over_n_for_target(&design, &tech)?;
            if ctx.format == crate::config::OutputFormat::Csv {
                let mut csv = Csv::new(&["trial", "delta_vt_v", "i_ref_a"]);
                for t in &result.trials {
                    csv.row(&[
                        CsvCell::Int(t.trial),
                        CsvCell::Num(t.delta_vt),
                        CsvCell::Num(t.i_ref * scale),
                    ]);
                }
                files.push(OutFile {
                    name: "mc.csv".into(),
                    content: csv.into_string(),
                });
            }
            Some(McOut {
                trials: mc_cfg.trials,
                seed,
                sigma_over_mu: round9(result.sigma_over_mu),
                mean_a: round9(result.mean * scale),
                std_dev_a: round9(result.std_dev * scale),
                failures: result.failures,
                histogram: result
                    .histogram
                    .iter()
                    .map(|b| BinOut {
                        lo_a: round9(b.lo * scale),
                        hi_a: round9(b.hi * scale),
                        count: b.count,
                    })
                    .collect(),
            })
        }
    };

    let report = McReport {
        command: "mc",
        mode: match mc_cfg.mode {
            McMode::Nonlinear => "nonlinear",
            McMode::FirstOrder => "first_order",
        },
        sigma_vx_v: round9(mc_cfg.sigma_vx),
        s_iref_per_v: round9(s_iref),
        first_order_sigma_over_mu: round9(fo.sigma_over_mu),
        mc: mc_out,
    };
    files.push(OutFile {
        name: "mc.json".into(),
        content: to_json(&report)?,
    });
    persist(&ctx.out_dir, &files)?;
    match &report.mc {
        Some(m) => println!(
            "mc: sigma/mu = {} (first order {})",
            crate::report::sig9(m.sigma_over_mu),
            crate::report::sig9(report.first_order_sigma_over_mu)
        ),
        None => println!(
            "mc: first-order sigma/mu = {}",
            crate::report::sig9(report.first_order_sigma_over_mu)
        ),
    }
    Ok(())
}
