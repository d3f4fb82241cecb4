//! (K_PTAT, alpha) design-space exploration.
//!
//! For a fixed CWT offset the modeled TC of I_REF forms a valley in the
//! (K_PTAT, alpha) plane: for each alpha there is an interior K_PTAT
//! minimizing the box TC, the locus is close to affine in alpha, and the
//! sensitivity S_IREF is nearly constant along it. The sizing methodology
//! exploits this: fit the valley once, invert the fit to guess alpha for
//! the chosen K_PTAT, then scan a bracket around the guess and size at the
//! scan minimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::acm::{isq_at, thermal_voltage, TechProfile, Temperature};
use crate::error::{Error, Result};
use crate::metrics::{box_tc, s_iref_closed_form, BoxSeries};
use crate::reference::{solve_if2, DesignPoint};
use crate::sizing::{size_acm, SizingOptions, SizingResult};
use crate::solver::golden_minimize;

/// Points in the coarse K_PTAT scan.
const COARSE_POINTS: usize = 41;
/// Dense fallback resolution when the coarse scan is not unimodal.
const DENSE_POINTS: usize = 2001;
/// Relative refinement tolerance on K_PTAT.
const K_REL_TOL: f64 = 1e-4;

/// One valley sample: the TC-minimizing K_PTAT at a given alpha.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValleyPoint {
    pub alpha: f64,
    pub k_ptat_opt: f64,
    pub tc_ppm_per_c: f64,
    /// S_IREF at the optimum, evaluated at t_ref (1/V).
    pub s_iref_per_v: f64,
    /// True when the minimum sat on the edge of the searched range.
    pub boundary: bool,
}

/// Affine fit K_PTAT = slope*alpha + offset.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValleyFit {
    pub slope: f64,
    pub offset: f64,
    pub r_squared: f64,
}

/// One cell of the TC map.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TcCell {
    pub tc_ppm_per_c: f64,
    pub s_iref_per_v: f64,
}

/// TC / sensitivity surface over an (alpha, K_PTAT) grid. Cells are
/// alpha-major; infeasible designs are `None`, never zero-filled.
#[derive(Debug, Clone, Serialize)]
pub struct TcMap {
    pub alphas: Vec<f64>,
    pub k_ptats: Vec<f64>,
    pub cells: Vec<Option<TcCell>>,
}

impl TcMap {
    pub fn cell(&self, alpha_idx: usize, k_idx: usize) -> &Option<TcCell> {
        &self.cells[alpha_idx * self.k_ptats.len() + k_idx]
    }
}

fn design_for(alpha: f64, k_ptat: f64, delta_vt: f64) -> DesignPoint {
    DesignPoint {
        alpha,
        k_ptat,
        j_ratio: k_ptat,
        k_ratio: 1.0,
        delta_vt,
        ..DesignPoint::generic()
    }
}

/// Box TC of the modeled I_REF(T) for one (alpha, K_PTAT) cell. Scale-free:
/// the S_2/N factor cancels out of the box method.
pub fn model_tc(
    tech: &TechProfile,
    delta_vt: f64,
    alpha: f64,
    k_ptat: f64,
    grid: &[Temperature],
) -> Result<f64> {
    let design = design_for(alpha, k_ptat, delta_vt);
    let mut axis = Vec::with_capacity(grid.len());
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid {
        let i_f2 = solve_if2(&design, tech, t)?;
        axis.push(t.kelvin());
        values.push(isq_at(tech, t) * i_f2);
    }
    box_tc(&BoxSeries::new(axis, values)?)
}

/// S_IREF of the cell at t_ref (1/V).
pub fn model_s_iref(tech: &TechProfile, delta_vt: f64, alpha: f64, k_ptat: f64) -> Result<f64> {
    let t = tech.t_ref_temperature();
    let design = design_for(alpha, k_ptat, delta_vt);
    let i_f2 = solve_if2(&design, tech, t)?;
    s_iref_closed_form(i_f2, alpha, tech.n, thermal_voltage(t))
}

/// Evaluate TC and S_IREF over the full (alpha, K_PTAT) grid. Cells whose
/// design is infeasible are marked, not zero-filled.
pub fn grid_tc_map(
    tech: &TechProfile,
    delta_vt: f64,
    alphas: &[f64],
    k_ptats: &[f64],
    grid: &[Temperature],
) -> Result<TcMap> {
    if alphas.is_empty() || k_ptats.is_empty() {
        return Err(Error::InvalidInput("empty alpha or K_PTAT range".into()));
    }
    let cells: Vec<Option<TcCell>> = alphas
        .par_iter()
        .flat_map_iter(|&alpha| k_ptats.iter().map(move |&k| (alpha, k)))
        .map(|(alpha, k)| {
            let tc = model_tc(tech, delta_vt, alpha, k, grid).ok()?;
            let s = model_s_iref(tech, delta_vt, alpha, k).ok()?;
            Some(TcCell {
                tc_ppm_per_c: tc,
                s_iref_per_v: s,
            })
        })
        .collect();
    Ok(TcMap {
        alphas: alphas.to_vec(),
        k_ptats: k_ptats.to_vec(),
        cells,
    })
}

fn count_interior_minima(tcs: &[f64]) -> usize {
    let mut count = 0;
    for k in 1..tcs.len() - 1 {
        if tcs[k] < tcs[k - 1] && tcs[k] < tcs[k + 1] {
            count += 1;
        }
    }
    count
}

/// Locate the TC-minimizing K_PTAT at fixed alpha.
///
/// A 41-point coarse scan on ln(K_PTAT) checks unimodality; an interior
/// minimum is refined by golden section to a relative 1e-4 in K_PTAT. A
/// boundary minimum is flagged rather than refined, and a non-unimodal scan
/// falls back to a dense grid argmin.
pub fn valley_for_alpha(
    tech: &TechProfile,
    delta_vt: f64,
    alpha: f64,
    k_range: (f64, f64),
    grid: &[Temperature],
) -> Result<ValleyPoint> {
    let (k_lo, k_hi) = k_range;
    if !(k_lo >= 1.0 && k_hi > k_lo) {
        return Err(Error::InvalidInput(format!(
            "bad K_PTAT range [{k_lo}, {k_hi}] (needs 1 <= lo < hi)"
        )));
    }
    let tc_at =
        |ln_k: f64| model_tc(tech, delta_vt, alpha, ln_k.exp(), grid).unwrap_or(f64::INFINITY);
    let (l_lo, l_hi) = (k_lo.ln(), k_hi.ln());
    let step = (l_hi - l_lo) / (COARSE_POINTS - 1) as f64;
    let samples: Vec<f64> = (0..COARSE_POINTS)
        .into_par_iter()
        .map(|k| tc_at(l_lo + step * k as f64))
        .collect();
    if samples.iter().all(|t| t.is_infinite()) {
        return Err(Error::InfeasibleDesign(format!(
            "no feasible K_PTAT in [{k_lo}, {k_hi}] at alpha = {alpha}"
        )));
    }
    let argmin = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();

    let finish = |ln_k: f64, tc: f64, boundary: bool| -> Result<ValleyPoint> {
        let k = ln_k.exp();
        Ok(ValleyPoint {
            alpha,
            k_ptat_opt: k,
            tc_ppm_per_c: tc,
            s_iref_per_v: model_s_iref(tech, delta_vt, alpha, k)?,
            boundary,
        })
    };

    if argmin == 0 || argmin == COARSE_POINTS - 1 {
        let ln_k = l_lo + step * argmin as f64;
        return finish(ln_k, samples[argmin], true);
    }
    if count_interior_minima(&samples) > 1 {
        // Not unimodal: dense argmin, no refinement.
        let dstep = (l_hi - l_lo) / (DENSE_POINTS - 1) as f64;
        let dense: Vec<f64> = (0..DENSE_POINTS)
            .into_par_iter()
            .map(|k| tc_at(l_lo + dstep * k as f64))
            .collect();
        let j = dense
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap();
        let boundary = j == 0 || j == DENSE_POINTS - 1;
        return finish(l_lo + dstep * j as f64, dense[j], boundary);
    }
    let (ln_k, tc) = golden_minimize(
        tc_at,
        l_lo + step * (argmin - 1) as f64,
        l_lo + step * (argmin + 1) as f64,
        K_REL_TOL,
    );
    finish(ln_k, tc, false)
}

/// Least-squares affine fit of K_PTAT_opt versus alpha.
pub fn fit_valley(points: &[ValleyPoint]) -> Result<ValleyFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "valley fit needs >= 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_a = points.iter().map(|p| p.alpha).sum::<f64>() / n;
    let mean_k = points.iter().map(|p| p.k_ptat_opt).sum::<f64>() / n;
    let ss_aa: f64 = points.iter().map(|p| (p.alpha - mean_a).powi(2)).sum();
    if ss_aa < 1e-12 * mean_a.abs().max(1.0) {
        return Err(Error::InvalidInput(
            "valley fit degenerate: alphas are collinear".into(),
        ));
    }
    let ss_ak: f64 = points
        .iter()
        .map(|p| (p.alpha - mean_a) * (p.k_ptat_opt - mean_k))
        .sum();
    let slope = ss_ak / ss_aa;
    let offset = mean_k - slope * mean_a;
    let ss_tot: f64 = points.iter().map(|p| (p.k_ptat_opt - mean_k).powi(2)).sum();
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.k_ptat_opt - slope * p.alpha - offset).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    Ok(ValleyFit {
        slope,
        offset,
        r_squared,
    })
}

/// Invert the valley fit: the alpha expected to minimize TC at a given
/// K_PTAT (methodology step 2).
pub fn guess_alpha(k_ptat: f64, fit: &ValleyFit) -> Result<f64> {
    if !(fit.slope > 0.0) {
        return Err(Error::InvalidInput(format!(
            "valley fit slope must be > 0, got {}",
            fit.slope
        )));
    }
    if k_ptat < fit.offset {
        return Err(Error::InfeasibleDesign(format!(
            "K_PTAT = {k_ptat} below the valley-fit offset {:.4}; no alpha reaches it",
            fit.offset
        )));
    }
    Ok((k_ptat - fit.offset) / fit.slope)
}

/// Scan alpha at fixed K_PTAT and refine the TC minimum. Returns
/// (alpha, TC); flags a boundary minimum through the error when `strict`.
fn alpha_scan(
    tech: &TechProfile,
    delta_vt: f64,
    k_ptat: f64,
    bracket: (f64, f64),
    points: usize,
    grid: &[Temperature],
) -> Result<(f64, f64, bool)> {
    let (a_lo, a_hi) = bracket;
    let step = (a_hi - a_lo) / (points - 1) as f64;
    let tc_at = |a: f64| model_tc(tech, delta_vt, a, k_ptat, grid).unwrap_or(f64::INFINITY);
    let samples: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|k| tc_at(a_lo + step * k as f64))
        .collect();
    if samples.iter().all(|t| t.is_infinite()) {
        return Err(Error::InfeasibleDesign(format!(
            "no feasible alpha in [{a_lo}, {a_hi}] at K_PTAT = {k_ptat}"
        )));
    }
    let j = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap();
    if j == 0 || j == points - 1 {
        return Ok((a_lo + step * j as f64, samples[j], true));
    }
    let (alpha, tc) = golden_minimize(
        tc_at,
        a_lo + step * (j - 1) as f64,
        a_lo + step * (j + 1) as f64,
        1e-4 * (a_lo + step * j as f64),
    );
    Ok((alpha, tc, false))
}

/// Knobs of the step 2-4 loop.
#[derive(Debug, Clone)]
pub struct MethodologyOptions {
    /// Alphas at which the valley is sampled for the step-2 fit.
    pub fit_alphas: Vec<f64>,
    /// K_PTAT search range for the valley samples.
    pub k_range: (f64, f64),
    /// Temperature grid for every TC objective.
    pub grid: Vec<Temperature>,
    /// Sizing inputs forwarded to step 4.
    pub sizing: SizingOptions,
}

impl MethodologyOptions {
    pub fn with_grid(grid: Vec<Temperature>, sizing: SizingOptions) -> Self {
        MethodologyOptions {
            fit_alphas: vec![2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0],
            k_range: (1.2, 100.0),
            grid,
            sizing,
        }
    }
}

/// Everything the loop produced, for reporting.
#[derive(Debug, Clone, Serialize)]
pub struct MethodologyOutcome {
    pub alpha_guess: f64,
    pub alpha_sim: f64,
    pub tc_at_guess: f64,
    pub tc_at_sim: f64,
    pub fit: ValleyFit,
    pub valley_points: Vec<ValleyPoint>,
    pub sizing: SizingResult,
}

/// Steps 2-4 of the sizing methodology at a fixed K_PTAT.
///
/// Step 2 fits the valley and inverts it for alpha_guess; step 3 evaluates
/// the model over alpha_guess x [0.7, 1.4] (15 points, refined) and keeps
/// the minimum as alpha_sim, widening once to [0.5, 2.0] if the minimum
/// lands on the bracket edge; step 4 sizes the reference at alpha_sim.
/// `design.alpha` is ignored and replaced by the loop's result.
pub fn methodology_loop(
    tech: &TechProfile,
    design: &DesignPoint,
    opts: &MethodologyOptions,
) -> Result<MethodologyOutcome> {
    tech.validate()?;
    let valley_points: Vec<ValleyPoint> = opts
        .fit_alphas
        .iter()
        .map(|&a| valley_for_alpha(tech, design.delta_vt, a, opts.k_range, &opts.grid))
        .collect::<Result<_>>()?;
    let fit = fit_valley(&valley_points)?;
    let alpha_guess = guess_alpha(design.k_ptat, &fit)?;
    let tc_at_guess = model_tc(
        tech,
        design.delta_vt,
        alpha_guess,
        design.k_ptat,
        &opts.grid,
    )?;

    let bracket = (0.7 * alpha_guess, 1.4 * alpha_guess);
    let (mut alpha_sim, mut tc_at_sim, boundary) = alpha_scan(
        tech,
        design.delta_vt,
        design.k_ptat,
        (bracket.0.max(1.0 + 1e-6), bracket.1),
        15,
        &opts.grid,
    )?;
    if boundary {
        let wide = (0.5 * alpha_guess, 2.0 * alpha_guess);
        let (a, tc, still_boundary) = alpha_scan(
            tech,
            design.delta_vt,
            design.k_ptat,
            (wide.0.max(1.0 + 1e-6), wide.1),
            15,
            &opts.grid,
        )?;
        if still_boundary {
            return Err(Error::InfeasibleDesign(format!(
                "no interior TC minimum in alpha even after widening to \
                 [{:.3}, {:.3}] at K_PTAT = {}",
                wide.0, wide.1, design.k_ptat
            )));
        }
        alpha_sim = a;
        tc_at_sim = tc;
    }

    let final_design = DesignPoint {
        alpha: alpha_sim,
        ..design.clone()
    };
    let t_ref = tech.t_ref_temperature();
    let if2_ref = solve_if2(&final_design, tech, t_ref)?;
    let s2_over_n = final_design.i_ref_target / (isq_at(tech, t_ref) * if2_ref);
    let op = crate::reference::operating_point(&final_design, tech, t_ref, s2_over_n)?;
    let sizing = size_acm(&final_design, tech, &op, &opts.sizing)?;

    Ok(MethodologyOutcome {
        alpha_guess,
        alpha_sim,
        tc_at_guess,
        tc_at_sim,
        fit,
        valley_points,
        sizing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acm::temperature_grid;

    fn grid() -> Vec<Temperature> {
        temperature_grid(-40.0, 85.0, 5.0).unwrap()
    }

    #[test]
    fn ptat_row_constant_tc() {
        // dV_T = 0: TC equals the pure T^(2-m) box TC for every alpha.
        let tech = TechProfile::generic();
        let g = grid();
        let axis: Vec<f64> = g.iter().map(|t| t.kelvin()).collect();
        let law: Vec<f64> = g
            .iter()
            .map(|t| (t.kelvin() / tech.t_ref).powf(2.0 - tech.m))
            .collect();
        let want = box_tc(&BoxSeries::new(axis, law).unwrap()).unwrap();
        for alpha in [1.5, 2.0, 2.9, 4.0] {
            let tc = model_tc(&tech, 0.0, alpha, 8.0, &g).unwrap();
            assert!(
                (tc - want).abs() < 1e-6 * want,
                "alpha {alpha}: {tc} vs {want}"
            );
        }
    }

    #[test]
    fn map_marks_infeasible_cells() {
        let tech = TechProfile::generic();
        let map = grid_tc_map(&tech, 0.0, &[1.5, 8.0], &[2.0, 10.0], &grid()).unwrap();
        // alpha = 8 at K = 2, dvt = 0: ln(K) < ln(alpha), infeasible.
        assert!(map.cell(1, 0).is_none());
        assert!(map.cell(0, 0).is_some());
        assert!(map.cell(1, 1).is_some());
    }

    #[test]
    fn s_iref_monotone_along_fixed_k_column() {
        let tech = TechProfile::generic();
        let mut last = 0.0;
        for alpha in [2.0, 3.0, 4.0, 5.0] {
            let s = model_s_iref(&tech, 17.6e-3, alpha, 6.0).unwrap();
            assert!(s > last, "S_IREF should grow with alpha at fixed K");
            last = s;
        }
    }

    #[test]
    fn valley_interior_minimum_at_generic_point() {
        let tech = TechProfile::generic();
        let vp = valley_for_alpha(&tech, 20e-3, 2.9, (1.5, 60.0), &grid()).unwrap();
        assert!(!vp.boundary);
        // Neighbors strictly worse.
        let up = model_tc(&tech, 20e-3, 2.9, vp.k_ptat_opt * 1.01, &grid()).unwrap();
        let dn = model_tc(&tech, 20e-3, 2.9, vp.k_ptat_opt * 0.99, &grid()).unwrap();
        assert!(up > vp.tc_ppm_per_c && dn > vp.tc_ppm_per_c);
    }

    #[test]
    fn valley_boundary_flagged() {
        let tech = TechProfile::generic();
        // Range pinned below the true optimum (~6): minimum sits at the edge.
        let vp = valley_for_alpha(&tech, 20e-3, 2.9, (1.5, 3.0), &grid()).unwrap();
        assert!(vp.boundary);
        assert!((vp.k_ptat_opt - 3.0).abs() < 1e-9);
    }

    #[test]
    fn valley_ordering_in_delta_vt() {
        let tech = TechProfile::generic();
        let k10 = valley_for_alpha(&tech, 10e-3, 3.5, (1.5, 60.0), &grid()).unwrap();
        let k30 = valley_for_alpha(&tech, 30e-3, 3.5, (1.5, 60.0), &grid()).unwrap();
        assert!(k30.k_ptat_opt > k10.k_ptat_opt);
    }

    #[test]
    fn iso_sensitivity_along_valley() {
        let tech = TechProfile::generic();
        let mut s_min = f64::INFINITY;
        let mut s_max = 0.0f64;
        for alpha in [2.0, 3.0, 4.0, 5.0, 6.0] {
            let vp = valley_for_alpha(&tech, 20e-3, alpha, (1.5, 100.0), &grid()).unwrap();
            s_min = s_min.min(vp.s_iref_per_v);
            s_max = s_max.max(vp.s_iref_per_v);
        }
        assert!(s_max / s_min <= 1.3, "S spread {}", s_max / s_min);
    }

    #[test]
    fn fit_exact_affine() {
        let pts: Vec<ValleyPoint> = [(2.0, 5.0), (3.0, 7.0), (4.0, 9.0), (5.0, 11.0)]
            .iter()
            .map(|&(alpha, k)| ValleyPoint {
                alpha,
                k_ptat_opt: k,
                tc_ppm_per_c: 80.0,
                s_iref_per_v: 30.0,
                boundary: false,
            })
            .collect();
        let fit = fit_valley(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.offset - 1.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn fit_rejects_degenerate() {
        let pts: Vec<ValleyPoint> = (0..4)
            .map(|k| ValleyPoint {
                alpha: 3.0,
                k_ptat_opt: 5.0 + k as f64,
                tc_ppm_per_c: 80.0,
                s_iref_per_v: 30.0,
                boundary: false,
            })
            .collect();
        assert!(fit_valley(&pts).is_err());
        assert!(fit_valley(&pts[..2]).is_err());
    }

    #[test]
    fn guess_alpha_inverts_fit() {
        let fit = ValleyFit {
            slope: 2.0,
            offset: 1.0,
            r_squared: 1.0,
        };
        assert!((guess_alpha(9.0, &fit).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(
            guess_alpha(0.5, &fit).unwrap_err(),
            Error::InfeasibleDesign(_)
        ));
    }

    #[test]
    fn guess_alpha_round_trips_through_real_valley() {
        let tech = TechProfile::generic();
        let alphas = [2.0, 3.0, 4.0, 5.0, 6.0];
        let points: Vec<ValleyPoint> = alphas
            .iter()
            .map(|&a| valley_for_alpha(&tech, 20e-3, a, (1.2, 100.0), &grid()).unwrap())
            .collect();
        let fit = fit_valley(&points).unwrap();
        for p in &points {
            let back = guess_alpha(p.k_ptat_opt, &fit).unwrap();
            assert!(
                (back - p.alpha).abs() < 0.1,
                "alpha {} -> K {} -> alpha {back}",
                p.alpha,
                p.k_ptat_opt
            );
        }
    }

    #[test]
    fn methodology_loop_self_consistent() {
        let tech = TechProfile::generic();
        let design = DesignPoint::generic();
        let opts = MethodologyOptions::with_grid(grid(), SizingOptions::default());
        let out = methodology_loop(&tech, &design, &opts).unwrap();
        assert!(out.fit.r_squared > 0.99);
        // K_PTAT = 6 inverts to the expected valley alpha of about 2.9.
        assert!(
            (out.alpha_guess - 2.9).abs() < 0.15,
            "alpha_guess = {}",
            out.alpha_guess
        );
        // alpha_sim close to the guess and at least as good.
        assert!((out.alpha_sim - out.alpha_guess).abs() / out.alpha_guess <= 0.25);
        assert!(out.tc_at_sim <= out.tc_at_guess + 1e-9);
        // Deterministic rerun.
        let again = methodology_loop(&tech, &design, &opts).unwrap();
        assert_eq!(out.alpha_sim.to_bits(), again.alpha_sim.to_bits());
        assert_eq!(out.sizing.s1.to_bits(), again.sizing.s1.to_bits());
    }
}
