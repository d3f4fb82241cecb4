pub mod mc;
pub mod size;
pub mod smallsignal;
pub mod solve;
pub mod valley;

use scmref::{isq_at, solve_if2, DesignPoint, TechProfile};

use crate::CliError;

/// S_2/N placing the modeled I_REF on the target at t_ref. Reports in
/// absolute amperes hang off this scale.
pub fn s2_over_n_for_target(design: &DesignPoint, tech: &TechProfile) -> Result<f64, CliError> {
    let t = tech.t_ref_temperature();
    let i_f2 = solve_if2(design, tech, t)?;
    Ok(design.i_ref_target / (isq_at(tech, t) * i_f2))
}
