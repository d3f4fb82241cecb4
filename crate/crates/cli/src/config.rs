//! Run configuration: one TOML file describing the technology, the design
//! point, grids, sweeps and output options.
//!
//! Leakage and lookup-table paths are resolved relative to the config
//! file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use scmref::{
    temperature_grid, DesignPoint, DeviceFlavor, SmallSignalSet, TechProfile, Temperature,
    VddBudget,
};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tech: TechSection,
    pub design: DesignSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub supply: Option<SupplySection>,
    #[serde(default)]
    pub sweeps: SweepSection,
    #[serde(default)]
    pub mc: Option<McSection>,
    #[serde(default)]
    pub sizing: SizingSection,
    #[serde(default)]
    pub leakage: Option<LeakageSection>,
    #[serde(default)]
    pub small_signal: Option<SmallSignalSet>,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechSection {
    pub n: f64,
    pub m: f64,
    pub isq_ref: f64,
    pub isq_weak_ref: Option<f64>,
    #[serde(default = "default_t_ref_c")]
    pub t_ref_c: f64,
    #[serde(default = "default_body_linear")]
    pub body_factor_linear: f64,
    #[serde(default = "default_body_sqrt")]
    pub body_factor_sqrt: f64,
    #[serde(default = "default_fermi")]
    pub fermi_2phi: f64,
    #[serde(default)]
    pub fermi_2phi_tempco: f64,
    #[serde(default = "default_vt0")]
    pub vt0: f64,
    #[serde(default = "default_vt0_tempco")]
    pub vt0_tempco: f64,
    #[serde(default)]
    pub flavors: Vec<DeviceFlavor>,
}

fn default_t_ref_c() -> f64 {
    25.0
}
fn default_body_linear() -> f64 {
    0.165
}
fn default_body_sqrt() -> f64 {
    0.4
}
fn default_fermi() -> f64 {
    0.8
}
fn default_vt0() -> f64 {
    0.45
}
fn default_vt0_tempco() -> f64 {
    -0.7e-3
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub alpha: f64,
    pub k_ptat: Option<f64>,
    #[serde(default = "one")]
    pub n_ratio: f64,
    #[serde(default = "one")]
    pub m_ratio: f64,
    pub j_ratio: f64,
    pub k_ratio: f64,
    pub delta_vt: f64,
    pub i_ref_target: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub t_min_c: f64,
    pub t_max_c: f64,
    pub t_step_c: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            t_min_c: -40.0,
            t_max_c: 85.0,
            t_step_c: 5.0,
        }
    }
}

/// Supply grid, recorded in reports so measured-data overlays share axes.
#[derive(Debug, Clone, Copy, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct SupplySection {
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_alpha_min")]
    pub alpha_min: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: f64,
    #[serde(default = "default_alpha_points")]
    pub alpha_points: usize,
    #[serde(default = "default_k_min")]
    pub k_ptat_min: f64,
    #[serde(default = "default_k_max")]
    pub k_ptat_max: f64,
    #[serde(default = "default_k_points")]
    pub k_ptat_points: usize,
    /// dV_T values for the valley command; defaults to the design's value.
    #[serde(default)]
    pub delta_vt_values: Vec<f64>,
}

fn default_alpha_min() -> f64 {
    2.0
}
fn default_alpha_max() -> f64 {
    6.0
}
fn default_alpha_points() -> usize {
    9
}
fn default_k_min() -> f64 {
    1.5
}
fn default_k_max() -> f64 {
    60.0
}
fn default_k_points() -> usize {
    25
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            alpha_min: default_alpha_min(),
            alpha_max: default_alpha_max(),
            alpha_points: default_alpha_points(),
            k_ptat_min: default_k_min(),
            k_ptat_max: default_k_max(),
            k_ptat_points: default_k_points(),
            delta_vt_values: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub trials: u64,
    pub seed: Option<u64>,
    pub sigma_vx: f64,
    #[serde(default)]
    pub mode: McMode,
    /// S_IREF override for first-order mode (1/V); model value when absent.
    pub s_iref_per_v: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    #[default]
    Nonlinear,
    FirstOrder,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizingSection {
    #[serde(default = "default_i_f6")]
    pub i_f6: f64,
    #[serde(default = "default_mirror_if")]
    pub mirror_if: f64,
    #[serde(default)]
    pub mode: SizingMode,
    pub lut_file: Option<PathBuf>,
    #[serde(default = "one")]
    pub lut_length_m: f64,
    pub vdd_budget: Option<VddBudget>,
}

fn default_i_f6() -> f64 {
    0.03
}
fn default_mirror_if() -> f64 {
    0.69
}

impl Default for SizingSection {
    fn default() -> Self {
        SizingSection {
            i_f6: default_i_f6(),
            mirror_if: default_mirror_if(),
            mode: SizingMode::default(),
            lut_file: None,
            lut_length_m: 1.0,
            vdd_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizingMode {
    #[default]
    Acm,
    Lut,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageSection {
    pub vx_csv: Option<PathBuf>,
    pub vb6_csv: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: default_out_dir(),
            format: OutputFormat::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config '{}': {e}", path.display())))?;
        cfg.base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.tech_profile()?
            .validate()
            .map_err(CliError::from_config_stage)?;
        self.design_point()?
            .validate()
            .map_err(CliError::from_config_stage)?;
        self.temperatures()?;
        for f in &self.tech.flavors {
            f.validate().map_err(CliError::from_config_stage)?;
        }
        if let Some(s) = &self.supply {
            if !(s.v_step > 0.0 && s.v_max > s.v_min) {
                return Err(CliError::Config("bad supply grid".into()));
            }
        }
        Ok(())
    }

    pub fn tech_profile(&self) -> Result<TechProfile, CliError> {
        let t_ref =
            Temperature::from_celsius(self.tech.t_ref_c).map_err(CliError::from_config_stage)?;
        Ok(TechProfile {
            n: self.tech.n,
            m: self.tech.m,
            isq_ref: self.tech.isq_ref,
            isq_weak_ref: self.tech.isq_weak_ref.unwrap_or(self.tech.isq_ref),
            t_ref: t_ref.kelvin(),
            body_factor_linear: self.tech.body_factor_linear,
            body_factor_sqrt: self.tech.body_factor_sqrt,
            fermi_2phi: self.tech.fermi_2phi,
            fermi_2phi_tempco: self.tech.fermi_2phi_tempco,
            vt0: self.tech.vt0,
            vt0_tempco: self.tech.vt0_tempco,
        })
    }

    pub fn design_point(&self) -> Result<DesignPoint, CliError> {
        let d = &self.design;
        Ok(DesignPoint {
            alpha: d.alpha,
            k_ptat: d.k_ptat.unwrap_or(d.j_ratio * d.k_ratio),
            n_ratio: d.n_ratio,
            m_ratio: d.m_ratio,
            j_ratio: d.j_ratio,
            k_ratio: d.k_ratio,
            delta_vt: d.delta_vt,
            i_ref_target: d.i_ref_target,
        })
    }

    pub fn temperatures(&self) -> Result<Vec<Temperature>, CliError> {
        temperature_grid(self.grid.t_min_c, self.grid.t_max_c, self.grid.t_step_c)
            .map_err(CliError::from_config_stage)
    }

    /// dV_T values for the valley sweep; the design's own value when the
    /// sweep list is empty.
    pub fn delta_vt_values(&self) -> Vec<f64> {
        if self.sweeps.delta_vt_values.is_empty() {
            vec![self.design.delta_vt]
        } else {
            self.sweeps.delta_vt_values.clone()
        }
    }

    pub fn alpha_grid(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.sweeps;
        if s.alpha_points < 2 || !(s.alpha_max > s.alpha_min) || !(s.alpha_min > 1.0) {
            return Err(CliError::Config(format!(
                "bad alpha sweep: [{}, {}] with {} points",
                s.alpha_min, s.alpha_max, s.alpha_points
            )));
        }
        let step = (s.alpha_max - s.alpha_min) / (s.alpha_points - 1) as f64;
        Ok((0..s.alpha_points)
            .map(|k| s.alpha_min + step * k as f64)
            .collect())
    }

    /// Log-spaced K_PTAT grid for maps (the valley lives on a log axis).
    pub fn k_ptat_grid(&self) -> Result<Vec<f64>, CliError> {
        let s = &self.sweeps;
        if s.k_ptat_points < 2 || !(s.k_ptat_max > s.k_ptat_min) || !(s.k_ptat_min >= 1.0) {
            return Err(CliError::Config(format!(
                "bad K_PTAT sweep: [{}, {}] with {} points",
                s.k_ptat_min, s.k_ptat_max, s.k_ptat_points
            )));
        }
        let (lo, hi) = (s.k_ptat_min.ln(), s.k_ptat_max.ln());
        let step = (hi - lo) / (s.k_ptat_points - 1) as f64;
        Ok((0..s.k_ptat_points)
            .map(|k| (lo + step * k as f64).exp())
            .collect())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
