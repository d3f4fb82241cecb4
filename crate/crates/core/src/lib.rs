//! Analytical design kit for self-cascode-MOSFET (SCM) constant-with-
//! temperature current references.
//!
//! The reference biases an SCM with a PTAT voltage carrying a CWT offset
//! dV_T; picking the (K_PTAT, alpha) pair on the TC valley makes the
//! inversion level of M2 cancel the T^(2-m) drift of the specific sheet
//! current. This crate models that equilibrium from the governing equations
//! and layers design tooling on top:
//!
//! - [`acm`]: compact-model primitives (thermal voltage, I_SQ(T), the
//!   inversion-level/voltage curve and its inverse);
//! - [`reference`]: the SCM + beta-multiplier equilibrium, operating points,
//!   temperature sweeps, leakage perturbations;
//! - [`bias`]: dV_T generation (FDSOI back gate, bulk body effect) and the
//!   step-1 sweep minimizing its TC;
//! - [`metrics`]: box-method TC/LS, the V_X sensitivity S_IREF and its
//!   finite-difference validator, first-order and Monte-Carlo variability;
//! - [`explorer`]: (K_PTAT, alpha) TC maps, valley extraction, the affine
//!   valley fit and the step 2-4 methodology loop;
//! - [`sizing`]: ACM- and lookup-table-based transistor sizing, V_DD,min;
//! - [`smallsignal`]: line-sensitivity and dominant-pole formulas.

// Validation guards are written as `!(x > 0.0)` on purpose: the negated
// comparison also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acm;
pub mod bias;
pub mod constants;
pub mod error;
pub mod explorer;
pub mod metrics;
pub mod reference;
pub mod sizing;
pub mod smallsignal;
pub mod solver;

pub use acm::{
    acm_voltage_of_if, if_of_acm_voltage, isq_at, isq_weak_at, temperature_grid, thermal_voltage,
    InversionLevel, TechProfile, Temperature,
};
pub use bias::{
    delta_vt_bulk, delta_vt_fdsoi, minimize_delta_vt_tc, vsb6_reference, vsg_weak_inversion,
    BiasGenSizing, BodyBiasLaw, DeltaVtTable, DeltaVtTuning, DeviceFlavor,
};
pub use error::{Error, Result};
pub use explorer::{
    fit_valley, grid_tc_map, guess_alpha, methodology_loop, model_s_iref, model_tc,
    valley_for_alpha, MethodologyOptions, MethodologyOutcome, TcCell, TcMap, ValleyFit,
    ValleyPoint,
};
pub use metrics::{
    box_ls, box_tc, first_order_variability, monte_carlo_variability, s_iref_closed_form,
    s_iref_finite_difference, BoxSeries, MonteCarloResult, VariabilityEstimate,
};
pub use reference::{
    beta_from_vx, operating_point, reference_current, solve_if2, temperature_sweep,
    temperature_sweep_with_dvt, vx_beta_multiplier, vx_scm, DesignPoint, LeakagePerturbation,
    OperatingPoint, TemperatureSweep,
};
pub use sizing::{size_acm, size_lut, vdd_min, DeviceLut, SizingOptions, SizingResult, VddBudget};
pub use smallsignal::{
    dominant_pole, ls_iref, ls_vx_basic, ls_vx_cascoded, ls_vx_cascoded_full, r_scm,
    weak_inversion_gm, SmallSignalSet,
};
