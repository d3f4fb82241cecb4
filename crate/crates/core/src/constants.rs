//! Physical constants, frozen in one place.
//!
//! Values are the 2019 SI exact definitions (CODATA). Thermal voltage and
//! everything derived from it depend only on these two numbers, so every
//! module pulls them from here rather than redefining its own.

/// Boltzmann constant (J/K), exact by SI definition.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Elementary charge (C), exact by SI definition.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// 0 degC in kelvin.
pub const CELSIUS_OFFSET: f64 = 273.15;

/// Default reference temperature: 25 degC, the usual reporting point.
pub const T_REF_KELVIN: f64 = 298.15;
