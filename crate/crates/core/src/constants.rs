//! Physical constants (SI, 2019 exact definitions and CODATA 2018).

use std::f64::consts::PI;

/// Planck constant h, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Reduced Planck constant ħ = h / 2π, J s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);

/// Boltzmann constant k_B, J / K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Neutron mass m_n, kg.
pub const NEUTRON_MASS: f64 = 1.674_927_498_04e-27;
