//! One-dimensional elastic collision kinematics and thermal formulas.

use serde::Serialize;

use crate::constants::{BOLTZMANN, PLANCK};

/// Outgoing velocities and wavevectors of a retro-reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Reflection {
    pub particle_velocity: f64,
    pub scatterer_velocity: f64,
    pub particle_wavevector: f64,
    pub scatterer_wavevector: f64,
}

/// Elastic collision of a particle `(m, v)` with a scatterer `(big_m, big_v)`.
pub fn reflect(m: f64, v: f64, big_m: f64, big_v: f64, hbar: f64) -> Reflection {
    let total = m + big_m;
    let v_r = ((m - big_m) * v + 2.0 * big_m * big_v) / total;
    let big_v_r = ((big_m - m) * big_v + 2.0 * m * v) / total;
    Reflection {
        particle_velocity: v_r,
        scatterer_velocity: big_v_r,
        particle_wavevector: m * v_r / hbar,
        scatterer_wavevector: big_m * big_v_r / hbar,
    }
}

/// Linear maps from incident velocities to reflected wavevectors.
///
/// `k_r = particle.0 * v + particle.1 * V` and likewise for the scatterer.
/// The reflected phase `k_r x1 + K_r x2` is therefore
/// `v * (particle.0 x1 + scatterer.0 x2) + V * (particle.1 x1 + scatterer.1 x2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionMap {
    pub particle: (f64, f64),
    pub scatterer: (f64, f64),
}

impl ReflectionMap {
    pub fn new(m: f64, big_m: f64, hbar: f64) -> Self {
        let total = m + big_m;
        ReflectionMap {
            particle: (m * (m - big_m) / (total * hbar), 2.0 * m * big_m / (total * hbar)),
            scatterer: (2.0 * m * big_m / (total * hbar), big_m * (big_m - m) / (total * hbar)),
        }
    }

    /// Infinitely heavy scatterer: the particle wavevector flips sign.
    pub fn rigid(m: f64, hbar: f64) -> Self {
        ReflectionMap { particle: (-m / hbar, 0.0), scatterer: (0.0, 0.0) }
    }

    /// Coefficients of `(v, V)` in the reflected phase at `(x1, x2)`.
    pub fn phase_coefficients(&self, x1: f64, x2: f64) -> (f64, f64) {
        (
            self.particle.0 * x1 + self.scatterer.0 * x2,
            self.particle.1 * x1 + self.scatterer.1 * x2,
        )
    }
}

/// Phase offsets of the amplitude reflected from a scatterer initially `x0`
/// away from the first interaction point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionOffsets {
    pub particle: f64,
    pub scatterer: f64,
}

pub fn offsets(m: f64, big_m: f64, x0: f64) -> InteractionOffsets {
    InteractionOffsets {
        particle: 2.0 * big_m * x0 / (m + big_m),
        scatterer: (big_m - m) * x0 / (m + big_m),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("temperature must be positive (got {0})")]
    Temperature(f64),
    #[error("mass must be positive (got {0})")]
    Mass(f64),
    #[error("wavelength must be positive (got {0})")]
    Wavelength(f64),
}

fn check_positive(value: f64, err: fn(f64) -> KinematicsError) -> Result<(), KinematicsError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(err(value))
    }
}

/// Thermal velocity width `sqrt(2 k_B T / M)` (SI).
pub fn thermal_velocity_spread(mass: f64, temperature: f64) -> Result<f64, KinematicsError> {
    check_positive(mass, KinematicsError::Mass)?;
    check_positive(temperature, KinematicsError::Temperature)?;
    Ok((2.0 * BOLTZMANN * temperature / mass).sqrt())
}

/// Thermal coherence length `h / sqrt(2 M k_B T)` (SI).
pub fn thermal_coherence_length(mass: f64, temperature: f64) -> Result<f64, KinematicsError> {
    check_positive(mass, KinematicsError::Mass)?;
    check_positive(temperature, KinematicsError::Temperature)?;
    Ok(PLANCK / (2.0 * mass * BOLTZMANN * temperature).sqrt())
}

/// Largest scatterer mass for which the particle marginal fringes vanish,
/// `2 h² / (λ0² k_B T)` (SI).
pub fn mass_boundary(lambda0: f64, temperature: f64) -> Result<f64, KinematicsError> {
    check_positive(lambda0, KinematicsError::Wavelength)?;
    check_positive(temperature, KinematicsError::Temperature)?;
    Ok(2.0 * PLANCK * PLANCK / (lambda0 * lambda0 * BOLTZMANN * temperature))
}
