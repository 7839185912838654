//! Joint and marginal position densities for a particle retro-reflecting from
//! one or more movable quantum scatterers.
//!
//! The crate is organised bottom-up: [`scenario`] validates inputs,
//! [`kinematics`] maps incident to reflected velocities, [`eigenstates`] has
//! the closed forms for sharp-velocity bodies, [`wavegroups`] integrates over
//! Gaussian velocity spreads, and [`analysis`] reduces densities to
//! marginals, visibilities and thresholds.

pub mod analysis;
pub mod constants;
pub mod eigenstates;
pub mod field;
pub mod kinematics;
pub mod quadrature;
pub mod scenario;
pub mod wavegroups;

pub use field::{Axis, AxisSpec, FieldError, PdfField};
pub use quadrature::{QuadratureError, QuadratureSpec};
pub use scenario::{Body, GaussianSpec, Role, Scenario, ScenarioError, Units, ValidScenario};
