//! Physical configurations, unit conventions and single-body derived quantities.
//!
//! Every computation in this crate starts from a [`ValidScenario`], obtained
//! through [`Scenario::validate`]. Validation collects *all* violated
//! invariants rather than stopping at the first one.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants;

/// Ratio FWHM / sigma of a Gaussian probability density.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Ratio L_c / sigma used throughout: the coherence length is `4π` times the
/// standard deviation of the position-space probability envelope.
pub const COHERENCE_PER_SIGMA: f64 = 4.0 * PI;

/// Mass ratio at and above which a scatterer counts as "heavy".
pub const HEAVY_RATIO: f64 = 1.0e3;

pub const MAX_SCATTERERS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// ħ = 1, lengths in an arbitrary reference unit.
    #[default]
    Natural,
    Si,
}

impl Units {
    pub fn hbar(self) -> f64 {
        match self {
            Units::Natural => 1.0,
            Units::Si => constants::HBAR,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Particle,
    #[default]
    Scatterer,
    Mirror,
    Beamsplitter,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Particle => "particle",
            Role::Scatterer => "scatterer",
            Role::Mirror => "mirror",
            Role::Beamsplitter => "beamsplitter",
        };
        f.write_str(s)
    }
}

/// One participant in the one-dimensional collision.
///
/// `dv` is the standard deviation of the velocity probability distribution;
/// `dv == 0` describes a momentum eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    pub mass: f64,
    #[serde(default)]
    pub v0: f64,
    #[serde(default)]
    pub dv: f64,
    #[serde(default)]
    pub x0: f64,
    #[serde(default, rename = "label")]
    pub role: Role,
}

impl Body {
    pub fn new(role: Role, mass: f64, v0: f64, dv: f64, x0: f64) -> Self {
        Body { mass, v0, dv, x0, role }
    }

    pub fn particle(mass: f64, v0: f64, dv: f64) -> Self {
        Body::new(Role::Particle, mass, v0, dv, 0.0)
    }

    pub fn scatterer(mass: f64, dv: f64, x0: f64) -> Self {
        Body::new(Role::Scatterer, mass, 0.0, dv, x0)
    }

    pub fn is_eigenstate(&self) -> bool {
        self.dv == 0.0
    }

    /// Beamsplitters are rigid classical potentials: never a quadrature axis.
    pub fn is_rigid(&self) -> bool {
        self.role == Role::Beamsplitter
    }

    fn check(&self, what: &str, out: &mut Vec<Violation>) {
        let fields = [("mass", self.mass), ("v0", self.v0), ("dv", self.dv), ("x0", self.x0)];
        for (name, value) in fields {
            if !value.is_finite() {
                out.push(Violation::NonFinite(format!("{what}.{name}")));
            }
        }
        if self.mass.is_finite() && self.mass <= 0.0 {
            out.push(Violation::NonPositiveMass(what.to_string()));
        }
        if self.dv.is_finite() && self.dv < 0.0 {
            out.push(Violation::NegativeSpread(what.to_string()));
        }
    }
}

/// Widths of a Gaussian wavegroup in position space.
///
/// `sigma_x` is the standard deviation of the position probability density.
/// For a momentum eigenstate all three fields are `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub sigma_x: f64,
    pub fwhm: f64,
    pub coherence_length: f64,
}

impl GaussianSpec {
    pub fn from_sigma(sigma_x: f64) -> Self {
        GaussianSpec {
            sigma_x,
            fwhm: FWHM_PER_SIGMA * sigma_x,
            coherence_length: COHERENCE_PER_SIGMA * sigma_x,
        }
    }

    pub fn from_fwhm(fwhm: f64) -> Self {
        Self::from_sigma(fwhm / FWHM_PER_SIGMA)
    }

    pub fn from_coherence_length(coherence_length: f64) -> Self {
        Self::from_sigma(coherence_length / COHERENCE_PER_SIGMA)
    }

    pub fn eigenstate() -> Self {
        Self::from_sigma(f64::INFINITY)
    }

    pub fn is_eigenstate(&self) -> bool {
        self.sigma_x.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("{0}: mass must be positive")]
    NonPositiveMass(String),
    #[error("{0}: velocity spread must be non-negative")]
    NegativeSpread(String),
    #[error("{0} must be finite")]
    NonFinite(String),
    #[error("at most 3 scatterers supported (got {0})")]
    TooManyScatterers(usize),
    #[error("at least one scatterer is required")]
    NoScatterers,
    #[error("{0}: label must not be 'particle'")]
    MisplacedParticle(String),
    #[error("only the first scatterer may be a beamsplitter")]
    BeamsplitterPosition,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("wavelength undefined for zero velocity")]
    UndefinedWavelength,
    #[error("velocity spread is zero (momentum eigenstate)")]
    Eigenstate,
    #[error("scenario has {got} scatterers, this operation needs {expected}")]
    Arity { expected: usize, got: usize },
    #[error("malformed scenario file: {0}")]
    Parse(String),
}

/// The full physical configuration.
///
/// `separation` is the distance from the first to the second scatterer and is
/// the `x0` of the two-scatterer and beamsplitter models. The four-body model
/// reads each scatterer's own `x0` instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "schema_version")]
    pub schema: u32,
    #[serde(default)]
    pub units: Units,
    pub particle: Body,
    pub scatterers: Vec<Body>,
    #[serde(default)]
    pub separation: f64,
    #[serde(default)]
    pub time: f64,
}

fn schema_version() -> u32 {
    1
}

impl Scenario {
    pub fn new(particle: Body, scatterers: Vec<Body>, separation: f64) -> Self {
        Scenario {
            schema: 1,
            units: Units::Natural,
            particle: Body { role: Role::Particle, ..particle },
            scatterers,
            separation,
            time: 0.0,
        }
    }

    pub fn with_units(mut self, units: Units) -> Self {
        self.units = units;
        self
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    /// Parses a scenario document; unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        if scenario.schema != 1 {
            return Err(ScenarioError::Parse(format!(
                "unsupported schema version {}",
                scenario.schema
            )));
        }
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(mut self) -> Result<ValidScenario, ScenarioError> {
        let mut violations = Vec::new();
        self.particle.role = Role::Particle;
        self.particle.check("particle", &mut violations);
        if self.scatterers.is_empty() {
            violations.push(Violation::NoScatterers);
        }
        if self.scatterers.len() > MAX_SCATTERERS {
            violations.push(Violation::TooManyScatterers(self.scatterers.len()));
        }
        for (i, body) in self.scatterers.iter().enumerate() {
            let what = format!("scatterers[{i}]");
            body.check(&what, &mut violations);
            if body.role == Role::Particle {
                violations.push(Violation::MisplacedParticle(what));
            }
            if i > 0 && body.role == Role::Beamsplitter {
                violations.push(Violation::BeamsplitterPosition);
            }
        }
        for (name, value) in [("separation", self.separation), ("time", self.time)] {
            if !value.is_finite() {
                violations.push(Violation::NonFinite(name.to_string()));
            }
        }
        if !violations.is_empty() {
            return Err(ScenarioError::Invalid(violations));
        }

        let hbar = self.units.hbar();
        let particle_spec = coherence_from_velocity_spread(&self.particle, self.units);
        let scatterer_specs = self
            .scatterers
            .iter()
            .map(|b| {
                if b.is_rigid() {
                    GaussianSpec::from_sigma(0.0)
                } else {
                    coherence_from_velocity_spread(b, self.units)
                }
            })
            .collect();
        let wavelength = wavelength(&self.particle, self.units).ok();
        let mut warnings = Vec::new();
        for (i, b) in self.scatterers.iter().enumerate() {
            if !b.is_rigid() && b.mass / self.particle.mass < HEAVY_RATIO {
                warnings.push(format!(
                    "scatterers[{i}]: M/m = {:.4} below heavy-limit advisory {HEAVY_RATIO}",
                    b.mass / self.particle.mass
                ));
            }
        }
        Ok(ValidScenario {
            scenario: self,
            hbar,
            wavelength,
            particle_spec,
            scatterer_specs,
            warnings,
        })
    }
}

/// A scenario that passed validation, with derived quantities cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidScenario {
    scenario: Scenario,
    hbar: f64,
    wavelength: Option<f64>,
    particle_spec: GaussianSpec,
    scatterer_specs: Vec<GaussianSpec>,
    warnings: Vec<String>,
}

impl ValidScenario {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn particle(&self) -> &Body {
        &self.scenario.particle
    }

    pub fn scatterers(&self) -> &[Body] {
        &self.scenario.scatterers
    }

    pub fn separation(&self) -> f64 {
        self.scenario.separation
    }

    pub fn time(&self) -> f64 {
        self.scenario.time
    }

    /// Particle de Broglie wavelength; `None` for a particle at rest.
    pub fn wavelength(&self) -> Option<f64> {
        self.wavelength
    }

    pub fn particle_spec(&self) -> GaussianSpec {
        self.particle_spec
    }

    pub fn scatterer_specs(&self) -> &[GaussianSpec] {
        &self.scatterer_specs
    }

    /// Heavy-limit advisories recorded during validation.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn require_scatterers(&self, expected: usize) -> Result<(), ScenarioError> {
        let got = self.scenario.scatterers.len();
        if got != expected {
            return Err(ScenarioError::Arity { expected, got });
        }
        Ok(())
    }

    /// Smallest scatterer-to-particle mass ratio over the movable scatterers.
    pub fn min_mass_ratio(&self) -> f64 {
        let m = self.scenario.particle.mass;
        self.scenario
            .scatterers
            .iter()
            .filter(|b| !b.is_rigid())
            .map(|b| b.mass / m)
            .fold(f64::INFINITY, f64::min)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.scenario).expect("scenario serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_time(&self, time: f64) -> ValidScenario {
        let mut out = self.clone();
        out.scenario.time = time;
        out
    }
}

/// de Broglie wavelength `2πħ / (m v0)`.
pub fn wavelength(body: &Body, units: Units) -> Result<f64, ScenarioError> {
    if body.v0 == 0.0 {
        return Err(ScenarioError::UndefinedWavelength);
    }
    Ok((2.0 * PI * units.hbar() / (body.mass * body.v0)).abs())
}

/// Minimum-uncertainty packet widths at t = 0 from the velocity spread.
///
/// Returns [`GaussianSpec::eigenstate`] when `dv == 0`.
pub fn coherence_from_velocity_spread(body: &Body, units: Units) -> GaussianSpec {
    if body.dv == 0.0 {
        return GaussianSpec::eigenstate();
    }
    GaussianSpec::from_sigma(units.hbar() / (2.0 * body.mass * body.dv))
}

/// Inverse of [`coherence_from_velocity_spread`].
pub fn velocity_spread_from_coherence(mass: f64, spec: &GaussianSpec, units: Units) -> f64 {
    if spec.is_eigenstate() {
        return 0.0;
    }
    units.hbar() / (2.0 * mass * spec.sigma_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn simple(scatterers: Vec<Body>) -> Scenario {
        Scenario::new(Body::particle(1.0, 1.0, 0.0), scatterers, 0.0)
    }

    #[test]
    fn valid_natural_scenario() {
        let s = simple(vec![Body::scatterer(100.0, 0.0, 0.0)]).validate().unwrap();
        assert_eq!(s.hbar(), 1.0);
        assert_eq!(s.warnings().len(), 1);
    }

    #[test]
    fn negative_mass_rejected() {
        let mut s = simple(vec![Body::scatterer(100.0, 0.0, 0.0)]);
        s.particle.mass = -1.0;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("mass must be positive"), "{err}");
    }

    #[test]
    fn four_scatterers_rejected() {
        let err = simple(vec![Body::scatterer(100.0, 0.0, 0.0); 4]).validate().unwrap_err();
        assert!(err.to_string().contains("at most 3 scatterers supported"));
    }

    #[test]
    fn all_violations_reported() {
        let mut s = simple(vec![Body::scatterer(0.0, -1.0, f64::NAN)]);
        s.time = f64::INFINITY;
        match s.validate().unwrap_err() {
            ScenarioError::Invalid(v) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn wavelength_examples() {
        let b = Body::particle(1.0, 2.0 * PI, 0.0);
        assert_relative_eq!(wavelength(&b, Units::Natural).unwrap(), 1.0, max_relative = 1e-15);
        let b = Body::particle(2.0, PI, 0.0);
        assert_relative_eq!(wavelength(&b, Units::Natural).unwrap(), 1.0, max_relative = 1e-15);
        let neutron = Body::particle(1.675e-27, 1.0e4, 0.0);
        let lambda = wavelength(&neutron, Units::Si).unwrap();
        assert!((lambda - 3.96e-11).abs() < 0.01e-11, "{lambda}");
        let rest = Body::particle(1.0, 0.0, 0.0);
        assert_eq!(wavelength(&rest, Units::Natural), Err(ScenarioError::UndefinedWavelength));
    }

    #[test]
    fn coherence_examples() {
        let spec = coherence_from_velocity_spread(&Body::particle(1.0, 0.0, 0.5), Units::Natural);
        assert_relative_eq!(spec.sigma_x, 1.0);
        assert_relative_eq!(spec.fwhm, 2.0 * (2.0 * 2f64.ln()).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(spec.coherence_length, 4.0 * PI);
        let spec = coherence_from_velocity_spread(&Body::scatterer(100.0, 0.005, 0.0), Units::Natural);
        assert_relative_eq!(spec.sigma_x, 1.0, max_relative = 1e-14);
        let eig = coherence_from_velocity_spread(&Body::scatterer(100.0, 0.0, 0.0), Units::Natural);
        assert!(eig.coherence_length.is_infinite());
    }

    #[test]
    fn beamsplitter_has_zero_width() {
        let bs = Body::new(Role::Beamsplitter, 1e30, 0.0, 1.0, 0.0);
        let s = simple(vec![bs, Body::scatterer(1e3, 0.01, 5.0)]).validate().unwrap();
        assert_eq!(s.scatterer_specs()[0].sigma_x, 0.0);
        let bad = simple(vec![Body::scatterer(1e3, 0.01, 5.0), bs]).validate();
        assert!(bad.is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let text = r#"{
            "schema": 1, "units": "natural",
            "particle": {"mass": 1, "v0": 6.283185307179586, "dv": 0.01},
            "scatterers": [{"mass": 1200, "dv": 0.1, "label": "beamsplitter"},
                           {"mass": 1200, "dv": 0.1, "x0": 2}],
            "separation": 2, "time": 0
        }"#;
        let s = Scenario::from_json(text).unwrap();
        assert_eq!(s.scatterers[0].role, Role::Beamsplitter);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        let bad = text.replace("\"time\": 0", "\"time\": 0, \"colour\": 3");
        assert!(matches!(Scenario::from_json(&bad), Err(ScenarioError::Parse(_))));
        let v2 = text.replace("\"schema\": 1", "\"schema\": 2");
        assert!(Scenario::from_json(&v2).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = simple(vec![Body::scatterer(100.0, 0.0, 0.0)]).validate().unwrap();
        let b = simple(vec![Body::scatterer(101.0, 0.0, 0.0)]).validate().unwrap();
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    proptest::proptest! {
        #[test]
        fn coherence_round_trip(mass in 1e-3f64..1e6, dv in 1e-6f64..1e3) {
            let body = Body::scatterer(mass, dv, 0.0);
            let spec = coherence_from_velocity_spread(&body, Units::Natural);
            let back = velocity_spread_from_coherence(mass, &spec, Units::Natural);
            proptest::prop_assert!(((back - dv) / dv).abs() < 1e-12);
            let spec2 = GaussianSpec::from_coherence_length(spec.coherence_length);
            proptest::prop_assert!(((spec2.fwhm - spec.fwhm) / spec.fwhm).abs() < 1e-12);
        }

        #[test]
        fn wavelength_homogeneous(mass in 1e-3f64..1e3, v in 1e-3f64..1e3, a in 1e-3f64..1e3) {
            let l1 = wavelength(&Body::particle(mass, v, 0.0), Units::Natural).unwrap();
            let l2 = wavelength(&Body::particle(a * mass, v / a, 0.0), Units::Natural).unwrap();
            proptest::prop_assert!(((l1 - l2) / l1).abs() < 1e-12);
        }
    }
}
