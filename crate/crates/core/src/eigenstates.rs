//! Joint PDFs for bodies in momentum eigenstates.
//!
//! These are raw `cos²`-type values; they are not normalizable and are left
//! un-normalized. Use [`crate::analysis`] to normalize over a window.

use serde::Serialize;

use crate::scenario::{ScenarioError, ValidScenario};

/// Phase `A / B` of the three-body scattered-amplitude interference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThreeBodyPhase {
    pub numerator: f64,
    pub denominator: f64,
}

impl ThreeBodyPhase {
    pub fn value(&self) -> f64 {
        self.numerator / self.denominator
    }
}

/// Kinematic inputs of one three-body eigenstate configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeBodyEigen {
    pub m: f64,
    pub v: f64,
    pub m2: f64,
    pub v2: f64,
    pub m3: f64,
    pub v3: f64,
    pub hbar: f64,
}

impl ThreeBodyEigen {
    pub fn from_scenario(s: &ValidScenario) -> Result<Self, ScenarioError> {
        s.require_scatterers(2)?;
        let p = s.particle();
        let (b2, b3) = (s.scatterers()[0], s.scatterers()[1]);
        Ok(ThreeBodyEigen {
            m: p.mass,
            v: p.v0,
            m2: b2.mass,
            v2: b2.v0,
            m3: b3.mass,
            v3: b3.v0,
            hbar: s.hbar(),
        })
    }

    pub fn phase(&self, x1: f64, x2: f64, x3: f64) -> ThreeBodyPhase {
        let ThreeBodyEigen { m, v, m2, v2, m3, v3, hbar } = *self;
        let dv12 = v - v2;
        let dx12 = x1 - x2;
        let dv13 = v - v3;
        let dx13 = x1 - x3;
        let numerator = dv12 * dx12 * m * m * m2 - dv13 * dx13 * m * m * m3
            + m * m2 * m3 * (v3 * x1 - v * x2 - v2 * dx12 + dv13 * x3);
        ThreeBodyPhase { numerator, denominator: hbar * (m + m2) * (m + m3) }
    }

    pub fn pdf(&self, x1: f64, x2: f64, x3: f64) -> f64 {
        self.phase(x1, x2, x3).value().cos().powi(2)
    }
}

/// Exact three-body eigenstate joint PDF, `cos²[A/B]`, in [0, 1].
pub fn joint_pdf_exact(s: &ValidScenario, x1: f64, x2: f64, x3: f64) -> Result<f64, ScenarioError> {
    Ok(ThreeBodyEigen::from_scenario(s)?.pdf(x1, x2, x3))
}

fn particle_wavenumber(s: &ValidScenario) -> f64 {
    s.particle().mass * s.particle().v0 / s.hbar()
}

/// Heavy-scatterer limit `cos²[m v (x3 - x2) / ħ]`; independent of the
/// particle coordinate.
///
/// Below the heavy-limit mass ratio the value is still returned; the
/// scenario carries the advisory in [`ValidScenario::warnings`].
pub fn joint_pdf_heavy(s: &ValidScenario, x2: f64, x3: f64) -> f64 {
    (particle_wavenumber(s) * (x3 - x2)).cos().powi(2)
}

/// Heavy-limit PDF in displacements from the scatterer peaks,
/// `cos²[m v (x0 + δx3 - δx2) / ħ]` with `x0` the scenario separation.
pub fn joint_pdf_offset(s: &ValidScenario, dx2: f64, dx3: f64) -> f64 {
    (particle_wavenumber(s) * (s.separation() + dx3 - dx2)).cos().powi(2)
}

/// Scatterer pairs in the order (2,3), (2,4), (3,4).
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Pair phases `a_23, a_24, a_34`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourBodyTerms {
    pub phases: [f64; 3],
}

/// Particle plus three identical heavy scatterers.
///
/// Scatterer indices 0, 1, 2 here correspond to bodies 2, 3, 4. The pair
/// phase is the round-trip phase `a_jk = 2 m v (x_jk + δx_k - δx_j) / ħ`,
/// consistent with the two-scatterer form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourBody {
    pub m: f64,
    pub v: f64,
    pub hbar: f64,
    pub positions: [f64; 3],
}

impl FourBody {
    pub fn new(m: f64, v: f64, hbar: f64, positions: [f64; 3]) -> Self {
        FourBody { m, v, hbar, positions }
    }

    pub fn from_scenario(s: &ValidScenario) -> Result<Self, ScenarioError> {
        s.require_scatterers(3)?;
        let sc = s.scatterers();
        Ok(FourBody::new(
            s.particle().mass,
            s.particle().v0,
            s.hbar(),
            [sc[0].x0, sc[1].x0, sc[2].x0],
        ))
    }

    /// Period of every pair term in any single displacement.
    pub fn period(&self) -> f64 {
        std::f64::consts::PI * self.hbar / (self.m * self.v).abs()
    }

    pub fn terms(&self, displacements: [f64; 3]) -> FourBodyTerms {
        let k2 = 2.0 * self.m * self.v / self.hbar;
        let phases = PAIRS.map(|(j, k)| {
            let x_jk = self.positions[j] - self.positions[k];
            k2 * (x_jk + displacements[k] - displacements[j])
        });
        FourBodyTerms { phases }
    }

    pub fn pdf(&self, displacements: [f64; 3]) -> f64 {
        let a = self.terms(displacements).phases;
        3.0 + 2.0 * (a[0].cos() + a[1].cos() + a[2].cos())
    }
}

/// `3 + 2 (cos a_23 + cos a_24 + cos a_34)`.
pub fn joint_pdf_fourbody(
    positions: [f64; 3],
    displacements: [f64; 3],
    m: f64,
    v: f64,
    hbar: f64,
) -> f64 {
    FourBody::new(m, v, hbar, positions).pdf(displacements)
}

/// Four-body PDF averaged over the coordinates of the open scatterers.
///
/// Each cosine that involves an open scatterer averages to zero over whole
/// periods of that scatterer's displacement, so only pairs of closed
/// scatterers survive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedFourBody {
    pub body: FourBody,
    pub open: [bool; 3],
}

impl ReducedFourBody {
    pub fn surviving_pairs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(|&i| {
            let (j, k) = PAIRS[i];
            !self.open[j] && !self.open[k]
        })
    }

    /// Depends only on the displacements of closed scatterers.
    pub fn pdf(&self, displacements: [f64; 3]) -> f64 {
        let a = self.body.terms(displacements).phases;
        3.0 + 2.0 * self.surviving_pairs().map(|i| a[i].cos()).sum::<f64>()
    }

    pub fn is_flat(&self) -> bool {
        self.surviving_pairs().next().is_none()
    }
}

pub fn trace_fourbody(body: &FourBody, open: &[usize]) -> ReducedFourBody {
    let mut mask = [false; 3];
    for &i in open {
        mask[i] = true;
    }
    ReducedFourBody { body: *body, open: mask }
}
