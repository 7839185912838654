//! Gaussian wavegroups: velocity superpositions of the reflected plane-wave
//! states, evaluated by Gauss–Hermite quadrature.
//!
//! Each scattered amplitude factorizes into one velocity average per body,
//! so the triple integral over `(v, V2, V3)` is a product of three 1D
//! averages. Free evolution enters through the conserved kinetic energy,
//! which is a sum of per-body terms in the incident velocities.
//!
//! Coordinates are measured from the first scatterer's `x0`; at `t = 0` the
//! particle peak sits on the first scatterer.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{Axis, FieldError, PdfField};
use crate::kinematics::{offsets, InteractionOffsets, ReflectionMap};
use crate::quadrature::{QuadratureError, QuadratureSpec, VelocityWeight};
use crate::scenario::{Body, Role, ScenarioError, ValidScenario};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WavegroupError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("{0}")]
    Configuration(String),
}

/// Velocity spread and free-evolution chirp of one body.
#[derive(Debug, Clone, Copy)]
struct Mode {
    weight: VelocityWeight,
    chirp: f64,
}

impl Mode {
    fn new(body: &Body, t: f64, hbar: f64) -> Self {
        Mode { weight: VelocityWeight::new(body.v0, body.dv), chirp: body.mass * t / (2.0 * hbar) }
    }

    fn at(&self, coef: f64, quad: &QuadratureSpec) -> Result<Complex64, QuadratureError> {
        self.weight.average(coef, self.chirp, quad)
    }
}

/// Particle plus two scatterers; the first may be a rigid beamsplitter.
///
/// Only the two singly-scattered amplitudes are kept, with equal weight:
/// reflection from the first scatterer (the second one a spectator) and
/// reflection from the second (the first one a spectator).
#[derive(Debug, Clone)]
pub struct ThreeBodyWavegroup {
    hbar: f64,
    quad: QuadratureSpec,
    origin: f64,
    separation: f64,
    m: f64,
    m2: f64,
    m3: f64,
    rigid: bool,
    particle: Mode,
    first: Mode,
    second: Mode,
    map_first: ReflectionMap,
    map_second: ReflectionMap,
    offsets: InteractionOffsets,
}

impl ThreeBodyWavegroup {
    pub fn new(s: &ValidScenario, quad: QuadratureSpec) -> Result<Self, WavegroupError> {
        s.require_scatterers(2)?;
        quad.check()?;
        let (hbar, t) = (s.hbar(), s.time());
        let p = s.particle();
        let (b2, b3) = (&s.scatterers()[0], &s.scatterers()[1]);
        let rigid = b2.is_rigid();
        let map_first =
            if rigid { ReflectionMap::rigid(p.mass, hbar) } else { ReflectionMap::new(p.mass, b2.mass, hbar) };
        Ok(ThreeBodyWavegroup {
            hbar,
            quad,
            origin: b2.x0,
            separation: s.separation(),
            m: p.mass,
            m2: b2.mass,
            m3: b3.mass,
            rigid,
            particle: Mode::new(p, t, hbar),
            first: Mode::new(b2, t, hbar),
            second: Mode::new(b3, t, hbar),
            map_first,
            map_second: ReflectionMap::new(p.mass, b3.mass, hbar),
            offsets: offsets(p.mass, b3.mass, s.separation()),
        })
    }

    pub fn is_beamsplitter(&self) -> bool {
        self.rigid
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    /// Same configuration with a different scatterer separation.
    pub fn with_separation(&self, separation: f64) -> Self {
        let mut out = self.clone();
        out.separation = separation;
        out.offsets = offsets(self.m, self.m3, separation);
        out
    }

    /// Particle and first-scatterer part of the amplitude reflected from the
    /// first scatterer.
    pub fn first_reflected(&self, x1: f64, x2: f64) -> Result<Complex64, QuadratureError> {
        let (cv, c2) = self.map_first.phase_coefficients(x1 - self.origin, x2 - self.origin);
        let particle = self.particle.at(cv, &self.quad)?;
        if self.rigid {
            return Ok(particle);
        }
        Ok(particle * self.first.at(c2, &self.quad)?)
    }

    /// Unscattered second scatterer, centred one separation away.
    pub fn second_spectator(&self, x3: f64) -> Result<Complex64, QuadratureError> {
        let c3 = self.m3 * (x3 - self.origin - self.separation) / self.hbar;
        self.second.at(c3, &self.quad)
    }

    /// Particle and second-scatterer part of the amplitude reflected from the
    /// second scatterer, with the interaction offsets applied.
    pub fn second_reflected(&self, x1: f64, x3: f64) -> Result<Complex64, QuadratureError> {
        let (cv, c3) = self.map_second.phase_coefficients(
            x1 - self.origin - self.offsets.particle,
            x3 - self.origin - self.offsets.scatterer,
        );
        Ok(self.particle.at(cv, &self.quad)? * self.second.at(c3, &self.quad)?)
    }

    /// Unscattered first scatterer; identically one for a beamsplitter.
    pub fn first_spectator(&self, x2: f64) -> Result<Complex64, QuadratureError> {
        if self.rigid {
            return Ok(Complex64::new(1.0, 0.0));
        }
        self.first.at(self.m2 * (x2 - self.origin) / self.hbar, &self.quad)
    }

    pub fn amplitudes(&self, x1: f64, x2: f64, x3: f64) -> Result<[Complex64; 2], QuadratureError> {
        Ok([
            self.first_reflected(x1, x2)? * self.second_spectator(x3)?,
            self.second_reflected(x1, x3)? * self.first_spectator(x2)?,
        ])
    }

    pub fn pdf(&self, x1: f64, x2: f64, x3: f64) -> Result<f64, QuadratureError> {
        let [a, b] = self.amplitudes(x1, x2, x3)?;
        Ok((a + b).norm_sqr())
    }

    /// `|a|² + |b|²`, the density without the interference term.
    pub fn incoherent(&self, x1: f64, x2: f64, x3: f64) -> Result<f64, QuadratureError> {
        let [a, b] = self.amplitudes(x1, x2, x3)?;
        Ok(a.norm_sqr() + b.norm_sqr())
    }

    /// At fixed `x1` both amplitudes are products of an `x2` part and an
    /// `x3` part; this tabulates the four parts on the given samples.
    pub fn factorized(&self, x1: f64, x2: &[f64], x3: &[f64]) -> Result<Factorized, QuadratureError> {
        let along2 = |f: &dyn Fn(f64) -> Result<Complex64, QuadratureError>| -> Result<Vec<Complex64>, _> {
            x2.iter().map(|&x| f(x)).collect()
        };
        let along3 = |f: &dyn Fn(f64) -> Result<Complex64, QuadratureError>| -> Result<Vec<Complex64>, _> {
            x3.iter().map(|&x| f(x)).collect()
        };
        Ok(Factorized {
            p1: along2(&|x| self.first_reflected(x1, x))?,
            q1: along3(&|x| self.second_spectator(x))?,
            p2: along2(&|x| self.first_spectator(x))?,
            q2: along3(&|x| self.second_reflected(x1, x))?,
        })
    }
}

/// `a = p1(x2) q1(x3)` and `b = p2(x2) q2(x3)` at a fixed particle position.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorized {
    pub p1: Vec<Complex64>,
    pub q1: Vec<Complex64>,
    pub p2: Vec<Complex64>,
    pub q2: Vec<Complex64>,
}

impl Factorized {
    pub fn pdf(&self, i2: usize, i3: usize) -> f64 {
        (self.p1[i2] * self.q1[i3] + self.p2[i2] * self.q2[i3]).norm_sqr()
    }

    /// Weighted sums over both scatterer coordinates of the full density and
    /// of its incoherent part. The double sum separates into 1D sums.
    pub fn marginal(&self, w2: &[f64], w3: &[f64]) -> (f64, f64) {
        let dot = |a: &[Complex64], b: &[Complex64], w: &[f64]| -> Complex64 {
            a.iter().zip(b).zip(w).map(|((x, y), w)| x * y.conj() * *w).sum()
        };
        let n11 = dot(&self.p1, &self.p1, w2).re * dot(&self.q1, &self.q1, w3).re;
        let n22 = dot(&self.p2, &self.p2, w2).re * dot(&self.q2, &self.q2, w3).re;
        let cross = dot(&self.p1, &self.p2, w2) * dot(&self.q1, &self.q2, w3);
        let incoherent = n11 + n22;
        (incoherent + 2.0 * cross.re, incoherent)
    }

    /// Same as [`Factorized::marginal`] when the first factor is a
    /// single point (beamsplitter: no `x2` dependence).
    pub fn marginal_x3(&self, w3: &[f64]) -> (f64, f64) {
        self.marginal(&vec![1.0; self.p1.len()], w3)
    }
}

/// Convenience wrapper: builds the wavegroup and evaluates one point.
pub fn wavegroup_pdf(
    s: &ValidScenario,
    quad: QuadratureSpec,
    x1: f64,
    x2: f64,
    x3: f64,
) -> Result<f64, WavegroupError> {
    Ok(ThreeBodyWavegroup::new(s, quad)?.pdf(x1, x2, x3)?)
}

/// Inputs of the beamsplitter closed forms (`t = 0`, scatterer at rest).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterParams {
    pub m: f64,
    pub big_m: f64,
    pub v0: f64,
    pub dv: f64,
    pub big_dv: f64,
    pub x0: f64,
    pub hbar: f64,
}

impl BeamsplitterParams {
    pub fn from_scenario(s: &ValidScenario) -> Result<Self, WavegroupError> {
        s.require_scatterers(2)?;
        let (bs, b3) = (&s.scatterers()[0], &s.scatterers()[1]);
        if bs.role != Role::Beamsplitter {
            return Err(WavegroupError::Configuration(
                "closed form needs a beamsplitter as the first scatterer".into(),
            ));
        }
        if s.time() != 0.0 || b3.v0 != 0.0 || bs.x0 != 0.0 {
            return Err(WavegroupError::Configuration(
                "closed form holds only at t = 0 with the scatterer at rest and the beamsplitter at the origin"
                    .into(),
            ));
        }
        let p = s.particle();
        Ok(BeamsplitterParams {
            m: p.mass,
            big_m: b3.mass,
            v0: p.v0,
            dv: p.dv,
            big_dv: b3.dv,
            x0: s.separation(),
            hbar: s.hbar(),
        })
    }
}

/// Heavy-scatterer closed form of the beamsplitter joint density at `x1 = 0`.
///
/// `exp[-A] + exp[-B] + 2 exp[-C] cos(2 m v0 x3 / ħ)` with `C = (A + B) / 2`.
pub fn closed_form_bs_pdf(x3: f64, p: &BeamsplitterParams) -> f64 {
    let BeamsplitterParams { m, big_m, v0, dv, big_dv, x0, hbar } = *p;
    let h2 = hbar * hbar;
    let a = 2.0 * big_dv.powi(2) * big_m.powi(2) * (x3 - x0).powi(2) / h2;
    let b = 2.0
        * ((2.0 * m * x3 * dv).powi(2) + big_dv.powi(2) * (big_m * x0 + 2.0 * m * x3 - big_m * x3).powi(2))
        / h2;
    let c = 2.0
        * (2.0 * (m * x3 * dv).powi(2)
            + big_dv.powi(2)
                * (big_m.powi(2) * (x0 - x3).powi(2)
                    + 2.0 * m * big_m * (x0 - x3) * x3
                    + 2.0 * m * m * x3 * x3))
        / h2;
    (-a).exp() + (-b).exp() + 2.0 * (-c).exp() * (2.0 * m * v0 * x3 / hbar).cos()
}

/// Velocity average of `exp(i c u)` over a Gaussian in closed form.
fn gaussian_average(peak: f64, spread: f64, coef: f64) -> Complex64 {
    Complex64::from_polar((-(spread * coef).powi(2)).exp(), coef * peak)
}

/// Exact-mass beamsplitter density at `t = 0` from analytic velocity
/// integrals; any mass ratio, any particle position.
pub fn beamsplitter_pdf_exact(x1: f64, x3: f64, p: &BeamsplitterParams) -> f64 {
    let BeamsplitterParams { m, big_m, v0, dv, big_dv, x0, hbar } = *p;
    let first = gaussian_average(v0, dv, -m * x1 / hbar)
        * gaussian_average(0.0, big_dv, big_m * (x3 - x0) / hbar);
    let o = offsets(m, big_m, x0);
    let (cv, c3) = ReflectionMap::new(m, big_m, hbar).phase_coefficients(x1 - o.particle, x3 - o.scatterer);
    let second = gaussian_average(v0, dv, cv) * gaussian_average(0.0, big_dv, c3);
    (first + second).norm_sqr()
}

/// Heavy-limit beamsplitter density in terms of the scatterer coherence
/// length: a Gaussian envelope of width `L_c / 4π` times `cos²(2π x3 / λ0)`.
pub fn eq6_pdf(x3: f64, lambda0: f64, coherence_length: f64, x0: f64) -> f64 {
    let envelope = (-8.0 * PI * PI * (x3 - x0).powi(2) / coherence_length.powi(2)).exp()
        / coherence_length.sqrt();
    envelope * (2.0 * PI * x3 / lambda0).cos().powi(2)
}

/// Particle reflecting from a single movable mirror.
///
/// The two-body state is the incident wavegroup minus the reflected one; the
/// relative sign makes the plane-wave sum vanish at the collision point.
/// The incident term is kept on both sides of the mirror.
#[derive(Debug, Clone)]
pub struct MirrorWavegroup {
    hbar: f64,
    quad: QuadratureSpec,
    origin: f64,
    m: f64,
    big_m: f64,
    particle: Mode,
    mirror: Mode,
    map: ReflectionMap,
}

impl MirrorWavegroup {
    pub fn new(s: &ValidScenario, quad: QuadratureSpec) -> Result<Self, WavegroupError> {
        s.require_scatterers(1)?;
        quad.check()?;
        let mirror = &s.scatterers()[0];
        if mirror.is_rigid() {
            return Err(WavegroupError::Configuration(
                "a beamsplitter cannot act as the single mirror".into(),
            ));
        }
        let p = s.particle();
        let (hbar, t) = (s.hbar(), s.time());
        Ok(MirrorWavegroup {
            hbar,
            quad,
            origin: mirror.x0,
            m: p.mass,
            big_m: mirror.mass,
            particle: Mode::new(p, t, hbar),
            mirror: Mode::new(mirror, t, hbar),
            map: ReflectionMap::new(p.mass, mirror.mass, hbar),
        })
    }

    pub fn incident(&self, x1: f64, x2: f64) -> Result<Complex64, QuadratureError> {
        let (x1, x2) = (x1 - self.origin, x2 - self.origin);
        Ok(self.particle.at(self.m * x1 / self.hbar, &self.quad)?
            * self.mirror.at(self.big_m * x2 / self.hbar, &self.quad)?)
    }

    pub fn reflected(&self, x1: f64, x2: f64) -> Result<Complex64, QuadratureError> {
        let (cv, cm) = self.map.phase_coefficients(x1 - self.origin, x2 - self.origin);
        Ok(self.particle.at(cv, &self.quad)? * self.mirror.at(cm, &self.quad)?)
    }

    pub fn amplitudes(&self, x1: f64, x2: f64) -> Result<[Complex64; 2], QuadratureError> {
        Ok([self.incident(x1, x2)?, self.reflected(x1, x2)?])
    }

    pub fn pdf(&self, x1: f64, x2: f64) -> Result<f64, QuadratureError> {
        let [a, b] = self.amplitudes(x1, x2)?;
        Ok((a - b).norm_sqr())
    }
}

/// Two-body mirror density on an `(x1, x2)` grid with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorField {
    pub pdf: PdfField,
    /// `|incident|² + |reflected|²` on the same grid.
    pub incoherent: PdfField,
    /// [`envelope_overlap`] of the incident and reflected amplitudes.
    pub overlap: f64,
    /// Weighted joint-fringe contrast `2 Σ|a||b| / Σ(|a|² + |b|²)`.
    pub joint_contrast: f64,
    pub warnings: Vec<String>,
}

pub fn two_body_mirror_pdf(
    s: &ValidScenario,
    quad: QuadratureSpec,
    x1: &Axis,
    x2: &Axis,
) -> Result<MirrorField, WavegroupError> {
    let model = MirrorWavegroup::new(s, quad)?;
    let n2 = x2.len();
    let amps = (0..x1.len() * n2)
        .into_par_iter()
        .map(|k| model.amplitudes(x1.samples[k / n2], x2.samples[k % n2]))
        .collect::<Result<Vec<_>, _>>()?;
    let (inc, refl): (Vec<Complex64>, Vec<Complex64>) = amps.iter().map(|[a, b]| (*a, *b)).unzip();
    let axes = vec![Axis::new("x1", x1.samples.clone()), Axis::new("x2", x2.samples.clone())];
    let hash = Some(s.hash());
    let pdf = PdfField::new(axes.clone(), amps.iter().map(|[a, b]| (a - b).norm_sqr()).collect())?
        .with_metadata(hash.clone(), s.time());
    let incoherent =
        PdfField::new(axes, amps.iter().map(|[a, b]| a.norm_sqr() + b.norm_sqr()).collect())?
            .with_metadata(hash, s.time());
    let mut warnings: Vec<String> = s.warnings().to_vec();
    if let Some(lambda) = s.wavelength() {
        warnings.extend(resolution_warnings(&[x1, x2], lambda));
    }
    let cross: f64 = inc.iter().zip(&refl).map(|(a, b)| a.norm() * b.norm()).sum();
    let total: f64 = inc.iter().zip(&refl).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
    Ok(MirrorField {
        pdf,
        incoherent,
        overlap: envelope_overlap(&inc, &refl),
        joint_contrast: if total > 0.0 { 2.0 * cross / total } else { 0.0 },
        warnings,
    })
}

/// Fringes of period `λ/2` need a spacing of at most `λ/8`.
pub fn resolution_warnings(axes: &[&Axis], lambda: f64) -> Vec<String> {
    let limit = lambda / 8.0;
    axes.iter()
        .filter(|a| a.spacing() > limit)
        .map(|a| {
            let needed = ((a.hi() - a.lo()) / limit).ceil() as usize + 1;
            format!(
                "axis {}: spacing {:.4e} does not resolve λ/2 fringes (λ = {lambda:.4e}); use at least {needed} samples",
                a.name,
                a.spacing()
            )
        })
        .collect()
}

/// `Σ|a||b| / sqrt(Σ|a|² Σ|b|²)`: one for identical envelopes, zero for
/// disjoint ones.
pub fn envelope_overlap(a: &[Complex64], b: &[Complex64]) -> f64 {
    let cross: f64 = a.iter().zip(b).map(|(x, y)| x.norm() * y.norm()).sum();
    let na: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let nb: f64 = b.iter().map(|x| x.norm_sqr()).sum();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        cross / (na * nb).sqrt()
    }
}
