//! Partial traces, fringe visibility, visibility scans and thresholds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::{trapezoid_weights, Axis, FieldError, PdfField};
use crate::quadrature::{QuadratureError, QuadratureSpec};
use crate::scenario::{Body, Role, Scenario, ValidScenario, COHERENCE_PER_SIGMA, FWHM_PER_SIGMA};
use crate::wavegroups::{eq6_pdf, MirrorField, ThreeBodyWavegroup, WavegroupError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Wavegroup(#[from] WavegroupError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("window on axis '{axis}' reaches only {covered:.2} sigma past the envelope (need 6)")]
    WindowTooSmall { axis: String, covered: f64 },
    #[error("window on axis '{axis}' spans {periods:.6} periods; need a whole number")]
    FractionalPeriods { axis: String, periods: f64 },
    #[error("samples span {periods:.3} fringe periods; need at least 2")]
    SpanTooSmall { periods: f64 },
    #[error("{per_period:.2} samples per fringe period; need at least 16")]
    Undersampled { per_period: f64 },
    #[error("no crossing of {cut} in range")]
    NoCrossing { cut: f64 },
    #[error("traces do not overlap after the 1/√2 transform")]
    NoOverlap,
    #[error("{0}")]
    Invalid(String),
}

/// What a traced axis must cover for the integral to be trustworthy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    /// A Gaussian envelope of width `sigma` centred anywhere in `[lo, hi]`;
    /// the axis must extend six sigma beyond both ends.
    Envelope { lo: f64, hi: f64, sigma: f64 },
    /// A periodic integrand; the axis must span a whole number of periods.
    Periods { period: f64 },
    Any,
}

impl Window {
    pub fn envelope(center: f64, sigma: f64) -> Self {
        Window::Envelope { lo: center, hi: center, sigma }
    }

    fn check(&self, axis: &Axis) -> Result<(), AnalysisError> {
        match *self {
            Window::Envelope { lo, hi, sigma } => {
                let covered = ((lo - axis.lo()) / sigma).min((axis.hi() - hi) / sigma);
                if covered < 6.0 - 1e-9 {
                    return Err(AnalysisError::WindowTooSmall { axis: axis.name.clone(), covered });
                }
            }
            Window::Periods { period } => {
                let periods = (axis.hi() - axis.lo()) / period;
                if periods < 1.0 - 1e-9 || (periods - periods.round()).abs() > 1e-6 {
                    return Err(AnalysisError::FractionalPeriods { axis: axis.name.clone(), periods });
                }
            }
            Window::Any => {}
        }
        Ok(())
    }
}

/// Integrates `field` over the named axes with the trapezoid rule.
pub fn marginalize(field: &PdfField, traced: &[(&str, Window)]) -> Result<PdfField, AnalysisError> {
    let mut out = field.clone();
    for (name, window) in traced {
        let d = out.axis_index(name)?;
        window.check(&out.axes[d])?;
        out = integrate_axis(&out, d)?;
    }
    Ok(out)
}

fn integrate_axis(field: &PdfField, d: usize) -> Result<PdfField, AnalysisError> {
    let shape = field.shape();
    let inner: usize = shape[d + 1..].iter().product();
    let outer: usize = shape[..d].iter().product();
    let n = shape[d];
    let w = trapezoid_weights(&field.axes[d].samples);
    let mut values = vec![0.0; outer * inner];
    for o in 0..outer {
        for (k, wk) in w.iter().enumerate() {
            let base = (o * n + k) * inner;
            for i in 0..inner {
                values[o * inner + i] += wk * field.values[base + i];
            }
        }
    }
    let mut axes = field.axes.clone();
    axes.remove(d);
    Ok(PdfField::new(axes, values)?.with_metadata(field.scenario_hash.clone(), field.time))
}

/// Particle marginal of the beamsplitter model in the heavy limit,
/// `1 + exp(-L_c² / 2λ0²) cos(4π x0 / λ0)`.
pub fn marginal_closed(x0: f64, coherence_length: f64, lambda0: f64) -> f64 {
    1.0 + (-coherence_length.powi(2) / (2.0 * lambda0.powi(2))).exp() * (4.0 * PI * x0 / lambda0).cos()
}

/// The same marginal by numerically tracing the heavy-limit joint density
/// over `x3`, divided by the trace of its incoherent half.
pub fn eq6_marginal_numeric(
    x0: &[f64],
    coherence_length: f64,
    lambda0: f64,
) -> Result<Vec<f64>, AnalysisError> {
    let sigma = coherence_length / COHERENCE_PER_SIGMA;
    let (lo, hi) = x0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let h = (sigma / 12.0).min(lambda0 / 96.0);
    let (start, end) = (lo - 9.0 * sigma, hi + 9.0 * sigma);
    let n = ((end - start) / h).ceil() as usize + 1;
    let axes = vec![Axis::new("x0", x0.to_vec()), Axis::linspace("x3", start, end, n)];
    let window = [("x3", Window::Envelope { lo, hi, sigma })];
    let full = PdfField::from_fn::<FieldError, _>(axes.clone(), |p| Ok(eq6_pdf(p[1], lambda0, coherence_length, p[0])))?;
    let half_envelope = PdfField::from_fn::<FieldError, _>(axes, |p| {
        let envelope = (-(p[1] - p[0]).powi(2) / (2.0 * sigma * sigma)).exp() / coherence_length.sqrt();
        Ok(0.5 * envelope)
    })?;
    let full = marginalize(&full, &window)?;
    let half = marginalize(&half_envelope, &window)?;
    Ok(full.values.iter().zip(&half.values).map(|(f, e)| f / e).collect())
}

/// Fringe contrast `(max - min) / (max + min)` of `values` sampled at `x`.
///
/// With `envelope` given, the samples are first divided by it, so a slowly
/// varying background does not bias the extrema. Extrema are refined by a
/// parabola through the neighbouring samples.
pub fn visibility(
    x: &[f64],
    values: &[f64],
    envelope: Option<&[f64]>,
    period: f64,
) -> Result<f64, AnalysisError> {
    if x.len() != values.len() || envelope.is_some_and(|e| e.len() != x.len()) || x.len() < 3 {
        return Err(AnalysisError::Invalid("visibility needs matching sample arrays".into()));
    }
    let span = x[x.len() - 1] - x[0];
    let periods = span / period;
    if periods < 2.0 - 1e-9 {
        return Err(AnalysisError::SpanTooSmall { periods });
    }
    let per_period = (x.len() - 1) as f64 / periods;
    if per_period < 16.0 - 1e-9 {
        return Err(AnalysisError::Undersampled { per_period });
    }
    let g: Vec<f64> = match envelope {
        Some(e) => {
            if e.iter().any(|&v| !(v > 0.0)) {
                return Err(AnalysisError::Invalid("envelope must be positive".into()));
            }
            values.iter().zip(e).map(|(v, e)| v / e).collect()
        }
        None => values.to_vec(),
    };
    let (imax, imin) = g.iter().enumerate().fold((0, 0), |(a, b), (i, &v)| {
        (if v > g[a] { i } else { a }, if v < g[b] { i } else { b })
    });
    if g[imax] - g[imin] <= 1e-15 * g[imax].abs() {
        return Ok(0.0);
    }
    let nonnegative = g.iter().all(|&v| v >= 0.0);
    let max = refine(&g, imax);
    let mut min = refine(&g, imin);
    if nonnegative {
        min = min.max(0.0);
    }
    if max + min <= 0.0 {
        return Ok(0.0);
    }
    Ok(((max - min) / (max + min)).clamp(0.0, 1.0))
}

fn refine(g: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 == g.len() {
        return g[i];
    }
    let (a, b, c) = (g[i - 1], g[i], g[i + 1]);
    let curvature = a - 2.0 * b + c;
    if curvature == 0.0 {
        return b;
    }
    b - (c - a).powi(2) / (8.0 * curvature)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceModel {
    /// Beamsplitter plus one movable scatterer, particle marginal.
    OneScatterer,
    /// Two identical movable scatterers, particle marginal.
    TwoScatterer,
    /// Two movable scatterers, joint density at the envelope maximum.
    Correlated,
    /// Heavy-limit closed-form marginal.
    ClosedForm,
}

/// Fixed parameters of a visibility scan, in natural units with `m = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    /// Particle over scatterer mass.
    pub mass_ratio: f64,
    pub particle_coherence_over_x0: f64,
    pub x0_over_lambda: f64,
    pub lambda: f64,
    /// Number of fringe periods (λ/2) in the `x0` scan.
    pub periods: usize,
    pub samples_per_period: usize,
    /// Half-width of the scatterer grids in envelope sigmas.
    pub sigma_span: f64,
    pub quadrature: QuadratureSpec,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            mass_ratio: 1.0 / 1200.0,
            particle_coherence_over_x0: 30.0,
            x0_over_lambda: 2.0,
            lambda: 1.0,
            periods: 3,
            samples_per_period: 32,
            sigma_span: 10.0,
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl ScanParams {
    pub fn check(&self) -> Result<(), AnalysisError> {
        let ok = self.mass_ratio > 0.0
            && self.particle_coherence_over_x0 > 0.0
            && self.x0_over_lambda > 0.0
            && self.lambda > 0.0
            && self.periods >= 2
            && self.samples_per_period >= 16
            && self.sigma_span >= 6.0;
        if !ok {
            return Err(AnalysisError::Invalid(format!("invalid scan parameters {self:?}")));
        }
        Ok(self.quadrature.check()?)
    }

    fn velocity(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// `x0` samples over whole fringe periods starting at the nominal value.
    pub fn x0_samples(&self) -> Vec<f64> {
        let x0 = self.x0_over_lambda * self.lambda;
        let step = self.lambda / 2.0 / self.samples_per_period as f64;
        (0..=self.periods * self.samples_per_period).map(|j| x0 + step * j as f64).collect()
    }

    /// Scenario for one scan point; the scatterer FWHM is `fwhm_over_lambda · λ`.
    pub fn scenario(&self, model: TraceModel, fwhm_over_lambda: f64, x0: f64) -> Result<ValidScenario, AnalysisError> {
        let m = 1.0;
        let big_m = m / self.mass_ratio;
        let particle_sigma = self.particle_coherence_over_x0 * self.x0_over_lambda * self.lambda / COHERENCE_PER_SIGMA;
        let sigma = fwhm_over_lambda * self.lambda / FWHM_PER_SIGMA;
        let dv_particle = 1.0 / (2.0 * m * particle_sigma);
        let dv_scatterer = 1.0 / (2.0 * big_m * sigma);
        let first = match model {
            TraceModel::OneScatterer | TraceModel::ClosedForm => Body::new(Role::Beamsplitter, big_m, 0.0, 0.0, 0.0),
            TraceModel::TwoScatterer | TraceModel::Correlated => Body::scatterer(big_m, dv_scatterer, 0.0),
        };
        Ok(Scenario::new(
            Body::particle(m, self.velocity(), dv_particle),
            vec![first, Body::scatterer(big_m, dv_scatterer, x0)],
            x0,
        )
        .validate()
        .map_err(WavegroupError::from)?)
    }

    /// Grid for tracing a scatterer of envelope width `sigma`, fine enough
    /// for both the envelope and the λ/2 fringes.
    pub fn scatterer_axis(&self, name: &str, center: f64, sigma: f64) -> Axis {
        let half = self.sigma_span * sigma;
        let h = (sigma / 10.0).min(self.lambda / 64.0);
        let n = (2.0 * half / h).ceil() as usize + 1;
        Axis::linspace(name, center - half, center + half, n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub fwhm_over_lambda: f64,
    /// NaN when the point failed; see `error`.
    pub visibility: f64,
    pub error: Option<String>,
}

impl TracePoint {
    pub fn coherence_over_lambda(&self) -> f64 {
        fwhm_to_coherence(self.fwhm_over_lambda)
    }
}

pub fn fwhm_to_coherence(fwhm: f64) -> f64 {
    fwhm * COHERENCE_PER_SIGMA / FWHM_PER_SIGMA
}

pub fn coherence_to_fwhm(coherence: f64) -> f64 {
    coherence * FWHM_PER_SIGMA / COHERENCE_PER_SIGMA
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisibilityTrace {
    pub model: TraceModel,
    pub points: Vec<TracePoint>,
    pub params: ScanParams,
}

impl VisibilityTrace {
    pub fn abscissa(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.fwhm_over_lambda).collect()
    }

    pub fn visibilities(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.visibility).collect()
    }

    fn valid(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.visibility.is_finite())
            .map(|p| (p.fwhm_over_lambda, p.visibility))
            .collect()
    }

    /// Non-increasing up to `slack`, ignoring failed points.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.valid().windows(2).all(|w| w[1].1 <= w[0].1 + slack)
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.valid().windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Particle-marginal (or joint) visibility for one scatterer FWHM.
pub fn scan_point(model: TraceModel, fwhm_over_lambda: f64, params: &ScanParams) -> Result<f64, AnalysisError> {
    params.check()?;
    if !(fwhm_over_lambda > 0.0) {
        return Err(AnalysisError::Invalid("FWHM ratio must be positive".into()));
    }
    let x0s = params.x0_samples();
    let period = params.lambda / 2.0;
    let sigma = fwhm_over_lambda * params.lambda / FWHM_PER_SIGMA;
    if model == TraceModel::ClosedForm {
        let lc = fwhm_to_coherence(fwhm_over_lambda) * params.lambda;
        let g: Vec<f64> = x0s.iter().map(|&x| marginal_closed(x, lc, params.lambda)).collect();
        return visibility(&x0s, &g, None, period);
    }
    let base = ThreeBodyWavegroup::new(&params.scenario(model, fwhm_over_lambda, x0s[0])?, params.quadrature)?;
    let x2 = match model {
        TraceModel::TwoScatterer => params.scatterer_axis("x2", 0.0, sigma),
        _ => Axis::new("x2", vec![0.0]),
    };
    let w2 = if x2.len() == 1 { vec![1.0] } else { x2.trapezoid_weights() };
    let pairs = x0s
        .par_iter()
        .map(|&x0| -> Result<(f64, f64), AnalysisError> {
            let model_x0 = base.with_separation(x0);
            if model == TraceModel::Correlated {
                return Ok((model_x0.pdf(0.0, 0.0, x0)?, model_x0.incoherent(0.0, 0.0, x0)?));
            }
            let x3 = params.scatterer_axis("x3", x0, sigma);
            let f = model_x0.factorized(0.0, &x2.samples, &x3.samples)?;
            Ok(f.marginal(&w2, &x3.trapezoid_weights()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (full, incoherent): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    visibility(&x0s, &full, Some(&incoherent), period)
}

/// Visibility against scatterer FWHM / λ0. Failed points are kept with
/// their error message so the rest of the trace survives.
pub fn visibility_scan(
    model: TraceModel,
    fwhm_ratios: &[f64],
    params: &ScanParams,
) -> Result<VisibilityTrace, AnalysisError> {
    params.check()?;
    if fwhm_ratios.is_empty() || fwhm_ratios.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AnalysisError::Invalid("FWHM ratios must be strictly increasing".into()));
    }
    let points = fwhm_ratios
        .par_iter()
        .map(|&f| match scan_point(model, f, params) {
            Ok(v) => TracePoint { fwhm_over_lambda: f, visibility: v, error: None },
            Err(e) => TracePoint { fwhm_over_lambda: f, visibility: f64::NAN, error: Some(e.to_string()) },
        })
        .collect();
    Ok(VisibilityTrace { model, points, params: *params })
}

/// Visibility of the joint density of all three bodies, evaluated at the
/// maximum of the scatterer envelopes while `x0` is scanned.
pub fn correlated_visibility(fwhm_over_lambda: f64, params: &ScanParams) -> Result<f64, AnalysisError> {
    scan_point(TraceModel::Correlated, fwhm_over_lambda, params)
}

/// Particle marginal of the two-body mirror model along `x1`, traced over
/// the mirror coordinate, together with the incoherent background.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorMarginal {
    pub x1: Vec<f64>,
    pub marginal: Vec<f64>,
    pub incoherent: Vec<f64>,
    pub visibility: f64,
}

/// Traces the mirror out of `field` and extracts the `λ/2` fringe contrast
/// along `x1`. The `x2` axis must cover six sigma of the mirror envelope at
/// the scenario time.
pub fn mirror_marginal(s: &ValidScenario, field: &MirrorField) -> Result<MirrorMarginal, AnalysisError> {
    s.require_scatterers(1).map_err(WavegroupError::from)?;
    let lambda = s
        .wavelength()
        .ok_or_else(|| AnalysisError::Invalid("particle has no wavelength (v0 = 0)".into()))?;
    let mirror = &s.scatterers()[0];
    let sigma0 = s.scatterer_specs()[0].sigma_x;
    let t = s.time();
    let sigma = (sigma0 * sigma0 + (mirror.dv * t).powi(2)).sqrt();
    if !sigma.is_finite() {
        return Err(AnalysisError::Invalid("an eigenstate mirror has no finite envelope to trace".into()));
    }
    let window = Window::envelope(mirror.x0 + mirror.v0 * t, sigma);
    let full = marginalize(&field.pdf, &[("x2", window)])?;
    let incoherent = marginalize(&field.incoherent, &[("x2", window)])?;
    let visibility = visibility(&full.axes[0].samples, &full.values, Some(&incoherent.values), lambda / 2.0)?;
    Ok(MirrorMarginal {
        x1: full.axes[0].samples.clone(),
        marginal: full.values,
        incoherent: incoherent.values,
        visibility,
    })
}

/// Monotone piecewise-cubic interpolant without overshoot.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self, AnalysisError> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AnalysisError::Invalid("interpolation needs increasing abscissae".into()));
        }
        let d: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut m = vec![0.0; n];
        m[0] = d[0];
        m[n - 1] = d[n - 2];
        for k in 1..n - 1 {
            m[k] = if d[k - 1] * d[k] <= 0.0 { 0.0 } else { 0.5 * (d[k - 1] + d[k]) };
        }
        for k in 0..n - 1 {
            if d[k] == 0.0 {
                m[k] = 0.0;
                m[k + 1] = 0.0;
                continue;
            }
            let (a, b) = (m[k] / d[k], m[k + 1] / d[k]);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                m[k] = tau * a * d[k];
                m[k + 1] = tau * b * d[k];
            }
        }
        Ok(MonotoneCubic { x: x.to_vec(), y: y.to_vec(), slopes: m })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.x[0] && t <= self.x[self.x.len() - 1]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i => (i - 1).min(self.x.len() - 2),
        };
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.y[k]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[k]
            + (-2.0 * s3 + 3.0 * s2) * self.y[k + 1]
            + (s3 - s2) * h * self.slopes[k + 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sqrt2Report {
    pub max_deviation: f64,
    pub compared: usize,
}

/// Maximum over upper-trace abscissae `f` of `|upper(f) - lower(f / √2)|`.
pub fn sqrt2_mapping_check(upper: &VisibilityTrace, lower: &VisibilityTrace) -> Result<Sqrt2Report, AnalysisError> {
    let low = lower.valid();
    if low.len() < 2 {
        return Err(AnalysisError::NoOverlap);
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = low.into_iter().unzip();
    let interp = MonotoneCubic::new(&lx, &ly)?;
    let mut report = Sqrt2Report { max_deviation: 0.0, compared: 0 };
    for (f, v) in upper.valid() {
        let g = f / std::f64::consts::SQRT_2;
        if interp.contains(g) {
            report.max_deviation = report.max_deviation.max((v - interp.eval(g)).abs());
            report.compared += 1;
        }
    }
    if report.compared == 0 {
        return Err(AnalysisError::NoOverlap);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub cut: f64,
    pub fwhm_over_lambda: f64,
    pub coherence_over_lambda: f64,
}

/// First downward crossing of `cut`, linearly interpolated.
pub fn threshold_find(trace: &VisibilityTrace, cut: f64) -> Result<Threshold, AnalysisError> {
    let pts = trace.valid();
    for w in pts.windows(2) {
        let ((f0, v0), (f1, v1)) = (w[0], w[1]);
        if v0 >= cut && v1 < cut {
            let f = f0 + (v0 - cut) / (v0 - v1) * (f1 - f0);
            return Ok(Threshold { cut, fwhm_over_lambda: f, coherence_over_lambda: fwhm_to_coherence(f) });
        }
    }
    Err(AnalysisError::NoCrossing { cut })
}
