//! Subcommand implementations. Each one writes its files through a [`Run`]
//! and returns the manifest plus a short human-readable summary.

use std::path::PathBuf;

use qci_core::analysis::{
    marginal_closed, marginalize, sqrt2_mapping_check, threshold_find, visibility, visibility_scan, ScanParams,
    TraceModel, VisibilityTrace, Window,
};
use qci_core::constants::NEUTRON_MASS;
use qci_core::eigenstates::{FourBody, ThreeBodyEigen};
use qci_core::kinematics::{mass_boundary, thermal_coherence_length};
use qci_core::scenario::{wavelength, Units};
use qci_core::wavegroups::{resolution_warnings, two_body_mirror_pdf, MirrorWavegroup, ThreeBodyWavegroup};
use qci_core::{Axis, AxisSpec, Body, PdfField, QuadratureSpec, Scenario, ValidScenario};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::output::{field_table, number, pgm_bytes, Run, RunManifest, Table};
use crate::presets::{self, Preset};

/// Largest grid a single `pdf-grid` run will evaluate.
pub const MAX_GRID_POINTS: usize = 50_000_000;

/// Where the scenario comes from: a JSON file or a shipped preset.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub scenario: Option<PathBuf>,
    pub preset: Option<String>,
}

impl Source {
    pub fn preset(name: &str) -> Self {
        Source { scenario: None, preset: Some(name.to_string()) }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Source { scenario: Some(path.into()), preset: None }
    }

    pub fn is_given(&self) -> bool {
        self.scenario.is_some() || self.preset.is_some()
    }

    pub fn load(&self) -> Result<(Scenario, Option<&'static Preset>), CliError> {
        match (&self.scenario, &self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
                Ok((Scenario::from_json(&text)?, None))
            }
            (None, Some(name)) => {
                let p = presets::find(name)?;
                Ok((p.scenario(), Some(p)))
            }
            (Some(_), Some(_)) => Err(CliError::Validation("give either --scenario or --preset, not both".into())),
            (None, None) => Err(CliError::Validation("a scenario is required: --scenario FILE or --preset NAME".into())),
        }
    }
}

/// Which joint density a scenario describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Particle and one movable mirror, coordinates `x1, x2`.
    TwoBodyMirror,
    /// Rigid beamsplitter plus one scatterer, coordinates `x1, x3`.
    BeamsplitterWavegroup,
    /// Two movable scatterers with Gaussian velocity spreads.
    ThreeBodyWavegroup,
    /// Two scatterers and the particle all in momentum eigenstates.
    ThreeBodyEigenstate,
    /// Three heavy scatterers, coordinates `x2, x3, x4`.
    FourBodyEigenstate,
}

impl Model {
    pub fn select(s: &ValidScenario) -> Result<Model, CliError> {
        let sc = s.scatterers();
        Ok(match sc.len() {
            1 => Model::TwoBodyMirror,
            2 if sc[0].is_rigid() => Model::BeamsplitterWavegroup,
            2 if s.particle().is_eigenstate() && sc.iter().all(Body::is_eigenstate) => Model::ThreeBodyEigenstate,
            2 => Model::ThreeBodyWavegroup,
            3 => Model::FourBodyEigenstate,
            n => return Err(CliError::Validation(format!("no model for {n} scatterers"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::TwoBodyMirror => "two-body-mirror",
            Model::BeamsplitterWavegroup => "beamsplitter-wavegroup",
            Model::ThreeBodyWavegroup => "three-body-wavegroup",
            Model::ThreeBodyEigenstate => "three-body-eigenstate",
            Model::FourBodyEigenstate => "four-body-eigenstate",
        }
    }

    pub fn coordinates(self) -> &'static [&'static str] {
        match self {
            Model::TwoBodyMirror => &["x1", "x2"],
            Model::BeamsplitterWavegroup => &["x1", "x3"],
            Model::ThreeBodyWavegroup | Model::ThreeBodyEigenstate => &["x1", "x2", "x3"],
            Model::FourBodyEigenstate => &["x1", "x2", "x3", "x4"],
        }
    }
}

/// A ready-to-evaluate joint density over `x1..x4`.
enum Density {
    Mirror(MirrorWavegroup),
    Wavegroup(ThreeBodyWavegroup),
    Eigen(ThreeBodyEigen),
    Four(FourBody),
}

impl Density {
    fn new(s: &ValidScenario, model: Model, quad: QuadratureSpec) -> Result<Self, CliError> {
        Ok(match model {
            Model::TwoBodyMirror => Density::Mirror(MirrorWavegroup::new(s, quad)?),
            Model::BeamsplitterWavegroup | Model::ThreeBodyWavegroup => {
                Density::Wavegroup(ThreeBodyWavegroup::new(s, quad)?)
            }
            Model::ThreeBodyEigenstate => Density::Eigen(ThreeBodyEigen::from_scenario(s)?),
            Model::FourBodyEigenstate => Density::Four(FourBody::from_scenario(s)?),
        })
    }

    fn pdf(&self, x: &[f64; 4]) -> Result<f64, CliError> {
        Ok(match self {
            Density::Mirror(m) => m.pdf(x[0], x[1])?,
            Density::Wavegroup(w) => w.pdf(x[0], x[1], x[2])?,
            Density::Eigen(e) => e.pdf(x[0], x[1], x[2]),
            Density::Four(f) => {
                let p = f.positions;
                f.pdf([x[1] - p[0], x[2] - p[1], x[3] - p[2]])
            }
        })
    }
}

/// Default value of each coordinate: the peak of the body it belongs to.
fn default_coordinates(s: &ValidScenario, model: Model) -> [f64; 4] {
    let sc = s.scatterers();
    let x1 = s.particle().x0;
    match model {
        Model::TwoBodyMirror => [x1, sc[0].x0, 0.0, 0.0],
        Model::FourBodyEigenstate => [x1, sc[0].x0, sc[1].x0, sc[2].x0],
        _ => [x1, sc[0].x0, sc[0].x0 + s.separation(), 0.0],
    }
}

fn coordinate_index(model: Model, name: &str) -> Result<usize, CliError> {
    if !model.coordinates().contains(&name) {
        return Err(CliError::Validation(format!(
            "coordinate '{name}' does not belong to the {} model (allowed: {})",
            model.name(),
            model.coordinates().join(", ")
        )));
    }
    Ok(name[1..].parse::<usize>().unwrap() - 1)
}

/// Parses repeated `--at name=value` flags.
fn parse_fixed(at: &[String], model: Model, base: &mut [f64; 4]) -> Result<(), CliError> {
    for item in at {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("cannot parse '{item}': expected name=value")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("cannot parse '{item}': value is not a number")))?;
        if !v.is_finite() {
            return Err(CliError::Validation(format!("'{item}': value must be finite")));
        }
        base[coordinate_index(model, name.trim())?] = v;
    }
    Ok(())
}

fn validated(scenario: Scenario, time: Option<f64>) -> Result<ValidScenario, CliError> {
    let scenario = match time {
        Some(t) => scenario.with_time(t),
        None => scenario,
    };
    Ok(scenario.validate()?)
}

#[derive(Debug, Clone)]
pub struct PdfGridOptions {
    pub source: Source,
    /// `name:lo:hi:n`; empty means the preset's default grid.
    pub axes: Vec<String>,
    /// Values of coordinates that are not swept, `name=value`.
    pub at: Vec<String>,
    pub out: PathBuf,
    pub pgm: Option<PathBuf>,
    pub time: Option<f64>,
    pub quadrature: QuadratureSpec,
}

/// Joint density on a rectangular grid.
/// A joint density on a grid together with what was learned computing it.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub model: Model,
    pub field: PdfField,
    /// Values of all model coordinates not swept by the grid.
    pub fixed: Vec<f64>,
    /// Incident/reflected lobe diagnostics, for the mirror `(x1, x2)` plane.
    pub lobe_overlap: Option<f64>,
    pub joint_contrast: Option<f64>,
    pub warnings: Vec<String>,
}

/// Evaluates the scenario's joint density on `axes`, holding the other
/// coordinates at `at` (`name=value`) or at their body's peak.
pub fn grid_field(
    s: &ValidScenario,
    axes: Vec<Axis>,
    at: &[String],
    quadrature: QuadratureSpec,
) -> Result<GridResult, CliError> {
    let model = Model::select(s)?;
    if axes.is_empty() {
        return Err(CliError::Validation("empty grid: give at least one axis name:lo:hi:n".into()));
    }
    let mut slots = Vec::with_capacity(axes.len());
    for a in &axes {
        let slot = coordinate_index(model, &a.name)?;
        if slots.contains(&slot) {
            return Err(CliError::Validation(format!("axis '{}' given twice", a.name)));
        }
        slots.push(slot);
    }
    let points: usize = axes.iter().map(Axis::len).product();
    if points > MAX_GRID_POINTS {
        return Err(CliError::Validation(format!("grid has {points} points; the limit is {MAX_GRID_POINTS}")));
    }
    let mut base = default_coordinates(s, model);
    parse_fixed(at, model, &mut base)?;
    let fixed = base[..model.coordinates().len()].to_vec();

    if model == Model::TwoBodyMirror && slots == [0, 1] {
        // the plane of the mirror model also yields lobe diagnostics
        let mf = two_body_mirror_pdf(s, quadrature, &axes[0], &axes[1])?;
        return Ok(GridResult {
            model,
            field: mf.pdf,
            fixed,
            lobe_overlap: Some(mf.overlap),
            joint_contrast: Some(mf.joint_contrast),
            warnings: mf.warnings,
        });
    }
    let mut warnings = s.warnings().to_vec();
    let density = Density::new(s, model, quadrature)?;
    if matches!(model, Model::TwoBodyMirror | Model::BeamsplitterWavegroup | Model::ThreeBodyWavegroup) {
        if let Some(lambda) = s.wavelength() {
            warnings.extend(resolution_warnings(&axes.iter().collect::<Vec<_>>(), lambda));
        }
    }
    let field = PdfField::from_fn(axes, |p| {
        let mut x = base;
        for (&slot, &v) in slots.iter().zip(p) {
            x[slot] = v;
        }
        density.pdf(&x)
    })?
    .with_metadata(Some(s.hash()), s.time());
    Ok(GridResult { model, field, fixed, lobe_overlap: None, joint_contrast: None, warnings })
}

/// Joint density on a rectangular grid.
pub fn pdf_grid(opts: &PdfGridOptions) -> Result<(RunManifest, String), CliError> {
    let mut run = Run::start("pdf-grid");
    let (scenario, preset) = opts.source.load()?;
    let s = validated(scenario, opts.time)?;
    let specs: Vec<AxisSpec> = if opts.axes.is_empty() {
        preset
            .map(Preset::grid)
            .ok_or_else(|| CliError::Validation("empty grid: give at least one --axis name:lo:hi:n".into()))?
    } else {
        opts.axes.iter().map(|a| AxisSpec::parse(a)).collect::<Result<_, _>>()?
    };
    let axes: Vec<Axis> = specs.iter().map(AxisSpec::build).collect::<Result<_, _>>()?;
    let g = grid_field(&s, axes, &opts.at, opts.quadrature)?;

    let mut details = json!({ "model": g.model.name(), "fixed": g.fixed });
    if let (Some(o), Some(c)) = (g.lobe_overlap, g.joint_contrast) {
        details["lobe_overlap"] = json!(o);
        details["joint_contrast"] = json!(c);
    }
    run.write(&opts.out, "pdf-grid", &field_table(&g.field).to_bytes())?;
    if let Some(pgm) = &opts.pgm {
        let (bytes, scaling) = pgm_bytes(&g.field)?;
        run.write(pgm, "heatmap", &bytes)?;
        details["pgm_scaling"] = json!(scaling);
    }
    let summary = format!(
        "{} points of the {} density written to {}",
        g.field.len(),
        g.model.name(),
        opts.out.display()
    );
    let m = run.manifest_mut();
    m.scenario_hash = Some(s.hash());
    m.quadrature = Some(opts.quadrature);
    m.details = details;
    m.warnings = g.warnings;
    Ok((run.finish(&opts.out)?, summary))
}

#[derive(Debug, Clone)]
pub struct MarginalOptions {
    pub source: Source,
    /// `name:lo:hi:n` of the kept coordinate (`x0` scans the separation).
    pub scan: Option<String>,
    /// Traced axes; built automatically for wavegroup scatterers.
    pub trace: Vec<String>,
    pub at: Vec<String>,
    pub out: PathBuf,
    pub time: Option<f64>,
    pub quadrature: QuadratureSpec,
    /// Half-width of automatic trace windows in envelope sigmas.
    pub sigma_span: f64,
}

/// Grid for tracing a Gaussian envelope of width `sigma` that also resolves
/// λ/2 fringes.
fn envelope_axis(name: &str, center: f64, sigma: f64, span: f64, lambda: f64) -> Axis {
    let half = span * sigma;
    let h = (sigma / 10.0).min(lambda / 64.0);
    let n = ((2.0 * half / h).ceil() as usize + 1).max(3);
    Axis::linspace(name, center - half, center + half, n)
}

/// Particle (or photon) marginal: the joint density traced over the
/// scatterer coordinates as a function of one kept coordinate.
pub fn marginal(opts: &MarginalOptions) -> Result<(RunManifest, String), CliError> {
    let mut run = Run::start("marginal");
    let (scenario, preset) = opts.source.load()?;
    let s = validated(scenario, opts.time)?;
    let model = Model::select(&s)?;
    let scan = match (&opts.scan, preset) {
        (Some(text), _) => AxisSpec::parse(text)?,
        (None, Some(p)) => p.scan(),
        (None, None) => return Err(CliError::Validation("give the kept coordinate with --scan name:lo:hi:n".into())),
    };
    let scan_axis = scan.build()?;
    if !(opts.sigma_span >= 6.0) {
        return Err(CliError::Validation("--sigma-span must be at least 6".into()));
    }
    let lambda = s.wavelength();
    let mut details = json!({ "model": model.name(), "scan": scan.name });
    let mut warnings = s.warnings().to_vec();

    let table = match model {
        Model::TwoBodyMirror => {
            expect_scan(&scan, "x1", model)?;
            let lambda = lambda.ok_or_else(|| CliError::Validation("particle needs v0 != 0".into()))?;
            let mirror = s.scatterers()[0];
            let sigma0 = s.scatterer_specs()[0].sigma_x;
            let sigma = (sigma0 * sigma0 + (mirror.dv * s.time()).powi(2)).sqrt();
            if !sigma.is_finite() {
                return Err(CliError::Validation("an eigenstate mirror cannot be traced over a finite window".into()));
            }
            let center = mirror.x0 + mirror.v0 * s.time();
            let x2 = match opts.trace.as_slice() {
                [] => envelope_axis("x2", center, sigma, opts.sigma_span, lambda),
                [one] => {
                    let a = AxisSpec::parse(one)?.build()?;
                    if a.name != "x2" {
                        return Err(CliError::Validation("the mirror model traces x2 only".into()));
                    }
                    a
                }
                _ => return Err(CliError::Validation("the mirror model traces x2 only".into())),
            };
            let mf = two_body_mirror_pdf(&s, opts.quadrature, &scan_axis, &x2)?;
            warnings = mf.warnings.clone();
            let window = [("x2", Window::envelope(center, sigma))];
            let full = marginalize(&mf.pdf, &window)?;
            let incoherent = marginalize(&mf.incoherent, &window)?;
            details["lobe_overlap"] = json!(mf.overlap);
            details["visibility"] =
                json!(visibility(&scan_axis.samples, &full.values, Some(&incoherent.values), lambda / 2.0).ok());
            ratio_table("x1", &scan_axis.samples, &full.values, &incoherent.values, None)
        }
        Model::BeamsplitterWavegroup | Model::ThreeBodyWavegroup => {
            expect_scan(&scan, "x0", model)?;
            if !opts.trace.is_empty() {
                return Err(CliError::Validation("wavegroup trace windows are built from the scatterer envelopes".into()));
            }
            let lambda = lambda.ok_or_else(|| CliError::Validation("particle needs v0 != 0".into()))?;
            let mut base = default_coordinates(&s, model);
            parse_fixed(&opts.at, model, &mut base)?;
            let wave = ThreeBodyWavegroup::new(&s, opts.quadrature)?;
            let origin = s.scatterers()[0].x0;
            let specs = s.scatterer_specs();
            let x2 = if model == Model::BeamsplitterWavegroup {
                Axis::new("x2", vec![origin])
            } else {
                envelope_axis("x2", origin, specs[0].sigma_x, opts.sigma_span, lambda)
            };
            let w2 = if x2.len() == 1 { vec![1.0] } else { x2.trapezoid_weights() };
            let sigma3 = specs[1].sigma_x;
            if !sigma3.is_finite() || (model == Model::ThreeBodyWavegroup && !specs[0].sigma_x.is_finite()) {
                return Err(CliError::Validation("tracing needs scatterers with finite envelopes (dv > 0)".into()));
            }
            use rayon::prelude::*;
            let pairs = scan_axis
                .samples
                .par_iter()
                .map(|&x0| -> Result<(f64, f64), CliError> {
                    let x3 = envelope_axis("x3", origin + x0, sigma3, opts.sigma_span, lambda);
                    let f = wave.with_separation(x0).factorized(base[0], &x2.samples, &x3.samples)?;
                    Ok(f.marginal(&w2, &x3.trapezoid_weights()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let (full, incoherent): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let closed: Option<Vec<f64>> = (model == Model::BeamsplitterWavegroup).then(|| {
                scan_axis.samples.iter().map(|&x0| marginal_closed(x0, specs[1].coherence_length, lambda)).collect()
            });
            if let Some(c) = &closed {
                let deviation = full
                    .iter()
                    .zip(&incoherent)
                    .zip(c)
                    .map(|((f, i), c)| ((f / i) - c).abs() / c.abs())
                    .fold(0.0, f64::max);
                details["closed_form_max_rel_deviation"] = json!(deviation);
            }
            details["visibility"] = json!(visibility(&scan_axis.samples, &full, Some(&incoherent), lambda / 2.0).ok());
            ratio_table("x0", &scan_axis.samples, &full, &incoherent, closed.as_deref())
        }
        Model::ThreeBodyEigenstate | Model::FourBodyEigenstate => {
            let period = match model {
                Model::FourBodyEigenstate => FourBody::from_scenario(&s)?.period(),
                _ => lambda.ok_or_else(|| CliError::Validation("particle needs v0 != 0".into()))? / 2.0,
            };
            if opts.trace.is_empty() {
                return Err(CliError::Validation("eigenstate fields need explicit --trace axes spanning whole fringe periods".into()));
            }
            let mut axes = vec![scan_axis.clone()];
            for t in &opts.trace {
                axes.push(AxisSpec::parse(t)?.build()?);
            }
            let slots: Vec<usize> = axes.iter().map(|a| coordinate_index(model, &a.name)).collect::<Result<_, _>>()?;
            let mut base = default_coordinates(&s, model);
            parse_fixed(&opts.at, model, &mut base)?;
            let density = Density::new(&s, model, opts.quadrature)?;
            let traced_names: Vec<String> = axes[1..].iter().map(|a| a.name.clone()).collect();
            let volume: f64 = axes[1..].iter().map(|a| a.hi() - a.lo()).product();
            let field = PdfField::from_fn(axes, |p| {
                let mut x = base;
                for (&slot, &v) in slots.iter().zip(p) {
                    x[slot] = v;
                }
                density.pdf(&x)
            })?;
            let traced: Vec<(&str, Window)> =
                traced_names.iter().map(|n| (n.as_str(), Window::Periods { period })).collect();
            let reduced = marginalize(&field, &traced)?;
            let mut table = Table::new([scan.name.as_str(), "marginal_pdf", "mean"]);
            for (x, v) in scan_axis.samples.iter().zip(&reduced.values) {
                table.push(vec![number(*x), number(*v), number(v / volume)]);
            }
            table
        }
    };

    run.write(&opts.out, "marginal", &table.to_bytes())?;
    let summary = format!("{} marginal samples written to {}", table.rows.len(), opts.out.display());
    let m = run.manifest_mut();
    m.scenario_hash = Some(s.hash());
    m.quadrature = Some(opts.quadrature);
    m.details = details;
    m.warnings = warnings;
    Ok((run.finish(&opts.out)?, summary))
}

fn expect_scan(scan: &AxisSpec, want: &str, model: Model) -> Result<(), CliError> {
    if scan.name != want {
        return Err(CliError::Validation(format!(
            "the {} model scans {want}, not {}",
            model.name(),
            scan.name
        )));
    }
    Ok(())
}

fn ratio_table(name: &str, x: &[f64], full: &[f64], incoherent: &[f64], closed: Option<&[f64]>) -> Table {
    let mut header = vec![name, "marginal_pdf", "incoherent", "normalized"];
    if closed.is_some() {
        header.push("closed_form");
    }
    let mut table = Table::new(header);
    for i in 0..x.len() {
        let mut row = vec![number(x[i]), number(full[i]), number(incoherent[i]), number(full[i] / incoherent[i])];
        if let Some(c) = closed {
            row.push(number(c[i]));
        }
        table.push(row);
    }
    table
}

#[derive(Debug, Clone, Default)]
pub struct ScanOverrides {
    pub mass_ratio: Option<f64>,
    pub particle_coherence_over_x0: Option<f64>,
    pub x0_over_lambda: Option<f64>,
    pub periods: Option<usize>,
    pub samples_per_period: Option<usize>,
    pub sigma_span: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Optional scenario supplying the fixed parameters.
    pub source: Source,
    pub model: TraceModel,
    /// `lo:hi:n` in FWHM / λ0.
    pub fwhm_over_lambda: String,
    pub check_sqrt2: bool,
    pub cut: f64,
    pub overrides: ScanOverrides,
    pub quadrature: QuadratureSpec,
    pub out: PathBuf,
}

/// Scan parameters implied by a two-scatterer scenario: mass ratio from the
/// second scatterer, particle coherence and separation in wavelengths.
pub fn scan_params_from_scenario(s: &ValidScenario) -> Result<ScanParams, CliError> {
    s.require_scatterers(2)?;
    if s.scenario().units != Units::Natural {
        return Err(CliError::Validation("visibility scans run in natural units".into()));
    }
    let lambda = s.wavelength().ok_or_else(|| CliError::Validation("particle needs v0 != 0".into()))?;
    let particle_lc = s.particle_spec().coherence_length;
    if !particle_lc.is_finite() || !(s.separation() > 0.0) {
        return Err(CliError::Validation("scans need a particle with dv > 0 and a positive separation".into()));
    }
    Ok(ScanParams {
        mass_ratio: s.particle().mass / s.scatterers()[1].mass,
        particle_coherence_over_x0: particle_lc / s.separation(),
        x0_over_lambda: s.separation() / lambda,
        lambda,
        ..ScanParams::default()
    })
}

pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let axis = AxisSpec::parse(&format!("range:{text}"))
        .map_err(|_| CliError::Validation(format!("cannot parse range '{text}': expected lo:hi:n")))?;
    Ok(axis.build()?.samples)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub model: TraceModel,
    pub failed_points: usize,
    pub threshold_coherence_over_lambda: Option<f64>,
    pub threshold_fwhm_over_lambda: Option<f64>,
    pub threshold_error: Option<String>,
    pub non_increasing: bool,
}

/// Visibility against scatterer FWHM / λ0, with optional √2 mapping check.
pub fn scan(opts: &ScanOptions) -> Result<(RunManifest, String, Vec<VisibilityTrace>), CliError> {
    let mut run = Run::start("visibility-scan");
    let mut params = if opts.source.is_given() {
        let (scenario, _) = opts.source.load()?;
        let s = scenario.validate()?;
        run.manifest_mut().scenario_hash = Some(s.hash());
        scan_params_from_scenario(&s)?
    } else {
        ScanParams::default()
    };
    let o = &opts.overrides;
    params.mass_ratio = o.mass_ratio.unwrap_or(params.mass_ratio);
    params.particle_coherence_over_x0 = o.particle_coherence_over_x0.unwrap_or(params.particle_coherence_over_x0);
    params.x0_over_lambda = o.x0_over_lambda.unwrap_or(params.x0_over_lambda);
    params.periods = o.periods.unwrap_or(params.periods);
    params.samples_per_period = o.samples_per_period.unwrap_or(params.samples_per_period);
    params.sigma_span = o.sigma_span.unwrap_or(params.sigma_span);
    params.quadrature = opts.quadrature;
    params.check()?;
    if !(opts.cut > 0.0 && opts.cut < 1.0) {
        return Err(CliError::Validation("--cut must lie in (0, 1)".into()));
    }
    let ratios = parse_range(&opts.fwhm_over_lambda)?;
    if ratios.iter().any(|&r| !(r > 0.0)) {
        return Err(CliError::Validation("FWHM ratios must be positive".into()));
    }
    let mut models = vec![opts.model];
    if opts.check_sqrt2 {
        let partner = match opts.model {
            TraceModel::OneScatterer => TraceModel::TwoScatterer,
            TraceModel::TwoScatterer => TraceModel::OneScatterer,
            _ => return Err(CliError::Validation("--check-sqrt2 pairs the one-scatterer and two-scatterer traces".into())),
        };
        models.push(partner);
    }
    let traces: Vec<VisibilityTrace> =
        models.iter().map(|&m| visibility_scan(m, &ratios, &params)).collect::<Result<_, _>>()?;
    if traces.iter().all(|t| t.points.iter().all(|p| p.error.is_some())) {
        let first = traces[0].points[0].error.clone().unwrap_or_default();
        return Err(if first.contains("did not converge") {
            CliError::Convergence(first)
        } else {
            CliError::Validation(first)
        });
    }

    let mut table = Table::new(["model", "fwhm_over_lambda", "coherence_over_lambda", "visibility", "error"]);
    let mut summaries = Vec::new();
    let mut text = Vec::new();
    for t in &traces {
        let tag = model_tag(t.model);
        for p in &t.points {
            table.push(vec![
                tag.clone(),
                number(p.fwhm_over_lambda),
                number(p.coherence_over_lambda()),
                number(p.visibility),
                p.error.clone().unwrap_or_default(),
            ]);
        }
        let threshold = threshold_find(t, opts.cut);
        let s = TraceSummary {
            model: t.model,
            failed_points: t.points.iter().filter(|p| p.error.is_some()).count(),
            threshold_coherence_over_lambda: threshold.as_ref().ok().map(|th| th.coherence_over_lambda),
            threshold_fwhm_over_lambda: threshold.as_ref().ok().map(|th| th.fwhm_over_lambda),
            threshold_error: threshold.as_ref().err().map(ToString::to_string),
            non_increasing: t.is_non_increasing(0.0),
        };
        text.push(match &threshold {
            Ok(th) => format!(
                "{tag}: visibility falls to {} at L_c = {:.4} λ0 (FWHM = {:.4} λ0)",
                opts.cut, th.coherence_over_lambda, th.fwhm_over_lambda
            ),
            Err(e) => format!("{tag}: {e}"),
        });
        summaries.push(s);
    }
    let mut details = json!({ "params": params, "cut": opts.cut, "traces": summaries });
    if opts.check_sqrt2 {
        let (upper, lower) = if traces[0].model == TraceModel::OneScatterer {
            (&traces[0], &traces[1])
        } else {
            (&traces[1], &traces[0])
        };
        match sqrt2_mapping_check(upper, lower) {
            Ok(r) => {
                text.push(format!("sqrt2 mapping: max deviation {:.6} over {} points", r.max_deviation, r.compared));
                details["sqrt2"] = json!({ "max_deviation": r.max_deviation, "compared": r.compared });
            }
            Err(e) => {
                text.push(format!("sqrt2 mapping: {e}"));
                details["sqrt2"] = json!({ "error": e.to_string() });
            }
        }
    }

    run.write(&opts.out, "visibility-trace", &table.to_bytes())?;
    let m = run.manifest_mut();
    m.quadrature = Some(opts.quadrature);
    m.details = details;
    m.warnings = summaries
        .iter()
        .filter(|s| s.failed_points > 0)
        .map(|s| format!("{}: {} scan points failed; see the error column", model_tag(s.model), s.failed_points))
        .collect();
    Ok((run.finish(&opts.out)?, text.join("\n"), traces))
}

fn model_tag(model: TraceModel) -> String {
    serde_json::to_value(model).unwrap().as_str().unwrap().to_string()
}

#[derive(Debug, Clone, Default)]
pub struct ThermalOptions {
    /// Named particle; only `neutron` is built in.
    pub particle: Option<String>,
    pub mass: Option<f64>,
    pub velocity: Option<f64>,
    pub lambda: Option<f64>,
    pub temperature: f64,
    /// Scatterer mass in kg, or as a multiple of the particle mass.
    pub scatterer_mass: Option<f64>,
    pub scatterer_mass_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScattererThermal {
    pub mass_kg: f64,
    pub thermal_coherence_m: f64,
    pub coherence_over_lambda0: f64,
    /// True when the scatterer is heavy enough (short enough thermal
    /// coherence) for particle marginal fringes to survive.
    pub marginal_fringes_expected: bool,
}

/// Thermal coherence lengths and the scatterer mass boundary (SI units).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalReport {
    pub particle_mass_kg: f64,
    pub velocity_m_per_s: Option<f64>,
    pub lambda0_m: f64,
    pub temperature_k: f64,
    pub particle_thermal_coherence_m: f64,
    pub boundary_mass_kg: f64,
    pub boundary_mass_neutron_masses: f64,
    pub boundary_mass_over_particle_mass: f64,
    pub boundary_thermal_coherence_m: f64,
    pub scatterer: Option<ScattererThermal>,
}

pub fn thermal(opts: &ThermalOptions) -> Result<ThermalReport, CliError> {
    let mass = match (&opts.particle, opts.mass) {
        (Some(name), None) if name.eq_ignore_ascii_case("neutron") => NEUTRON_MASS,
        (Some(name), None) => return Err(CliError::Validation(format!("unknown particle '{name}' (use --mass KG)"))),
        (None, Some(m)) => m,
        (Some(_), Some(_)) => return Err(CliError::Validation("give either --particle or --mass".into())),
        (None, None) => return Err(CliError::Validation("give --particle neutron or --mass KG".into())),
    };
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(CliError::Validation(format!("mass must be positive (got {mass})")));
    }
    let t = opts.temperature;
    if !(t > 0.0 && t.is_finite()) {
        return Err(CliError::Validation(format!("temperature must be positive (got {t})")));
    }
    let lambda0 = match (opts.velocity, opts.lambda) {
        (Some(v), None) => wavelength(&Body::particle(mass, v, 0.0), Units::Si)?,
        (None, Some(l)) if l > 0.0 && l.is_finite() => l,
        (None, Some(l)) => return Err(CliError::Validation(format!("wavelength must be positive (got {l})"))),
        _ => return Err(CliError::Validation("give exactly one of --v and --lambda".into())),
    };
    let boundary = mass_boundary(lambda0, t)?;
    let scatterer_mass = match (opts.scatterer_mass, opts.scatterer_mass_ratio) {
        (Some(m), None) => Some(m),
        (None, Some(r)) => Some(r * mass),
        (None, None) => None,
        _ => return Err(CliError::Validation("give either --M or --M-over-m".into())),
    };
    let scatterer = scatterer_mass
        .map(|m| -> Result<ScattererThermal, CliError> {
            let lc = thermal_coherence_length(m, t)?;
            Ok(ScattererThermal {
                mass_kg: m,
                thermal_coherence_m: lc,
                coherence_over_lambda0: lc / lambda0,
                marginal_fringes_expected: m > boundary,
            })
        })
        .transpose()?;
    Ok(ThermalReport {
        particle_mass_kg: mass,
        velocity_m_per_s: opts.velocity,
        lambda0_m: lambda0,
        temperature_k: t,
        particle_thermal_coherence_m: thermal_coherence_length(mass, t)?,
        boundary_mass_kg: boundary,
        boundary_mass_neutron_masses: boundary / NEUTRON_MASS,
        boundary_mass_over_particle_mass: boundary / mass,
        boundary_thermal_coherence_m: thermal_coherence_length(boundary, t)?,
        scatterer,
    })
}

impl ThermalReport {
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("lambda0                  {:.6e} m ({:.4} nm)", self.lambda0_m, self.lambda0_m * 1e9),
            format!("temperature              {} K", self.temperature_k),
            format!("particle L_c^thermal     {:.6e} m", self.particle_thermal_coherence_m),
            format!(
                "M_bndry                  {:.6e} kg = {:.1} m_n = {:.1} particle masses",
                self.boundary_mass_kg, self.boundary_mass_neutron_masses, self.boundary_mass_over_particle_mass
            ),
            format!("L_c^thermal at M_bndry   {:.6e} m", self.boundary_thermal_coherence_m),
        ];
        if let Some(s) = &self.scatterer {
            lines.push(format!(
                "scatterer L_c^thermal    {:.6e} m = {:.4} lambda0 ({})",
                s.thermal_coherence_m,
                s.coherence_over_lambda0,
                if s.marginal_fringes_expected { "above M_bndry: marginal fringes" } else { "below M_bndry: no marginal fringes" }
            ));
        }
        lines.join("\n")
    }
}
