//! Python module `qci_sim`: scenarios, joint-density grids, marginals,
//! visibility scans and the kinematic helpers.
//!
//! Validation failures raise `ValidationError` (a `ValueError`), quadrature
//! that fails to converge raises `ConvergenceError` (a `RuntimeError`).

use pyo3::create_exception;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qci_cli::commands::{self, grid_field, Model, ThermalOptions};
use qci_cli::{presets, CliError};
use qci_core::analysis::{self, ScanParams, TraceModel};
use qci_core::eigenstates::{trace_fourbody, FourBody};
use qci_core::{kinematics, AxisSpec, QuadratureSpec, Scenario as CoreScenario, ValidScenario};

create_exception!(qci_sim, ValidationError, PyValueError);
create_exception!(qci_sim, ConvergenceError, PyRuntimeError);

fn to_py<E: Into<CliError>>(e: E) -> PyErr {
    match e.into() {
        CliError::Validation(m) => ValidationError::new_err(m),
        CliError::Convergence(m) => ConvergenceError::new_err(m),
        CliError::Io(m) => PyIOError::new_err(m),
    }
}

fn quadrature(nodes: usize, max_nodes: usize, tolerance: f64) -> PyResult<QuadratureSpec> {
    let q = QuadratureSpec { nodes_per_axis: nodes, max_nodes, tolerance };
    q.check().map_err(to_py)?;
    Ok(q)
}

/// A validated scenario.
#[pyclass(module = "qci_sim", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Scenario {
    inner: ValidScenario,
}

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let s = CoreScenario::from_json(text).map_err(to_py)?;
        Ok(Scenario { inner: s.validate().map_err(to_py)? })
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p = presets::find(name).map_err(to_py)?;
        Ok(Scenario { inner: p.scenario().validate().map_err(to_py)? })
    }

    #[staticmethod]
    fn presets() -> Vec<&'static str> {
        presets::PRESETS.iter().map(|p| p.name).collect()
    }

    fn to_json(&self) -> String {
        self.inner.scenario().to_json()
    }

    fn with_time(&self, time: f64) -> PyResult<Self> {
        let s = self.inner.scenario().clone().with_time(time);
        Ok(Scenario { inner: s.validate().map_err(to_py)? })
    }

    #[getter]
    fn wavelength(&self) -> Option<f64> {
        self.inner.wavelength()
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings().to_vec()
    }

    #[getter]
    fn model(&self) -> PyResult<&'static str> {
        Ok(Model::select(&self.inner).map_err(to_py)?.name())
    }

    /// Coordinates the model's joint density depends on.
    #[getter]
    fn coordinates(&self) -> PyResult<Vec<&'static str>> {
        Ok(Model::select(&self.inner).map_err(to_py)?.coordinates().to_vec())
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(model={}, scatterers={}, hash={})",
            Model::select(&self.inner).map(Model::name).unwrap_or("unsupported"),
            self.inner.scatterers().len(),
            &self.inner.hash()[..12]
        )
    }
}

/// Joint density on a grid. `axes` are `"name:lo:hi:n"` strings; other
/// coordinates sit at their body's peak unless given in `at`.
///
/// Returns a dict with `axes`, `shape`, row-major `values`, `fixed`,
/// `warnings` and, for the mirror `(x1, x2)` plane, `lobe_overlap` and
/// `joint_contrast`.
#[pyfunction]
#[pyo3(signature = (scenario, axes, at=None, nodes=64, max_nodes=512, tolerance=1e-10))]
fn pdf_grid<'py>(
    py: Python<'py>,
    scenario: &Scenario,
    axes: Vec<String>,
    at: Option<Vec<(String, f64)>>,
    nodes: usize,
    max_nodes: usize,
    tolerance: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let quad = quadrature(nodes, max_nodes, tolerance)?;
    let built = axes
        .iter()
        .map(|a| AxisSpec::parse(a).and_then(|s| s.build()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(to_py)?;
    let at: Vec<String> = at.unwrap_or_default().into_iter().map(|(k, v)| format!("{k}={v:e}")).collect();
    let s = scenario.inner.clone();
    let g = py.detach(move || grid_field(&s, built, &at, quad)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("model", g.model.name())?;
    d.set_item("axes", g.field.axes.iter().map(|a| a.name.clone()).collect::<Vec<_>>())?;
    d.set_item("shape", g.field.shape())?;
    d.set_item("values", g.field.values)?;
    d.set_item("fixed", g.fixed)?;
    d.set_item("lobe_overlap", g.lobe_overlap)?;
    d.set_item("joint_contrast", g.joint_contrast)?;
    d.set_item("warnings", g.warnings)?;
    Ok(d)
}

/// Velocities and wavevectors after one elastic head-on collision.
#[pyfunction]
#[pyo3(signature = (m, v, big_m, big_v, hbar=1.0))]
fn reflect(m: f64, v: f64, big_m: f64, big_v: f64, hbar: f64) -> (f64, f64, f64, f64) {
    let r = kinematics::reflect(m, v, big_m, big_v, hbar);
    (r.particle_velocity, r.scatterer_velocity, r.particle_wavevector, r.scatterer_wavevector)
}

/// Thermal coherence lengths and mass boundary in SI units.
#[pyfunction]
#[pyo3(signature = (temperature, particle=None, mass=None, v=None, wavelength=None, big_m=None))]
fn thermal<'py>(
    py: Python<'py>,
    temperature: f64,
    particle: Option<String>,
    mass: Option<f64>,
    v: Option<f64>,
    wavelength: Option<f64>,
    big_m: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = commands::thermal(&ThermalOptions {
        particle,
        mass,
        velocity: v,
        lambda: wavelength,
        temperature,
        scatterer_mass: big_m,
        scatterer_mass_ratio: None,
    })
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("lambda0_m", r.lambda0_m)?;
    d.set_item("particle_thermal_coherence_m", r.particle_thermal_coherence_m)?;
    d.set_item("boundary_mass_kg", r.boundary_mass_kg)?;
    d.set_item("boundary_mass_neutron_masses", r.boundary_mass_neutron_masses)?;
    d.set_item("boundary_thermal_coherence_m", r.boundary_thermal_coherence_m)?;
    if let Some(sc) = r.scatterer {
        d.set_item("scatterer_thermal_coherence_m", sc.thermal_coherence_m)?;
        d.set_item("marginal_fringes_expected", sc.marginal_fringes_expected)?;
    }
    Ok(d)
}

/// `1 + exp(-L_c² / 2λ0²) cos(4π x0 / λ0)`.
#[pyfunction]
fn marginal_closed(x0: f64, coherence_length: f64, wavelength: f64) -> f64 {
    analysis::marginal_closed(x0, coherence_length, wavelength)
}

/// Fringe contrast of `values`, optionally divided by `envelope` first.
#[pyfunction]
#[pyo3(signature = (x, values, period, envelope=None))]
fn visibility(x: Vec<f64>, values: Vec<f64>, period: f64, envelope: Option<Vec<f64>>) -> PyResult<f64> {
    analysis::visibility(&x, &values, envelope.as_deref(), period).map_err(to_py)
}

fn trace_model(name: &str) -> PyResult<TraceModel> {
    Ok(match name {
        "one-scatterer" => TraceModel::OneScatterer,
        "two-scatterer" => TraceModel::TwoScatterer,
        "correlated" => TraceModel::Correlated,
        "closed-form" => TraceModel::ClosedForm,
        other => {
            return Err(ValidationError::new_err(format!(
                "unknown model '{other}' (one-scatterer, two-scatterer, correlated, closed-form)"
            )))
        }
    })
}

/// Particle visibility against scatterer FWHM / λ0. Returns a list of
/// `(fwhm_over_lambda, visibility, error)`; failed points carry NaN and
/// a message.
#[pyfunction]
#[pyo3(signature = (model, fwhm_over_lambda, mass_ratio=1.0/1200.0, particle_coherence_over_x0=30.0, x0_over_lambda=2.0, periods=3, samples_per_period=32))]
#[allow(clippy::too_many_arguments)]
fn visibility_scan(
    py: Python<'_>,
    model: &str,
    fwhm_over_lambda: Vec<f64>,
    mass_ratio: f64,
    particle_coherence_over_x0: f64,
    x0_over_lambda: f64,
    periods: usize,
    samples_per_period: usize,
) -> PyResult<Vec<(f64, f64, Option<String>)>> {
    let model = trace_model(model)?;
    let params = ScanParams {
        mass_ratio,
        particle_coherence_over_x0,
        x0_over_lambda,
        periods,
        samples_per_period,
        ..ScanParams::default()
    };
    let trace = py.detach(move || analysis::visibility_scan(model, &fwhm_over_lambda, &params)).map_err(to_py)?;
    Ok(trace.points.into_iter().map(|p| (p.fwhm_over_lambda, p.visibility, p.error)).collect())
}

/// Four-body joint density `3 + 2 Σ cos a_jk`; with `open` given, the
/// analytic trace over those scatterers (indices 0, 1, 2).
#[pyfunction]
#[pyo3(signature = (positions, displacements, open=None, m=1.0, v=2.0*std::f64::consts::PI, hbar=1.0))]
fn fourbody_pdf(
    positions: [f64; 3],
    displacements: [f64; 3],
    open: Option<Vec<usize>>,
    m: f64,
    v: f64,
    hbar: f64,
) -> PyResult<f64> {
    let fb = FourBody::new(m, v, hbar, positions);
    match open {
        None => Ok(fb.pdf(displacements)),
        Some(open) if open.iter().all(|&i| i < 3) => Ok(trace_fourbody(&fb, &open).pdf(displacements)),
        Some(_) => Err(ValidationError::new_err("open scatterer indices are 0, 1 or 2")),
    }
}

#[pymodule]
fn qci_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_class::<Scenario>()?;
    m.add_function(wrap_pyfunction!(pdf_grid, m)?)?;
    m.add_function(wrap_pyfunction!(reflect, m)?)?;
    m.add_function(wrap_pyfunction!(thermal, m)?)?;
    m.add_function(wrap_pyfunction!(marginal_closed, m)?)?;
    m.add_function(wrap_pyfunction!(visibility, m)?)?;
    m.add_function(wrap_pyfunction!(visibility_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fourbody_pdf, m)?)?;
    Ok(())
}
