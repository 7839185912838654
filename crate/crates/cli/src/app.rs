//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qci_core::analysis::TraceModel;
use qci_core::QuadratureSpec;

use crate::commands::{self, MarginalOptions, PdfGridOptions, ScanOptions, ScanOverrides, Source, ThermalOptions};
use crate::error::CliError;
use crate::presets::PRESETS;

#[derive(Debug, Parser)]
#[command(name = "qci-sim", version, about = "Joint and marginal densities for a particle reflecting from movable scatterers")]
pub struct Cli {
    /// Worker threads (default: QCI_SIM_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Joint density on a rectangular grid (CSV, optional PGM heatmap).
    PdfGrid(PdfGridArgs),
    /// Density of one coordinate with the others traced out.
    Marginal(MarginalArgs),
    /// Particle fringe visibility against scatterer FWHM.
    VisibilityScan(ScanArgs),
    /// Thermal coherence lengths and the scatterer mass boundary (SI).
    Thermal(ThermalArgs),
    /// List the built-in scenarios.
    Presets,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario (see `qci-sim presets`).
    #[arg(long)]
    pub preset: Option<String>,
}

impl From<&SourceArgs> for Source {
    fn from(a: &SourceArgs) -> Self {
        Source { scenario: a.scenario.clone(), preset: a.preset.clone() }
    }
}

#[derive(Debug, Args)]
pub struct QuadArgs {
    /// Initial Gauss-Hermite nodes per velocity axis.
    #[arg(long, default_value_t = QuadratureSpec::default().nodes_per_axis)]
    pub nodes: usize,
    /// Node count at which refinement gives up.
    #[arg(long, default_value_t = QuadratureSpec::default().max_nodes)]
    pub max_nodes: usize,
    /// Absolute tolerance on normalized velocity averages.
    #[arg(long, default_value_t = QuadratureSpec::default().tolerance)]
    pub tolerance: f64,
}

impl QuadArgs {
    fn spec(&self) -> Result<QuadratureSpec, CliError> {
        let q = QuadratureSpec { nodes_per_axis: self.nodes, max_nodes: self.max_nodes, tolerance: self.tolerance };
        q.check()?;
        Ok(q)
    }
}

#[derive(Debug, Args)]
pub struct PdfGridArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Grid axis `name:lo:hi:n`, repeatable (x1 particle, x2.. scatterers).
    #[arg(long = "axis")]
    pub axes: Vec<String>,
    /// Value of a coordinate held fixed, `name=value`, repeatable.
    #[arg(long)]
    pub at: Vec<String>,
    /// Evaluation time (overrides the scenario).
    #[arg(long)]
    pub time: Option<f64>,
    /// Output CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a PGM heatmap (two-axis grids only).
    #[arg(long)]
    pub pgm: Option<PathBuf>,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Args)]
pub struct MarginalArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Kept coordinate `name:lo:hi:n`; `x0` scans the scatterer separation.
    #[arg(long)]
    pub scan: Option<String>,
    /// Traced axis `name:lo:hi:n`, repeatable (automatic for wavegroups).
    #[arg(long)]
    pub trace: Vec<String>,
    #[arg(long)]
    pub at: Vec<String>,
    #[arg(long)]
    pub time: Option<f64>,
    /// Half-width of automatic trace windows, in envelope sigmas.
    #[arg(long, default_value_t = 8.0)]
    pub sigma_span: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    OneScatterer,
    TwoScatterer,
    Correlated,
    ClosedForm,
}

impl From<ModelArg> for TraceModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::OneScatterer => TraceModel::OneScatterer,
            ModelArg::TwoScatterer => TraceModel::TwoScatterer,
            ModelArg::Correlated => TraceModel::Correlated,
            ModelArg::ClosedForm => TraceModel::ClosedForm,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Optional two-scatterer scenario supplying mass ratio, particle
    /// coherence and separation.
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_enum, default_value = "one-scatterer")]
    pub model: ModelArg,
    /// Scatterer FWHM / λ0 as `lo:hi:n`.
    #[arg(long, default_value = "0.02:1:50")]
    pub fwhm_over_lambda: String,
    /// Also run the partner trace and compare under FWHM -> FWHM/√2.
    #[arg(long)]
    pub check_sqrt2: bool,
    /// Visibility defining the threshold.
    #[arg(long, default_value_t = 0.05)]
    pub cut: f64,
    #[arg(long)]
    pub mass_ratio: Option<f64>,
    #[arg(long)]
    pub particle_coherence_over_x0: Option<f64>,
    #[arg(long)]
    pub x0_over_lambda: Option<f64>,
    /// Fringe periods in the x0 scan.
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub samples_per_period: Option<usize>,
    #[arg(long)]
    pub sigma_span: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub quad: QuadArgs,
}

#[derive(Debug, Args)]
pub struct ThermalArgs {
    /// Named particle (`neutron`).
    #[arg(long, conflicts_with = "mass")]
    pub particle: Option<String>,
    /// Particle mass in kg.
    #[arg(long)]
    pub mass: Option<f64>,
    /// Particle speed in m/s.
    #[arg(long = "v", conflicts_with = "lambda", allow_hyphen_values = true)]
    pub velocity: Option<f64>,
    /// de Broglie wavelength in m.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Temperature in K.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub temperature: f64,
    /// Scatterer mass in kg.
    #[arg(long = "M", allow_hyphen_values = true)]
    pub scatterer_mass: Option<f64>,
    /// Scatterer mass in particle masses.
    #[arg(long = "M-over-m", allow_hyphen_values = true)]
    pub scatterer_mass_ratio: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

/// Thread count from the flag, else `QCI_SIM_THREADS`.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("QCI_SIM_THREADS") {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse()
                    .map_err(|_| CliError::Validation(format!("QCI_SIM_THREADS='{v}' is not a thread count")))?,
            ),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::Validation("thread count must be at least 1".into()));
    }
    Ok(n)
}

/// Runs a parsed command and returns what to print on stdout.
pub fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = thread_count(cli.threads)? {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::PdfGrid(a) => {
            let opts = PdfGridOptions {
                source: (&a.source).into(),
                axes: a.axes,
                at: a.at,
                out: a.out,
                pgm: a.pgm,
                time: a.time,
                quadrature: a.quad.spec()?,
            };
            let (m, summary) = commands::pdf_grid(&opts)?;
            Ok(with_warnings(summary, &m.warnings))
        }
        Command::Marginal(a) => {
            let opts = MarginalOptions {
                source: (&a.source).into(),
                scan: a.scan,
                trace: a.trace,
                at: a.at,
                out: a.out,
                time: a.time,
                quadrature: a.quad.spec()?,
                sigma_span: a.sigma_span,
            };
            let (m, summary) = commands::marginal(&opts)?;
            Ok(with_warnings(summary, &m.warnings))
        }
        Command::VisibilityScan(a) => {
            let opts = ScanOptions {
                source: (&a.source).into(),
                model: a.model.into(),
                fwhm_over_lambda: a.fwhm_over_lambda,
                check_sqrt2: a.check_sqrt2,
                cut: a.cut,
                overrides: ScanOverrides {
                    mass_ratio: a.mass_ratio,
                    particle_coherence_over_x0: a.particle_coherence_over_x0,
                    x0_over_lambda: a.x0_over_lambda,
                    periods: a.periods,
                    samples_per_period: a.samples_per_period,
                    sigma_span: a.sigma_span,
                },
                quadrature: a.quad.spec()?,
                out: a.out,
            };
            let (m, summary, _) = commands::scan(&opts)?;
            Ok(with_warnings(summary, &m.warnings))
        }
        Command::Thermal(a) => {
            let report = commands::thermal(&ThermalOptions {
                particle: a.particle,
                mass: a.mass,
                velocity: a.velocity,
                lambda: a.lambda,
                temperature: a.temperature,
                scatterer_mass: a.scatterer_mass,
                scatterer_mass_ratio: a.scatterer_mass_ratio,
            })?;
            Ok(if a.json { serde_json::to_string_pretty(&report).expect("report serializes") } else { report.to_text() })
        }
        Command::Presets => Ok(PRESETS.iter().map(|p| format!("{:<6} {}", p.name, p.summary)).collect::<Vec<_>>().join("\n")),
    }
}

fn with_warnings(summary: String, warnings: &[String]) -> String {
    let mut out = summary;
    for w in warnings {
        out.push_str("\nwarning: ");
        out.push_str(w);
    }
    out
}
