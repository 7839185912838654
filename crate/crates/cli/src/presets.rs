//! Named scenarios shipped with the binary, each with a default grid.
//!
//! Natural units throughout: `m = 1`, `v0 = 2π`, so `λ0 = 1`.

use qci_core::{AxisSpec, Scenario};

use crate::error::CliError;

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub json: &'static str,
    /// Default `pdf-grid` axes as `name:lo:hi:n`.
    pub grid: &'static [&'static str],
    /// Default `marginal` scan axis.
    pub scan: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig1a",
        summary: "particle and mirror, M/m = 100, mirror L_c = 5 λ: joint fringes, flat particle marginal",
        json: include_str!("../presets/fig1a.json"),
        grid: &["x1:-2:2:129", "x2:-3:3:193"],
        scan: "x1:-1:1:129",
    },
    Preset {
        name: "fig1b",
        summary: "particle and mirror, M/m = 100, mirror L_c = λ: partial marginal fringes",
        json: include_str!("../presets/fig1b.json"),
        grid: &["x1:-2:2:129", "x2:-0.6:0.6:49"],
        scan: "x1:-1:1:129",
    },
    Preset {
        name: "fig1c",
        summary: "particle and mirror, M/m = 100, mirror L_c = λ/5: marginal fringes survive",
        json: include_str!("../presets/fig1c.json"),
        grid: &["x1:-2:2:129", "x2:-0.12:0.12:49"],
        scan: "x1:-1:1:129",
    },
    Preset {
        name: "fig1d",
        summary: "particle and mirror, M/m = 5, mirror L_c = λ/5: recoil-separated lobes",
        json: include_str!("../presets/fig1d.json"),
        grid: &["x1:-4:4:401", "x2:-2:2:401"],
        scan: "x1:-1:1:129",
    },
    Preset {
        name: "fig2a",
        summary: "beamsplitter and heavy scatterer with L_c = 3 λ: photon marginal without oscillation",
        json: include_str!("../presets/fig2a.json"),
        grid: &["x1:-1:1:65", "x3:0.5:3.5:193"],
        scan: "x0:2:3.5:97",
    },
    Preset {
        name: "fig2b",
        summary: "beamsplitter and heavy scatterer with L_c = λ/2: oscillatory photon marginal",
        json: include_str!("../presets/fig2b.json"),
        grid: &["x1:-1:1:65", "x3:1.75:2.25:129"],
        scan: "x0:2:3.5:97",
    },
    Preset {
        name: "fig3",
        summary: "one-scatterer model at m/M = 1/1200, particle L_c = 30 x0, scatterer FWHM = 0.3 λ",
        json: include_str!("../presets/fig3.json"),
        grid: &["x1:-1:1:65", "x3:1.4:2.6:129"],
        scan: "x0:2:3.5:97",
    },
];

pub fn find(name: &str) -> Result<&'static Preset, CliError> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Validation(format!("unknown preset '{name}' (available: {})", names.join(", ")))
    })
}

impl Preset {
    pub fn scenario(&self) -> Scenario {
        Scenario::from_json(self.json).expect("shipped presets parse")
    }

    pub fn grid(&self) -> Vec<AxisSpec> {
        self.grid.iter().map(|g| AxisSpec::parse(g).expect("shipped grids parse")).collect()
    }

    pub fn scan(&self) -> AxisSpec {
        AxisSpec::parse(self.scan).expect("shipped scans parse")
    }
}
