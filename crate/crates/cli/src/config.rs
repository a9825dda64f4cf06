//! Run configuration: a TOML file plus command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use geodesic_crossings::harness::{ArcSpec, HarnessConfig};
use geodesic_crossings::surface::SurfaceKind;
use geodesic_crossings::tolerance::ToleranceProfile;
use geodesic_crossings::Exec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Every setting of a run. Reports embed the resolved value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub surface: String,
    /// Cutoffs, positive and strictly increasing.
    pub t: Vec<f64>,
    pub cells: usize,
    pub core_eps: f64,
    pub delta_pos: f64,
    pub tolerance_profile: String,
    pub seed: u64,
    pub cache_dir: PathBuf,
    pub out_dir: PathBuf,
    pub include_powers: bool,
    /// Only unsigned winding is implemented.
    pub unsigned_winding: bool,
    pub fixture_n_max: usize,
    pub direction_bins: usize,
    pub cusp_radii: Vec<f64>,
    pub arc: ArcSpec,
    /// Crossing records are exported as a table for cutoffs up to this value.
    pub export_records_max_t: f64,
    pub sequential: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let h = HarnessConfig::default();
        RunConfig {
            surface: SurfaceKind::PuncturedTorus.name().into(),
            t: vec![6.0, 8.0, 9.0, 10.0],
            cells: h.cells,
            core_eps: h.eps_core,
            delta_pos: geodesic_crossings::tolerance::DELTA_POS,
            tolerance_profile: "standard".into(),
            seed: h.seed,
            cache_dir: PathBuf::from("cache"),
            out_dir: PathBuf::from("out"),
            include_powers: true,
            unsigned_winding: true,
            fixture_n_max: h.fixture_n_max,
            direction_bins: h.direction_bins,
            cusp_radii: h.cusp_radii,
            arc: h.arc,
            export_records_max_t: 8.0,
            sequential: false,
        }
    }
}

/// Command-line values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub surface: Option<String>,
    pub t: Option<Vec<f64>>,
    pub cells: Option<usize>,
    pub core_eps: Option<f64>,
    pub seed: Option<u64>,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub include_powers: Option<bool>,
    pub sequential: bool,
}

impl RunConfig {
    pub fn load(file: Option<&Path>, o: Overrides) -> CliResult<Self> {
        let mut c = match file {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
                toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = o.surface {
            c.surface = v;
        }
        if let Some(v) = o.t {
            c.t = v;
        }
        if let Some(v) = o.cells {
            c.cells = v;
        }
        if let Some(v) = o.core_eps {
            c.core_eps = v;
        }
        if let Some(v) = o.seed {
            c.seed = v;
        }
        if let Some(v) = o.cache_dir {
            c.cache_dir = v;
        }
        if let Some(v) = o.out_dir {
            c.out_dir = v;
        }
        if let Some(v) = o.include_powers {
            c.include_powers = v;
        }
        c.sequential |= o.sequential;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.surface_kind()?;
        if self.t.is_empty() {
            return Err(CliError::config("no cutoffs given"));
        }
        if self.t.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::config(format!("cutoffs must be positive, got {:?}", self.t)));
        }
        if self.t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config(format!(
                "cutoffs must be strictly increasing, got {:?}",
                self.t
            )));
        }
        if self.cells == 0 {
            return Err(CliError::config("cell count must be positive"));
        }
        if !(self.core_eps > 0.0 && self.core_eps <= 1.0) {
            return Err(CliError::config(format!(
                "core_eps {} is outside (0, 1]",
                self.core_eps
            )));
        }
        if !(self.delta_pos >= 0.0) {
            return Err(CliError::config("delta_pos must be nonnegative"));
        }
        if self.tolerance_profile != "standard" {
            return Err(CliError::config(format!(
                "unknown tolerance profile {:?}; valid options: standard",
                self.tolerance_profile
            )));
        }
        if !self.unsigned_winding {
            return Err(CliError::config(
                "signed winding is not supported; set unsigned_winding = true",
            ));
        }
        if self.fixture_n_max > 30 {
            return Err(CliError::config("fixture_n_max must be at most 30"));
        }
        if self.direction_bins == 0 {
            return Err(CliError::config("direction_bins must be positive"));
        }
        if self.cusp_radii.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(CliError::config("cusp radii must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn surface_kind(&self) -> CliResult<SurfaceKind> {
        Ok(self.surface.parse::<SurfaceKind>()?)
    }

    pub fn profile(&self) -> ToleranceProfile {
        ToleranceProfile {
            id: self.tolerance_profile.clone(),
            delta_pos: self.delta_pos,
            ..ToleranceProfile::default()
        }
    }

    pub fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    pub fn harness(&self) -> HarnessConfig {
        HarnessConfig {
            cells: self.cells,
            eps_core: self.core_eps,
            direction_bins: self.direction_bins,
            cusp_radii: self.cusp_radii.clone(),
            arc: self.arc,
            fixture_n_max: self.fixture_n_max,
            seed: self.seed,
            ..HarnessConfig::default()
        }
    }

    /// Creates both directories and checks that they accept files.
    pub fn prepare_dirs(&self) -> CliResult<()> {
        for dir in [&self.cache_dir, &self.out_dir] {
            fs::create_dir_all(dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
            let probe = dir.join(".write-probe");
            fs::write(&probe, b"")
                .and_then(|_| fs::remove_file(&probe))
                .map_err(|e| CliError::config(format!("{} is not writable: {e}", dir.display())))?;
        }
        Ok(())
    }
}

/// A cutoff list given as one argument.
#[derive(Clone, Debug, PartialEq)]
pub struct Cutoffs(pub Vec<f64>);

/// Parses `6,8,9.5` into cutoffs.
pub fn parse_cutoffs(s: &str) -> Result<Cutoffs, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad cutoff {p:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Cutoffs)
}
