//! Run configuration: a sectioned TOML file with strict key checking.
//!
//! Every key has a default, and the defaults are the published parameter set
//! for 266 nm pumping of two 0.13 mm BBO crystals. A missing file section
//! therefore means "use the reference experiment".

use std::path::Path;

use biphoton_core::{
    BackgroundHandling, CrystalSpec, FilterSpec, GridSpec, MLESettings, PrecompensatorSpec, PumpSpec, WalkoffLedger,
    WalkoffSegment,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub pump: PumpConfig,
    pub crystal: CrystalConfig,
    pub grid: GridConfig,
    pub filters: FiltersConfig,
    pub sweep: SweepConfig,
    pub walkoff: WalkoffConfig,
    pub precompensator: PrecompensatorConfig,
    pub tomography: TomographyConfig,
    pub pattern: PatternConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpConfig {
    /// nm
    pub wavelength: f64,
    /// Field FWHM, fs.
    pub field_fwhm: f64,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self { wavelength: 266.0, field_fwhm: 153.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrystalConfig {
    /// mm
    pub length: f64,
    /// Group-velocity mismatch D₊, fs/mm.
    pub gvm: f64,
    /// Group-velocity dispersion D″, fs²/mm.
    pub gvd: f64,
}

impl Default for CrystalConfig {
    fn default() -> Self {
        Self { length: 0.13, gvm: -570.0, gvd: 855.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_plus: usize,
    pub n_minus: usize,
    /// rad/fs
    pub span_plus: f64,
    /// rad/fs
    pub span_minus: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { n_plus: g.n_plus, n_minus: g.n_minus, span_plus: g.span_plus, span_minus: g.span_minus }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// nm
    pub center: f64,
    /// Intensity FWHM, nm.
    pub bandwidth: f64,
}

/// Interference filters in front of each detector; an absent arm is
/// unfiltered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FiltersConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm1: Option<FilterConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arm2: Option<FilterConfig>,
}

impl FiltersConfig {
    pub fn any(&self) -> bool {
        self.arm1.is_some() || self.arm2.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// fs
    pub t_min: f64,
    /// fs
    pub t_max: f64,
    pub steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { t_min: -400.0, t_max: 400.0, steps: 161 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub label: String,
    /// Contribution to the HH lead over VV, fs.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkoffConfig {
    pub segments: Vec<SegmentConfig>,
}

impl Default for WalkoffConfig {
    fn default() -> Self {
        Self {
            segments: WalkoffLedger::two_crystal_bbo()
                .segments
                .into_iter()
                .map(|s| SegmentConfig { label: s.label, delay: s.delay })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecompensatorConfig {
    /// Pump delay `T_p` set on the compensator, fs. The default cancels the
    /// bundled walk-off chain.
    pub tp: f64,
}

impl Default for PrecompensatorConfig {
    fn default() -> Self {
        Self { tp: 168.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MleConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub restarts: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        let s = MLESettings::default();
        Self { max_iterations: s.max_iterations, tolerance: s.tolerance, restarts: s.restarts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    /// Overlap to prepare. When absent, `|v(T)|` of the configured amplitude
    /// at `T = τ − T_p` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Residual phase between the HH and VV terms, rad.
    pub phi: f64,
    /// Expected pairs per complete analyzer basis.
    pub mean_total: f64,
    /// Accidental coincidences, counts/s.
    pub background_rate: f64,
    /// Integration time per setting, s.
    pub duration: f64,
    pub seed: u64,
    /// Use exact expected counts instead of Poisson draws.
    pub noiseless: bool,
    /// Independent simulated records, seeds `seed, seed+1, …`.
    pub runs: usize,
    /// Reconstruct from this counts JSON instead of simulating.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts_file: Option<String>,
    pub mle: MleConfig,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        Self {
            v: None,
            phi: 0.0,
            mean_total: 4500.0,
            background_rate: 9.0,
            duration: 10.0,
            seed: 1,
            noiseless: false,
            runs: 1,
            counts_file: None,
            mle: MleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackgroundMode {
    Ignore,
    Subtract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatternConfig {
    /// Overlap to use; derived like `tomography.v` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    /// Half-wave plate angles over [0°, 180°).
    pub steps: usize,
    /// Simulate Poisson counts instead of exact rates.
    pub poisson: bool,
    /// Expected coincidences at the pattern maximum, per angle.
    pub peak_counts: f64,
    /// Flat accidental coincidences per angle.
    pub background: f64,
    pub background_mode: BackgroundMode,
    pub seed: u64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            v: None,
            steps: 36,
            poisson: false,
            peak_counts: 450.0,
            background: 0.0,
            background_mode: BackgroundMode::Subtract,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// File kinds to emit; the manifest is always written.
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: "out".into(), formats: vec![Format::Csv, Format::Json] }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

fn config_error(path: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {reason}"))
}

fn check<T, E: std::fmt::Display>(path: &str, r: std::result::Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| config_error(path, e))
}

fn finite(path: &str, x: f64) -> Result<(), CliError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(config_error(path, format!("must be finite, got {x}")))
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every value against the preconditions of the module that will
    /// consume it, reporting the offending `section.key`.
    pub fn validate(&self) -> Result<(), CliError> {
        self.pump_spec()?;
        self.crystal_spec()?;
        self.grid_spec()?;
        self.filter_specs()?;

        let s = &self.sweep;
        finite("sweep.t_min", s.t_min)?;
        finite("sweep.t_max", s.t_max)?;
        if s.steps == 0 {
            return Err(config_error("sweep.steps", "must be at least 1"));
        }
        if s.t_max < s.t_min {
            return Err(config_error("sweep.t_max", "must not be below sweep.t_min"));
        }

        for (i, seg) in self.walkoff.segments.iter().enumerate() {
            finite(&format!("walkoff.segments[{i}].delay"), seg.delay)?;
        }
        self.precompensator_spec()?;

        let t = &self.tomography;
        if let Some(v) = t.v {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_error("tomography.v", format!("must lie in [0, 1], got {v}")));
            }
        }
        finite("tomography.phi", t.phi)?;
        if !(t.mean_total.is_finite() && t.mean_total > 0.0) {
            return Err(config_error("tomography.mean_total", "must be positive"));
        }
        if !(t.background_rate.is_finite() && t.background_rate >= 0.0) {
            return Err(config_error("tomography.background_rate", "must be non-negative"));
        }
        if !(t.duration.is_finite() && t.duration > 0.0) {
            return Err(config_error("tomography.duration", "must be positive"));
        }
        if t.runs == 0 {
            return Err(config_error("tomography.runs", "must be at least 1"));
        }
        check("tomography.mle", self.mle_settings().validate())?;

        let p = &self.pattern;
        if let Some(v) = p.v {
            if !(0.0..=1.0).contains(&v) {
                return Err(config_error("pattern.v", format!("must lie in [0, 1], got {v}")));
            }
        }
        if p.steps < 8 {
            return Err(config_error("pattern.steps", "need at least 8 angles"));
        }
        if !(p.peak_counts.is_finite() && p.peak_counts > 0.0) {
            return Err(config_error("pattern.peak_counts", "must be positive"));
        }
        if !(p.background.is_finite() && p.background >= 0.0) {
            return Err(config_error("pattern.background", "must be non-negative"));
        }

        if self.output.directory.is_empty() {
            return Err(config_error("output.directory", "must not be empty"));
        }
        Ok(())
    }

    pub fn pump_spec(&self) -> Result<PumpSpec, CliError> {
        check("pump", PumpSpec::new(self.pump.wavelength, self.pump.field_fwhm))
    }

    pub fn crystal_spec(&self) -> Result<CrystalSpec, CliError> {
        let c = &self.crystal;
        check("crystal", CrystalSpec::new(c.length, c.gvm, c.gvd))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        check("grid", GridSpec::new(g.n_plus, g.n_minus, g.span_plus, g.span_minus))
    }

    /// `(arm1, arm2)` filter specs; arm 1 carries the signal photon.
    pub fn filter_specs(&self) -> Result<(Option<FilterSpec>, Option<FilterSpec>), CliError> {
        let make = |path: &str, f: &Option<FilterConfig>| {
            f.map(|f| check(path, FilterSpec::new(f.center, f.bandwidth))).transpose()
        };
        Ok((make("filters.arm1", &self.filters.arm1)?, make("filters.arm2", &self.filters.arm2)?))
    }

    pub fn walkoff_ledger(&self) -> WalkoffLedger {
        WalkoffLedger::new(
            self.walkoff.segments.iter().map(|s| WalkoffSegment::new(s.label.clone(), s.delay)).collect(),
        )
    }

    pub fn precompensator_spec(&self) -> Result<PrecompensatorSpec, CliError> {
        let spec = check("precompensator.tp", PrecompensatorSpec::new(self.precompensator.tp))?;
        if !spec.in_range() {
            return Err(config_error(
                "precompensator.tp",
                format!(
                    "{} fs is outside the compensator range of ±{} fs",
                    spec.delay,
                    biphoton_core::physics::MAX_PRECOMPENSATOR_DELAY
                ),
            ));
        }
        Ok(spec)
    }

    pub fn mle_settings(&self) -> MLESettings {
        let m = &self.tomography.mle;
        MLESettings { max_iterations: m.max_iterations, tolerance: m.tolerance, restarts: m.restarts }
    }

    pub fn background_handling(&self) -> BackgroundHandling {
        match self.pattern.background_mode {
            BackgroundMode::Ignore => BackgroundHandling::Ignore,
            BackgroundMode::Subtract => BackgroundHandling::Subtract(self.pattern.background),
        }
    }

    /// Applies `--seed` to every seeded section.
    pub fn override_seed(&mut self, seed: u64) {
        self.tomography.seed = seed;
        self.pattern.seed = seed;
    }
}
