//! Scenario files (TOML). Every table rejects unknown keys.
//!
//! ```toml
//! kind = "squeezing"
//! name = "two-cloud"
//! seed = 7
//!
//! [geometry]
//! nx = 56
//! ny = 24
//!
//! [cloud]
//! layout = "pair"
//! shape = "square"
//! side = 18
//! gap = 8
//! fill = 0.8
//!
//! [sequence]
//! tau_s = [0.27]
//! theta_deg = [-6, 0, 6]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `<S_y>` versus initial tipping angle and time.
    Shearing,
    /// ξ², C and ξ²_R over a τ × θ grid.
    Squeezing,
    /// The squeezing pipeline repeated for each motion mode.
    Tunneling,
    /// Ramsey contrast versus time.
    Contrast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub cloud: CloudConfig,
    #[serde(default)]
    pub couplings: CouplingsConfig,
    #[serde(default)]
    pub disorder: DisorderConfig,
    pub sequence: SequenceConfig,
    #[serde(default)]
    pub motion: MotionConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_seed() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub spacing_nm: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            spacing_nm: 266.0,
            nx: 30,
            ny: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Single,
    Pair,
    /// Fillings read from a snapshot file.
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Square,
    Disk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudConfig {
    pub layout: Layout,
    pub shape: Shape,
    /// Square side in sites.
    pub side: usize,
    /// Disk radius in sites.
    pub radius: f64,
    /// Empty columns between the two clouds of a pair.
    pub gap: usize,
    pub fill: f64,
    /// Number of independently sampled fillings.
    pub count: u32,
    pub snapshot_file: Option<PathBuf>,
    /// Cloud A/B boundary for snapshot layouts.
    pub split_column: Option<usize>,
}

impl Default for CloudConfig {
    fn default() -> Self {
        Self {
            layout: Layout::Single,
            shape: Shape::Disk,
            side: 10,
            radius: 5.0,
            gap: 8,
            fill: 1.0,
            count: 1,
            snapshot_file: None,
            split_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingsConfig {
    pub j_perp_hz: f64,
    pub rescale: f64,
    /// Replaces the dipolar matrix by this all-to-all coupling.
    pub uniform_hz: Option<f64>,
}

impl Default for CouplingsConfig {
    fn default() -> Self {
        Self {
            j_perp_hz: 1.09,
            rescale: dipsq_core::lattice::DipolarCouplings::DEFAULT_RESCALE,
            uniform_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DisorderConfig {
    /// Harmonic spin potential about the lattice centre, Hz per site².
    pub harmonic_hz_per_site2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub tau_s: Vec<f64>,
    #[serde(default = "default_theta")]
    pub theta_deg: Vec<f64>,
    /// Readout phases of the Ramsey contrast measurement.
    #[serde(default = "default_phases")]
    pub phase_deg: Vec<f64>,
    /// Phase of the tilted squeezing readout.
    #[serde(default = "default_readout_phase")]
    pub readout_phase_deg: f64,
    pub echo_period_s: Option<f64>,
    /// Initial tipping angles from the pole (shearing scans).
    #[serde(default)]
    pub tip_deg: Vec<f64>,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
}

fn default_theta() -> Vec<f64> {
    vec![0.0]
}

fn default_phases() -> Vec<f64> {
    (0..8).map(|k| 45.0 * k as f64).collect()
}

fn default_readout_phase() -> f64 {
    -90.0
}

fn default_dt() -> f64 {
    dipsq_core::dtwa::IntegratorConfig::DEFAULT_DT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Static,
    Stochastic,
    OatLimit,
}

impl MotionKind {
    pub fn name(self) -> &'static str {
        match self {
            MotionKind::Static => "static",
            MotionKind::Stochastic => "stochastic",
            MotionKind::OatLimit => "oat_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionConfig {
    pub modes: Vec<MotionKind>,
    pub t_hop_hz: f64,
    pub smoothing_sigma: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            modes: vec![MotionKind::Static],
            t_hop_hz: 10.0,
            smoothing_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotModeConfig {
    Direct,
    Binomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Trajectories per sampled filling.
    pub trajectories: u32,
    /// Trajectories integrated together in one batch.
    pub batch: u32,
    pub shot_mode: ShotModeConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            trajectories: 100,
            batch: 32,
            shot_mode: ShotModeConfig::Direct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    Sinusoid,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub fit: FitModel,
    pub filter: bool,
    pub xi2_resamples: usize,
    pub contrast_resamples: usize,
    pub curve_draws: usize,
    pub window: usize,
    /// Evolution times at which correlation maps are written.
    pub g2_tau_s: Vec<f64>,
    pub g2_theta_deg: Vec<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        use dipsq_core::observables as o;
        Self {
            fit: FitModel::Sinusoid,
            filter: true,
            xi2_resamples: o::XI2_RESAMPLES,
            contrast_resamples: o::CONTRAST_RESAMPLES,
            curve_draws: o::CURVE_DRAWS,
            window: o::DEFAULT_WINDOW,
            g2_tau_s: Vec::new(),
            g2_theta_deg: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut s: Scenario = toml::from_str(text).map_err(|source| ConfigError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        // snapshot paths are relative to the scenario file
        if let (Some(f), Some(dir)) = (&s.cloud.snapshot_file, path.parent()) {
            if f.is_relative() {
                s.cloud.snapshot_file = Some(dir.join(f));
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let seq = &self.sequence;
        if seq.tau_s.is_empty() {
            return Err(invalid("sequence.tau_s must not be empty"));
        }
        if seq.tau_s.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(invalid("sequence.tau_s entries must be non-negative"));
        }
        if seq.theta_deg.is_empty() || seq.phase_deg.is_empty() {
            return Err(invalid("sequence.theta_deg and sequence.phase_deg must not be empty"));
        }
        if self.kind == ScenarioKind::Shearing && seq.tip_deg.is_empty() {
            return Err(invalid("shearing scans need sequence.tip_deg"));
        }
        if self.motion.modes.is_empty() {
            return Err(invalid("motion.modes must not be empty"));
        }
        if self.ensemble.trajectories < 2 || self.ensemble.batch == 0 {
            return Err(invalid("ensemble.trajectories must be >= 2 and ensemble.batch >= 1"));
        }
        if self.cloud.count == 0 {
            return Err(invalid("cloud.count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.cloud.fill) {
            return Err(invalid("cloud.fill must lie in [0, 1]"));
        }
        if self.cloud.layout == Layout::Snapshot {
            match &self.cloud.snapshot_file {
                None => return Err(invalid("cloud.layout = \"snapshot\" needs cloud.snapshot_file")),
                Some(f) if !f.exists() => return Err(invalid(format!("snapshot file {} does not exist", f.display()))),
                _ => {}
            }
        }
        let max_tau = seq.tau_s.iter().copied().fold(0.0, f64::max);
        if self.analysis.g2_tau_s.iter().any(|t| !seq.tau_s.contains(t)) {
            return Err(invalid("analysis.g2_tau_s entries must appear in sequence.tau_s"));
        }
        if self.analysis.g2_tau_s.iter().any(|t| *t > max_tau) {
            return Err(invalid("analysis.g2_tau_s beyond the last evolution time"));
        }
        if self.analysis.window.is_multiple_of(2) {
            return Err(invalid("analysis.window must be odd"));
        }
        Ok(())
    }

    /// Short hex digest of the resolved scenario.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("scenario serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
