//! JSON run configuration. Every field is optional; missing ones take the
//! reference defaults and unknown ones are rejected.

use std::path::{Path, PathBuf};

use nanol::filter::{Expectation, NanoConfig};
use nanol::lie::Vec3;
use nanol::metrics::DEFAULT_RE_WINDOW;
use nanol::models::{LegGeometry, NoiseConfig};
use nanol::sim::{
    default_landmarks, FilterModel, FilterSpec, TrajectoryProfile, DEFAULT_GAIT_PERIOD,
    DEFAULT_SIGMA_CAM, NOISELESS_MODEL_SIGMA_CAM,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Landmark,
    Legged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub sigma_accel: f64,
    pub sigma_gyro: f64,
    pub sigma_encoder: f64,
    pub sigma_slip: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection::from(NoiseConfig::default())
    }
}

impl From<NoiseConfig> for NoiseSection {
    fn from(n: NoiseConfig) -> Self {
        NoiseSection {
            sigma_accel: n.sigma_accel,
            sigma_gyro: n.sigma_gyro,
            sigma_encoder: n.sigma_encoder,
            sigma_slip: n.sigma_slip,
        }
    }
}

impl From<NoiseSection> for NoiseConfig {
    fn from(n: NoiseSection) -> Self {
        NoiseConfig {
            sigma_accel: n.sigma_accel,
            sigma_gyro: n.sigma_gyro,
            sigma_encoder: n.sigma_encoder,
            sigma_slip: n.sigma_slip,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExpectationName {
    #[default]
    Cubature,
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NanoSection {
    pub gamma: f64,
    pub max_iters: usize,
    pub cubature_scale: f64,
    pub expectation: ExpectationName,
}

impl Default for NanoSection {
    fn default() -> Self {
        let d = NanoConfig::default();
        NanoSection {
            gamma: d.gamma,
            max_iters: d.max_iters,
            cubature_scale: d.cubature_scale,
            expectation: ExpectationName::Cubature,
        }
    }
}

impl From<NanoSection> for NanoConfig {
    fn from(n: NanoSection) -> Self {
        NanoConfig {
            gamma: n.gamma,
            max_iters: n.max_iters,
            cubature_scale: n.cubature_scale,
            expectation: match n.expectation {
                ExpectationName::Cubature => Expectation::Cubature,
                ExpectationName::Linearized => Expectation::Linearized,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegSection {
    pub hip: f64,
    pub thigh: f64,
    pub calf: f64,
    pub offset_x: f64,
    pub offset_y: f64,
    /// +1 for a left leg, −1 for a right one.
    pub side: f64,
}

impl From<LegGeometry> for LegSection {
    fn from(g: LegGeometry) -> Self {
        LegSection {
            hip: g.hip,
            thigh: g.thigh,
            calf: g.calf,
            offset_x: g.offset_x,
            offset_y: g.offset_y,
            side: g.side,
        }
    }
}

impl From<LegSection> for LegGeometry {
    fn from(g: LegSection) -> Self {
        LegGeometry {
            hip: g.hip,
            thigh: g.thigh,
            calf: g.calf,
            offset_x: g.offset_x,
            offset_y: g.offset_y,
            side: g.side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub duration: f64,
    pub rate: f64,
    pub gyro_amp: [f64; 3],
    pub gyro_freq: [f64; 3],
    pub accel_amp: [f64; 3],
    pub accel_freq: [f64; 3],
    pub initial_velocity: Option<[f64; 3]>,
    /// Seeds the sinusoid phases; sensor noise uses the top-level seed.
    pub seed: u64,
}

impl Default for TrajectorySection {
    fn default() -> Self {
        let p = TrajectoryProfile::default();
        TrajectorySection {
            duration: p.duration,
            rate: p.rate,
            gyro_amp: p.gyro_amp.into(),
            gyro_freq: p.gyro_freq.into(),
            accel_amp: p.accel_amp.into(),
            accel_freq: p.accel_freq.into(),
            initial_velocity: p.initial_velocity.map(Into::into),
            seed: p.seed,
        }
    }
}

impl From<TrajectorySection> for TrajectoryProfile {
    fn from(t: TrajectorySection) -> Self {
        TrajectoryProfile {
            duration: t.duration,
            rate: t.rate,
            gyro_amp: t.gyro_amp.into(),
            gyro_freq: t.gyro_freq.into(),
            accel_amp: t.accel_amp.into(),
            accel_freq: t.accel_freq.into(),
            initial_velocity: t.initial_velocity.map(Vec3::from),
            seed: t.seed,
        }
    }
}

pub const FILTER_NAMES: [&str; 2] = ["nano", "inekf"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    /// Simulated sensor noise, also assumed by the filters.
    pub noise: NoiseSection,
    pub nano: NanoSection,
    /// Simulated camera noise, m.
    pub sigma_cam: f64,
    /// Camera noise the filters assume; defaults to `sigma_cam`.
    pub filter_sigma_cam: Option<f64>,
    pub landmarks: Vec<[f64; 3]>,
    pub legs: Vec<LegSection>,
    pub gait_period: f64,
    pub trajectory: TrajectorySection,
    pub trials: usize,
    /// Sensor-noise seed; trial `i` uses `seed + i`.
    pub seed: u64,
    pub filters: Vec<String>,
    pub init_rot_var: f64,
    pub init_other_var: f64,
    pub re_window: f64,
    /// Zero every simulated noise source.
    pub noiseless: bool,
    pub record_cost: bool,
    pub out_dir: PathBuf,
    pub run_id: Option<String>,
    /// Replay inputs, relative to the config file.
    pub sensor_log: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::Landmark,
            noise: NoiseSection::default(),
            nano: NanoSection::default(),
            sigma_cam: DEFAULT_SIGMA_CAM,
            filter_sigma_cam: None,
            landmarks: default_landmarks().iter().map(|m| (*m).into()).collect(),
            legs: LegGeometry::quadruped().into_iter().map(Into::into).collect(),
            gait_period: DEFAULT_GAIT_PERIOD,
            trajectory: TrajectorySection::default(),
            trials: 100,
            seed: 0,
            filters: FILTER_NAMES.iter().map(|s| s.to_string()).collect(),
            init_rot_var: 1e-4,
            init_other_var: 1e-2,
            re_window: DEFAULT_RE_WINDOW,
            noiseless: false,
            record_cost: false,
            out_dir: PathBuf::from("results"),
            run_id: None,
            sensor_log: None,
            ground_truth: None,
        }
    }
}

/// Parses a configuration document. `file` only labels errors.
pub fn parse_config(text: &str, file: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        CliError::config(file, at, e.into_inner().to_string())
    })?;
    cfg.validate(file)?;
    Ok(cfg)
}

/// Reads, parses and validates a configuration file. Replay paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(&file, ".", e.to_string()))?;
    let mut cfg = parse_config(&text, &file)?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut cfg.sensor_log, &mut cfg.ground_truth].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    cfg.check_files(&file)?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self, file: &str) -> Result<()> {
        let err = |at: &str, msg: String| Err(CliError::config(file, at, msg));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let n = &self.noise;
        for (name, v) in [
            ("noise.sigma_accel", n.sigma_accel),
            ("noise.sigma_gyro", n.sigma_gyro),
            ("noise.sigma_encoder", n.sigma_encoder),
            ("noise.sigma_slip", n.sigma_slip),
        ] {
            if !positive(v) {
                return err(name, format!("must be positive, got {v}"));
            }
        }
        if !positive(self.nano.gamma) {
            return err("nano.gamma", format!("must be positive, got {}", self.nano.gamma));
        }
        if self.nano.max_iters == 0 {
            return err("nano.max_iters", "must be at least 1".into());
        }
        if !positive(self.nano.cubature_scale) {
            return err("nano.cubature_scale", format!("must be positive, got {}", self.nano.cubature_scale));
        }
        if !(self.sigma_cam.is_finite() && self.sigma_cam >= 0.0) {
            return err("sigma_cam", format!("must be non-negative, got {}", self.sigma_cam));
        }
        if let Some(s) = self.filter_sigma_cam {
            if !positive(s) {
                return err("filter_sigma_cam", format!("must be positive, got {s}"));
            }
        } else if !self.noiseless && !positive(self.sigma_cam) {
            return err("sigma_cam", "the filters need a positive camera noise".into());
        }
        if !positive(self.gait_period) {
            return err("gait_period", format!("must be positive, got {}", self.gait_period));
        }
        if self.gait_period * self.trajectory.rate < 2.0 {
            return err("gait_period", "must span at least two samples".into());
        }
        if self.mode == Mode::Landmark && self.landmarks.is_empty() {
            return err("landmarks", "at least one landmark is required".into());
        }
        if self.mode == Mode::Legged && self.legs.is_empty() {
            return err("legs", "at least one leg is required".into());
        }
        for (i, leg) in self.legs.iter().enumerate() {
            if !LegGeometry::from(*leg).is_valid() {
                return err(&format!("legs[{i}]"), "lengths must be positive and side ±1".into());
            }
        }
        if let Err(e) = TrajectoryProfile::from(self.trajectory).validate() {
            return err("trajectory", e.to_string());
        }
        if self.trials == 0 {
            return err("trials", "must be at least 1".into());
        }
        if self.filters.is_empty() {
            return err("filters", "at least one filter is required".into());
        }
        for (i, f) in self.filters.iter().enumerate() {
            if !FILTER_NAMES.contains(&f.as_str()) {
                return err(&format!("filters[{i}]"), format!("unknown filter `{f}`, expected one of nano, inekf"));
            }
            if self.filters[..i].contains(f) {
                return err(&format!("filters[{i}]"), format!("filter `{f}` is listed twice"));
            }
        }
        if !positive(self.init_rot_var) || !positive(self.init_other_var) {
            return err("init_rot_var", "initial variances must be positive".into());
        }
        if !positive(self.re_window) {
            return err("re_window", format!("must be positive, got {}", self.re_window));
        }
        if let Some(id) = &self.run_id {
            if id.is_empty() || id.contains(['/', '\\']) || id == "." || id == ".." {
                return err("run_id", format!("`{id}` is not a usable directory name"));
            }
        }
        Ok(())
    }

    fn check_files(&self, file: &str) -> Result<()> {
        for (at, p) in [("sensor_log", &self.sensor_log), ("ground_truth", &self.ground_truth)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(CliError::config(file, at, format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn nano_config(&self) -> NanoConfig {
        self.nano.into()
    }

    pub fn filter_specs(&self) -> Vec<FilterSpec> {
        self.filters
            .iter()
            .map(|f| match f.as_str() {
                "nano" => FilterSpec::nano(self.nano_config()),
                _ => FilterSpec::inekf(),
            })
            .collect()
    }

    /// Noise injected into simulated sensors.
    pub fn sim_noise(&self) -> (NoiseConfig, f64) {
        if self.noiseless {
            let zero = NoiseConfig {
                sigma_accel: 0.0,
                sigma_gyro: 0.0,
                sigma_encoder: 0.0,
                sigma_slip: 0.0,
            };
            (zero, 0.0)
        } else {
            (self.noise.into(), self.sigma_cam)
        }
    }

    /// Noise the filters assume.
    pub fn filter_model(&self) -> FilterModel {
        let default_cam = if self.noiseless { NOISELESS_MODEL_SIGMA_CAM } else { self.sigma_cam };
        FilterModel {
            noise: self.noise.into(),
            sigma_cam: self.filter_sigma_cam.unwrap_or(default_cam),
        }
    }

    pub fn profile(&self) -> TrajectoryProfile {
        self.trajectory.into()
    }

    pub fn landmark_points(&self) -> Vec<Vec3> {
        self.landmarks.iter().map(|m| Vec3::from(*m)).collect()
    }

    pub fn leg_geometry(&self) -> Vec<LegGeometry> {
        self.legs.iter().map(|l| (*l).into()).collect()
    }
}
