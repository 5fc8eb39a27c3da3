use std::path::{Path, PathBuf};

use nalgebra::Vector6;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io;
use crate::mpc::{Bounds, LimitSet, MpcConfig};

/// Per-axis values given either as one scalar or as six entries `[angular; linear]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AxisValues {
    Scalar(f64),
    Axes(Vec<f64>),
}

impl AxisValues {
    pub fn resolve(&self, what: &str) -> Result<[f64; 6]> {
        match self {
            AxisValues::Scalar(v) => Ok([*v; 6]),
            AxisValues::Axes(v) if v.len() == 6 => Ok([v[0], v[1], v[2], v[3], v[4], v[5]]),
            AxisValues::Axes(v) => Err(Error::Config(format!(
                "{what}: expected 6 values, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsFile {
    pub min: AxisValues,
    pub max: AxisValues,
}

impl BoundsFile {
    fn resolve(&self, what: &str) -> Result<Bounds> {
        Ok(Bounds {
            min: Vector6::from(self.min.resolve(&format!("{what}.min"))?),
            max: Vector6::from(self.max.resolve(&format!("{what}.max"))?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsFile {
    pub velocity: Option<BoundsFile>,
    pub acceleration: Option<BoundsFile>,
    pub jerk: Option<BoundsFile>,
}

/// How keypoint poses are interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeypointFrame {
    /// Relative to the initial end-effector pose: `x = x_start · k`.
    #[default]
    Start,
    /// Absolute poses in the base frame.
    Base,
}

/// Everything one run of the cascade needs. Relative paths are resolved
/// against the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub keypoints: Option<PathBuf>,
    pub keypoint_frame: KeypointFrame,
    pub robot: Option<PathBuf>,
    pub q_init: Option<Vec<f64>>,
    pub samples_per_segment: usize,
    pub n_c: usize,
    pub n_p: usize,
    pub sample_time_s: f64,
    pub q_weight: AxisValues,
    pub r_weight: AxisValues,
    pub limits: LimitsFile,
    pub inner_rate_hz: f64,
    /// Isotropic inner-loop gain `K = k·I₈`.
    pub gain: f64,
    /// Rate (1/s) of the pose feedback that takes over once the reference ends.
    pub settle_gain: f64,
    pub tol: f64,
    pub max_duration_s: f64,
    pub output_dir: PathBuf,
    /// Keypoints drawn when a seed is given instead of a keypoint file.
    pub random_keypoints: usize,
    pub random_translation: f64,
    pub random_rotation: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mpc = MpcConfig::default();
        Self {
            keypoints: None,
            keypoint_frame: KeypointFrame::Start,
            robot: None,
            q_init: None,
            samples_per_segment: 100,
            n_c: mpc.n_c,
            n_p: mpc.n_p,
            sample_time_s: mpc.sample_time,
            q_weight: AxisValues::Scalar(mpc.q_weight[0]),
            r_weight: AxisValues::Scalar(mpc.r_weight[0]),
            limits: LimitsFile::default(),
            inner_rate_hz: 1000.0,
            gain: 10.0,
            settle_gain: 5.0,
            tol: 1e-3,
            max_duration_s: 20.0,
            output_dir: PathBuf::from("out"),
            random_keypoints: 3,
            random_translation: 0.1,
            random_rotation: 0.3,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, source: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| Error::Config(format!("{}: {e}", source.display())))?;
        let base = source.parent().unwrap_or(Path::new(""));
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        cfg.keypoints = cfg.keypoints.as_deref().map(join);
        cfg.robot = cfg.robot.as_deref().map(join);
        cfg.output_dir = join(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&io::read_to_string(path)?, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.mpc()?.validate()?;
        self.limit_set()?.validate()?;
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol {} must be positive", self.tol)));
        }
        if !(self.inner_rate_hz * self.sample_time_s >= 1.0) || !self.inner_rate_hz.is_finite() {
            return Err(Error::Config(format!(
                "inner rate {} Hz must be at least the MPC rate {} Hz",
                self.inner_rate_hz,
                1.0 / self.sample_time_s
            )));
        }
        if !(self.gain > 0.0) || !(self.settle_gain > 0.0) {
            return Err(Error::Config("gain and settle_gain must be positive".into()));
        }
        if !(self.max_duration_s > 0.0) {
            return Err(Error::Config("max_duration_s must be positive".into()));
        }
        if self.samples_per_segment == 0 {
            return Err(Error::Config("samples_per_segment must be at least 1".into()));
        }
        Ok(())
    }

    pub fn mpc(&self) -> Result<MpcConfig> {
        Ok(MpcConfig {
            n_c: self.n_c,
            n_p: self.n_p,
            sample_time: self.sample_time_s,
            q_weight: self.q_weight.resolve("q_weight")?,
            r_weight: self.r_weight.resolve("r_weight")?,
        })
    }

    /// Configured limits, with the Panda defaults for any group left out.
    pub fn limit_set(&self) -> Result<LimitSet> {
        let d = LimitSet::default();
        let pick = |b: &Option<BoundsFile>, what: &str, fallback: Bounds| match b {
            Some(b) => b.resolve(what),
            None => Ok(fallback),
        };
        Ok(LimitSet {
            velocity: pick(&self.limits.velocity, "limits.velocity", d.velocity)?,
            acceleration: pick(&self.limits.acceleration, "limits.acceleration", d.acceleration)?,
            jerk: pick(&self.limits.jerk, "limits.jerk", d.jerk)?,
        })
    }

    /// Inner ticks per MPC tick, `round(T_mpc / T_inner)`.
    pub fn inner_ticks(&self) -> usize {
        ((self.sample_time_s * self.inner_rate_hz).round() as usize).max(1)
    }
}
