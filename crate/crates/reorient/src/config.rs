//! Flat `key=value` run configuration. Unknown keys are rejected, and every
//! command writes the fully resolved set next to its outputs.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use reorient_core::augment::OcclusionConfig;
use reorient_core::control::{Composition, ControllerConfig, TrialConfig};
use reorient_core::dataset::GenConfig;
use reorient_core::estimate::adam::AdamConfig;
use reorient_core::estimate::train::TrainConfig;
use reorient_core::estimate::{IcpConfig, Pivot, RegressorShape};
use reorient_core::loss::LossKind;
use reorient_core::render::CameraModel;
use reorient_core::rotation::Radians;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Oracle,
    Icp,
    Regressor,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Whole objects go to one side.
    Object,
    /// Records are split regardless of object.
    Pair,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub camera: CameraModel,
    pub max_angle_deg: f64,
    pub randomize: bool,
    pub occlusion: OcclusionConfig,
    pub dropout: f64,
    pub per_object: usize,
    pub train_fraction: f64,
    pub split: SplitMode,
    pub shape: RegressorShape,
    pub leaky_slope: f64,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub l2: f64,
    pub loss: LossKind,
    pub max_vertices: usize,
    pub icp: IcpConfig,
    pub controller: ControllerConfig,
    pub initial_angle_deg: f64,
    pub trials: usize,
    pub control_randomize: bool,
    pub estimator: EstimatorKind,
    pub noise_ratio: f64,
    /// `None` uses the per-mesh default.
    pub symmetry_threshold: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gen = GenConfig::default();
        let train = TrainConfig::default();
        RunConfig {
            seed: 0,
            camera: gen.camera,
            max_angle_deg: gen.max_angle.degrees(),
            randomize: gen.randomize,
            occlusion: gen.occlusion,
            dropout: gen.dropout,
            per_object: 100,
            train_fraction: 0.8,
            split: SplitMode::Object,
            shape: RegressorShape::default(),
            leaky_slope: reorient_core::estimate::regressor::DEFAULT_LEAKY_SLOPE,
            dropout_rate: reorient_core::estimate::regressor::DEFAULT_DROPOUT,
            epochs: train.epochs,
            batch_size: train.batch_size,
            adam: train.adam,
            l2: train.l2,
            loss: train.loss,
            max_vertices: 500,
            icp: IcpConfig::default(),
            controller: ControllerConfig::default(),
            initial_angle_deg: 30.0,
            trials: 20,
            control_randomize: false,
            estimator: EstimatorKind::Oracle,
            noise_ratio: 0.0,
            symmetry_threshold: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::usage(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::usage(format!(
            "{key}: expected true or false, got {other:?}"
        ))),
    }
}

pub fn parse_loss(value: &str) -> Result<LossKind> {
    match value.trim() {
        "mean" | "surrogate" => Ok(LossKind::Surrogate),
        "shapematch" => Ok(LossKind::ShapeMatch),
        "hybrid" => Ok(LossKind::Hybrid),
        other => Err(Error::usage(format!(
            "loss: expected mean|shapematch|hybrid, got {other:?}"
        ))),
    }
}

pub fn loss_name(kind: LossKind) -> &'static str {
    match kind {
        LossKind::Surrogate => "surrogate",
        LossKind::ShapeMatch => "shapematch",
        LossKind::Hybrid => "hybrid",
    }
}

pub fn parse_composition(value: &str) -> Result<Composition> {
    match value.trim() {
        "left" => Ok(Composition::Left),
        "right" => Ok(Composition::Right),
        other => Err(Error::usage(format!(
            "composition: expected right|left, got {other:?}"
        ))),
    }
}

pub fn composition_name(c: Composition) -> &'static str {
    match c {
        Composition::Left => "left",
        Composition::Right => "right",
    }
}

pub fn parse_estimator(value: &str) -> Result<EstimatorKind> {
    match value.trim() {
        "oracle" => Ok(EstimatorKind::Oracle),
        "icp" => Ok(EstimatorKind::Icp),
        "regressor" => Ok(EstimatorKind::Regressor),
        "identity" => Ok(EstimatorKind::Identity),
        other => Err(Error::usage(format!(
            "estimator: expected oracle|icp|regressor|identity, got {other:?}"
        ))),
    }
}

pub fn estimator_name(e: EstimatorKind) -> &'static str {
    match e {
        EstimatorKind::Oracle => "oracle",
        EstimatorKind::Icp => "icp",
        EstimatorKind::Regressor => "regressor",
        EstimatorKind::Identity => "identity",
    }
}

impl RunConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "seed" => self.seed = parse(key, value)?,
            "width" => self.camera.width = parse(key, value)?,
            "height" => self.camera.height = parse(key, value)?,
            "half_extent" => self.camera.half_extent = parse(key, value)?,
            "eye_height" => self.camera.eye_height = parse(key, value)?,
            "near" => self.camera.near = parse(key, value)?,
            "far" => self.camera.far = parse(key, value)?,
            "max_angle_deg" => self.max_angle_deg = parse(key, value)?,
            "randomize" => self.randomize = parse_bool(key, value)?,
            "occlusion_length_min" => self.occlusion.length.0 = parse(key, value)?,
            "occlusion_length_max" => self.occlusion.length.1 = parse(key, value)?,
            "occlusion_thickness_min" => self.occlusion.thickness.0 = parse(key, value)?,
            "occlusion_thickness_max" => self.occlusion.thickness.1 = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "per_object" => self.per_object = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "split" => {
                self.split = match value.trim() {
                    "object" => SplitMode::Object,
                    "pair" => SplitMode::Pair,
                    other => {
                        return Err(Error::usage(format!(
                            "split: expected object|pair, got {other:?}"
                        )))
                    }
                }
            }
            "input_side" => self.shape.input_side = parse(key, value)?,
            "embed" => self.shape.embed = parse(key, value)?,
            "hidden1" => self.shape.hidden[0] = parse(key, value)?,
            "hidden2" => self.shape.hidden[1] = parse(key, value)?,
            "leaky_slope" => self.leaky_slope = parse(key, value)?,
            "dropout_rate" => self.dropout_rate = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "learning_rate" => self.adam.learning_rate = parse(key, value)?,
            "lr_decay" => self.adam.decay = parse(key, value)?,
            "lr_decay_every" => self.adam.decay_every = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "loss" => self.loss = parse_loss(value)?,
            "max_vertices" => self.max_vertices = parse(key, value)?,
            "icp_max_iter" => self.icp.max_iter = parse(key, value)?,
            "icp_tol" => self.icp.tol = parse(key, value)?,
            "icp_max_points" => self.icp.max_points = parse(key, value)?,
            "icp_pivot" => {
                self.icp.pivot = match value.trim() {
                    "origin" => Pivot::Origin,
                    "centroid" => Pivot::Centroid,
                    other => {
                        return Err(Error::usage(format!(
                            "icp_pivot: expected origin|centroid, got {other:?}"
                        )))
                    }
                }
            }
            "controller_k" => self.controller.max_iterations = parse(key, value)?,
            "eta" => self.controller.eta = parse(key, value)?,
            "delta_deg" => self.controller.delta_deg = parse(key, value)?,
            "composition" => self.controller.composition = parse_composition(value)?,
            "initial_angle_deg" => self.initial_angle_deg = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "control_randomize" => self.control_randomize = parse_bool(key, value)?,
            "estimator" => self.estimator = parse_estimator(value)?,
            "noise_ratio" => self.noise_ratio = parse(key, value)?,
            "symmetry_threshold" => {
                self.symmetry_threshold = match value.trim() {
                    "auto" => None,
                    v => Some(parse(key, v)?),
                }
            }
            _ => return Err(Error::usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` text: one setting per line, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::usage(format!("config line {}: expected key=value", n + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Every key with its resolved value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = |v: &dyn Display| v.to_string();
        vec![
            ("seed", s(&self.seed)),
            ("width", s(&self.camera.width)),
            ("height", s(&self.camera.height)),
            ("half_extent", s(&self.camera.half_extent)),
            ("eye_height", s(&self.camera.eye_height)),
            ("near", s(&self.camera.near)),
            ("far", s(&self.camera.far)),
            ("max_angle_deg", s(&self.max_angle_deg)),
            ("randomize", s(&self.randomize)),
            ("occlusion_length_min", s(&self.occlusion.length.0)),
            ("occlusion_length_max", s(&self.occlusion.length.1)),
            ("occlusion_thickness_min", s(&self.occlusion.thickness.0)),
            ("occlusion_thickness_max", s(&self.occlusion.thickness.1)),
            ("dropout", s(&self.dropout)),
            ("per_object", s(&self.per_object)),
            ("train_fraction", s(&self.train_fraction)),
            (
                "split",
                match self.split {
                    SplitMode::Object => "object".into(),
                    SplitMode::Pair => "pair".into(),
                },
            ),
            ("input_side", s(&self.shape.input_side)),
            ("embed", s(&self.shape.embed)),
            ("hidden1", s(&self.shape.hidden[0])),
            ("hidden2", s(&self.shape.hidden[1])),
            ("leaky_slope", s(&self.leaky_slope)),
            ("dropout_rate", s(&self.dropout_rate)),
            ("epochs", s(&self.epochs)),
            ("batch_size", s(&self.batch_size)),
            ("learning_rate", s(&self.adam.learning_rate)),
            ("lr_decay", s(&self.adam.decay)),
            ("lr_decay_every", s(&self.adam.decay_every)),
            ("l2", s(&self.l2)),
            ("loss", loss_name(self.loss).into()),
            ("max_vertices", s(&self.max_vertices)),
            ("icp_max_iter", s(&self.icp.max_iter)),
            ("icp_tol", s(&self.icp.tol)),
            ("icp_max_points", s(&self.icp.max_points)),
            (
                "icp_pivot",
                match self.icp.pivot {
                    Pivot::Origin => "origin".into(),
                    Pivot::Centroid => "centroid".into(),
                },
            ),
            ("controller_k", s(&self.controller.max_iterations)),
            ("eta", s(&self.controller.eta)),
            ("delta_deg", s(&self.controller.delta_deg)),
            (
                "composition",
                composition_name(self.controller.composition).into(),
            ),
            ("initial_angle_deg", s(&self.initial_angle_deg)),
            ("trials", s(&self.trials)),
            ("control_randomize", s(&self.control_randomize)),
            ("estimator", estimator_name(self.estimator).into()),
            ("noise_ratio", s(&self.noise_ratio)),
            (
                "symmetry_threshold",
                self.symmetry_threshold
                    .map_or_else(|| "auto".into(), |t| t.to_string()),
            ),
        ]
    }

    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<()> {
        self.camera
            .validate()
            .map_err(|e| Error::usage(e.to_string()))?;
        self.controller
            .validate()
            .map_err(|e| Error::usage(e.to_string()))?;
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(Error::usage(msg)) };
        check(
            self.max_angle_deg > 0.0 && self.max_angle_deg <= 30.0,
            "max_angle_deg must lie in (0, 30]",
        )?;
        check(
            (0.0..=1.0).contains(&self.dropout),
            "dropout must lie in [0, 1]",
        )?;
        check(
            (0.0..1.0).contains(&self.dropout_rate),
            "dropout_rate must lie in [0, 1)",
        )?;
        check(
            self.occlusion.length.0 <= self.occlusion.length.1
                && self.occlusion.thickness.0 <= self.occlusion.thickness.1,
            "occlusion ranges must be ordered",
        )?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(
            self.adam.learning_rate >= 0.0,
            "learning_rate must be nonnegative",
        )?;
        check(self.noise_ratio >= 0.0, "noise_ratio must be nonnegative")?;
        check(self.shape.input_side >= 1, "input_side must be at least 1")?;
        check(self.trials >= 1, "trials must be at least 1")?;
        Ok(())
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            camera: self.camera,
            max_angle: Radians::from_degrees(self.max_angle_deg),
            fixed_rotation: None,
            randomize: self.randomize,
            occlusion: self.occlusion,
            dropout: self.dropout,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            adam: self.adam,
            l2: self.l2,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            loss: self.loss,
        }
    }

    pub fn trial_config(&self) -> TrialConfig {
        TrialConfig {
            controller: self.controller,
            camera: self.camera,
            initial_angle_deg: self.initial_angle_deg,
            randomize: self
                .control_randomize
                .then_some((self.occlusion, self.dropout)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::default();
        c.apply_text("seed = 7\n# comment\neta=0.35\nloss=shapematch\nsymmetry_threshold=0.001\n")
            .unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.seed, 7);
    }

    #[test]
    fn unknown_and_malformed_keys_are_usage_errors() {
        let mut c = RunConfig::default();
        assert_eq!(c.set("colour", "red").unwrap_err().exit_code(), 2);
        assert_eq!(c.set("eta", "fast").unwrap_err().exit_code(), 2);
        assert_eq!(c.apply_text("just words").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn zero_step_size_fails_validation() {
        let mut c = RunConfig::default();
        c.set("eta", "0").unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 2);
    }
}
