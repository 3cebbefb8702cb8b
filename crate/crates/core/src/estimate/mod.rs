//! Relative-rotation estimators `f(I_s, I_g) → q̂`.
//!
//! All estimators return the world-frame rotation that carries the current
//! orientation onto the goal (`q_goal = q̂ · q_current`), canonicalized.

pub mod adam;
pub mod icp;
pub mod oracle;
pub mod regressor;
pub mod train;

use thiserror::Error;

use crate::render::{DepthImage, RenderError};
use crate::rotation::UnitQuaternion;

pub use icp::{icp_predict, icp_register, kabsch, IcpConfig, IcpEstimator, IcpOutcome, Pivot};
pub use oracle::{oracle_predict, OracleEstimator};
pub use regressor::{ForwardCache, Mode, RegressorEstimator, RegressorModel, RegressorShape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error("image has no object pixels")]
    NoObjectPixels,
    #[error("point cloud is degenerate (fewer than three non-collinear points)")]
    DegenerateCloud,
    #[error("the oracle needs the simulator's ground-truth rotation")]
    MissingTruth,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(alloc::string::String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no point cloud for object {0:?}")]
    MissingPoints(alloc::string::String),
    #[error(transparent)]
    Render(RenderError),
}

impl From<RenderError> for EstimatorError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::NoObjectPixels => EstimatorError::NoObjectPixels,
            other => EstimatorError::Render(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub residual: f64,
    /// The raw output could not be normalized and identity was substituted.
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationEstimate {
    pub q_hat: UnitQuaternion,
    pub diagnostics: Diagnostics,
}

impl RotationEstimate {
    pub fn new(q_hat: UnitQuaternion) -> Self {
        RotationEstimate {
            q_hat: q_hat.canonicalize(),
            diagnostics: Diagnostics::default(),
        }
    }
}

/// Simulator-only ground truth travelling alongside an observation.
///
/// Only estimators inside this crate can read it back, so a controller that
/// forwards observations cannot peek at the goal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Privileged {
    relative: UnitQuaternion,
}

impl Privileged {
    pub fn from_relative(relative: UnitQuaternion) -> Self {
        Privileged { relative }
    }

    pub(crate) fn relative(&self) -> UnitQuaternion {
        self.relative
    }
}

/// What an estimator sees: the current capture and the goal image.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub current: &'a DepthImage,
    pub goal: &'a DepthImage,
    pub privileged: Option<Privileged>,
}

pub trait RotationEstimator {
    fn estimate(&mut self, obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError>;
}

impl<E: RotationEstimator + ?Sized> RotationEstimator for &mut E {
    fn estimate(&mut self, obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError> {
        (**self).estimate(obs)
    }
}

impl<E: RotationEstimator + ?Sized> RotationEstimator for alloc::boxed::Box<E> {
    fn estimate(&mut self, obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError> {
        (**self).estimate(obs)
    }
}

/// Always predicts no rotation.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityEstimator;

impl RotationEstimator for IdentityEstimator {
    fn estimate(&mut self, _obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError> {
        Ok(RotationEstimate::new(UnitQuaternion::IDENTITY))
    }
}
