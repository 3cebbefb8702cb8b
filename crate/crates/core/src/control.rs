//! Slerp-based proportional reorientation controller against a rendered
//! simulation.
//!
//! Each iteration captures the current view, asks the estimator for the
//! remaining rotation, stops once the *predicted* angle is within `delta`,
//! and otherwise moves a fraction `eta` of the way along the geodesic.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::augment::{dropout_pixels, occlude_rectangle, OcclusionConfig};
use crate::estimate::{EstimatorError, Observation, Privileged, RotationEstimator};
use crate::mesh::TriangleMesh;
use crate::render::{render_depth, CameraModel, DepthImage, RenderError};
use crate::rotation::{angle_between, quat_to_angle, rotation_difference, slerp, UnitQuaternion};
use crate::sampling::{sample_uniform_so3, sample_unit_vector};

/// Largest initial error the controller is designed for, in degrees.
pub const DESIGN_MAX_INITIAL_DEG: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(&'static str),
    #[error("render failed: {0}")]
    Render(#[from] RenderError),
    #[error("estimator failed: {0}")]
    Estimator(#[from] EstimatorError),
}

/// Side on which the predicted rotation is composed with the current
/// orientation to form the slerp target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// `q · q̂`: the prediction is read as a body-frame rotation.
    Right,
    /// `q̂ · q`: the prediction is read as a world-frame rotation.
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub max_iterations: usize,
    pub eta: f64,
    /// Stop threshold on the predicted angle, degrees.
    pub delta_deg: f64,
    pub composition: Composition,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            max_iterations: 100,
            eta: 0.2,
            delta_deg: 0.5,
            composition: Composition::Left,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.max_iterations < 1 {
            return Err(ControlError::InvalidConfig("K must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ControlError::InvalidConfig("eta must lie in (0, 1]"));
        }
        if self.delta_deg.is_nan() || self.delta_deg <= 0.0 {
            return Err(ControlError::InvalidConfig("delta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct CaptureNoise {
    occlusion: OcclusionConfig,
    dropout: f64,
    rng: ChaCha8Rng,
}

/// A mesh on a turntable under an overhead depth camera. The goal
/// orientation is private: it only leaves as rendered images, as the
/// opaque [`Privileged`] token, or through [`SimEnvironment::true_error`]
/// for reporting.
#[derive(Debug, Clone)]
pub struct SimEnvironment {
    mesh: TriangleMesh,
    camera: CameraModel,
    orientation: UnitQuaternion,
    goal: UnitQuaternion,
    noise: Option<CaptureNoise>,
}

impl SimEnvironment {
    pub fn new(
        mesh: TriangleMesh,
        camera: CameraModel,
        start: UnitQuaternion,
        goal: UnitQuaternion,
    ) -> Self {
        SimEnvironment {
            mesh,
            camera,
            orientation: start,
            goal,
            noise: None,
        }
    }

    /// Applies occlusion and dropout to every capture.
    pub fn with_randomization(
        mut self,
        occlusion: OcclusionConfig,
        dropout: f64,
        seed: u64,
    ) -> Self {
        self.noise = Some(CaptureNoise {
            occlusion,
            dropout,
            rng: ChaCha8Rng::seed_from_u64(seed),
        });
        self
    }

    pub fn orientation(&self) -> UnitQuaternion {
        self.orientation
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn set_orientation(&mut self, q: UnitQuaternion) {
        self.orientation = q.renormalized();
    }

    /// Clean render of the goal pose.
    pub fn render_goal(&self) -> Result<DepthImage, RenderError> {
        render_depth(&self.mesh, &self.goal, &self.camera)
    }

    /// Current view plus the simulator-only ground-truth token.
    pub fn capture(&mut self) -> Result<(DepthImage, Privileged), RenderError> {
        let mut img = render_depth(&self.mesh, &self.orientation, &self.camera)?;
        if let Some(noise) = self.noise.as_mut() {
            let (occluded, _) = occlude_rectangle(&img, &mut noise.rng, &noise.occlusion)?;
            img = dropout_pixels(&occluded, noise.dropout, &mut noise.rng);
        }
        let relative = rotation_difference(&self.goal, &self.orientation).renormalized();
        Ok((img, Privileged::from_relative(relative)))
    }

    /// Angle between the current and goal orientations, in degrees.
    pub fn true_error_deg(&self) -> f64 {
        angle_between(&self.orientation, &self.goal).degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    /// Index of the orientation `q^(k)`; 0 is the start.
    pub k: usize,
    pub orientation: UnitQuaternion,
    /// Absent for the last orientation of a run that hit the iteration cap.
    pub prediction: Option<UnitQuaternion>,
    pub pred_angle_deg: Option<f64>,
    pub true_err_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerTrace {
    pub entries: Vec<TraceEntry>,
    pub status: TerminalStatus,
    /// Loop iterations run, i.e. images captured.
    pub iterations: usize,
    /// Orientation updates applied.
    pub steps: usize,
    /// The start was farther than [`DESIGN_MAX_INITIAL_DEG`] from the goal.
    pub initial_out_of_range: bool,
}

impl ControllerTrace {
    pub fn final_error_deg(&self) -> f64 {
        self.entries
            .last()
            .map(|e| e.true_err_deg)
            .unwrap_or(f64::NAN)
    }
}

/// A failed run with the trace up to the failing iteration.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("controller failed at iteration {iteration}: {error}")]
pub struct ControlFailure {
    pub iteration: usize,
    pub error: ControlError,
    pub trace: ControllerTrace,
}

/// Runs the controller until the predicted angle drops to `delta` or `K`
/// iterations elapse.
pub fn run_controller<E: RotationEstimator + ?Sized>(
    env: &mut SimEnvironment,
    estimator: &mut E,
    goal_image: &DepthImage,
    cfg: &ControllerConfig,
) -> Result<ControllerTrace, ControlFailure> {
    let mut trace = ControllerTrace {
        entries: Vec::with_capacity(cfg.max_iterations + 1),
        status: TerminalStatus::MaxIterations,
        iterations: 0,
        steps: 0,
        initial_out_of_range: env.true_error_deg() > DESIGN_MAX_INITIAL_DEG + 1e-9,
    };
    if let Err(error) = cfg.validate() {
        return Err(ControlFailure {
            iteration: 0,
            error,
            trace,
        });
    }

    for k in 1..=cfg.max_iterations {
        let current = env.orientation();
        let step = (|| {
            let (image, privileged) = env.capture()?;
            let obs = Observation {
                current: &image,
                goal: goal_image,
                privileged: Some(privileged),
            };
            Ok::<_, ControlError>(estimator.estimate(&obs)?)
        })();
        let estimate = match step {
            Ok(e) => e,
            Err(error) => {
                return Err(ControlFailure {
                    iteration: k,
                    error,
                    trace,
                })
            }
        };
        let q_hat = estimate.q_hat;
        let pred_deg = quat_to_angle(&q_hat).degrees();
        trace.iterations = k;
        trace.entries.push(TraceEntry {
            k: k - 1,
            orientation: current,
            prediction: Some(q_hat),
            pred_angle_deg: Some(pred_deg),
            true_err_deg: env.true_error_deg(),
        });
        if pred_deg <= cfg.delta_deg {
            trace.status = TerminalStatus::Converged;
            return Ok(trace);
        }
        let target = match cfg.composition {
            Composition::Right => current * q_hat,
            Composition::Left => q_hat * current,
        };
        env.set_orientation(slerp(&current, &target.renormalized(), cfg.eta));
        trace.steps = k;
    }
    trace.entries.push(TraceEntry {
        k: cfg.max_iterations,
        orientation: env.orientation(),
        prediction: None,
        pred_angle_deg: None,
        true_err_deg: env.true_error_deg(),
    });
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub object_id: String,
    pub trial: usize,
    pub initial_err_deg: f64,
    pub final_err_deg: f64,
    pub status: TerminalStatus,
    pub iterations: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSummary {
    pub trials: Vec<TrialResult>,
    pub median_final_err_deg: f64,
    pub mean_final_err_deg: f64,
    pub p90_final_err_deg: f64,
    pub convergence_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub controller: ControllerConfig,
    pub camera: CameraModel,
    /// Initial angle between start and goal, degrees.
    pub initial_angle_deg: f64,
    /// Randomize captured images: `(occlusion, dropout)`.
    pub randomize: Option<(OcclusionConfig, f64)>,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            controller: ControllerConfig::default(),
            camera: CameraModel::default(),
            initial_angle_deg: DESIGN_MAX_INITIAL_DEG,
            randomize: None,
        }
    }
}

/// Uniform goal, and a start `initial_angle` away about a uniform axis.
pub fn sample_trial_pose<R: Rng + ?Sized>(
    rng: &mut R,
    initial_angle_deg: f64,
) -> (UnitQuaternion, UnitQuaternion) {
    let goal = sample_uniform_so3(rng);
    let axis = sample_unit_vector(rng);
    let offset =
        UnitQuaternion::from_axis_angle(axis, initial_angle_deg.to_radians()).expect("unit axis");
    ((offset * goal).renormalized(), goal)
}

/// Runs `trials_per_object` controller episodes per mesh and summarizes the
/// final true errors.
pub fn evaluate_controller<E: RotationEstimator + ?Sized, R: Rng + ?Sized>(
    meshes: &[(String, TriangleMesh)],
    estimator: &mut E,
    trials_per_object: usize,
    rng: &mut R,
    cfg: &TrialConfig,
) -> Result<ControllerSummary, ControlFailure> {
    let mut trials = Vec::with_capacity(meshes.len() * trials_per_object);
    for (object_id, mesh) in meshes {
        for trial in 0..trials_per_object {
            let (start, goal) = sample_trial_pose(rng, cfg.initial_angle_deg);
            let mut env = SimEnvironment::new(mesh.clone(), cfg.camera, start, goal);
            if let Some((occlusion, dropout)) = cfg.randomize {
                env = env.with_randomization(occlusion, dropout, rng.random());
            }
            let initial_err_deg = env.true_error_deg();
            let goal_image = env.render_goal().map_err(|e| ControlFailure {
                iteration: 0,
                error: e.into(),
                trace: ControllerTrace {
                    entries: Vec::new(),
                    status: TerminalStatus::MaxIterations,
                    iterations: 0,
                    steps: 0,
                    initial_out_of_range: false,
                },
            })?;
            let trace = run_controller(&mut env, estimator, &goal_image, &cfg.controller)?;
            trials.push(TrialResult {
                object_id: object_id.clone(),
                trial,
                initial_err_deg,
                final_err_deg: trace.final_error_deg(),
                status: trace.status,
                iterations: trace.iterations,
                steps: trace.steps,
            });
        }
    }
    Ok(summarize(trials))
}

pub fn summarize(trials: Vec<TrialResult>) -> ControllerSummary {
    let mut errs: Vec<f64> = trials.iter().map(|t| t.final_err_deg).collect();
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    let (median, mean, p90) = if n == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let median = if n % 2 == 1 {
            errs[n / 2]
        } else {
            0.5 * (errs[n / 2 - 1] + errs[n / 2])
        };
        let mean = errs.iter().sum::<f64>() / n as f64;
        // nearest-rank percentile
        let rank = ((0.9 * n as f64).ceil() as usize).clamp(1, n);
        (median, mean, errs[rank - 1])
    };
    let converged = trials
        .iter()
        .filter(|t| t.status == TerminalStatus::Converged)
        .count();
    ControllerSummary {
        convergence_rate: if n == 0 {
            0.0
        } else {
            converged as f64 / n as f64
        },
        trials,
        median_final_err_deg: median,
        mean_final_err_deg: mean,
        p90_final_err_deg: p90,
    }
}
