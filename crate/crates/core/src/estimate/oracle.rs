//! Ground-truth estimator with error proportional to the true angle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{EstimatorError, Observation, RotationEstimate, RotationEstimator};
use crate::rotation::{quat_to_angle, UnitQuaternion};
use crate::sampling::sample_unit_vector;

/// Perturbs `truth` by a rotation about a uniform random axis with angle
/// `ratio · θ_true · |g|`, `g ~ N(0, 1)`. A zero ratio returns `truth`.
pub fn oracle_predict<R: Rng + ?Sized>(
    truth: &UnitQuaternion,
    ratio: f64,
    rng: &mut R,
) -> RotationEstimate {
    let truth = truth.canonicalize();
    if ratio == 0.0 {
        return RotationEstimate::new(truth);
    }
    let theta = quat_to_angle(&truth).0;
    let g: f64 = rng.sample(StandardNormal);
    let axis = sample_unit_vector(rng);
    let angle = ratio * theta * g.abs();
    if angle == 0.0 {
        return RotationEstimate::new(truth);
    }
    let noise = UnitQuaternion::from_axis_angle(axis, angle).expect("unit axis");
    RotationEstimate::new((noise * truth).renormalized())
}

/// [`oracle_predict`] fed from the simulator's privileged channel.
#[derive(Debug, Clone)]
pub struct OracleEstimator {
    pub noise_ratio: f64,
    rng: ChaCha8Rng,
}

impl OracleEstimator {
    pub fn exact() -> Self {
        Self::noisy(0.0, 0)
    }

    pub fn noisy(noise_ratio: f64, seed: u64) -> Self {
        OracleEstimator {
            noise_ratio,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl RotationEstimator for OracleEstimator {
    fn estimate(&mut self, obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError> {
        let truth = obs.privileged.ok_or(EstimatorError::MissingTruth)?;
        Ok(oracle_predict(
            &truth.relative(),
            self.noise_ratio,
            &mut self.rng,
        ))
    }
}
