//! Random rotations: Haar-uniform on SO(3) and the bounded relative-rotation
//! sampler used for dataset generation.

use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rotation::{canonicalize, normalize, quat_to_angle, Radians, UnitQuaternion, Vec3};

/// Default bound on sampled relative rotations: π/6.
pub const DEFAULT_MAX_ANGLE: Radians = Radians(PI / 6.0);

/// Uniform rotation: a normalized 4-vector of independent standard normals.
pub fn sample_uniform_so3<R: Rng + ?Sized>(rng: &mut R) -> UnitQuaternion {
    loop {
        let raw: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        if let Ok(q) = normalize(raw) {
            return q;
        }
    }
}

/// Uniform direction on the unit sphere.
pub fn sample_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v: Vec3 = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-12 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Which of the relative-rotation predicates a quaternion fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintViolation {
    NotUnitNorm,
    RealPartNotPositive,
    RealPartNotDominant,
    AngleTooLarge,
}

impl core::fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let msg = match self {
            ConstraintViolation::NotUnitNorm => "quaternion is not unit-norm",
            ConstraintViolation::RealPartNotPositive => "real part is not positive",
            ConstraintViolation::RealPartNotDominant => {
                "real part does not dominate every imaginary component"
            }
            ConstraintViolation::AngleTooLarge => "rotation angle exceeds the bound",
        };
        f.write_str(msg)
    }
}

/// Checks the four relative-rotation predicates: unit norm, `q_r > 0`,
/// `q_r > |q_i|, |q_j|, |q_k|` (strict), and `q_r ≥ cos(max_angle / 2)`.
pub fn check_constraints(
    q: &UnitQuaternion,
    max_angle: Radians,
) -> Result<(), ConstraintViolation> {
    if (q.norm() - 1.0).abs() > 1e-9 {
        return Err(ConstraintViolation::NotUnitNorm);
    }
    let r = q.r();
    if r <= 0.0 {
        return Err(ConstraintViolation::RealPartNotPositive);
    }
    if !(r > q.i().abs() && r > q.j().abs() && r > q.k().abs()) {
        return Err(ConstraintViolation::RealPartNotDominant);
    }
    if r < (max_angle.0 * 0.5).cos() {
        return Err(ConstraintViolation::AngleTooLarge);
    }
    Ok(())
}

/// Rejection-samples a canonical rotation satisfying [`check_constraints`].
///
/// `max_angle` is clamped to π/6.
pub fn sample_constrained<R: Rng + ?Sized>(rng: &mut R, max_angle: Radians) -> UnitQuaternion {
    let bound = Radians(max_angle.0.min(DEFAULT_MAX_ANGLE.0));
    // acceptance rate for π/6 is (θ − sin θ)/π ≈ 0.75%
    loop {
        let q = canonicalize(&sample_uniform_so3(rng));
        if quat_to_angle(&q).0 <= bound.0 && check_constraints(&q, bound).is_ok() {
            return q;
        }
    }
}
