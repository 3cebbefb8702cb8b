//! Per-sample training losses and their gradients with respect to the
//! predicted quaternion components.
//!
//! Gradients are taken on the formulas as written, treating `q̂` as a free
//! 4-vector; chaining through the normalization layer is the network's job.

use crate::mesh::{nearest, PointCloud};
use crate::rotation::{to_matrix, to_matrix_jacobian, UnitQuaternion};
#[allow(unused_imports)]
use num_traits::Float;

/// Inner products this close to ±1 make the arccos derivative blow up.
pub const SINGULARITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossFlag {
    /// Value is valid but the gradient is undefined; it is reported as zero.
    GradientSingularity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossResult {
    pub value: f64,
    /// `∂loss/∂q̂` in `(r, i, j, k)` order.
    pub gradient: [f64; 4],
    pub flag: Option<LossFlag>,
}

impl LossResult {
    fn ok(value: f64, gradient: [f64; 4]) -> Self {
        LossResult {
            value,
            gradient,
            flag: None,
        }
    }
}

/// Which loss drives a training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    /// `1 − ⟨q, q̂⟩` every epoch.
    Surrogate,
    /// ShapeMatch every epoch.
    ShapeMatch,
    /// Surrogate during epoch 0, ShapeMatch afterwards.
    Hybrid,
}

impl LossKind {
    /// Loss actually applied at `epoch`.
    pub fn at_epoch(self, epoch: usize) -> LossKind {
        match self {
            LossKind::Hybrid if epoch == 0 => LossKind::Surrogate,
            LossKind::Hybrid => LossKind::ShapeMatch,
            other => other,
        }
    }

    pub fn needs_points(self) -> bool {
        !matches!(self, LossKind::Surrogate)
    }
}

/// `acos⟨q, q̂⟩`, without an absolute value, so it is sign-sensitive.
pub fn mean_angle_loss(q: &UnitQuaternion, q_hat: &UnitQuaternion) -> LossResult {
    let d = q.dot(q_hat);
    let value = d.clamp(-1.0, 1.0).acos();
    if d.abs() >= 1.0 - SINGULARITY_MARGIN {
        return LossResult {
            value,
            gradient: [0.0; 4],
            flag: Some(LossFlag::GradientSingularity),
        };
    }
    let s = -1.0 / (1.0 - d * d).sqrt();
    let g = q.to_array().map(|c| s * c);
    LossResult::ok(value, g)
}

/// `1 − ⟨q, q̂⟩`, the arccos-free form with the same minimizer.
pub fn surrogate_loss(q: &UnitQuaternion, q_hat: &UnitQuaternion) -> LossResult {
    LossResult::ok(1.0 - q.dot(q_hat), q.to_array().map(|c| -c))
}

/// `1/(2|M|) Σ_{x1} min_{x2} ‖R(q̂)x1 − R(q)x2‖²`.
///
/// The gradient holds each nearest-neighbour assignment fixed (lowest index
/// wins ties) and chains through `∂R(q̂)/∂q̂`.
pub fn shapematch_loss(
    q: &UnitQuaternion,
    q_hat: &UnitQuaternion,
    points: &PointCloud,
) -> LossResult {
    let target_rot = to_matrix(q);
    let pred_rot = to_matrix(q_hat);
    let targets: alloc::vec::Vec<_> = points
        .points()
        .iter()
        .map(|&x| target_rot.apply(x))
        .collect();
    let n = points.len() as f64;

    let mut value = 0.0;
    // ∂value/∂R(q̂), accumulated as Σ r x1ᵀ / n
    let mut d_rot = [[0.0; 3]; 3];
    for &x1 in points.points() {
        let p = pred_rot.apply(x1);
        let (j, d2) = nearest(p, &targets);
        value += d2;
        let y = targets[j];
        let r = [p[0] - y[0], p[1] - y[1], p[2] - y[2]];
        for a in 0..3 {
            for b in 0..3 {
                d_rot[a][b] += r[a] * x1[b];
            }
        }
    }
    value /= 2.0 * n;

    let jac = to_matrix_jacobian(q_hat);
    let mut gradient = [0.0; 4];
    for (c, dr) in jac.iter().enumerate() {
        let mut acc = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                acc += d_rot[a][b] * dr[a][b];
            }
        }
        gradient[c] = acc / n;
    }
    LossResult::ok(value, gradient)
}

/// Surrogate on epoch 0, ShapeMatch from epoch 1 on.
pub fn hybrid_loss(
    q: &UnitQuaternion,
    q_hat: &UnitQuaternion,
    points: &PointCloud,
    epoch: usize,
) -> LossResult {
    evaluate(LossKind::Hybrid, q, q_hat, Some(points), epoch)
}

/// Dispatches on the schedule. ShapeMatch without points falls back to the
/// surrogate.
pub fn evaluate(
    kind: LossKind,
    q: &UnitQuaternion,
    q_hat: &UnitQuaternion,
    points: Option<&PointCloud>,
    epoch: usize,
) -> LossResult {
    match (kind.at_epoch(epoch), points) {
        (LossKind::ShapeMatch, Some(pts)) => shapematch_loss(q, q_hat, pts),
        _ => surrogate_loss(q, q_hat),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6, PI};

    fn about_z(angle: f64) -> UnitQuaternion {
        UnitQuaternion::from_axis_angle([0.0, 0.0, 1.0], angle).unwrap()
    }

    fn cube() -> PointCloud {
        let mut pts = vec![];
        for x in [-1.0, 1.0] {
            for y in [-1.0, 1.0] {
                for z in [-1.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        PointCloud::new(pts).unwrap()
    }

    #[test]
    fn mean_angle_examples() {
        let q = about_z(0.3);
        let r = mean_angle_loss(&q, &q);
        assert!(r.value < 1e-7);
        assert_eq!(r.flag, Some(LossFlag::GradientSingularity));

        let c = FRAC_PI_6.cos();
        let q_hat = UnitQuaternion::new_unchecked(c, (1.0 - c * c).sqrt(), 0.0, 0.0);
        let r = mean_angle_loss(&UnitQuaternion::IDENTITY, &q_hat);
        assert!((r.value - FRAC_PI_6).abs() < 1e-12);
        assert_eq!(r.flag, None);
    }

    #[test]
    fn mean_angle_is_sign_sensitive() {
        let q = about_z(0.4);
        let q_hat = about_z(0.5);
        let a = mean_angle_loss(&q, &q_hat).value;
        let b = mean_angle_loss(&q, &-q_hat).value;
        assert!((a + b - PI).abs() < 1e-12);
    }

    #[test]
    fn surrogate_examples() {
        let q = about_z(1.0);
        assert_eq!(surrogate_loss(&q, &q).value, 1.0 - q.dot(&q));
        assert!(surrogate_loss(&q, &q).value.abs() < 1e-15);
        let c = 30f64.to_radians().cos();
        let q_hat = UnitQuaternion::new_unchecked(c, 0.0, (1.0 - c * c).sqrt(), 0.0);
        let v = surrogate_loss(&UnitQuaternion::IDENTITY, &q_hat).value;
        assert!((v - 0.133_974_596_215_561_35).abs() < 1e-12);
    }

    #[test]
    fn shapematch_single_point() {
        let pts = PointCloud::new(vec![[1.0, 0.0, 0.0]]).unwrap();
        let r = shapematch_loss(&UnitQuaternion::IDENTITY, &about_z(PI), &pts);
        assert!((r.value - 2.0).abs() < 1e-12);
        let same = shapematch_loss(&about_z(0.2), &about_z(0.2), &pts);
        assert_eq!(same.value, 0.0);
    }

    #[test]
    fn shapematch_ignores_cube_symmetry() {
        let r = shapematch_loss(&UnitQuaternion::IDENTITY, &about_z(FRAC_PI_2), &cube());
        assert!(r.value < 1e-12);
        let m = mean_angle_loss(&UnitQuaternion::IDENTITY, &about_z(FRAC_PI_2));
        assert!((m.value - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn hybrid_schedule() {
        let q = UnitQuaternion::IDENTITY;
        let q_hat = about_z(FRAC_PI_2);
        let e0 = hybrid_loss(&q, &q_hat, &cube(), 0);
        assert!((e0.value - (1.0 - FRAC_PI_4.cos())).abs() < 1e-12);
        let e1 = hybrid_loss(&q, &q_hat, &cube(), 1);
        assert!(e1.value < 1e-12);
        assert_eq!(hybrid_loss(&q, &q_hat, &cube(), 5), e1);
    }

    #[test]
    fn shapematch_is_blind_to_quaternion_sign() {
        let q = about_z(0.1);
        let q_hat = UnitQuaternion::from_axis_angle([1.0, 2.0, 0.5], 0.7).unwrap();
        let pts =
            PointCloud::new(vec![[0.3, 0.1, -0.2], [0.9, -0.4, 0.2], [-0.5, 0.5, 0.7]]).unwrap();
        assert_eq!(
            shapematch_loss(&q, &q_hat, &pts).value,
            shapematch_loss(&q, &-q_hat, &pts).value
        );
    }
}
