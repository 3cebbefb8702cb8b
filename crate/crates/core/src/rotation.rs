//! Unit-quaternion algebra.
//!
//! Quaternions are stored as `(r, i, j, k)` with `r` the real part. Every
//! constructor that can produce a non-unit value goes through [`normalize`],
//! so a [`UnitQuaternion`] is always unit-norm up to rounding.

use core::ops::{Mul, Neg};
// shadowed by inherent methods whenever std is in the build graph
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

/// A plain 3-vector.
pub type Vec3 = [f64; 3];

const ZERO_NORM_EPS: f64 = 1e-12;
const AXIS_EPS: f64 = 1e-12;
const SLERP_LERP_BELOW: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RotationError {
    #[error("quaternion has (near-)zero norm")]
    ZeroNorm,
    #[error("rotation axis is undefined for the identity rotation")]
    UndefinedAxis,
    #[error("quaternion has non-finite components")]
    NonFinite,
}

/// An angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Radians(pub f64);

impl Radians {
    pub fn from_degrees(deg: f64) -> Self {
        Radians(deg.to_radians())
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Rotation quaternion `(r, i, j, k)` with unit norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    r: f64,
    i: f64,
    j: f64,
    k: f64,
}

/// Normalizes a raw 4-vector `(r, i, j, k)` into a unit quaternion.
pub fn normalize(raw: [f64; 4]) -> Result<UnitQuaternion, RotationError> {
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(RotationError::NonFinite);
    }
    let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm < ZERO_NORM_EPS {
        return Err(RotationError::ZeroNorm);
    }
    Ok(UnitQuaternion {
        r: raw[0] / norm,
        i: raw[1] / norm,
        j: raw[2] / norm,
        k: raw[3] / norm,
    })
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        r: 1.0,
        i: 0.0,
        j: 0.0,
        k: 0.0,
    };

    /// Wraps components without normalizing. The caller guarantees unit norm.
    pub const fn new_unchecked(r: f64, i: f64, j: f64, k: f64) -> Self {
        UnitQuaternion { r, i, j, k }
    }

    pub fn from_array(raw: [f64; 4]) -> Result<Self, RotationError> {
        normalize(raw)
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self, RotationError> {
        let n = norm3(axis);
        if n < ZERO_NORM_EPS {
            return Err(RotationError::ZeroNorm);
        }
        let (s, c) = (angle * 0.5).sin_cos();
        Ok(UnitQuaternion {
            r: c,
            i: s * axis[0] / n,
            j: s * axis[1] / n,
            k: s * axis[2] / n,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn i(&self) -> f64 {
        self.i
    }
    pub fn j(&self) -> f64 {
        self.j
    }
    pub fn k(&self) -> f64 {
        self.k
    }

    /// Components in `(r, i, j, k)` order.
    pub fn to_array(&self) -> [f64; 4] {
        [self.r, self.i, self.j, self.k]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &UnitQuaternion) -> f64 {
        self.r * other.r + self.i * other.i + self.j * other.j + self.k * other.k
    }

    /// Conjugate, which is the inverse for unit quaternions.
    pub fn conjugate(&self) -> Self {
        UnitQuaternion {
            r: self.r,
            i: -self.i,
            j: -self.j,
            k: -self.k,
        }
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Renormalizes to absorb rounding drift after long product chains.
    pub fn renormalized(&self) -> Self {
        normalize(self.to_array()).unwrap_or(UnitQuaternion::IDENTITY)
    }

    pub fn canonicalize(&self) -> Self {
        canonicalize(self)
    }

    pub fn angle(&self) -> Radians {
        quat_to_angle(self)
    }

    pub fn to_matrix(&self) -> RotationMatrix3 {
        to_matrix(self)
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        self.to_matrix().apply(v)
    }

    /// Hamilton product without renormalization.
    fn hamilton(&self, b: &UnitQuaternion) -> UnitQuaternion {
        let a = self;
        UnitQuaternion {
            r: a.r * b.r - a.i * b.i - a.j * b.j - a.k * b.k,
            i: a.r * b.i + a.i * b.r + a.j * b.k - a.k * b.j,
            j: a.r * b.j - a.i * b.k + a.j * b.r + a.k * b.i,
            k: a.r * b.k + a.i * b.j - a.j * b.i + a.k * b.r,
        }
    }
}

impl Mul for UnitQuaternion {
    type Output = UnitQuaternion;

    /// Hamilton product; `a * b` applies `b` first, then `a`.
    fn mul(self, rhs: UnitQuaternion) -> UnitQuaternion {
        self.hamilton(&rhs)
    }
}

impl Neg for UnitQuaternion {
    type Output = UnitQuaternion;

    fn neg(self) -> UnitQuaternion {
        UnitQuaternion {
            r: -self.r,
            i: -self.i,
            j: -self.j,
            k: -self.k,
        }
    }
}

/// Rotation angle between two orientations, `2·acos|⟨q0, q1⟩|`, in `[0, π]`.
///
/// Evaluated as `4·atan2(‖q0 − q1‖, ‖q0 + q1‖)` after flipping `q1` into the
/// same hemisphere, which equals the arccos form but keeps full precision
/// for nearly identical rotations.
pub fn angle_between(q0: &UnitQuaternion, q1: &UnitQuaternion) -> Radians {
    let b = if q0.dot(q1) < 0.0 { -*q1 } else { *q1 };
    let a = q0.to_array();
    let b = b.to_array();
    let mut diff = 0.0;
    let mut sum = 0.0;
    for c in 0..4 {
        diff += (a[c] - b[c]) * (a[c] - b[c]);
        sum += (a[c] + b[c]) * (a[c] + b[c]);
    }
    Radians(4.0 * diff.sqrt().atan2(sum.sqrt()))
}

/// `q0 · q1⁻¹`: the rotation that carries `q1` onto `q0`.
pub fn rotation_difference(q0: &UnitQuaternion, q1: &UnitQuaternion) -> UnitQuaternion {
    q0.hamilton(&q1.conjugate())
}

/// Shortest-arc spherical linear interpolation.
pub fn slerp(q0: &UnitQuaternion, q1: &UnitQuaternion, t: f64) -> UnitQuaternion {
    let target = if q0.dot(q1) < 0.0 { -*q1 } else { *q1 };
    // half of the rotation angle, i.e. the angle between the 4-vectors
    let theta = 0.5 * angle_between(q0, &target).0;
    if 2.0 * theta < SLERP_LERP_BELOW {
        let raw = [
            q0.r + t * (target.r - q0.r),
            q0.i + t * (target.i - q0.i),
            q0.j + t * (target.j - q0.j),
            q0.k + t * (target.k - q0.k),
        ];
        return normalize(raw).unwrap_or(*q0);
    }
    let s = theta.sin();
    let w0 = ((1.0 - t) * theta).sin() / s;
    let w1 = (t * theta).sin() / s;
    let raw = [
        w0 * q0.r + w1 * target.r,
        w0 * q0.i + w1 * target.i,
        w0 * q0.j + w1 * target.j,
        w0 * q0.k + w1 * target.k,
    ];
    normalize(raw).unwrap_or(*q0)
}

/// `2·acos(q_r)`, in `[0, 2π]`; at most π for canonical quaternions.
pub fn quat_to_angle(q: &UnitQuaternion) -> Radians {
    // atan2 form of 2·acos(q_r) for unit q
    let v = norm3([q.i, q.j, q.k]);
    Radians(2.0 * v.atan2(q.r))
}

/// Unit rotation axis `(q_i, q_j, q_k) / √(1 − q_r²)`.
pub fn rotation_axis(q: &UnitQuaternion) -> Result<Vec3, RotationError> {
    let s2 = 1.0 - q.r * q.r;
    if s2 < AXIS_EPS {
        return Err(RotationError::UndefinedAxis);
    }
    let v = [q.i, q.j, q.k];
    let n = norm3(v);
    if n < ZERO_NORM_EPS {
        return Err(RotationError::UndefinedAxis);
    }
    // Dividing by the measured vector norm instead of √(1 − q_r²) keeps the
    // output unit-length when q carries rounding drift.
    Ok([v[0] / n, v[1] / n, v[2] / n])
}

/// Picks the representative with `q_r ≥ 0`.
pub fn canonicalize(q: &UnitQuaternion) -> UnitQuaternion {
    if q.r < 0.0 {
        -*q
    } else {
        *q
    }
}

/// Row-major 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix3(pub [[f64; 3]; 3]);

impl RotationMatrix3 {
    pub const IDENTITY: RotationMatrix3 =
        RotationMatrix3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotationMatrix3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn matmul(&self, other: &RotationMatrix3) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
            }
        }
        RotationMatrix3(out)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Converts a proper rotation matrix back to a canonical quaternion
    /// (Shepperd's branch selection on the largest diagonal term).
    pub fn to_quaternion(&self) -> UnitQuaternion {
        let m = &self.0;
        let trace = m[0][0] + m[1][1] + m[2][2];
        let raw = if trace > m[0][0] && trace > m[1][1] && trace > m[2][2] {
            let s = (1.0 + trace).sqrt() * 2.0;
            [
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            ]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            [
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            ]
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            [
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            ]
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            [
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            ]
        };
        canonicalize(&normalize(raw).unwrap_or(UnitQuaternion::IDENTITY))
    }
}

/// `R(q)` for a unit quaternion.
pub fn to_matrix(q: &UnitQuaternion) -> RotationMatrix3 {
    let (w, x, y, z) = (q.r, q.i, q.j, q.k);
    RotationMatrix3([
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ])
}

/// Partial derivatives `∂R(q)/∂q_c` for `c` in `(r, i, j, k)` order, taken on
/// the same quadratic formula used by [`to_matrix`].
pub fn to_matrix_jacobian(q: &UnitQuaternion) -> [[[f64; 3]; 3]; 4] {
    let (w, x, y, z) = (q.r, q.i, q.j, q.k);
    [
        [
            [0.0, -2.0 * z, 2.0 * y],
            [2.0 * z, 0.0, -2.0 * x],
            [-2.0 * y, 2.0 * x, 0.0],
        ],
        [
            [0.0, 2.0 * y, 2.0 * z],
            [2.0 * y, -4.0 * x, -2.0 * w],
            [2.0 * z, 2.0 * w, -4.0 * x],
        ],
        [
            [-4.0 * y, 2.0 * x, 2.0 * w],
            [2.0 * x, 0.0, 2.0 * z],
            [-2.0 * w, 2.0 * z, -4.0 * y],
        ],
        [
            [-4.0 * z, -2.0 * w, 2.0 * x],
            [2.0 * w, -4.0 * z, 2.0 * y],
            [2.0 * x, 2.0 * y, 0.0],
        ],
    ]
}

/// Angle in degrees, for reporting.
pub fn degrees_between(q0: &UnitQuaternion, q1: &UnitQuaternion) -> f64 {
    angle_between(q0, q1).degrees()
}

pub(crate) fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

pub(crate) fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dist2(a: Vec3, b: Vec3) -> f64 {
    let d = sub3(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}
