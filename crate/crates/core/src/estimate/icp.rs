//! Rotation-only point-to-point ICP with a Kabsch/SVD update.

use alloc::vec::Vec;

use nalgebra::Matrix3;

use super::{Diagnostics, EstimatorError, Observation, RotationEstimate, RotationEstimator};
use crate::mesh::{nearest, PointCloud};
use crate::render::{to_world_point_cloud, CameraModel, DepthImage};
use crate::rotation::{RotationMatrix3, Vec3};

/// Point the registered rotation turns about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pivot {
    /// Each cloud is centred at its own centroid first. Partial views shift
    /// the centroid, which biases the result.
    Centroid,
    /// The world origin, which is where the simulator's object centre sits.
    Origin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iter: usize,
    /// Stop once the mean squared residual improves by less than this.
    pub tol: f64,
    /// Clouds larger than this are thinned by a fixed stride before matching.
    pub max_points: usize,
    pub pivot: Pivot,
}

impl Default for IcpConfig {
    fn default() -> Self {
        IcpConfig {
            max_iter: 50,
            tol: 1e-8,
            max_points: 1500,
            pivot: Pivot::Origin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpOutcome {
    /// Maps the source onto the target about the configured pivot.
    pub rotation: RotationMatrix3,
    pub iterations: usize,
    pub mse: f64,
}

/// Rotation `R` minimizing `Σ ‖R·src_i − dst_i‖²` for paired points, with no
/// translation term.
pub fn kabsch(src: &[Vec3], dst: &[Vec3]) -> Result<RotationMatrix3, EstimatorError> {
    if src.len() != dst.len() || src.len() < 3 {
        return Err(EstimatorError::DegenerateCloud);
    }
    let mut h = Matrix3::<f64>::zeros();
    for (s, d) in src.iter().zip(dst) {
        for a in 0..3 {
            for b in 0..3 {
                h[(a, b)] += s[a] * d[b];
            }
        }
    }
    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(EstimatorError::DegenerateCloud),
    };
    let v = v_t.transpose();
    let mut correction = Matrix3::<f64>::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // flip the direction of least variance
        let weakest = (0..3)
            .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
            .unwrap_or(2);
        correction[(weakest, weakest)] = -1.0;
    }
    let r = v * correction * u.transpose();
    let mut out = [[0.0; 3]; 3];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = r[(a, b)];
        }
    }
    Ok(RotationMatrix3(out))
}

fn thin(points: &[Vec3], max_points: usize) -> Vec<Vec3> {
    if max_points == 0 || points.len() <= max_points {
        return points.to_vec();
    }
    let stride = points.len().div_ceil(max_points);
    points.iter().step_by(stride).copied().collect()
}

/// Rejects clouds whose scatter about their centroid is (close to) rank one.
fn check_spread(points: &[Vec3]) -> Result<(), EstimatorError> {
    if points.len() < 3 {
        return Err(EstimatorError::DegenerateCloud);
    }
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a] / n;
        }
    }
    let mut s = Matrix3::<f64>::zeros();
    for p in points {
        for a in 0..3 {
            for b in 0..3 {
                s[(a, b)] += (p[a] - c[a]) * (p[b] - c[b]);
            }
        }
    }
    let mut sv: Vec<f64> = s.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if sv[0] <= 0.0 || sv[1] <= 1e-10 * sv[0] {
        return Err(EstimatorError::DegenerateCloud);
    }
    Ok(())
}

/// Registers `source` onto `target` starting from the identity.
pub fn icp_register(
    source: &PointCloud,
    target: &PointCloud,
    cfg: &IcpConfig,
) -> Result<IcpOutcome, EstimatorError> {
    let (source, target) = match cfg.pivot {
        Pivot::Centroid => (source.centered(), target.centered()),
        Pivot::Origin => (source.clone(), target.clone()),
    };
    let src = thin(source.points(), cfg.max_points);
    let tgt = thin(target.points(), cfg.max_points);
    check_spread(&src)?;
    check_spread(&tgt)?;

    let mut total = RotationMatrix3::IDENTITY;
    let mut current = src.clone();
    let mut prev_mse = f64::INFINITY;
    let mut mse = f64::INFINITY;
    let mut iterations = 0;
    let mut matched = Vec::with_capacity(current.len());

    while iterations < cfg.max_iter {
        matched.clear();
        let mut sum = 0.0;
        for &p in &current {
            let (j, d2) = nearest(p, &tgt);
            matched.push(tgt[j]);
            sum += d2;
        }
        mse = sum / current.len() as f64;
        if prev_mse - mse < cfg.tol {
            break;
        }
        prev_mse = mse;
        iterations += 1;
        let step = kabsch(&current, &matched)?;
        for p in current.iter_mut() {
            *p = step.apply(*p);
        }
        total = step.matmul(&total);
    }
    Ok(IcpOutcome {
        rotation: total,
        iterations,
        mse,
    })
}

/// Back-projects both images to world-frame clouds and registers start onto
/// goal; the result is the world-frame rotation from start to goal.
pub fn icp_predict(
    img_s: &DepthImage,
    img_g: &DepthImage,
    cam: &CameraModel,
    cfg: &IcpConfig,
) -> Result<RotationEstimate, EstimatorError> {
    let source = to_world_point_cloud(img_s, cam)?;
    let target = to_world_point_cloud(img_g, cam)?;
    let out = icp_register(&source, &target, cfg)?;
    Ok(RotationEstimate {
        q_hat: out.rotation.to_quaternion(),
        diagnostics: Diagnostics {
            iterations: out.iterations,
            residual: out.mse,
            fallback: false,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IcpEstimator {
    pub camera: CameraModel,
    pub config: IcpConfig,
}

impl IcpEstimator {
    pub fn new(camera: CameraModel, config: IcpConfig) -> Self {
        IcpEstimator { camera, config }
    }
}

impl RotationEstimator for IcpEstimator {
    fn estimate(&mut self, obs: &Observation<'_>) -> Result<RotationEstimate, EstimatorError> {
        icp_predict(obs.current, obs.goal, &self.camera, &self.config)
    }
}
