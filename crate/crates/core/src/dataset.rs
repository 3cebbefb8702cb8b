//! Self-supervised training pairs. A random start orientation and a bounded
//! relative rotation give two views; only the start view is randomized.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::augment::{dropout_pixels, occlude_rectangle, OcclusionConfig, DEFAULT_DROPOUT};
use crate::mesh::TriangleMesh;
use crate::render::{render_depth, CameraModel, DepthImage, RenderError};
use crate::rotation::{quat_to_angle, Radians, UnitQuaternion};
use crate::sampling::{
    check_constraints, sample_constrained, sample_uniform_so3, ConstraintViolation,
    DEFAULT_MAX_ANGLE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("split would leave one side empty ({total} objects, fraction {fraction})")]
    TooFewObjects { total: usize, fraction: f64 },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("record {index}: {violation}")]
    ConstraintViolation {
        index: usize,
        violation: ConstraintViolation,
    },
    #[error(transparent)]
    Render(#[from] RenderError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    pub camera: CameraModel,
    pub max_angle: Radians,
    /// Use this relative rotation instead of sampling one.
    pub fixed_rotation: Option<UnitQuaternion>,
    /// Occlude and drop out pixels of the start image.
    pub randomize: bool,
    pub occlusion: OcclusionConfig,
    pub dropout: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            camera: CameraModel::default(),
            max_angle: DEFAULT_MAX_ANGLE,
            fixed_rotation: None,
            randomize: true,
            occlusion: OcclusionConfig::default(),
            dropout: DEFAULT_DROPOUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub object_id: String,
    pub start_image: DepthImage,
    pub goal_image: DepthImage,
    /// World-frame rotation from start to goal: `goal = relative · start`.
    pub relative_rotation: UnitQuaternion,
    pub start_orientation: UnitQuaternion,
}

impl DatasetRecord {
    pub fn goal_orientation(&self) -> UnitQuaternion {
        (self.relative_rotation * self.start_orientation).renormalized()
    }
}

/// Samples one training pair for `mesh`.
pub fn generate_record<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    object_id: &str,
    rng: &mut R,
    cfg: &GenConfig,
) -> Result<DatasetRecord, DatasetError> {
    let start = sample_uniform_so3(rng);
    let relative = match cfg.fixed_rotation {
        Some(q) => q,
        None => sample_constrained(rng, cfg.max_angle),
    };
    let goal = (relative * start).renormalized();

    let mut start_image = render_depth(mesh, &start, &cfg.camera)?;
    let goal_image = render_depth(mesh, &goal, &cfg.camera)?;
    if cfg.randomize {
        let (occluded, _) = occlude_rectangle(&start_image, rng, &cfg.occlusion)?;
        start_image = dropout_pixels(&occluded, cfg.dropout, rng);
    }
    Ok(DatasetRecord {
        object_id: String::from(object_id),
        start_image,
        goal_image,
        relative_rotation: relative,
        start_orientation: start,
    })
}

/// Checks the stored relative rotation against the sampling predicates.
pub fn validate_record(
    record: &DatasetRecord,
    max_angle: Radians,
) -> Result<(), ConstraintViolation> {
    check_constraints(&record.relative_rotation, max_angle)?;
    if quat_to_angle(&record.relative_rotation).0 > max_angle.0 {
        return Err(ConstraintViolation::AngleTooLarge);
    }
    Ok(())
}

/// Seed for record `index` of `object_id`, so records can be generated in
/// any order (or in parallel) with the same result.
pub fn record_seed(global_seed: u64, object_id: &str, index: u64) -> u64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&global_seed.to_le_bytes());
    feed(object_id.as_bytes());
    feed(&[0xff]);
    feed(&index.to_le_bytes());
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Object-level split: `⌊n·fraction⌋` items for training, the rest for test.
pub fn split_train_test<T: Clone, R: Rng + ?Sized>(
    items: &[T],
    train_fraction: f64,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    let n = items.len();
    // the epsilon keeps 100 × 0.19 at 19 despite rounding in the product
    let n_train = (n as f64 * train_fraction + 1e-9) as usize;
    if n_train == 0 || n_train >= n {
        return Err(DatasetError::TooFewObjects {
            total: n,
            fraction: train_fraction,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let train = order[..n_train].iter().map(|&i| items[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}
