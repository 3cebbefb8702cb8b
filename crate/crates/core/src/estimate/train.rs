//! Mini-batch training loop for [`RegressorModel`].

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, AdamConfig, AdamState};
use super::regressor::{add_l2, prepare_input, Mode, RegressorModel};
use super::EstimatorError;
use crate::dataset::DatasetRecord;
use crate::loss::{evaluate, LossKind};
use crate::mesh::PointCloud;
use crate::rotation::{angle_between, UnitQuaternion};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    /// L2 penalty λ; the gradient gains `2λw`.
    pub l2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            l2: 1e-9,
            batch_size: 32,
            epochs: 30,
            seed: 0,
            loss: LossKind::Hybrid,
        }
    }
}

/// One prepared training pair.
#[derive(Debug, Clone)]
pub struct TrainSample<'a> {
    pub start: Vec<f64>,
    pub goal: Vec<f64>,
    pub rotation: UnitQuaternion,
    /// Object vertices for ShapeMatch epochs.
    pub points: Option<&'a PointCloud>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub train_loss: f64,
    pub val_mean_angle_deg: f64,
}

/// Downsamples record images and attaches per-object vertex clouds.
pub fn prepare_samples<'a, F>(
    records: &[DatasetRecord],
    side: usize,
    points_for: F,
    need_points: bool,
) -> Result<Vec<TrainSample<'a>>, EstimatorError>
where
    F: Fn(&str) -> Option<&'a PointCloud>,
{
    records
        .iter()
        .map(|r| {
            let points = points_for(&r.object_id);
            if need_points && points.is_none() {
                return Err(EstimatorError::MissingPoints(r.object_id.to_string()));
            }
            Ok(TrainSample {
                start: prepare_input(&r.start_image, side)?,
                goal: prepare_input(&r.goal_image, side)?,
                rotation: r.relative_rotation,
                points,
            })
        })
        .collect()
}

/// Mean rotation angle between prediction and truth, eval mode, in degrees.
pub fn mean_angle_error_deg(
    model: &RegressorModel,
    samples: &[TrainSample<'_>],
) -> Result<f64, EstimatorError> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sum = 0.0;
    for s in samples {
        let (est, _) = model.forward(&s.start, &s.goal, Mode::Eval, &mut rng)?;
        sum += angle_between(&est.q_hat, &s.rotation).degrees();
    }
    Ok(sum / samples.len() as f64)
}

/// Mean loss of the given kind over `samples`, eval mode.
pub fn mean_loss(
    model: &RegressorModel,
    samples: &[TrainSample<'_>],
    kind: LossKind,
    epoch: usize,
) -> Result<f64, EstimatorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sum = 0.0;
    for s in samples {
        let (est, _) = model.forward(&s.start, &s.goal, Mode::Eval, &mut rng)?;
        sum += evaluate(kind, &s.rotation, &est.q_hat, s.points, epoch).value;
    }
    Ok(sum / samples.len().max(1) as f64)
}

/// Shuffled mini-batch Adam over `train`, with the loss chosen per epoch by
/// `cfg.loss`. Validation error is measured after every epoch.
pub fn train(
    mut model: RegressorModel,
    train: &[TrainSample<'_>],
    val: &[TrainSample<'_>],
    cfg: &TrainConfig,
) -> Result<(RegressorModel, Vec<EpochMetrics>), EstimatorError> {
    if train.is_empty() {
        return Err(EstimatorError::EmptyDataset);
    }
    let uses_shapematch = (0..cfg.epochs).any(|e| cfg.loss.at_epoch(e) == LossKind::ShapeMatch);
    if uses_shapematch && train.iter().any(|s| s.points.is_none()) {
        return Err(EstimatorError::MissingPoints("training sample".to_string()));
    }
    let batch = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(model.params().len());
    let mut grads = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let active = cfg.loss.at_epoch(epoch);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(batch) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &idx in chunk {
                let s = &train[idx];
                let (est, cache) = model.forward(&s.start, &s.goal, Mode::Train, &mut rng)?;
                let loss = evaluate(active, &s.rotation, &est.q_hat, s.points, epoch);
                loss_sum += loss.value;
                model.accumulate_backward(&cache, loss.gradient, scale, &mut grads);
            }
            add_l2(model.params(), &mut grads, cfg.l2);
            adam_step(model.params_mut(), &grads, &mut state, &cfg.adam, epoch);
        }
        metrics.push(EpochMetrics {
            epoch,
            learning_rate: cfg.adam.learning_rate_at(epoch),
            loss: active,
            train_loss: loss_sum / train.len() as f64,
            val_mean_angle_deg: mean_angle_error_deg(&model, val)?,
        });
    }
    Ok((model, metrics))
}
