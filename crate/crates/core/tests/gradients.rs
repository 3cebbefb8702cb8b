use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reorient_core::estimate::regressor::normalization_backward;
use reorient_core::estimate::{Mode, RegressorModel, RegressorShape};
use reorient_core::loss::*;
use reorient_core::mesh::PointCloud;
use reorient_core::rotation::UnitQuaternion;
use reorient_core::sampling::sample_uniform_so3;

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt())
        .max(1e-12);
    diff / scale
}

/// Central differences of `f` over the raw (unnormalized) 4 components.
fn fd4(f: impl Fn(UnitQuaternion) -> f64, at: UnitQuaternion, h: f64) -> [f64; 4] {
    let base = at.to_array();
    let mut g = [0.0; 4];
    for c in 0..4 {
        let mut p = base;
        let mut m = base;
        p[c] += h;
        m[c] -= h;
        let qp = UnitQuaternion::new_unchecked(p[0], p[1], p[2], p[3]);
        let qm = UnitQuaternion::new_unchecked(m[0], m[1], m[2], m[3]);
        g[c] = (f(qp) - f(qm)) / (2.0 * h);
    }
    g
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn mean_angle_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    while checked < 200 {
        let q = sample_uniform_so3(&mut rng);
        let q_hat = sample_uniform_so3(&mut rng);
        if q.dot(&q_hat).abs() > 0.95 {
            continue;
        }
        let analytic = mean_angle_loss(&q, &q_hat);
        assert!(analytic.flag.is_none());
        let numeric = fd4(|p| mean_angle_loss(&q, &p).value, q_hat, 1e-6);
        let e = rel_err(&analytic.gradient, &numeric);
        assert!(e < 1e-5, "rel err {e}");
        checked += 1;
    }
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let q = sample_uniform_so3(&mut rng);
        let q_hat = sample_uniform_so3(&mut rng);
        let numeric = fd4(|p| surrogate_loss(&q, &p).value, q_hat, 1e-6);
        let e = rel_err(&surrogate_loss(&q, &q_hat).gradient, &numeric);
        assert!(e < 1e-5, "rel err {e}");
    }
}

#[test]
fn shapematch_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let cloud = random_cloud(&mut rng, 20);
        let q = sample_uniform_so3(&mut rng);
        let q_hat = sample_uniform_so3(&mut rng);
        let numeric = fd4(|p| shapematch_loss(&q, &p, &cloud).value, q_hat, 1e-7);
        let e = rel_err(&shapematch_loss(&q, &q_hat, &cloud).gradient, &numeric);
        assert!(e < 1e-4, "rel err {e}");
    }
}

#[test]
fn singular_mean_angle_is_flagged() {
    let q = UnitQuaternion::IDENTITY;
    let r = mean_angle_loss(&q, &q);
    assert_eq!(r.flag, Some(LossFlag::GradientSingularity));
    assert_eq!(r.value, 0.0);
    assert!(r.gradient.iter().all(|g| g.is_finite()));
}

#[test]
fn normalization_backward_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let raw: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let upstream: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
        let sign = if raw[0] >= 0.0 { 1.0 } else { -1.0 };
        let f = |v: [f64; 4]| {
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            v.iter()
                .zip(&upstream)
                .map(|(c, u)| sign * c / n * u)
                .sum::<f64>()
        };
        let mut numeric = [0.0; 4];
        for c in 0..4 {
            let (mut p, mut m) = (raw, raw);
            p[c] += 1e-6;
            m[c] -= 1e-6;
            numeric[c] = (f(p) - f(m)) / 2e-6;
        }
        let e = rel_err(&normalization_backward(raw, norm, sign, upstream), &numeric);
        assert!(e < 1e-6, "rel err {e}");
    }
}

fn toy() -> RegressorShape {
    RegressorShape {
        input_side: 3,
        embed: 4,
        hidden: [6, 5],
    }
}

fn regressor_case(seed: u64, kind: LossKind, mode: Mode) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = RegressorModel::init(toy(), &mut rng);
    let n = toy().input_len();
    let start: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let goal: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let q = sample_uniform_so3(&mut rng);
    let cloud = random_cloud(&mut rng, 20);
    let mask_seed: u64 = rng.random();
    let l2 = 1e-3;

    let loss_of = |m: &RegressorModel| {
        let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
        let (est, _) = m.forward(&start, &goal, mode, &mut r).unwrap();
        let data = evaluate(kind, &q, &est.q_hat, Some(&cloud), 1).value;
        data + l2 * m.params().iter().map(|w| w * w).sum::<f64>()
    };
    let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
    let (est, cache) = model.forward(&start, &goal, mode, &mut r).unwrap();
    let loss = evaluate(kind, &q, &est.q_hat, Some(&cloud), 1);
    let analytic = model.backward(&cache, loss.gradient, l2);

    let h = 1e-6;
    let mut probe = model.clone();
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|i| {
            let w = model.params()[i];
            probe.params_mut()[i] = w + h;
            let lp = loss_of(&probe);
            probe.params_mut()[i] = w - h;
            let lm = loss_of(&probe);
            probe.params_mut()[i] = w;
            (lp - lm) / (2.0 * h)
        })
        .collect();
    rel_err(&analytic, &numeric)
}

#[test]
fn regressor_backward_matches_finite_differences() {
    for seed in 0..100 {
        let e = regressor_case(seed, LossKind::Surrogate, Mode::Train);
        assert!(e < 1e-4, "seed {seed}: rel err {e}");
        let e = regressor_case(1000 + seed, LossKind::ShapeMatch, Mode::Eval);
        assert!(e < 1e-4, "seed {seed}: rel err {e}");
    }
}
