//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fs;
use std::path::Path;
use std::time::Instant;

use common::{data_dir, p, reorient_env, stderr, write_corpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reorient::config::RunConfig;
use reorient::dataset::{generate_dataset, read_dataset};
use reorient::formats::{encode_pgm, read_depth_image};
use reorient::model::{load_model, save_model};
use reorient_core::control::{
    run_controller, sample_trial_pose, Composition, ControllerConfig, ControllerTrace,
    SimEnvironment, TerminalStatus,
};
use reorient_core::estimate::{
    icp_register, IcpConfig, IcpEstimator, Mode, Observation, OracleEstimator, RegressorModel,
    RegressorShape, RotationEstimator,
};
use reorient_core::loss::{evaluate, mean_angle_loss, shapematch_loss, surrogate_loss, LossKind};
use reorient_core::mesh::{rotate_cloud, PointCloud};
use reorient_core::render::{render_depth, CameraModel};
use reorient_core::rotation::{
    angle_between, canonicalize, degrees_between, quat_to_angle, rotation_axis, slerp, to_matrix,
    UnitQuaternion,
};
use reorient_core::sampling::{
    check_constraints, sample_constrained, sample_uniform_so3, sample_unit_vector,
    DEFAULT_MAX_ANGLE,
};

/// Median final error of the noisy-oracle closed loop, frozen after the
/// first verified run.
const FROZEN_NOISY_MEDIAN_DEG: Option<f64> = Some(0.4404);

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("rotation property suite", rotation_suite),
        ("constrained sampler", constrained_sampler),
        ("gradient checks", gradient_checks),
        ("loss argmin equivalence", argmin_equivalence),
        ("symmetry behaviour", symmetry_behaviour),
        ("controller analytic decay", controller_decay),
        ("icp estimator", icp_estimator),
        ("desk-scale learning", desk_scale_learning),
        ("noisy-oracle closed loop", noisy_closed_loop),
        ("persistence", persistence),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  {} [{:.1}s]",
            n + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn close4(a: [f64; 4], b: [f64; 4], tol: f64) -> bool {
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
}

fn same_rotation(a: &UnitQuaternion, b: &UnitQuaternion, tol: f64) -> bool {
    close4(a.to_array(), b.to_array(), tol) || close4(a.to_array(), (-*b).to_array(), tol)
}

fn max_matrix_diff(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let (ma, mb) = (to_matrix(a), to_matrix(b));
    let mut worst: f64 = 0.0;
    for r in 0..3 {
        for c in 0..3 {
            worst = worst.max((ma.0[r][c] - mb.0[r][c]).abs());
        }
    }
    worst
}

fn rotation_suite() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let n = 1000;
    let mut bad = [0usize; 5];
    for _ in 0..n {
        let a = sample_uniform_so3(&mut rng);
        let b = sample_uniform_so3(&mut rng);
        let s: f64 = rng.random_range(0.0..1.0);

        // endpoints
        if !same_rotation(&slerp(&a, &b, 0.0), &a, 1e-12)
            || !same_rotation(&slerp(&a, &b, 1.0), &b, 1e-12)
        {
            bad[0] += 1;
        }
        // geodesic additivity
        let m = slerp(&a, &b, s);
        if (angle_between(&a, &m).0 + angle_between(&m, &b).0 - angle_between(&a, &b).0).abs()
            > 1e-8
        {
            bad[1] += 1;
        }
        // double coverage
        if angle_between(&a, &-a).0 != 0.0
            || max_matrix_diff(&a, &-a) > 1e-12
            || max_matrix_diff(&a, &canonicalize(&a)) > 1e-12
            || canonicalize(&a).r() < 0.0
        {
            bad[2] += 1;
        }
        // angle-axis round trip
        if angle_between(&a, &UnitQuaternion::IDENTITY).0 > 1e-6 {
            let back =
                UnitQuaternion::from_axis_angle(rotation_axis(&a).unwrap(), quat_to_angle(&a).0)
                    .unwrap();
            if !same_rotation(&back, &a, 1e-9) {
                bad[3] += 1;
            }
        }
        // orthonormality
        let mat = to_matrix(&a);
        let prod = mat.matmul(&mat.transpose());
        let mut worst: f64 = (mat.determinant() - 1.0).abs();
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((prod.0[r][c] - if r == c { 1.0 } else { 0.0 }).abs());
            }
        }
        if worst > 1e-12 {
            bad[4] += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        bad.iter().all(|&b| b == 0) && secs < 5.0,
        format!(
            "{n} cases each; failures endpoints={} additivity={} double-cover={} angle-axis={} orthonormal={}; {secs:.3}s",
            bad[0], bad[1], bad[2], bad[3], bad[4]
        ),
    )
}

fn constrained_sampler() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let n = 10_000;
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let q = sample_constrained(&mut rng, DEFAULT_MAX_ANGLE);
        let angle = quat_to_angle(&q).0;
        worst = worst.max(angle);
        if check_constraints(&q, DEFAULT_MAX_ANGLE).is_err() || angle > PI / 6.0 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!(
            "{n} samples, {violations} violations, largest angle {:.4} deg",
            worst.to_degrees()
        ),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff) / norm(a).max(norm(b)).max(1e-12)
}

fn fd4(f: impl Fn(UnitQuaternion) -> f64, at: UnitQuaternion, h: f64) -> [f64; 4] {
    let base = at.to_array();
    std::array::from_fn(|c| {
        let (mut hi, mut lo) = (base, base);
        hi[c] += h;
        lo[c] -= h;
        let q = |v: [f64; 4]| UnitQuaternion::new_unchecked(v[0], v[1], v[2], v[3]);
        (f(q(hi)) - f(q(lo))) / (2.0 * h)
    })
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect(),
    )
    .unwrap()
}

fn regressor_fd(seed: u64, kind: LossKind, mode: Mode) -> f64 {
    let shape = RegressorShape {
        input_side: 3,
        embed: 4,
        hidden: [6, 5],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = RegressorModel::init(shape, &mut rng);
    let n = shape.input_len();
    let start: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let goal: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let q = sample_uniform_so3(&mut rng);
    let cloud = random_cloud(&mut rng, 20);
    let mask_seed: u64 = rng.random();
    let l2 = 1e-3;
    let loss_of = |m: &RegressorModel| {
        let (est, _) = m
            .forward(
                &start,
                &goal,
                mode,
                &mut ChaCha8Rng::seed_from_u64(mask_seed),
            )
            .unwrap();
        evaluate(kind, &q, &est.q_hat, Some(&cloud), 1).value
            + l2 * m.params().iter().map(|w| w * w).sum::<f64>()
    };
    let (est, cache) = model
        .forward(
            &start,
            &goal,
            mode,
            &mut ChaCha8Rng::seed_from_u64(mask_seed),
        )
        .unwrap();
    let analytic = model.backward(
        &cache,
        evaluate(kind, &q, &est.q_hat, Some(&cloud), 1).gradient,
        l2,
    );
    let h = 1e-6;
    let mut probe = model.clone();
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|i| {
            let w = model.params()[i];
            probe.params_mut()[i] = w + h;
            let up = loss_of(&probe);
            probe.params_mut()[i] = w - h;
            let down = loss_of(&probe);
            probe.params_mut()[i] = w;
            (up - down) / (2.0 * h)
        })
        .collect();
    rel_err(&analytic, &numeric)
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let n = 200;
    let (mut mean_worst, mut sur_worst, mut sm_worst, mut reg_worst) = (0f64, 0f64, 0f64, 0f64);
    let mut done = 0;
    while done < n {
        let q = sample_uniform_so3(&mut rng);
        let q_hat = sample_uniform_so3(&mut rng);
        // keep away from the arccos singularity at |<q, q_hat>| = 1
        if q.dot(&q_hat).abs() > 0.95 {
            continue;
        }
        let numeric = fd4(|x| mean_angle_loss(&q, &x).value, q_hat, 1e-6);
        mean_worst = mean_worst.max(rel_err(&mean_angle_loss(&q, &q_hat).gradient, &numeric));
        let numeric = fd4(|x| surrogate_loss(&q, &x).value, q_hat, 1e-6);
        sur_worst = sur_worst.max(rel_err(&surrogate_loss(&q, &q_hat).gradient, &numeric));
        done += 1;
    }
    for _ in 0..n {
        let cloud = random_cloud(&mut rng, 20);
        let q = sample_uniform_so3(&mut rng);
        let q_hat = sample_uniform_so3(&mut rng);
        let numeric = fd4(|x| shapematch_loss(&q, &x, &cloud).value, q_hat, 1e-7);
        sm_worst = sm_worst.max(rel_err(
            &shapematch_loss(&q, &q_hat, &cloud).gradient,
            &numeric,
        ));
    }
    for seed in 0..n as u64 {
        let (kind, mode) = if seed % 2 == 0 {
            (LossKind::Surrogate, Mode::Train)
        } else {
            (LossKind::ShapeMatch, Mode::Eval)
        };
        reg_worst = reg_worst.max(regressor_fd(10_000 + seed, kind, mode));
    }
    outcome(
        mean_worst < 1e-5 && sur_worst < 1e-5 && sm_worst < 1e-5 && reg_worst < 1e-4,
        format!(
            "{n} instances; worst rel err mean-angle {mean_worst:.1e}, surrogate {sur_worst:.1e}, shapematch {sm_worst:.1e}, regressor {reg_worst:.1e}"
        ),
    )
}

fn argmin(values: impl Iterator<Item = f64>) -> usize {
    values
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |best, (i, v)| if v < best.1 { (i, v) } else { best },
        )
        .0
}

fn argmin_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let sets = 100;
    let agree = (0..sets)
        .filter(|_| {
            let q = sample_uniform_so3(&mut rng);
            let cands: Vec<_> = (0..50).map(|_| sample_uniform_so3(&mut rng)).collect();
            argmin(cands.iter().map(|c| mean_angle_loss(&q, c).value))
                == argmin(cands.iter().map(|c| surrogate_loss(&q, c).value))
        })
        .count();
    outcome(
        agree == sets,
        format!("{agree}/{sets} candidate sets share the argmin"),
    )
}

fn symmetry_behaviour() -> Outcome {
    let mut verts = Vec::new();
    for x in [-1.0, 1.0] {
        for y in [-1.0, 1.0] {
            for z in [-1.0, 1.0] {
                verts.push([x, y, z]);
            }
        }
    }
    let cube = PointCloud::new(verts).unwrap();
    let q = UnitQuaternion::IDENTITY;
    let q_hat = UnitQuaternion::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_2).unwrap();
    let sm = shapematch_loss(&q, &q_hat, &cube).value;
    let ma = mean_angle_loss(&q, &q_hat).value;
    outcome(
        sm < 1e-10 && (ma - FRAC_PI_4).abs() < 1e-12,
        format!("shapematch {sm:.2e}, mean-angle {ma:.15} (pi/4 = {FRAC_PI_4:.15})"),
    )
}

fn oracle_episode(composition: Composition, seed: u64) -> ControllerTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (start, goal) = sample_trial_pose(&mut rng, 30.0);
    let mut env = SimEnvironment::new(
        common::lumpy(0),
        CameraModel::with_resolution(32, 32),
        start,
        goal,
    );
    let goal_img = env.render_goal().unwrap();
    let cfg = ControllerConfig {
        composition,
        ..ControllerConfig::default()
    };
    run_controller(&mut env, &mut OracleEstimator::exact(), &goal_img, &cfg).unwrap()
}

fn controller_decay() -> Outcome {
    // first k with 30 * 0.8^k <= 0.5
    let expected_k = (0..).find(|&k| 30.0 * 0.8f64.powi(k) <= 0.5).unwrap() as usize;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for seed in 0..10 {
        let trace = oracle_episode(Composition::Left, 600 + seed);
        for e in &trace.entries {
            let want = 30f64.to_radians() * 0.8f64.powi(e.k as i32);
            worst = worst.max((e.true_err_deg.to_radians() - want).abs());
        }
        ok &= trace.status == TerminalStatus::Converged
            && trace.steps == expected_k
            && trace.entries.last().map(|e| e.k) == Some(expected_k);
    }
    let right = oracle_episode(Composition::Right, 600);
    let right_note = format!(
        "right composition: {:?} after {} iterations, final error {:.3} deg (recorded only)",
        right.status,
        right.iterations,
        right.final_error_deg()
    );
    outcome(
        ok && worst < 1e-6,
        format!("left composition converges at k={expected_k} in 10/10 episodes, worst deviation {worst:.1e} rad; {right_note}"),
    )
}

fn icp_estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let cloud = common::lumpy(0).vertex_cloud();
    let mut exact_worst: f64 = 0.0;
    for _ in 0..50 {
        let q = sample_constrained(&mut rng, DEFAULT_MAX_ANGLE);
        let out = icp_register(&cloud, &rotate_cloud(&cloud, &q), &IcpConfig::default()).unwrap();
        exact_worst = exact_worst.max(angle_between(&out.rotation.to_quaternion(), &q).0);
    }

    let cam = CameraModel::with_resolution(96, 96);
    let mut icp = IcpEstimator::new(cam, IcpConfig::default());
    let trials = 50;
    let mut wins = 0;
    for t in 0..trials {
        let mesh = common::lumpy(t % 3);
        let start = sample_uniform_so3(&mut rng);
        let rel = UnitQuaternion::from_axis_angle(sample_unit_vector(&mut rng), 10f64.to_radians())
            .unwrap();
        let a = render_depth(&mesh, &start, &cam).unwrap();
        let b = render_depth(&mesh, &(rel * start), &cam).unwrap();
        let obs = Observation {
            current: &a,
            goal: &b,
            privileged: None,
        };
        if let Ok(est) = icp.estimate(&obs) {
            if degrees_between(&est.q_hat, &rel) < 10.0 {
                wins += 1;
            }
        }
    }
    outcome(
        exact_worst <= 1e-6 && wins * 10 >= trials * 9,
        format!(
            "perfect correspondence worst {exact_worst:.1e} rad; rendered 10 deg pairs under 10 deg error in {wins}/{trials}"
        ),
    )
}

fn run_cli(args: &[&str]) -> bool {
    let o = reorient_env(args, "REORIENT_THREADS", "1");
    if !o.status.success() {
        eprintln!("reorient {args:?} failed: {}", stderr(&o));
    }
    o.status.success()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn desk_scale_learning() -> Outcome {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let meshes = write_corpus(&dir.path().join("meshes"), false, &[0, 1, 2]);
    let data = dir.path().join("data");
    let model = dir.path().join("model");
    let render_side = ["--set", "width=64", "--set", "height=64"];
    let mut gen = vec![
        "gen-dataset",
        "--meshes",
        p(&meshes),
        "--per-object",
        "200",
        "--seed",
        "1",
        "--out",
        p(&data),
    ];
    gen.extend(render_side);
    if !run_cli(&gen) {
        return outcome(false, "dataset generation failed");
    }
    let train = [
        "train",
        "--dataset",
        p(&data),
        "--meshes",
        p(&meshes),
        "--epochs",
        "30",
        "--seed",
        "1",
        "--set",
        "split=pair",
        "--set",
        "input_side=32",
        "--out",
        p(&model),
    ];
    if !run_cli(&train) {
        return outcome(false, "training failed");
    }
    let summary = json(&model.join("summary.json"));
    let held_out = summary["final_val_mean_angle_deg"].as_f64().unwrap();
    let baseline = summary["identity_baseline_deg"].as_f64().unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        held_out < 0.5 * baseline && secs < 600.0,
        format!(
            "600 pairs, {} held out; mean angle error {held_out:.2} deg vs identity baseline {baseline:.2} deg (needs < {:.2}); {secs:.0}s single-threaded",
            summary["val_records"],
            0.5 * baseline
        ),
    )
}

fn noisy_closed_loop() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let meshes = write_corpus(&dir.path().join("meshes"), false, &[0, 1, 2, 3]);
    let out = dir.path().join("run");
    let args = [
        "run-controller",
        "--meshes",
        p(&meshes),
        "--estimator",
        "oracle",
        "--noise-ratio",
        "0.1",
        "--trials",
        "25",
        "--seed",
        "9",
        "--set",
        "width=32",
        "--set",
        "height=32",
        "--out",
        p(&out),
    ];
    if !run_cli(&args) {
        return outcome(false, "run-controller failed");
    }
    let mut r = csv::Reader::from_path(out.join("trials.csv")).unwrap();
    let finals: Vec<f64> = r
        .deserialize::<(String, usize, f64, f64, String, usize, usize)>()
        .map(|row| row.unwrap().3)
        .collect();
    let below = finals.iter().filter(|&&e| e < 30.0).count();
    let median = json(&out.join("summary.json"))["median_final_err_deg"]
        .as_f64()
        .unwrap();
    let (frozen_ok, frozen_note) = match FROZEN_NOISY_MEDIAN_DEG {
        Some(f) => (
            (median - f).abs() <= 0.2 * f,
            format!("frozen {f:.4} deg, tolerance 20%"),
        ),
        None => (false, "no frozen value recorded yet".to_string()),
    };
    outcome(
        finals.len() == 100 && below == 100 && frozen_ok,
        format!("{below}/{} trials end below 30 deg; median final error {median:.4} deg ({frozen_note})", finals.len()),
    )
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();

    let cfg = RunConfig {
        seed: 10,
        camera: CameraModel::with_resolution(32, 32),
        per_object: 20,
        ..RunConfig::default()
    };
    let meshes = vec![
        ("a".to_string(), common::lumpy(0)),
        ("b".to_string(), common::lumpy(3)),
    ];
    let manifest = generate_dataset(&meshes, &cfg, &dir.path().join("d"), false).unwrap();
    let data = read_dataset(dir.path().join("d")).unwrap();
    let bits = |q: [f64; 4]| q.map(f64::to_bits);
    let dataset_ok = data.entries == manifest.entries
        && data.records.iter().zip(&manifest.entries).all(|(r, e)| {
            bits(r.relative_rotation.to_array()) == bits(e.relative_rotation)
                && bits(r.start_orientation.to_array()) == bits(e.start_orientation)
        })
        && data.records.iter().zip(&data.entries).all(|(r, e)| {
            let root = dir.path().join("d");
            let disk = |rel: &str| fs::read(root.join(rel)).unwrap();
            encode_pgm(&r.start_image) == disk(&e.start_image)
                && encode_pgm(&r.goal_image) == disk(&e.goal_image)
        });
    notes.push(format!(
        "dataset {} records {}",
        data.records.len(),
        if dataset_ok { "exact" } else { "DIFFER" }
    ));

    let model = RegressorModel::init(
        RegressorShape::default(),
        &mut ChaCha8Rng::seed_from_u64(10),
    );
    save_model(dir.path().join("m.bin"), &model).unwrap();
    let back = load_model(dir.path().join("m.bin")).unwrap();
    let model_ok = back.shape() == model.shape()
        && back
            .params()
            .iter()
            .map(|p| p.to_bits())
            .eq(model.params().iter().map(|p| p.to_bits()));
    notes.push(format!(
        "model {} params {}",
        model.params().len(),
        if model_ok { "exact" } else { "DIFFER" }
    ));

    let golden = fs::read(data_dir().join("cube_identity.pgm")).unwrap();
    let mut golden_ok = true;
    for run in 0..2 {
        let out = dir.path().join(format!("cube{run}.pgm"));
        golden_ok &= run_cli(&[
            "render",
            "--mesh",
            p(&data_dir().join("cube.obj")),
            "--out",
            p(&out),
        ]) && fs::read(&out).unwrap() == golden;
    }
    let (img, _) = read_depth_image(data_dir().join("cube_identity.pgm")).unwrap();
    golden_ok &= encode_pgm(&img) == golden;
    notes.push(format!(
        "golden PGM {}",
        if golden_ok {
            "byte-identical over 2 runs"
        } else {
            "DIFFERS"
        }
    ));

    outcome(dataset_ok && model_ok && golden_ok, notes.join("; "))
}
