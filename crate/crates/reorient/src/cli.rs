//! The `reorient` command-line harness.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use reorient_core::control::{
    run_controller, sample_trial_pose, summarize, SimEnvironment, TerminalStatus, TrialResult,
};
use reorient_core::dataset::{record_seed, split_train_test, DatasetRecord};
use reorient_core::estimate::train::{mean_angle_error_deg, prepare_samples, train};
use reorient_core::estimate::{
    EstimatorError, IcpEstimator, IdentityEstimator, Observation, OracleEstimator, Privileged,
    RegressorEstimator, RegressorModel, RotationEstimator,
};
use reorient_core::loss::shapematch_loss;
use reorient_core::mesh::{
    default_symmetry_threshold, is_symmetric, sample_vertices, symmetry_score, PointCloud,
    TriangleMesh,
};
use reorient_core::render::render_depth;
use reorient_core::rotation::{degrees_between, quat_to_angle, UnitQuaternion};
use serde::Serialize;

use crate::config::{
    estimator_name, loss_name, parse_composition, parse_estimator, parse_loss, EstimatorKind,
    RunConfig, SplitMode,
};
use crate::dataset::{generate_dataset, prepare_out_dir, read_dataset};
use crate::error::{Error, Result};
use crate::formats::{load_mesh_dir, load_obj, read_depth_image, write_depth_image, write_json};
use crate::model::{load_model_with_shape, save_model};
use crate::report::{
    bin_errors, mean, median, write_csv, EvalRow, MetricsRow, SymmetryRow, TraceRow, TrialRow,
};

pub const RESOLVED_CONFIG: &str = "resolved_config.txt";
pub const THREADS_ENV: &str = "REORIENT_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "reorient",
    version,
    about = "Reorient objects from depth images"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// Global RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra key=value overrides, applied after --config.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Output directory, or file for render and symmetry-filter.
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// oracle, icp, regressor or identity.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Model file for the regressor.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Oracle noise ratio ε.
    #[arg(long)]
    pub noise_ratio: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render training pairs for every mesh in a directory.
    GenDataset {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        meshes: PathBuf,
        #[arg(long)]
        per_object: Option<usize>,
    },
    /// Score meshes for rotational self-symmetry.
    SymmetryFilter {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        meshes: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Train the regressor on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        /// Mesh directory, needed for ShapeMatch epochs.
        #[arg(long)]
        meshes: Option<PathBuf>,
        /// mean, shapematch or hybrid.
        #[arg(long)]
        loss: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Per-sample estimator errors on a dataset.
    EvalEstimator {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// Mesh directory; adds a ShapeMatch column.
        #[arg(long)]
        meshes: Option<PathBuf>,
    },
    /// Closed-loop controller trials in simulation.
    RunController {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        meshes: PathBuf,
        #[command(flatten)]
        estimator: EstimatorArgs,
        /// right or left.
        #[arg(long)]
        composition: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Render one mesh at one orientation to a PGM.
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mesh: PathBuf,
        /// Unit quaternion as r,i,j,k.
        #[arg(long, allow_hyphen_values = true, default_value = "1,0,0,0")]
        quat: String,
    },
}

/// Runs one invocation and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let pool = thread_pool()?;
    pool.install(|| match cli.command {
        Command::GenDataset {
            common,
            meshes,
            per_object,
        } => cmd_gen_dataset(&common, &meshes, per_object),
        Command::SymmetryFilter {
            common,
            meshes,
            threshold,
        } => cmd_symmetry_filter(&common, &meshes, threshold),
        Command::Train {
            common,
            dataset,
            meshes,
            loss,
            epochs,
        } => cmd_train(
            &common,
            &dataset,
            meshes.as_deref(),
            loss.as_deref(),
            epochs,
        ),
        Command::EvalEstimator {
            common,
            dataset,
            estimator,
            meshes,
        } => cmd_eval_estimator(&common, &dataset, &estimator, meshes.as_deref()),
        Command::RunController {
            common,
            meshes,
            estimator,
            composition,
            trials,
            eta,
        } => cmd_run_controller(
            &common,
            &meshes,
            &estimator,
            composition.as_deref(),
            trials,
            eta,
        ),
        Command::Render { common, mesh, quat } => cmd_render(&common, &mesh, &quat),
    })
}

/// A rayon pool capped by `REORIENT_THREADS` when set.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
            Error::usage(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| Error::usage(e.to_string()))
}

/// Defaults, then `--config`, then `--set`, then `--seed`.
fn resolve(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn apply_estimator_args(cfg: &mut RunConfig, args: &EstimatorArgs) -> Result<()> {
    if let Some(e) = &args.estimator {
        cfg.estimator = parse_estimator(e)?;
    }
    if let Some(r) = args.noise_ratio {
        cfg.noise_ratio = r;
    }
    if cfg.estimator == EstimatorKind::Regressor && args.model.is_none() {
        return Err(Error::usage("--estimator regressor needs --model"));
    }
    Ok(())
}

/// Sibling path for a file output's resolved config: `x/a.pgm` → `x/a.config.txt`.
fn file_snapshot_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.config.txt"))
}

fn ensure_file_free(path: &Path, force: bool) -> Result<()> {
    if path.exists() && !force {
        return Err(Error::Exists {
            path: path.to_path_buf(),
        });
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<Vec<(String, TriangleMesh)>> {
    let meshes = load_mesh_dir(dir)?;
    if meshes.is_empty() {
        return Err(Error::usage(format!("no .obj meshes in {}", dir.display())));
    }
    Ok(meshes)
}

/// Vertex clouds capped at `cfg.max_vertices`, one per object.
fn object_clouds(meshes: &[(String, TriangleMesh)], cfg: &RunConfig) -> Vec<(String, PointCloud)> {
    meshes
        .iter()
        .map(|(id, m)| {
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed(cfg.seed, id, u64::MAX));
            (id.clone(), sample_vertices(m, cfg.max_vertices, &mut rng))
        })
        .collect()
}

fn cloud_for<'a>(clouds: &'a [(String, PointCloud)], id: &str) -> Option<&'a PointCloud> {
    clouds.iter().find(|(k, _)| k == id).map(|(_, c)| c)
}

fn cmd_gen_dataset(common: &Common, meshes: &Path, per_object: Option<usize>) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(n) = per_object {
        cfg.per_object = n;
    }
    cfg.validate()?;
    if cfg.per_object == 0 {
        return Err(Error::usage("--per-object must be at least 1"));
    }
    let corpus = load_corpus(meshes)?;
    let manifest = generate_dataset(&corpus, &cfg, &common.out, common.force)?;
    cfg.write(common.out.join(RESOLVED_CONFIG))?;
    let check = read_dataset(&common.out)?;
    if check.records.len() != manifest.entries.len() {
        return Err(Error::format(
            &common.out,
            "written dataset does not read back",
        ));
    }
    println!(
        "{} ({} records)",
        common.out.join(crate::dataset::MANIFEST_FILE).display(),
        manifest.entries.len()
    );
    Ok(())
}

fn cmd_symmetry_filter(common: &Common, meshes: &Path, threshold: Option<f64>) -> Result<()> {
    let mut cfg = resolve(common)?;
    if threshold.is_some() {
        cfg.symmetry_threshold = threshold;
    }
    cfg.validate()?;
    if cfg
        .symmetry_threshold
        .is_some_and(|t| t.is_nan() || t < 0.0)
    {
        return Err(Error::usage("threshold must be nonnegative"));
    }
    let corpus = load_corpus(meshes)?;
    ensure_file_free(&common.out, common.force)?;
    let rows: Vec<SymmetryRow> = corpus
        .par_iter()
        .map(|(id, mesh)| {
            let score = symmetry_score(mesh);
            let threshold = cfg
                .symmetry_threshold
                .unwrap_or_else(|| default_symmetry_threshold(mesh));
            SymmetryRow {
                object_id: id.clone(),
                score,
                threshold,
                flagged: is_symmetric(score, threshold),
            }
        })
        .collect();
    write_csv(&common.out, &rows)?;
    cfg.write(file_snapshot_path(&common.out))?;
    let flagged = rows.iter().filter(|r| r.flagged).count();
    println!("{flagged} of {} meshes flagged as symmetric", rows.len());
    Ok(())
}

/// Splits records into train and validation sets.
fn split_records(
    records: &[DatasetRecord],
    cfg: &RunConfig,
) -> Result<(Vec<DatasetRecord>, Vec<DatasetRecord>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.split {
        SplitMode::Object => {
            let mut objects: Vec<String> = records.iter().map(|r| r.object_id.clone()).collect();
            objects.dedup();
            objects.sort();
            objects.dedup();
            let (train_ids, _) = split_train_test(&objects, cfg.train_fraction, &mut rng)?;
            Ok(records
                .iter()
                .cloned()
                .partition(|r| train_ids.contains(&r.object_id)))
        }
        SplitMode::Pair => {
            let idx: Vec<usize> = (0..records.len()).collect();
            let (tr, te) = split_train_test(&idx, cfg.train_fraction, &mut rng)?;
            Ok((
                tr.iter().map(|&i| records[i].clone()).collect(),
                te.iter().map(|&i| records[i].clone()).collect(),
            ))
        }
    }
}

#[derive(Serialize)]
struct TrainSummary {
    train_records: usize,
    val_records: usize,
    train_objects: Vec<String>,
    val_objects: Vec<String>,
    final_val_mean_angle_deg: f64,
    identity_baseline_deg: f64,
}

fn distinct_ids(records: &[DatasetRecord]) -> Vec<String> {
    let mut ids: Vec<String> = records.iter().map(|r| r.object_id.clone()).collect();
    ids.sort();
    ids.dedup();
    ids
}

fn cmd_train(
    common: &Common,
    dataset: &Path,
    meshes: Option<&Path>,
    loss: Option<&str>,
    epochs: Option<usize>,
) -> Result<()> {
    let mut cfg = resolve(common)?;
    if let Some(l) = loss {
        cfg.loss = parse_loss(l)?;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    cfg.validate()?;
    let needs_points = (0..cfg.epochs).any(|e| cfg.loss.at_epoch(e).needs_points());
    if needs_points && meshes.is_none() {
        return Err(Error::usage(format!(
            "loss {} needs --meshes",
            loss_name(cfg.loss)
        )));
    }
    let data = read_dataset(dataset)?;
    let clouds = match meshes {
        Some(dir) => object_clouds(&load_corpus(dir)?, &cfg),
        None => Vec::new(),
    };
    let (train_recs, val_recs) = split_records(&data.records, &cfg)?;
    let side = cfg.shape.input_side;
    let lookup = |id: &str| cloud_for(&clouds, id);
    let train_set = prepare_samples(&train_recs, side, lookup, needs_points)?;
    let val_set = prepare_samples(&val_recs, side, lookup, needs_points)?;

    prepare_out_dir(&common.out, common.force)?;
    let mut model = RegressorModel::init(cfg.shape, &mut ChaCha8Rng::seed_from_u64(cfg.seed));
    model.leaky_slope = cfg.leaky_slope;
    model.dropout = cfg.dropout_rate;
    let (model, metrics) = train(model, &train_set, &val_set, &cfg.train_config())?;

    let rows: Vec<MetricsRow> = metrics
        .iter()
        .map(|m| MetricsRow {
            epoch: m.epoch,
            lr: m.learning_rate,
            loss: loss_name(m.loss),
            train_loss: m.train_loss,
            val_mean_angle_deg: m.val_mean_angle_deg,
        })
        .collect();
    for r in &rows {
        println!(
            "epoch {} loss={} lr={} train_loss={:.6} val_mean_angle_deg={:.3}",
            r.epoch, r.loss, r.lr, r.train_loss, r.val_mean_angle_deg
        );
    }
    let model_path = common.out.join("model.bin");
    save_model(&model_path, &model)?;
    let reloaded = load_model_with_shape(&model_path, &cfg.shape)?;
    if reloaded.params() != model.params() {
        return Err(Error::format(&model_path, "saved model does not read back"));
    }
    write_csv(common.out.join("metrics.csv"), &rows)?;
    let baseline = mean(
        &val_recs
            .iter()
            .map(|r| quat_to_angle(&r.relative_rotation.canonicalize()).degrees())
            .collect::<Vec<_>>(),
    );
    write_json(
        common.out.join("summary.json"),
        &TrainSummary {
            train_records: train_recs.len(),
            val_records: val_recs.len(),
            train_objects: distinct_ids(&train_recs),
            val_objects: distinct_ids(&val_recs),
            final_val_mean_angle_deg: mean_angle_error_deg(&model, &val_set)?,
            identity_baseline_deg: baseline,
        },
    )?;
    cfg.write(common.out.join(RESOLVED_CONFIG))?;
    println!("{}", model_path.display());
    Ok(())
}

/// Builds a fresh estimator. `seed` only matters for the noisy oracle.
fn make_estimator(
    cfg: &RunConfig,
    model: Option<&RegressorModel>,
    seed: u64,
) -> Box<dyn RotationEstimator + Send> {
    match cfg.estimator {
        EstimatorKind::Oracle => Box::new(OracleEstimator::noisy(cfg.noise_ratio, seed)),
        EstimatorKind::Icp => Box::new(IcpEstimator::new(cfg.camera, cfg.icp)),
        EstimatorKind::Regressor => Box::new(RegressorEstimator {
            model: model.expect("checked by apply_estimator_args").clone(),
        }),
        EstimatorKind::Identity => Box::new(IdentityEstimator),
    }
}

#[derive(Serialize)]
struct EvalSummary {
    estimator: &'static str,
    noise_ratio: f64,
    count: usize,
    failures: usize,
    mean_err_deg: f64,
    median_err_deg: f64,
    mean_baseline_err_deg: f64,
}

fn cmd_eval_estimator(
    common: &Common,
    dataset: &Path,
    est: &EstimatorArgs,
    meshes: Option<&Path>,
) -> Result<()> {
    let mut cfg = resolve(common)?;
    apply_estimator_args(&mut cfg, est)?;
    cfg.validate()?;
    let data = read_dataset(dataset)?;
    // the images were rendered with the dataset's camera
    cfg.camera = data.header.config.camera.into();
    let model = match &est.model {
        Some(p) if cfg.estimator == EstimatorKind::Regressor => {
            Some(load_model_with_shape(p, &cfg.shape)?)
        }
        _ => None,
    };
    let clouds = match meshes {
        Some(dir) => object_clouds(&load_corpus(dir)?, &cfg),
        None => Vec::new(),
    };
    prepare_out_dir(&common.out, common.force)?;

    let rows = data
        .records
        .par_iter()
        .zip(data.entries.par_iter())
        .map(|(r, e)| {
            let seed = record_seed(cfg.seed, &r.object_id, e.index as u64);
            let mut estimator = make_estimator(&cfg, model.as_ref(), seed);
            let estimate = estimator.estimate(&Observation {
                current: &r.start_image,
                goal: &r.goal_image,
                privileged: Some(Privileged::from_relative(r.relative_rotation)),
            });
            // an unusable observation is scored as "no rotation" rather than aborting the run
            let (q_hat, failed) = match estimate {
                Ok(out) => (out.q_hat, false),
                Err(EstimatorError::NoObjectPixels | EstimatorError::DegenerateCloud) => {
                    (UnitQuaternion::IDENTITY, true)
                }
                Err(e) => return Err(e.into()),
            };
            let truth = r.relative_rotation;
            Ok(EvalRow {
                object_id: r.object_id.clone(),
                index: e.index,
                true_angle_deg: quat_to_angle(&truth.canonicalize()).degrees(),
                err_deg: degrees_between(&q_hat, &truth),
                baseline_err_deg: degrees_between(&UnitQuaternion::IDENTITY, &truth),
                shapematch_loss: cloud_for(&clouds, &r.object_id)
                    .map(|c| shapematch_loss(&truth, &q_hat, c).value),
                failed,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    write_csv(common.out.join("samples.csv"), &rows)?;
    write_csv(common.out.join("bins.csv"), &bin_errors(&rows, 5.0))?;
    let errs: Vec<f64> = rows.iter().map(|r| r.err_deg).collect();
    let base: Vec<f64> = rows.iter().map(|r| r.baseline_err_deg).collect();
    let summary = EvalSummary {
        estimator: estimator_name(cfg.estimator),
        noise_ratio: cfg.noise_ratio,
        count: rows.len(),
        failures: rows.iter().filter(|r| r.failed).count(),
        mean_err_deg: mean(&errs),
        median_err_deg: median(&errs),
        mean_baseline_err_deg: mean(&base),
    };
    write_json(common.out.join("summary.json"), &summary)?;
    cfg.write(common.out.join(RESOLVED_CONFIG))?;
    println!(
        "{}: mean error {:.3} deg over {} samples, {} failed (identity baseline {:.3} deg)",
        summary.estimator,
        summary.mean_err_deg,
        summary.count,
        summary.failures,
        summary.mean_baseline_err_deg
    );
    Ok(())
}

#[derive(Serialize)]
struct ControllerSummaryJson {
    estimator: &'static str,
    trials: usize,
    median_final_err_deg: f64,
    mean_final_err_deg: f64,
    p90_final_err_deg: f64,
    convergence_rate: f64,
    config: std::collections::BTreeMap<&'static str, String>,
}

fn status_name(s: TerminalStatus) -> &'static str {
    match s {
        TerminalStatus::Converged => "converged",
        TerminalStatus::MaxIterations => "max_iterations",
    }
}

fn cmd_run_controller(
    common: &Common,
    meshes: &Path,
    est: &EstimatorArgs,
    composition: Option<&str>,
    trials: Option<usize>,
    eta: Option<f64>,
) -> Result<()> {
    let mut cfg = resolve(common)?;
    apply_estimator_args(&mut cfg, est)?;
    if let Some(c) = composition {
        cfg.controller.composition = parse_composition(c)?;
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(e) = eta {
        cfg.controller.eta = e;
    }
    cfg.validate()?;
    let model = match &est.model {
        Some(p) if cfg.estimator == EstimatorKind::Regressor => {
            Some(load_model_with_shape(p, &cfg.shape)?)
        }
        _ => None,
    };
    let corpus = load_corpus(meshes)?;
    prepare_out_dir(&common.out, common.force)?;
    let trace_dir = common.out.join("traces");
    fs::create_dir_all(&trace_dir).map_err(|e| Error::io(&trace_dir, e))?;

    let trial_cfg = cfg.trial_config();
    let jobs: Vec<(usize, usize)> = (0..corpus.len())
        .flat_map(|m| (0..cfg.trials).map(move |t| (m, t)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(m, t)| {
            let (id, mesh) = &corpus[m];
            let seed = record_seed(cfg.seed, id, t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (start, goal) = sample_trial_pose(&mut rng, trial_cfg.initial_angle_deg);
            let mut env = SimEnvironment::new(mesh.clone(), trial_cfg.camera, start, goal);
            if let Some((occlusion, dropout)) = trial_cfg.randomize {
                env = env.with_randomization(occlusion, dropout, seed ^ 0x5eed);
            }
            let initial = env.true_error_deg();
            let goal_img = env.render_goal()?;
            let mut estimator = make_estimator(&cfg, model.as_ref(), seed.wrapping_add(1));
            let trace =
                run_controller(&mut env, &mut *estimator, &goal_img, &trial_cfg.controller)?;
            let rows: Vec<TraceRow> = trace
                .entries
                .iter()
                .map(|e| {
                    let [qr, qi, qj, qk] = e.orientation.to_array();
                    TraceRow {
                        k: e.k,
                        qr,
                        qi,
                        qj,
                        qk,
                        pred_angle_deg: e.pred_angle_deg,
                        true_err_deg: e.true_err_deg,
                    }
                })
                .collect();
            write_csv(trace_dir.join(format!("{id}_{t}.csv")), &rows)?;
            Ok((
                TrialResult {
                    object_id: id.clone(),
                    trial: t,
                    initial_err_deg: initial,
                    final_err_deg: trace.final_error_deg(),
                    status: trace.status,
                    iterations: trace.iterations,
                    steps: trace.steps,
                },
                trace.entries.last().map_or(0, |e| e.k),
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    for (r, last_k) in &results {
        match r.status {
            TerminalStatus::Converged => println!(
                "{} trial {}: converged at k={} ({} iterations), final error {:.4} deg",
                r.object_id, r.trial, last_k, r.iterations, r.final_err_deg
            ),
            TerminalStatus::MaxIterations => println!(
                "{} trial {}: stopped after {} iterations, final error {:.4} deg",
                r.object_id, r.trial, r.iterations, r.final_err_deg
            ),
        }
    }
    let trials: Vec<TrialResult> = results.into_iter().map(|(r, _)| r).collect();
    let rows: Vec<TrialRow> = trials
        .iter()
        .map(|t| TrialRow {
            object_id: t.object_id.clone(),
            trial: t.trial,
            initial_err_deg: t.initial_err_deg,
            final_err_deg: t.final_err_deg,
            status: status_name(t.status),
            iterations: t.iterations,
            steps: t.steps,
        })
        .collect();
    write_csv(common.out.join("trials.csv"), &rows)?;
    let summary = summarize(trials);
    let json = ControllerSummaryJson {
        estimator: estimator_name(cfg.estimator),
        trials: summary.trials.len(),
        median_final_err_deg: summary.median_final_err_deg,
        mean_final_err_deg: summary.mean_final_err_deg,
        p90_final_err_deg: summary.p90_final_err_deg,
        convergence_rate: summary.convergence_rate,
        config: cfg.entries().into_iter().collect(),
    };
    write_json(common.out.join("summary.json"), &json)?;
    cfg.write(common.out.join(RESOLVED_CONFIG))?;
    println!(
        "median final error {:.4} deg, convergence rate {:.3}",
        json.median_final_err_deg, json.convergence_rate
    );
    Ok(())
}

/// Parses `r,i,j,k`, rejecting values more than 1e-6 away from unit norm.
pub fn parse_quaternion(text: &str) -> Result<UnitQuaternion> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::usage(format!("--quat expects four numbers r,i,j,k, got {text:?}")))?;
    let raw: [f64; 4] = parts
        .try_into()
        .map_err(|_| Error::usage(format!("--quat expects four numbers r,i,j,k, got {text:?}")))?;
    let norm = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
    if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
        return Err(Error::usage(format!(
            "--quat must have unit norm, got {norm}"
        )));
    }
    UnitQuaternion::from_array(raw).map_err(|e| Error::usage(e.to_string()))
}

fn cmd_render(common: &Common, mesh_path: &Path, quat: &str) -> Result<()> {
    let cfg = resolve(common)?;
    cfg.validate()?;
    let q = parse_quaternion(quat)?;
    let mesh = load_obj(mesh_path)?;
    ensure_file_free(&common.out, common.force)?;
    let img = render_depth(&mesh, &q, &cfg.camera)?;
    write_depth_image(&common.out, &img, Some(&cfg.camera))?;
    let (back, _) = read_depth_image(&common.out)?;
    if back != img {
        return Err(Error::format(
            &common.out,
            "written image does not read back",
        ));
    }
    cfg.write(file_snapshot_path(&common.out))?;
    println!(
        "{} ({} object pixels)",
        common.out.display(),
        img.object_pixel_count()
    );
    Ok(())
}
