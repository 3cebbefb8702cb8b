//! Dataset persistence: per-object directories of paired PGM images and a
//! JSONL manifest whose first line is a header.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use reorient_core::augment::OcclusionConfig;
use reorient_core::dataset::{
    generate_record, record_seed, validate_record, DatasetRecord, GenConfig,
};
use reorient_core::mesh::TriangleMesh;
use reorient_core::rotation::{Radians, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats::{read_depth_image, write_depth_image, CameraSpec};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const CONFIG_FILE: &str = "config.txt";
const FORMAT_TAG: &str = "reorient-dataset";
const FORMAT_VERSION: u32 = 1;

/// Generation settings echoed into the manifest header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSnapshot {
    pub camera: CameraSpec,
    pub max_angle_deg: f64,
    pub randomize: bool,
    pub occlusion_length: [f64; 2],
    pub occlusion_thickness: [f64; 2],
    pub dropout: f64,
}

impl From<&GenConfig> for GenSnapshot {
    fn from(g: &GenConfig) -> Self {
        GenSnapshot {
            camera: g.camera.into(),
            max_angle_deg: g.max_angle.degrees(),
            randomize: g.randomize,
            occlusion_length: [g.occlusion.length.0, g.occlusion.length.1],
            occlusion_thickness: [g.occlusion.thickness.0, g.occlusion.thickness.1],
            dropout: g.dropout,
        }
    }
}

impl GenSnapshot {
    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            camera: self.camera.into(),
            max_angle: Radians::from_degrees(self.max_angle_deg),
            fixed_rotation: None,
            randomize: self.randomize,
            occlusion: OcclusionConfig {
                length: (self.occlusion_length[0], self.occlusion_length[1]),
                thickness: (self.occlusion_thickness[0], self.occlusion_thickness[1]),
            },
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: u32,
    pub count: usize,
    pub per_object: usize,
    pub seed: u64,
    pub objects: Vec<String>,
    pub config: GenSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub object_id: String,
    pub index: usize,
    /// Relative to the manifest directory.
    pub start_image: String,
    pub goal_image: String,
    /// `(r, i, j, k)`.
    pub relative_rotation: [f64; 4],
    pub start_orientation: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
    pub records: Vec<DatasetRecord>,
}

/// Creates `dir`, refusing to touch an existing non-empty directory unless
/// `overwrite` is set, in which case it is cleared first.
pub fn prepare_out_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty {
            if !overwrite {
                return Err(Error::Exists {
                    path: dir.to_path_buf(),
                });
            }
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Generates `cfg.per_object` records per mesh into `out_dir`. Each record
/// has its own seed, so the output does not depend on the thread count.
pub fn generate_dataset(
    meshes: &[(String, TriangleMesh)],
    cfg: &RunConfig,
    out_dir: &Path,
    overwrite: bool,
) -> Result<Manifest> {
    if cfg.per_object == 0 {
        return Err(Error::usage("per_object must be at least 1"));
    }
    if meshes.is_empty() {
        return Err(Error::usage("no meshes to generate from"));
    }
    let gen = cfg.gen_config();
    prepare_out_dir(out_dir, overwrite)?;
    for (id, _) in meshes {
        let d = out_dir.join(id);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }

    let jobs: Vec<(usize, usize)> = (0..meshes.len())
        .flat_map(|m| (0..cfg.per_object).map(move |i| (m, i)))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(m, i)| {
            let (id, mesh) = &meshes[m];
            let mut rng = ChaCha8Rng::seed_from_u64(record_seed(cfg.seed, id, i as u64));
            let record = generate_record(mesh, id, &mut rng, &gen)?;
            let start = format!("{id}/{i}_s.pgm");
            let goal = format!("{id}/{i}_g.pgm");
            write_depth_image(out_dir.join(&start), &record.start_image, Some(&gen.camera))?;
            write_depth_image(out_dir.join(&goal), &record.goal_image, Some(&gen.camera))?;
            Ok(ManifestEntry {
                object_id: id.clone(),
                index: i,
                start_image: start,
                goal_image: goal,
                relative_rotation: record.relative_rotation.to_array(),
                start_orientation: record.start_orientation.to_array(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        header: ManifestHeader {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            count: entries.len(),
            per_object: cfg.per_object,
            seed: cfg.seed,
            objects: meshes.iter().map(|(id, _)| id.clone()).collect(),
            config: GenSnapshot::from(&gen),
        },
        entries,
    };
    write_manifest(&out_dir.join(MANIFEST_FILE), &manifest)?;
    cfg.write(out_dir.join(CONFIG_FILE))?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    fn push_line<T: Serialize>(path: &Path, value: &T, out: &mut Vec<u8>) -> Result<()> {
        serde_json::to_writer(&mut *out, value).map_err(|e| Error::format(path, e.to_string()))?;
        out.push(b'\n');
        Ok(())
    }
    let mut out = Vec::new();
    push_line(path, &manifest.header, &mut out)?;
    for e in &manifest.entries {
        push_line(path, e, &mut out)?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: ManifestHeader = serde_json::from_str(
        lines
            .next()
            .ok_or_else(|| Error::format(path, "empty manifest"))?,
    )
    .map_err(|e| Error::format(path, format!("header: {e}")))?;
    if header.format != FORMAT_TAG || header.version != FORMAT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported format {} v{}", header.format, header.version),
        ));
    }
    let entries = lines
        .enumerate()
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| Error::format(path, format!("record {n}: {e}")))
        })
        .collect::<Result<Vec<ManifestEntry>>>()?;
    if entries.len() != header.count {
        return Err(Error::format(
            path,
            format!(
                "header promises {} records, found {}",
                header.count,
                entries.len()
            ),
        ));
    }
    Ok(Manifest { header, entries })
}

fn quat(raw: [f64; 4]) -> UnitQuaternion {
    // stored bits are kept as-is; validation catches non-unit values
    UnitQuaternion::new_unchecked(raw[0], raw[1], raw[2], raw[3])
}

/// Loads every record, re-validating the relative rotations.
pub fn read_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest_path: PathBuf = if manifest_path.is_dir() {
        manifest_path.join(MANIFEST_FILE)
    } else {
        manifest_path.to_path_buf()
    };
    let Manifest { header, entries } = read_manifest(&manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let max_angle = Radians::from_degrees(header.config.max_angle_deg);
    let records = entries
        .par_iter()
        .enumerate()
        .map(|(n, e)| {
            let (start_image, _) = read_depth_image(root.join(&e.start_image))?;
            let (goal_image, _) = read_depth_image(root.join(&e.goal_image))?;
            let record = DatasetRecord {
                object_id: e.object_id.clone(),
                start_image,
                goal_image,
                relative_rotation: quat(e.relative_rotation),
                start_orientation: quat(e.start_orientation),
            };
            validate_record(&record, max_angle).map_err(|violation| {
                Error::ConstraintViolation {
                    path: manifest_path.clone(),
                    index: n,
                    violation,
                }
            })?;
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        header,
        entries,
        records,
    })
}
