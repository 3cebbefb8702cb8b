//! On-disk formats. Depth images are 16-bit PGM with a JSON sidecar holding
//! the quantization and camera.

use std::fs;
use std::path::{Path, PathBuf};

use reorient_core::mesh::{parse_obj, MeshError, PointCloud, TriangleMesh};
use reorient_core::render::{CameraModel, DepthImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reads and canonicalizes an OBJ file. An unreadable file is reported as a
/// parse error at line 0.
pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let mesh_err = |source| Error::Mesh {
        path: path.to_path_buf(),
        source,
    };
    let text = fs::read_to_string(path).map_err(|e| {
        mesh_err(MeshError::Parse {
            line: 0,
            message: format!("cannot read file: {e}"),
        })
    })?;
    parse_obj(&text).map_err(mesh_err)
}

/// Writes vertices and 1-based faces. Shortest round-trip float formatting
/// keeps `load_obj(write_obj(m))` exact up to canonicalization.
pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    use std::fmt::Write as _;
    let path = path.as_ref();
    let mut text = String::new();
    for [x, y, z] in mesh.vertices() {
        let _ = writeln!(text, "v {x:?} {y:?} {z:?}");
    }
    for [a, b, c] in mesh.triangles() {
        let _ = writeln!(text, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads every `*.obj` in `dir`, keyed by file stem and sorted by name.
pub fn load_mesh_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, TriangleMesh)>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("obj"))
        })
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((id, load_obj(&p)?))
        })
        .collect()
}

/// Serializable mirror of [`CameraModel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub width: usize,
    pub height: usize,
    pub half_extent: f64,
    pub eye_height: f64,
    pub near: f64,
    pub far: f64,
}

impl From<CameraModel> for CameraSpec {
    fn from(c: CameraModel) -> Self {
        CameraSpec {
            width: c.width,
            height: c.height,
            half_extent: c.half_extent,
            eye_height: c.eye_height,
            near: c.near,
            far: c.far,
        }
    }
}

impl From<CameraSpec> for CameraModel {
    fn from(c: CameraSpec) -> Self {
        CameraModel {
            width: c.width,
            height: c.height,
            half_extent: c.half_extent,
            eye_height: c.eye_height,
            near: c.near,
            far: c.far,
        }
    }
}

/// JSON metadata stored beside each PGM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub width: usize,
    pub height: usize,
    pub depth_scale: f64,
    pub depth_offset: f64,
    pub camera: Option<CameraSpec>,
}

/// Binary P5 with maxval 65535 and big-endian samples.
pub fn encode_pgm(img: &DepthImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n65535\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + 2 * img.values().len());
    out.extend_from_slice(header.as_bytes());
    for v in img.values() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out
}

/// Parses a 16-bit P5 file into `(width, height, samples)`.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<(usize, usize, Vec<u16>), String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // skip whitespace and comments between header tokens
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" {
        return Err(format!("expected P5 magic, found {:?}", fields[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what}: {s:?}"));
    let width = num(&fields[1], "width")?;
    let height = num(&fields[2], "height")?;
    let maxval = num(&fields[3], "maxval")?;
    if maxval != 65535 {
        return Err(format!("expected maxval 65535, found {maxval}"));
    }
    // exactly one whitespace byte separates the header from the samples
    pos += 1;
    let need = 2 * width * height;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != need {
        return Err(format!(
            "expected {need} sample bytes, found {}",
            body.len()
        ));
    }
    let values = body
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((width, height, values))
}

pub fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("json")
}

/// Writes `path` and its `.json` sidecar.
pub fn write_depth_image(
    path: impl AsRef<Path>,
    img: &DepthImage,
    cam: Option<&CameraModel>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(img)).map_err(|e| Error::io(path, e))?;
    let sidecar = Sidecar {
        width: img.width(),
        height: img.height(),
        depth_scale: img.depth_scale(),
        depth_offset: img.depth_offset(),
        camera: cam.map(|&c| c.into()),
    };
    write_json(sidecar_path(path), &sidecar)
}

pub fn read_depth_image(path: impl AsRef<Path>) -> Result<(DepthImage, Sidecar)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, values) = decode_pgm(&bytes).map_err(|m| Error::format(path, m))?;
    let side = sidecar_path(path);
    let sidecar: Sidecar = read_json(&side)?;
    if sidecar.width != width || sidecar.height != height {
        return Err(Error::format(&side, "size disagrees with the image"));
    }
    let img = DepthImage::from_values(
        width,
        height,
        values,
        sidecar.depth_scale,
        sidecar.depth_offset,
    )?;
    Ok((img, sidecar))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// One `x,y,z` row per point, with a header.
pub fn write_cloud_csv(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["x", "y", "z"])
        .map_err(|e| csv_err(path, e))?;
    for p in cloud.points() {
        w.serialize(p).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_cloud_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let points = r
        .deserialize::<[f64; 3]>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_err(path, e))?;
    PointCloud::new(points).map_err(|source| Error::Mesh {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        }
    } else {
        Error::format(path, e.to_string())
    }
}
