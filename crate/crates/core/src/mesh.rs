//! Triangle meshes, point clouds, chamfer distance and symmetry scoring.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use thiserror::Error;

use crate::rotation::{dist2, norm3, UnitQuaternion, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {index} but only {count} exist")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("mesh contains non-finite coordinates")]
    NonFinite,
    #[error("all vertices coincide; cannot normalize scale")]
    Degenerate,
    #[error("point cloud is empty")]
    EmptyCloud,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if triangles.is_empty() {
            return Err(MeshError::EmptyMesh);
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(MeshError::NonFinite);
        }
        let count = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index,
                    count,
                });
            }
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Largest vertex distance from the origin.
    pub fn radius(&self) -> f64 {
        self.vertices.iter().map(|&v| norm3(v)).fold(0.0, f64::max)
    }

    /// Recentres the vertex centroid at the origin and scales so the farthest
    /// vertex sits at radius 1.
    pub fn canonicalized(mut self) -> Result<Self, MeshError> {
        let n = self.vertices.len() as f64;
        let mut c = [0.0; 3];
        for v in &self.vertices {
            for a in 0..3 {
                c[a] += v[a];
            }
        }
        for a in c.iter_mut() {
            *a /= n;
        }
        for v in self.vertices.iter_mut() {
            for a in 0..3 {
                v[a] -= c[a];
            }
        }
        let r = self.radius();
        if r < 1e-12 {
            return Err(MeshError::Degenerate);
        }
        for v in self.vertices.iter_mut() {
            for a in v.iter_mut() {
                *a /= r;
            }
        }
        Ok(self)
    }

    /// Same triangles with every vertex rotated by `q`.
    pub fn rotated(&self, q: &UnitQuaternion) -> TriangleMesh {
        let m = q.to_matrix();
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| m.apply(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn vertex_cloud(&self) -> PointCloud {
        PointCloud {
            points: self.vertices.clone(),
        }
    }
}

/// Parses the `v`/`f` subset of Wavefront OBJ and canonicalizes the result.
///
/// Polygons with more than three corners are fan-split around their first
/// corner. Face corners may carry `/vt/vn` suffixes and negative
/// (relative) indices.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, MeshError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(tag) = tokens.next() else { continue };
        match tag {
            "v" => {
                let mut xyz = [0.0; 3];
                for slot in xyz.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| MeshError::Parse {
                        line,
                        message: String::from("vertex needs three coordinates"),
                    })?;
                    *slot = tok.parse::<f64>().map_err(|_| MeshError::Parse {
                        line,
                        message: format!("bad coordinate {tok:?}"),
                    })?;
                }
                vertices.push(xyz);
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in tokens {
                    corners.push(face_index(tok, vertices.len(), line)?);
                }
                if corners.len() < 3 {
                    return Err(MeshError::Parse {
                        line,
                        message: format!("face has {} corners", corners.len()),
                    });
                }
                for w in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[w], corners[w + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles)?.canonicalized()
}

fn face_index(tok: &str, seen: usize, line: usize) -> Result<usize, MeshError> {
    let head = tok.split('/').next().unwrap_or("");
    let idx: i64 = head.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("bad face index {tok:?}"),
    })?;
    let resolved = if idx > 0 {
        idx - 1
    } else if idx < 0 {
        seen as i64 + idx
    } else {
        -1
    };
    if resolved < 0 || resolved as usize >= seen {
        return Err(MeshError::Parse {
            line,
            message: format!("face index {idx} out of range"),
        });
    }
    Ok(resolved as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Result<Self, MeshError> {
        if points.is_empty() {
            return Err(MeshError::EmptyCloud);
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(MeshError::NonFinite);
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for a in 0..3 {
                c[a] += p[a];
            }
        }
        [c[0] / n, c[1] / n, c[2] / n]
    }

    pub fn centered(&self) -> PointCloud {
        let c = self.centroid();
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
                .collect(),
        }
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

/// All vertices when there are at most `cap`, otherwise `cap` distinct
/// vertices drawn uniformly without replacement.
pub fn sample_vertices<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    cap: usize,
    rng: &mut R,
) -> PointCloud {
    let cap = cap.max(1);
    let vs = mesh.vertices();
    if vs.len() <= cap {
        return mesh.vertex_cloud();
    }
    let picked = rand::seq::index::sample(rng, vs.len(), cap);
    PointCloud {
        points: picked.iter().map(|i| vs[i]).collect(),
    }
}

pub fn rotate_cloud(cloud: &PointCloud, q: &UnitQuaternion) -> PointCloud {
    let m = q.to_matrix();
    PointCloud {
        points: cloud.points.iter().map(|&p| m.apply(p)).collect(),
    }
}

/// Smallest squared distance from `x` to any point of `cloud`.
pub fn chamfer_min_term(x: Vec3, cloud: &PointCloud) -> f64 {
    nearest(x, cloud.points()).1
}

/// Index and squared distance of the nearest point; ties go to the lowest index.
pub fn nearest(x: Vec3, points: &[Vec3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &p) in points.iter().enumerate() {
        let d = dist2(x, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Symmetric chamfer distance: mean nearest-neighbour squared distance from
/// `a` into `b` plus from `b` into `a`.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    one_sided(a, b) + one_sided(b, a)
}

fn one_sided(from: &PointCloud, to: &PointCloud) -> f64 {
    let sum: f64 = from.points.iter().map(|&x| chamfer_min_term(x, to)).sum();
    sum / from.len() as f64
}

/// The six probe rotations used by [`symmetry_score`].
pub fn symmetry_probes() -> [UnitQuaternion; 6] {
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let angles = [2.0 * PI / 3.0, PI];
    let mut out = [UnitQuaternion::IDENTITY; 6];
    let mut n = 0;
    for angle in angles {
        for axis in axes {
            out[n] = UnitQuaternion::from_axis_angle(axis, angle).expect("unit axis");
            n += 1;
        }
    }
    out
}

/// Minimum chamfer distance between the vertex set and its image under
/// 120° and 180° turns about each coordinate axis. Near zero means the mesh
/// has one of those symmetries in its canonical frame.
pub fn symmetry_score(mesh: &TriangleMesh) -> f64 {
    let cloud = mesh.vertex_cloud();
    symmetry_probes()
        .iter()
        .map(|q| chamfer_distance(&cloud, &rotate_cloud(&cloud, q)))
        .fold(f64::INFINITY, f64::min)
}

/// Default flagging threshold, `1e-3 · radius²`.
pub fn default_symmetry_threshold(mesh: &TriangleMesh) -> f64 {
    let r = mesh.radius();
    1e-3 * r * r
}

/// `score < threshold`; a zero threshold flags nothing.
pub fn is_symmetric(score: f64, threshold: f64) -> bool {
    score < threshold
}
