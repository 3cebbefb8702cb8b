//! Orthographic z-buffer depth renderer with 16-bit quantization.
//!
//! World frame: the object sits at the origin, the camera looks down the
//! world −z axis from `eye_height`. Image columns follow world +x and rows
//! follow world −y, so the camera frame `(x, y, depth)` is the world frame
//! turned 180° about x and shifted by `eye_height`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use thiserror::Error;

use crate::mesh::{MeshError, PointCloud, TriangleMesh};
use crate::rotation::{UnitQuaternion, Vec3};

/// Largest stored depth code; 0 is the background sentinel.
pub const MAX_DEPTH_CODE: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("no part of the mesh lies inside the view volume")]
    OutOfFrustum,
    #[error("image has no object pixels")]
    NoObjectPixels,
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
    #[error("image buffer has {got} values, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Half the side of the square view window, in model units.
    pub half_extent: f64,
    /// Height of the image plane above the origin along world +z.
    pub eye_height: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel {
            width: 128,
            height: 128,
            half_extent: 1.2,
            eye_height: 2.0,
            near: 0.5,
            far: 3.5,
        }
    }
}

impl CameraModel {
    pub fn with_resolution(width: usize, height: usize) -> Self {
        CameraModel {
            width,
            height,
            ..CameraModel::default()
        }
    }

    pub fn validate(&self) -> Result<(), RenderError> {
        if self.width == 0 || self.height == 0 {
            return Err(RenderError::InvalidCamera("zero resolution"));
        }
        if self.half_extent.is_nan() || self.half_extent <= 0.0 {
            return Err(RenderError::InvalidCamera("half extent must be positive"));
        }
        if !self.near.is_finite() || !self.far.is_finite() || self.near >= self.far {
            return Err(RenderError::InvalidCamera("near must be below far"));
        }
        Ok(())
    }

    /// Whether a unit sphere at the origin is fully visible.
    pub fn fits_unit_sphere(&self) -> bool {
        self.half_extent >= 1.0
            && self.eye_height - 1.0 >= self.near
            && self.eye_height + 1.0 <= self.far
    }

    /// Metres (model units) per depth code.
    pub fn depth_scale(&self) -> f64 {
        (self.far - self.near) / (MAX_DEPTH_CODE as f64 - 1.0)
    }

    /// Depth of code 0; code 1 maps to `near`.
    pub fn depth_offset(&self) -> f64 {
        self.near - self.depth_scale()
    }

    pub fn quantize(&self, depth: f64) -> u16 {
        let code = 1.0 + ((depth - self.near) / self.depth_scale()).round();
        code.clamp(1.0, MAX_DEPTH_CODE as f64) as u16
    }

    pub fn dequantize(&self, code: u16) -> f64 {
        self.depth_offset() + code as f64 * self.depth_scale()
    }

    /// World point to continuous `(column, row, depth)`.
    fn project(&self, p: Vec3) -> [f64; 3] {
        let span = 2.0 * self.half_extent;
        [
            (p[0] + self.half_extent) / span * self.width as f64,
            (self.half_extent - p[1]) / span * self.height as f64,
            self.eye_height - p[2],
        ]
    }

    /// Camera-frame point of the centre of pixel `(col, row)` at `depth`.
    pub fn pixel_to_camera(&self, col: usize, row: usize, depth: f64) -> Vec3 {
        let span = 2.0 * self.half_extent;
        [
            (col as f64 + 0.5) / self.width as f64 * span - self.half_extent,
            (row as f64 + 0.5) / self.height as f64 * span - self.half_extent,
            depth,
        ]
    }

    pub fn camera_to_world(&self, p: Vec3) -> Vec3 {
        [p[0], -p[1], self.eye_height - p[2]]
    }
}

/// Row-major 16-bit depth image; 0 marks background or removed pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<u16>,
    depth_scale: f64,
    depth_offset: f64,
}

impl DepthImage {
    pub fn blank(width: usize, height: usize, depth_scale: f64, depth_offset: f64) -> Self {
        DepthImage {
            width,
            height,
            values: vec![0; width * height],
            depth_scale,
            depth_offset,
        }
    }

    pub fn blank_for(cam: &CameraModel) -> Self {
        Self::blank(cam.width, cam.height, cam.depth_scale(), cam.depth_offset())
    }

    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<u16>,
        depth_scale: f64,
        depth_offset: f64,
    ) -> Result<Self, RenderError> {
        if values.len() != width * height {
            return Err(RenderError::SizeMismatch {
                expected: width * height,
                got: values.len(),
            });
        }
        Ok(DepthImage {
            width,
            height,
            values,
            depth_scale,
            depth_offset,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn depth_scale(&self) -> f64 {
        self.depth_scale
    }
    pub fn depth_offset(&self) -> f64 {
        self.depth_offset
    }
    pub fn values(&self) -> &[u16] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [u16] {
        &mut self.values
    }

    pub fn get(&self, col: usize, row: usize) -> u16 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: u16) {
        self.values[row * self.width + col] = v;
    }

    pub fn depth_at(&self, col: usize, row: usize) -> Option<f64> {
        match self.get(col, row) {
            0 => None,
            v => Some(self.depth_offset + v as f64 * self.depth_scale),
        }
    }

    pub fn object_pixel_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// `(col, row)` of every object pixel in row-major order.
    pub fn object_pixels(&self) -> Vec<(usize, usize)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}

/// Renders `mesh` turned by `orientation`.
pub fn render_depth(
    mesh: &TriangleMesh,
    orientation: &UnitQuaternion,
    cam: &CameraModel,
) -> Result<DepthImage, RenderError> {
    let m = orientation.to_matrix();
    let rotated: Vec<Vec3> = mesh.vertices().iter().map(|&v| m.apply(v)).collect();
    render_vertices(&rotated, mesh.triangles(), cam)
}

/// Rasterizes already-posed world-space triangles.
pub fn render_vertices(
    vertices: &[Vec3],
    triangles: &[[usize; 3]],
    cam: &CameraModel,
) -> Result<DepthImage, RenderError> {
    cam.validate()?;
    let (w, h) = (cam.width, cam.height);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let screen: Vec<[f64; 3]> = vertices.iter().map(|&v| cam.project(v)).collect();
    let mut covered = false;

    for tri in triangles {
        let a = screen[tri[0]];
        let mut b = screen[tri[1]];
        let mut c = screen[tri[2]];
        let mut area = edge(a, b, c);
        if area.abs() < 1e-12 {
            continue;
        }
        if area < 0.0 {
            core::mem::swap(&mut b, &mut c);
            area = -area;
        }
        let (bias0, bias1, bias2) = (top_left(b, c), top_left(c, a), top_left(a, b));

        let min_x = a[0].min(b[0]).min(c[0]).floor().max(0.0) as usize;
        let min_y = a[1].min(b[1]).min(c[1]).floor().max(0.0) as usize;
        let max_x = a[0].max(b[0]).max(c[0]).ceil().min(w as f64);
        let max_y = a[1].max(b[1]).max(c[1]).ceil().min(h as f64);
        if max_x <= 0.0 || max_y <= 0.0 {
            continue;
        }
        let (max_x, max_y) = (max_x as usize, max_y as usize);

        for row in min_y..max_y {
            for col in min_x..max_x {
                let p = [col as f64 + 0.5, row as f64 + 0.5, 0.0];
                let w0 = edge(b, c, p);
                let w1 = edge(c, a, p);
                let w2 = edge(a, b, p);
                if !(inside(w0, bias0) && inside(w1, bias1) && inside(w2, bias2)) {
                    continue;
                }
                let depth = (w0 * a[2] + w1 * b[2] + w2 * c[2]) / area;
                if depth < cam.near || depth > cam.far {
                    continue;
                }
                let slot = &mut zbuf[row * w + col];
                if depth < *slot {
                    *slot = depth;
                    covered = true;
                }
            }
        }
    }
    if !covered {
        return Err(RenderError::OutOfFrustum);
    }

    let mut img = DepthImage::blank_for(cam);
    for (dst, &z) in img.values.iter_mut().zip(zbuf.iter()) {
        if z.is_finite() {
            *dst = cam.quantize(z);
        }
    }
    Ok(img)
}

fn edge(a: [f64; 3], b: [f64; 3], p: [f64; 3]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Whether pixels exactly on edge `a → b` belong to this triangle. The
/// interior lies along the edge-function gradient `(−e_y, e_x)`; left edges
/// (`e_y < 0`) and top edges (`e_y = 0`, `e_x > 0`) own their boundary.
fn top_left(a: [f64; 3], b: [f64; 3]) -> bool {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    ey < 0.0 || (ey == 0.0 && ex > 0.0)
}

fn inside(w: f64, owns_boundary: bool) -> bool {
    w > 0.0 || (w == 0.0 && owns_boundary)
}

/// Back-projects every object pixel to a camera-frame point `(x, y, depth)`.
pub fn to_point_cloud(img: &DepthImage, cam: &CameraModel) -> Result<PointCloud, RenderError> {
    let mut points = Vec::with_capacity(img.object_pixel_count());
    for row in 0..img.height() {
        for col in 0..img.width() {
            if let Some(d) = img.depth_at(col, row) {
                points.push(cam.pixel_to_camera(col, row, d));
            }
        }
    }
    if points.is_empty() {
        return Err(RenderError::NoObjectPixels);
    }
    Ok(PointCloud::new(points)?)
}

/// Like [`to_point_cloud`] but expressed in the world frame.
pub fn to_world_point_cloud(
    img: &DepthImage,
    cam: &CameraModel,
) -> Result<PointCloud, RenderError> {
    let cloud = to_point_cloud(img, cam)?;
    let pts = cloud
        .points()
        .iter()
        .map(|&p| cam.camera_to_world(p))
        .collect();
    Ok(PointCloud::new(pts)?)
}
