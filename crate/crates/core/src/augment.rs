//! Image-space domain randomization: a thin zeroed rectangle standing in for
//! the gripper, and per-pixel dropout standing in for sensor holes.

use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;

use crate::render::{DepthImage, RenderError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionConfig {
    /// Rectangle length range in pixels, inclusive.
    pub length: (f64, f64),
    /// Rectangle thickness range in pixels, inclusive.
    pub thickness: (f64, f64),
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        OcclusionConfig {
            length: (20.0, 60.0),
            thickness: (4.0, 10.0),
        }
    }
}

/// Default per-pixel dropout probability.
pub const DEFAULT_DROPOUT: f64 = 0.01;

/// A placed occluder, in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rectangle {
    /// Centre in continuous image coordinates `(x, y)`.
    pub center: (f64, f64),
    pub length: f64,
    pub thickness: f64,
    /// Orientation of the long side, radians.
    pub angle: f64,
}

impl Rectangle {
    /// Whether the centre of pixel `(col, row)` falls inside.
    pub fn covers(&self, col: usize, row: usize) -> bool {
        let dx = col as f64 + 0.5 - self.center.0;
        let dy = row as f64 + 0.5 - self.center.1;
        let (s, c) = self.angle.sin_cos();
        let along = dx * c + dy * s;
        let across = -dx * s + dy * c;
        along.abs() <= 0.5 * self.length && across.abs() <= 0.5 * self.thickness
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Zeroes a random thin rectangle centred on a random object pixel.
pub fn occlude_rectangle<R: Rng + ?Sized>(
    img: &DepthImage,
    rng: &mut R,
    cfg: &OcclusionConfig,
) -> Result<(DepthImage, Rectangle), RenderError> {
    let object = img.object_pixels();
    if object.is_empty() {
        return Err(RenderError::NoObjectPixels);
    }
    let (col, row) = object[rng.random_range(0..object.len())];
    let rect = Rectangle {
        center: (col as f64 + 0.5, row as f64 + 0.5),
        length: uniform_in(rng, cfg.length),
        thickness: uniform_in(rng, cfg.thickness),
        angle: rng.random_range(0.0..PI),
    };
    Ok((apply_rectangle(img, &rect), rect))
}

/// Zeroes every pixel whose centre lies in `rect`.
pub fn apply_rectangle(img: &DepthImage, rect: &Rectangle) -> DepthImage {
    let mut out = img.clone();
    let reach = 0.5 * (rect.length + rect.thickness) + 1.0;
    let x0 = (rect.center.0 - reach).floor().max(0.0) as usize;
    let y0 = (rect.center.1 - reach).floor().max(0.0) as usize;
    let x1 = ((rect.center.0 + reach).ceil().max(0.0) as usize).min(img.width());
    let y1 = ((rect.center.1 + reach).ceil().max(0.0) as usize).min(img.height());
    for row in y0..y1 {
        for col in x0..x1 {
            if rect.covers(col, row) {
                out.set(col, row, 0);
            }
        }
    }
    out
}

/// Independently zeroes each object pixel with probability `p`.
pub fn dropout_pixels<R: Rng + ?Sized>(img: &DepthImage, p: f64, rng: &mut R) -> DepthImage {
    let p = p.clamp(0.0, 1.0);
    let mut out = img.clone();
    for v in out.values_mut().iter_mut() {
        if *v != 0 && rng.random_bool(p) {
            *v = 0;
        }
    }
    out
}
