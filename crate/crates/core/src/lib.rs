//! Core algorithms for reorienting objects from depth images: quaternion
//! algebra, rendering, augmentation, losses, rotation estimators and the
//! slerp-based proportional controller.
//!
//! Everything here is `no_std` with `alloc`; file formats, persistence and
//! the command-line front end live in the `reorient` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod control;
pub mod dataset;
pub mod estimate;
pub mod loss;
pub mod mesh;
pub mod render;
pub mod rotation;
pub mod sampling;
