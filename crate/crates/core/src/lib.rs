//! Algorithmic core of a stereo-to-stereo passthrough view-synthesis engine.
//!
//! Everything here is pure computation over owned buffers: depth estimation
//! from a rectified stereo pair, RGB-D sharpening, softmax forward splatting,
//! disocclusion filtering, a small convolutional fusion network, a layered
//! synthetic-scene renderer used as a ground-truth oracle, and image quality
//! metrics. File formats, configuration documents and orchestration live in
//! the `passthrough` crate.
//!
//! The crate is `no_std` and only needs `alloc`.
#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod disocclusion;
mod error;
pub mod fusion;
pub mod image;
pub(crate) mod math;
pub mod metrics;
pub mod raster;
pub mod rectify;
pub mod rig;
pub mod scene;
pub mod sharpen;
pub mod splat;
pub mod stereo;

pub use error::{Error, Result};
pub use image::{ImagePlane, PixelCoord, RgbdView};
pub use math::{Mat3, Vec3};
