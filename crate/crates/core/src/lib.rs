//! Multi-stage raw video denoising.
//!
//! The crate is `no_std` and only needs `alloc`. It covers the whole
//! algorithmic side of the pipeline:
//!
//! * [`frame`]: frame types, Bayer packing and luma conversion.
//! * [`camera`]: unprocessing of sRGB frames to raw, a shot/read noise
//!   model and a small deterministic ISP.
//! * [`flow`]: pyramidal dense Lucas-Kanade flow, warping, forward-backward
//!   consistency and the iterative flow objective.
//! * [`fuse`]: the three-frame denoiser block (align + fuse).
//! * [`multistage`]: the N-stage recursive denoiser, its streaming form and
//!   the flow-reuse mode.
//! * [`quality`]: gradient mask, adversarial/feature/reconstruction/perceptual
//!   losses, PSNR, SSIM and the temporal warping error.
//!
//! File formats and the command line live in the `ravden` crate.

#![no_std]

extern crate alloc;

mod error;
mod imgops;

pub mod camera;
pub mod flow;
pub mod frame;
pub mod fuse;
pub mod multistage;
pub mod quality;
pub mod rng;
pub mod scene;

pub use error::{Error, Result};
pub use frame::{ColorSpace, Frame, FrameMeta, PackedRawFrame, Planar, RawBayerFrame, Sequence};
