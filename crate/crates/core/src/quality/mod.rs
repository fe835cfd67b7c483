//! Loss evaluators and image-quality metrics.
//!
//! Everything here is a pure function of caller-supplied arrays. Means are
//! accumulated in `f64` in a fixed row-major (and, for feature stacks,
//! layer-major) order so results are reproducible to the bit.

mod losses;
mod mask;
mod metrics;
mod temporal;

pub use losses::{
    feature_matching_loss, hinge_d_loss, hinge_g_loss, perceptual_loss, pyramid_features, reconstruction_loss,
    total_objective, FeatureStack, LossWeights, ScoreMap,
};
pub use mask::{gradient_magnitude, gradient_mask, GradientMask, DEFAULT_MASK_ALPHA};
pub use metrics::{mse, psnr, ssim};
pub use temporal::{pair_warping_error, temporal_warping_error};
