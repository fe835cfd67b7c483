//! The three-frame denoiser block: align both neighbours to the centre frame,
//! then merge the registered triple with residual-confidence weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, param_err, Result};
use crate::flow::{estimate_flow, fb_consistency, warp, FlowConfig, FlowField, ValidityMask};
use crate::frame::{PackedRawFrame, Planar};
use crate::imgops;

/// Merge settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Merge bandwidth `h` as a multiple of the centre frame's noise level.
    pub bandwidth_scale: f32,
    /// Side of the box that pools absolute residuals; odd.
    pub residual_box: usize,
    pub spatial_filter: bool,
    pub spatial_filter_strength: f32,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { bandwidth_scale: 2.0, residual_box: 3, spatial_filter: true, spatial_filter_strength: 1.0 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_scale.is_finite() && self.bandwidth_scale > 0.0) {
            return Err(param_err!("bandwidth_scale must be positive"));
        }
        if self.residual_box == 0 || self.residual_box.is_multiple_of(2) {
            return Err(param_err!("residual_box must be odd, got {}", self.residual_box));
        }
        if !(self.spatial_filter_strength.is_finite() && self.spatial_filter_strength >= 0.0) {
            return Err(param_err!("spatial_filter_strength must be >= 0"));
        }
        Ok(())
    }
}

/// Per-pixel merge weights of the previous and next neighbour. The centre
/// frame always carries weight 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    pub height: usize,
    pub width: usize,
    pub prev: Vec<f32>,
    pub next: Vec<f32>,
}

/// MAD noise level per plane from the stride-2 Haar diagonal detail:
/// `median(|a - b - c + d| / 2) / 0.6745`.
pub fn estimate_noise_sigma(frame: &PackedRawFrame) -> Result<[f32; 4]> {
    let (h, w) = (frame.height(), frame.width());
    if h < 4 || w < 4 {
        return Err(dim_err!("noise estimation needs at least 4x4, got {h}x{w}"));
    }
    let mut out = [0.0f32; 4];
    let mut details = Vec::with_capacity((h / 2) * (w / 2));
    for (c, sigma) in out.iter_mut().enumerate() {
        let p = frame.plane(c);
        details.clear();
        for y in (0..h - 1).step_by(2) {
            for x in (0..w - 1).step_by(2) {
                let d = p[y * w + x] - p[y * w + x + 1] - p[(y + 1) * w + x] + p[(y + 1) * w + x + 1];
                details.push((0.5 * d).abs());
            }
        }
        *sigma = imgops::median(&mut details) / 0.6745;
    }
    Ok(out)
}

/// Noise level implied by the disagreement between the centre frame and
/// its registered neighbours: `median(|I_k - I_c|) / (0.6745 * sqrt(2))`
/// over all planes at pixels with nonzero mask. `None` when no pixel is
/// supported.
pub fn temporal_noise_sigma(
    warped: [&PackedRawFrame; 2],
    center: &PackedRawFrame,
    masks: [&ValidityMask; 2],
) -> Option<f32> {
    let n = center.height() * center.width();
    let mut diffs = Vec::new();
    for (nb, mask) in warped.iter().zip(masks) {
        for c in 0..PackedRawFrame::PLANES {
            let (a, b) = (nb.plane(c), center.plane(c));
            diffs.extend((0..n).filter(|&i| mask.values()[i] > 0.0).map(|i| (a[i] - b[i]).abs()));
        }
    }
    if diffs.is_empty() {
        return None;
    }
    Some(imgops::median(&mut diffs) / (0.6745 * core::f32::consts::SQRT_2))
}

/// Merges a registered triple.
///
/// For neighbour `k`, the residual `r_k` is the box-filtered mean over
/// planes of `|I_k - I_centre|`, and its weight is
/// `mask_k * exp(-r_k^2 / (2 h^2))` with `h = bandwidth_scale * mean sigma`
/// of the centre frame. The merge is `I_c + sum w_k (I_k - I_c) / (1 + sum w_k)`,
/// optionally followed by a 3x3 range-weighted smoothing pass whose range
/// sigma shrinks as temporal support grows. The smoothing pass scales with
/// the smaller of the spatial and [`temporal_noise_sigma`] estimates, so a
/// noiseless static triple passes through unchanged.
pub fn fuse_triple(
    warped_prev: &PackedRawFrame,
    center: &PackedRawFrame,
    warped_next: &PackedRawFrame,
    masks: [&ValidityMask; 2],
    cfg: &FusionConfig,
) -> Result<PackedRawFrame> {
    fuse_triple_with_confidence(warped_prev, center, warped_next, masks, cfg).map(|(f, _)| f)
}

/// [`fuse_triple`] that also returns the merge weights.
pub fn fuse_triple_with_confidence(
    warped_prev: &PackedRawFrame,
    center: &PackedRawFrame,
    warped_next: &PackedRawFrame,
    masks: [&ValidityMask; 2],
    cfg: &FusionConfig,
) -> Result<(PackedRawFrame, ConfidenceMap)> {
    cfg.validate()?;
    let (h, w) = (center.height(), center.width());
    if !warped_prev.same_shape(center) || !warped_next.same_shape(center) {
        return Err(dim_err!("fusion inputs differ in shape"));
    }
    if masks.iter().any(|m| (m.height(), m.width()) != (h, w)) {
        return Err(dim_err!("fusion masks differ in shape from the frames"));
    }
    let sigma = match estimate_noise_sigma(center) {
        Ok(s) => s.iter().sum::<f32>() / 4.0,
        // too small to estimate; only exact agreement is merged
        Err(_) => 0.0,
    };
    let bandwidth = cfg.bandwidth_scale * sigma;

    let n = h * w;
    let weights: [Vec<f32>; 2] = [(warped_prev, masks[0]), (warped_next, masks[1])].map(|(nb, mask)| {
        let mut diff = vec![0.0f32; n];
        for c in 0..PackedRawFrame::PLANES {
            for ((d, a), b) in diff.iter_mut().zip(nb.plane(c)).zip(center.plane(c)) {
                *d += (a - b).abs();
            }
        }
        diff.iter_mut().for_each(|d| *d *= 0.25);
        let residual = imgops::box_mean(&diff, h, w, cfg.residual_box);
        residual.iter().zip(mask.values()).map(|(&r, &m)| m * residual_weight(r, bandwidth)).collect()
    });

    let mut out = vec![0.0f32; 4 * n];
    for c in 0..PackedRawFrame::PLANES {
        let (p, q, z) = (warped_prev.plane(c), center.plane(c), warped_next.plane(c));
        let dst = &mut out[c * n..(c + 1) * n];
        for i in 0..n {
            let (wp, wn) = (weights[0][i], weights[1][i]);
            let num = wp * (p[i] - q[i]) + wn * (z[i] - q[i]);
            dst[i] = q[i] + num / (1.0 + wp + wn);
        }
    }

    let filter_bandwidth = match temporal_noise_sigma([warped_prev, warped_next], center, masks) {
        Some(t) => cfg.bandwidth_scale * sigma.min(t),
        None => bandwidth,
    };
    if cfg.spatial_filter && filter_bandwidth > 0.0 && cfg.spatial_filter_strength > 0.0 {
        let range: Vec<f32> = (0..n)
            .map(|i| {
                let support = 1.0 + weights[0][i] + weights[1][i];
                cfg.spatial_filter_strength * filter_bandwidth / libm::sqrtf(support)
            })
            .collect();
        for c in 0..PackedRawFrame::PLANES {
            let filtered = range_filter3x3(&out[c * n..(c + 1) * n], h, w, &range);
            out[c * n..(c + 1) * n].copy_from_slice(&filtered);
        }
    }

    let [prev, next] = weights;
    Ok((PackedRawFrame::new(h, w, out)?, ConfidenceMap { height: h, width: w, prev, next }))
}

/// `exp(-r^2 / (2 h^2))`; with `h = 0` only an exact match gets weight 1.
#[inline]
pub fn residual_weight(residual: f32, bandwidth: f32) -> f32 {
    if bandwidth > 0.0 {
        libm::expf(-(residual * residual) / (2.0 * bandwidth * bandwidth))
    } else if residual == 0.0 {
        1.0
    } else {
        0.0
    }
}

const SPATIAL_3X3: [f32; 9] = [1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0];

/// 3x3 bilateral-style filter: binomial spatial weights times a Gaussian on
/// the intensity difference with per-pixel range sigma.
fn range_filter3x3(plane: &[f32], h: usize, w: usize, range: &[f32]) -> Vec<f32> {
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let centre = plane[i];
            let s = range[i];
            if s <= 0.0 {
                out[i] = centre;
                continue;
            }
            let inv = 1.0 / (2.0 * s * s);
            let (mut acc, mut norm) = (0.0f32, 0.0f32);
            let mut k = 0;
            for dy in -1..=1isize {
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                for dx in -1..=1isize {
                    let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let v = plane[sy * w + sx];
                    let d = v - centre;
                    let wgt = SPATIAL_3X3[k] * libm::expf(-d * d * inv);
                    acc += wgt * v;
                    norm += wgt;
                    k += 1;
                }
            }
            out[i] = acc / norm;
        }
    }
    out
}

/// Flows registering one neighbour onto the centre frame: `forward` maps the
/// centre grid into the neighbour, `backward` is the reverse estimate used
/// for the consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub forward: FlowField,
    pub backward: FlowField,
}

/// Estimates both directions of flow between `center` and `neighbor` on the
/// mean of the green planes.
pub fn align_pair(center: &PackedRawFrame, neighbor: &PackedRawFrame, cfg: &FlowConfig) -> Result<Alignment> {
    let (c, n) = (center.green_mean(), neighbor.green_mean());
    let forward = estimate_flow(&c, &n, cfg)?.final_flow;
    let backward = estimate_flow(&n, &c, cfg)?.final_flow;
    Ok(Alignment { forward, backward })
}

/// Warps `neighbor` onto the centre grid; the mask is warp coverage times
/// forward-backward consistency.
pub fn register(neighbor: &PackedRawFrame, alignment: &Alignment) -> Result<(PackedRawFrame, ValidityMask)> {
    let (warped, coverage) = warp(neighbor, &alignment.forward)?;
    let consistent = fb_consistency(&alignment.forward, &alignment.backward)?;
    Ok((warped, coverage.product(&consistent)?))
}

/// Fuses a triple given precomputed alignments of prev and next onto
/// center.
pub fn denoise_block_aligned(
    prev: &PackedRawFrame,
    center: &PackedRawFrame,
    next: &PackedRawFrame,
    alignments: [&Alignment; 2],
    cfg: &FusionConfig,
) -> Result<PackedRawFrame> {
    if !prev.same_shape(center) || !next.same_shape(center) {
        return Err(dim_err!("denoiser block inputs differ in shape"));
    }
    let (wp, mp) = register(prev, alignments[0])?;
    let (wn, mn) = register(next, alignments[1])?;
    fuse_triple(&wp, center, &wn, [&mp, &mn], cfg)
}

/// One denoiser block: align both neighbours to `center`, then fuse.
pub fn denoise_block(
    prev: &PackedRawFrame,
    center: &PackedRawFrame,
    next: &PackedRawFrame,
    flow_cfg: &FlowConfig,
    fusion_cfg: &FusionConfig,
) -> Result<PackedRawFrame> {
    if !prev.same_shape(center) || !next.same_shape(center) {
        return Err(dim_err!("denoiser block inputs differ in shape"));
    }
    let to_prev = align_pair(center, prev, flow_cfg)?;
    let to_next = align_pair(center, next, flow_cfg)?;
    denoise_block_aligned(prev, center, next, [&to_prev, &to_next], fusion_cfg)
}
