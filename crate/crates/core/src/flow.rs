//! Dense flow estimation and warping.
//!
//! Flow vectors follow the backward-warping convention: the target frame is
//! sampled at `p + F(p)` to bring it onto the reference grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, param_err, Error, Result};
use crate::frame::{Frame, Planar};
use crate::imgops;

/// Dense per-pixel displacement field, stored interleaved `(u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; 2 * height * width] }
    }

    pub fn constant(height: usize, width: usize, u: f32, v: f32) -> Self {
        Self::from_fn(height, width, |_, _| (u, v))
    }

    pub fn from_fn<F: FnMut(usize, usize) -> (f32, f32)>(height: usize, width: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(2 * height * width);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(y, x);
                data.push(u);
                data.push(v);
            }
        }
        Self { height, width, data }
    }

    /// Builds a field from interleaved `(u, v)` pairs.
    pub fn from_interleaved(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 2 * height * width {
            return Err(dim_err!("flow data length {} does not match {height}x{width}x2", data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow field"));
        }
        Ok(Self { height, width, data })
    }

    fn from_planes(height: usize, width: usize, u: &[f32], v: &[f32]) -> Self {
        let data = u.iter().zip(v).flat_map(|(&a, &b)| [a, b]).collect();
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f32, f32) {
        let i = 2 * (y * self.width + x);
        (self.data[i], self.data[i + 1])
    }

    pub fn interleaved(&self) -> &[f32] {
        &self.data
    }

    fn planes(&self) -> (Vec<f32>, Vec<f32>) {
        let u = self.data.iter().step_by(2).copied().collect();
        let v = self.data.iter().skip(1).step_by(2).copied().collect();
        (u, v)
    }

    /// Bilinear sample of the field at a fractional position, clamped.
    pub fn sample(&self, sx: f32, sy: f32) -> (f32, f32) {
        let (u, v) = self.planes();
        (
            imgops::sample_bilinear(&u, self.height, self.width, sx, sy),
            imgops::sample_bilinear(&v, self.height, self.width, sx, sy),
        )
    }

    /// Mean endpoint error against `truth` over pixels at least `margin`
    /// from every border.
    pub fn mean_epe(&self, truth: &FlowField, margin: usize) -> f64 {
        assert_eq!((self.height, self.width), (truth.height, truth.width));
        let mut sum = 0.0;
        let mut n = 0usize;
        for y in margin..self.height.saturating_sub(margin) {
            for x in margin..self.width.saturating_sub(margin) {
                let (a, b) = self.get(y, x);
                let (c, d) = truth.get(y, x);
                sum += libm::hypot((a - c) as f64, (b - d) as f64);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Resamples a field estimated at `1 / scale` resolution onto a
    /// `height x width` grid, multiplying the vectors by `scale`.
    fn upscale(&self, height: usize, width: usize, scale: f32) -> FlowField {
        if height == self.height && width == self.width && scale == 1.0 {
            return self.clone();
        }
        let (u, v) = self.planes();
        let inv = 1.0 / scale;
        let mut data = Vec::with_capacity(2 * height * width);
        for y in 0..height {
            for x in 0..width {
                let (sx, sy) = (x as f32 * inv, y as f32 * inv);
                data.push(scale * imgops::sample_bilinear(&u, self.height, self.width, sx, sy));
                data.push(scale * imgops::sample_bilinear(&v, self.height, self.width, sx, sy));
            }
        }
        FlowField { height, width, data }
    }
}

/// Per-pixel confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityMask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ValidityMask {
    pub fn ones(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![1.0; height * width] }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0.0; height * width] }
    }

    pub fn from_values(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(dim_err!("mask length {} does not match {height}x{width}", data.len()));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(param_err!("mask values must lie in [0, 1]"));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Element-wise product.
    pub fn product(&self, other: &ValidityMask) -> Result<ValidityMask> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(dim_err!("mask dimensions differ"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Self { height: self.height, width: self.width, data })
    }
}

/// Settings of the pyramidal estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowConfig {
    /// `None` halves until the smaller side would drop below 16 px, at most
    /// five levels.
    pub pyramid_levels: Option<usize>,
    pub iters_per_level: usize,
    /// Side of the square least-squares window; odd and at least 3.
    pub window: usize,
    pub median_filter: bool,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { pyramid_levels: None, iters_per_level: 3, window: 5, median_filter: true }
    }
}

pub const MAX_AUTO_LEVELS: usize = 5;
pub const MIN_LEVEL_SIZE: usize = 16;
/// Tikhonov term added to the diagonal of each 2x2 normal system.
pub const DAMPING: f32 = 1e-4;

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(param_err!("flow window must be odd and >= 3, got {}", self.window));
        }
        if self.iters_per_level == 0 {
            return Err(param_err!("iters_per_level must be at least 1"));
        }
        if self.pyramid_levels == Some(0) {
            return Err(param_err!("pyramid_levels must be at least 1"));
        }
        Ok(())
    }

    /// Number of pyramid levels used for an image of the given size.
    pub fn levels_for(&self, height: usize, width: usize) -> usize {
        if let Some(n) = self.pyramid_levels {
            return n;
        }
        let (mut h, mut w) = (height, width);
        let mut levels = 1;
        while levels < MAX_AUTO_LEVELS && h.div_ceil(2).min(w.div_ceil(2)) >= MIN_LEVEL_SIZE {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
            levels += 1;
        }
        levels
    }
}

/// Output of [`estimate_flow`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub final_flow: FlowField,
    /// One full-resolution field per refinement pass, coarsest first. The
    /// last entry equals `final_flow`.
    pub iterations: Vec<FlowField>,
    /// Set when either input is constant and no motion can be measured.
    pub flat: bool,
}

fn is_constant(p: &[f32]) -> bool {
    p.iter().all(|&v| v == p[0])
}

/// Coarse-to-fine dense Lucas-Kanade between two single-channel frames.
pub fn estimate_flow(reference: &Frame, target: &Frame, cfg: &FlowConfig) -> Result<FlowResult> {
    if reference.channels() != 1 {
        return Err(Error::ChannelCount { expected: 1, found: reference.channels() });
    }
    if !reference.same_shape(target) {
        return Err(dim_err!(
            "flow inputs differ: {}x{} vs {}x{}x{}",
            reference.height(),
            reference.width(),
            target.height(),
            target.width(),
            target.channels()
        ));
    }
    estimate_flow_planes(reference.data(), target.data(), reference.height(), reference.width(), cfg)
}

pub(crate) fn estimate_flow_planes(
    reference: &[f32],
    target: &[f32],
    h: usize,
    w: usize,
    cfg: &FlowConfig,
) -> Result<FlowResult> {
    cfg.validate()?;
    if is_constant(reference) || is_constant(target) {
        let zero = FlowField::zeros(h, w);
        return Ok(FlowResult { final_flow: zero.clone(), iterations: vec![zero], flat: true });
    }

    let levels = cfg.levels_for(h, w);
    let mut pyramid = Vec::with_capacity(levels);
    pyramid.push((reference.to_vec(), target.to_vec(), h, w));
    for _ in 1..levels {
        let (r, t, lh, lw) = pyramid.last().unwrap();
        let (r2, nh, nw) = imgops::pyr_down(r, *lh, *lw);
        let (t2, _, _) = imgops::pyr_down(t, *lh, *lw);
        pyramid.push((r2, t2, nh, nw));
    }

    let mut iterations = Vec::with_capacity(levels * cfg.iters_per_level);
    let mut flow: Option<FlowField> = None;
    for level in (0..levels).rev() {
        let (r, t, lh, lw) = &pyramid[level];
        let mut current = match flow.take() {
            Some(coarse) => coarse.upscale(*lh, *lw, 2.0),
            None => FlowField::zeros(*lh, *lw),
        };
        for _ in 0..cfg.iters_per_level {
            current = lk_pass(r, t, *lh, *lw, &current, cfg);
            let scale = (1usize << level) as f32;
            iterations.push(current.upscale(h, w, scale));
        }
        flow = Some(current);
    }
    let final_flow = iterations.last().cloned().expect("at least one pass");
    Ok(FlowResult { final_flow, iterations, flat: false })
}

/// One dense least-squares refinement at a single level.
fn lk_pass(reference: &[f32], target: &[f32], h: usize, w: usize, flow: &FlowField, cfg: &FlowConfig) -> FlowField {
    let n = h * w;
    let mut warped = vec![0.0f32; n];
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(y, x);
            warped[y * w + x] = imgops::sample_bilinear(target, h, w, x as f32 + u, y as f32 + v);
        }
    }
    let (gx, gy) = imgops::central_gradients(&warped, h, w);
    let mut xx = vec![0.0f32; n];
    let mut xy = vec![0.0f32; n];
    let mut yy = vec![0.0f32; n];
    let mut xt = vec![0.0f32; n];
    let mut yt = vec![0.0f32; n];
    for i in 0..n {
        let it = warped[i] - reference[i];
        xx[i] = gx[i] * gx[i];
        xy[i] = gx[i] * gy[i];
        yy[i] = gy[i] * gy[i];
        xt[i] = gx[i] * it;
        yt[i] = gy[i] * it;
    }
    let win = cfg.window;
    let [sxx, sxy, syy, sxt, syt] = [xx, xy, yy, xt, yt].map(|p| imgops::box_sum_truncated(&p, h, w, win));

    let (mut u, mut v) = flow.planes();
    for i in 0..n {
        let a = sxx[i] + DAMPING;
        let b = sxy[i];
        let d = syy[i] + DAMPING;
        let det = a * d - b * b;
        // solve [a b; b d] [du dv] = -[sxt syt]
        let du = (-d * sxt[i] + b * syt[i]) / det;
        let dv = (b * sxt[i] - a * syt[i]) / det;
        if du.is_finite() && dv.is_finite() {
            u[i] += du;
            v[i] += dv;
        }
    }
    if cfg.median_filter {
        u = imgops::median3x3(&u, h, w);
        v = imgops::median3x3(&v, h, w);
    }
    FlowField::from_planes(h, w, &u, &v)
}

/// Bilinearly samples `source` at `p + F(p)` with clamp-to-edge addressing.
///
/// The returned mask is the fraction of each bilinear footprint that falls
/// inside the source: 1 inside, 0 outside, fractional in the one-pixel band
/// around the border. Packed raw frames are warped plane by plane with the
/// same field.
pub fn warp<T: Planar>(source: &T, flow: &FlowField) -> Result<(T, ValidityMask)> {
    let (h, w) = (source.height(), source.width());
    if (flow.height, flow.width) != (h, w) {
        return Err(dim_err!("flow is {}x{} but source is {h}x{w}", flow.height, flow.width));
    }
    let n = h * w;
    let mut mask = vec![0.0f32; n];
    let mut coords = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(y, x);
            let (sx, sy) = (x as f32 + u, y as f32 + v);
            mask[y * w + x] = imgops::coverage(h, w, sx, sy);
            coords.push((sx, sy));
        }
    }
    let mut out = Vec::with_capacity(source.data().len());
    for c in 0..source.channels() {
        let plane = source.plane(c);
        out.extend(coords.iter().map(|&(sx, sy)| imgops::sample_bilinear(plane, h, w, sx, sy)));
    }
    Ok((source.rebuild(out), ValidityMask { height: h, width: w, data: mask }))
}

/// Relative and absolute terms of the forward-backward test.
pub const FB_RELATIVE: f32 = 0.01;
pub const FB_ABSOLUTE: f32 = 0.5;

/// Forward-backward consistency: a pixel is valid when following the
/// forward flow and then the backward flow returns close to where it
/// started.
pub fn fb_consistency(forward: &FlowField, backward: &FlowField) -> Result<ValidityMask> {
    let (h, w) = (forward.height, forward.width);
    if (backward.height, backward.width) != (h, w) {
        return Err(dim_err!("forward and backward flows differ in size"));
    }
    let (bu, bv) = backward.planes();
    let mut data = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let (fu, fv) = forward.get(y, x);
            let (sx, sy) = (x as f32 + fu, y as f32 + fv);
            let b0 = imgops::sample_bilinear(&bu, h, w, sx, sy);
            let b1 = imgops::sample_bilinear(&bv, h, w, sx, sy);
            let diff = (fu + b0) * (fu + b0) + (fv + b1) * (fv + b1);
            let mag = fu * fu + fv * fv + b0 * b0 + b1 * b1;
            if diff < FB_RELATIVE * mag + FB_ABSOLUTE {
                data[y * w + x] = 1.0;
            }
        }
    }
    Ok(ValidityMask { height: h, width: w, data })
}

/// Mean anisotropic total variation: the sum of absolute forward
/// differences of both components along x and y, divided by the pixel
/// count.
pub fn total_variation(flow: &FlowField) -> f64 {
    let (h, w) = (flow.height, flow.width);
    let mut acc = 0.0f64;
    for y in 0..h {
        let mut row = 0.0f64;
        for x in 0..w {
            let (u, v) = flow.get(y, x);
            if x + 1 < w {
                let (u1, v1) = flow.get(y, x + 1);
                row += ((u1 - u).abs() + (v1 - v).abs()) as f64;
            }
            if y + 1 < h {
                let (u1, v1) = flow.get(y + 1, x);
                row += ((u1 - u).abs() + (v1 - v).abs()) as f64;
            }
        }
        acc += row;
    }
    acc / (h * w) as f64
}

/// Mean absolute difference between `target` warped by `flow` and
/// `reference`, over all pixels and channels.
pub fn warp_l1(flow: &FlowField, reference: &Frame, target: &Frame) -> Result<f64> {
    if !reference.same_shape(target) {
        return Err(dim_err!("reference and target differ in shape"));
    }
    let (warped, _) = warp(target, flow)?;
    let w = reference.width();
    let mut acc = 0.0f64;
    for (rrow, wrow) in reference.data().chunks(w).zip(warped.data().chunks(w)) {
        acc += rrow.iter().zip(wrow).map(|(a, b)| (a - b).abs() as f64).sum::<f64>();
    }
    Ok(acc / reference.data().len() as f64)
}

/// `(warp term, smoothness term)` for every refinement pass.
pub fn flow_objective_terms(
    result: &FlowResult,
    reference_clean: &Frame,
    target_clean: &Frame,
) -> Result<Vec<(f64, f64)>> {
    result.iterations.iter().map(|f| Ok((warp_l1(f, reference_clean, target_clean)?, total_variation(f)))).collect()
}

/// `sum_i gamma^(N - i) * (alpha * warp_i + tv_i)` for `i = 1..N`, so later
/// passes carry more weight when `gamma < 1`.
pub fn weighted_flow_objective(terms: &[(f64, f64)], gamma: f64, alpha: f64) -> Result<f64> {
    if terms.is_empty() {
        return Err(Error::Empty("flow iterations"));
    }
    let n = terms.len();
    Ok(terms.iter().enumerate().map(|(i, &(lw, ltv))| libm::pow(gamma, (n - 1 - i) as f64) * (alpha * lw + ltv)).sum())
}

pub const FLOW_GAMMA: f64 = 0.8;
pub const FLOW_ALPHA: f64 = 100.0;

/// Iteration-weighted flow objective evaluated on clean frames.
pub fn flow_objective(
    result: &FlowResult,
    reference_clean: &Frame,
    target_clean: &Frame,
    gamma: f64,
    alpha: f64,
) -> Result<f64> {
    if result.iterations.is_empty() {
        return Err(Error::Empty("flow iterations"));
    }
    let terms = flow_objective_terms(result, reference_clean, target_clean)?;
    weighted_flow_objective(&terms, gamma, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::ColorSpace;
    use crate::scene;
    use proptest::prelude::*;

    fn lcg(seed: &mut u64) -> f32 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 40) as f32 / (1u64 << 24) as f32
    }

    #[test]
    fn zero_flow_warp_is_identity() {
        let mut s = 1;
        let f = Frame::from_fn(9, 7, 3, ColorSpace::Srgb, |_, _, _| lcg(&mut s)).unwrap();
        let (out, mask) = warp(&f, &FlowField::zeros(9, 7)).unwrap();
        assert_eq!(out, f);
        assert!(mask.values().iter().all(|&m| m == 1.0));
    }

    #[test]
    fn integer_flow_shifts_ramp() {
        let w = 10;
        let ramp = Frame::from_fn(4, w, 1, ColorSpace::Linear, |_, _, x| x as f32 / w as f32).unwrap();
        let (out, mask) = warp(&ramp, &FlowField::constant(4, w, 1.0, 0.0)).unwrap();
        for y in 0..4 {
            for x in 0..w - 1 {
                assert_eq!(out.get(0, y, x), ramp.get(0, y, x + 1));
                assert_eq!(mask.get(y, x), 1.0);
            }
            assert_eq!(mask.get(y, w - 1), 0.0);
        }
    }

    #[test]
    fn warp_matches_scalar_bilinear_oracle() {
        let (h, w) = (12, 11);
        let mut s = 5;
        let src = Frame::from_fn(h, w, 1, ColorSpace::Linear, |_, _, _| lcg(&mut s)).unwrap();
        let flow = FlowField::from_fn(h, w, |_, _| (6.0 * lcg(&mut s) - 3.0, 6.0 * lcg(&mut s) - 3.0));
        let (out, _) = warp(&src, &flow).unwrap();
        for y in 0..h {
            for x in 0..w {
                let (u, v) = flow.get(y, x);
                let sx = ((x as f64) + u as f64).clamp(0.0, (w - 1) as f64);
                let sy = ((y as f64) + v as f64).clamp(0.0, (h - 1) as f64);
                let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                let g = |yy: usize, xx: usize| src.get(0, yy, xx) as f64;
                let expected = (1.0 - fy) * ((1.0 - fx) * g(y0, x0) + fx * g(y0, x1))
                    + fy * ((1.0 - fx) * g(y1, x0) + fx * g(y1, x1));
                assert!((out.get(0, y, x) as f64 - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn warp_rejects_mismatched_flow() {
        let f = Frame::filled(4, 4, 1, 0.0, ColorSpace::Linear).unwrap();
        assert!(warp(&f, &FlowField::zeros(4, 5)).is_err());
    }

    #[test]
    fn fb_consistency_analytic_cases() {
        let fwd = FlowField::constant(8, 8, 1.5, -0.5);
        let bwd = FlowField::constant(8, 8, -1.5, 0.5);
        assert!(fb_consistency(&fwd, &bwd).unwrap().values().iter().all(|&m| m == 1.0));
        let fwd = FlowField::constant(8, 8, 5.0, 0.0);
        let bwd = FlowField::zeros(8, 8);
        assert!(fb_consistency(&fwd, &bwd).unwrap().values().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = scene::textured(64, 64, 3);
        let r = estimate_flow(&f, &f, &FlowConfig::default()).unwrap();
        assert!(!r.flat);
        for y in 0..64 {
            for x in 0..64 {
                let (u, v) = r.final_flow.get(y, x);
                assert!(u.abs() < 1e-3 && v.abs() < 1e-3);
            }
        }
        assert_eq!(r.iterations.last(), Some(&r.final_flow));
    }

    #[test]
    fn constant_frames_are_flagged_flat() {
        let f = Frame::filled(32, 32, 1, 0.4, ColorSpace::Linear).unwrap();
        let r = estimate_flow(&f, &f, &FlowConfig::default()).unwrap();
        assert!(r.flat);
        assert_eq!(r.iterations.len(), 1);
        assert!(r.final_flow.interleaved().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn estimate_flow_input_errors() {
        let a = Frame::filled(16, 16, 1, 0.4, ColorSpace::Linear).unwrap();
        let b = Frame::filled(16, 17, 1, 0.4, ColorSpace::Linear).unwrap();
        assert!(matches!(estimate_flow(&a, &b, &FlowConfig::default()), Err(Error::Dimension(_))));
        let c = Frame::filled(16, 16, 3, 0.4, ColorSpace::Linear).unwrap();
        assert!(estimate_flow(&c, &c, &FlowConfig::default()).is_err());
        let bad = FlowConfig { window: 4, ..FlowConfig::default() };
        assert!(estimate_flow(&a, &a, &bad).is_err());
    }

    #[test]
    fn recovers_small_translation() {
        let base = scene::textured(96, 96, 11);
        let moved = scene::translate(&base, 2.0, -1.0);
        let r = estimate_flow(&base, &moved, &FlowConfig::default()).unwrap();
        let truth = FlowField::constant(96, 96, 2.0, -1.0);
        let epe = r.final_flow.mean_epe(&truth, 8);
        assert!(epe < 0.25, "epe {epe}");
        let iters = FlowConfig::default().levels_for(96, 96) * 3;
        assert_eq!(r.iterations.len(), iters);
    }

    #[test]
    fn auto_levels() {
        let cfg = FlowConfig::default();
        assert_eq!(cfg.levels_for(256, 256), 5);
        assert_eq!(cfg.levels_for(128, 128), 4);
        assert_eq!(cfg.levels_for(20, 400), 1);
        assert_eq!(cfg.levels_for(4096, 4096), 5);
    }

    #[test]
    fn objective_worked_example() {
        let v = weighted_flow_objective(&[(1.0, 0.1), (0.5, 0.05)], 0.8, 100.0).unwrap();
        assert!((v - 130.13).abs() < 1e-9, "{v}");
        assert!(weighted_flow_objective(&[], 0.8, 100.0).is_err());
    }

    #[test]
    fn objective_matches_reference_loop() {
        let (h, w) = (10, 9);
        let mut s = 17;
        let a = Frame::from_fn(h, w, 1, ColorSpace::Linear, |_, _, _| lcg(&mut s)).unwrap();
        let b = Frame::from_fn(h, w, 1, ColorSpace::Linear, |_, _, _| lcg(&mut s)).unwrap();
        let iterations: Vec<FlowField> = (0..3)
            .map(|_| FlowField::from_fn(h, w, |_, _| (2.0 * lcg(&mut s) - 1.0, 2.0 * lcg(&mut s) - 1.0)))
            .collect();
        let result = FlowResult { final_flow: iterations[2].clone(), iterations: iterations.clone(), flat: false };
        let got = flow_objective(&result, &a, &b, 0.8, 100.0).unwrap();

        let mut expected = 0.0f64;
        for (i, f) in iterations.iter().enumerate() {
            let mut lw = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    let (u, v) = f.get(y, x);
                    let sx = (x as f64 + u as f64).clamp(0.0, (w - 1) as f64);
                    let sy = (y as f64 + v as f64).clamp(0.0, (h - 1) as f64);
                    let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
                    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
                    let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                    let g = |yy: usize, xx: usize| b.get(0, yy, xx) as f64;
                    let s = (1.0 - fy) * ((1.0 - fx) * g(y0, x0) + fx * g(y0, x1))
                        + fy * ((1.0 - fx) * g(y1, x0) + fx * g(y1, x1));
                    lw += (s - a.get(0, y, x) as f64).abs();
                }
            }
            lw /= (h * w) as f64;
            let mut tv = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    let (u, v) = f.get(y, x);
                    if x + 1 < w {
                        let (u1, v1) = f.get(y, x + 1);
                        tv += ((u1 - u).abs() + (v1 - v).abs()) as f64;
                    }
                    if y + 1 < h {
                        let (u1, v1) = f.get(y + 1, x);
                        tv += ((u1 - u).abs() + (v1 - v).abs()) as f64;
                    }
                }
            }
            tv /= (h * w) as f64;
            expected += 0.8f64.powi(2 - i as i32) * (100.0 * lw + tv);
        }
        assert!((got - expected).abs() < 1e-6 * expected.max(1.0), "{got} vs {expected}");
    }

    #[test]
    fn objective_weights_increase_and_are_monotone() {
        let base = [(1.0, 0.0), (1.0, 0.0), (1.0, 0.0)];
        let v0 = weighted_flow_objective(&base, 0.8, 1.0).unwrap();
        for i in 0..3 {
            let mut t = base;
            t[i].0 += 1.0;
            let bump = weighted_flow_objective(&t, 0.8, 1.0).unwrap() - v0;
            assert!(bump > 0.0);
            if i > 0 {
                let mut prev = base;
                prev[i - 1].0 += 1.0;
                assert!(bump > weighted_flow_objective(&prev, 0.8, 1.0).unwrap() - v0);
            }
        }
    }

    proptest! {
        #[test]
        fn warp_by_zero_is_identity(h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
            let mut s = seed;
            let f = Frame::from_fn(h, w, 1, ColorSpace::Linear, |_, _, _| lcg(&mut s)).unwrap();
            let (out, _) = warp(&f, &FlowField::zeros(h, w)).unwrap();
            prop_assert_eq!(out, f);
        }

        #[test]
        fn integer_warp_is_an_index_shift(dx in -3i32..=3, dy in -3i32..=3, seed in any::<u64>()) {
            let (h, w) = (9usize, 11usize);
            let mut s = seed;
            let f = Frame::from_fn(h, w, 1, ColorSpace::Linear, |_, _, _| lcg(&mut s)).unwrap();
            let (out, _) = warp(&f, &FlowField::constant(h, w, dx as f32, dy as f32)).unwrap();
            for y in 3..h - 3 {
                for x in 3..w - 3 {
                    let (sy, sx) = ((y as i32 + dy) as usize, (x as i32 + dx) as usize);
                    prop_assert_eq!(out.get(0, y, x), f.get(0, sy, sx));
                }
            }
        }

        #[test]
        fn objective_is_monotone_in_each_warp_term(
            terms in prop::collection::vec((0.0f64..10.0, 0.0f64..1.0), 1..6),
            pick in any::<prop::sample::Index>(),
            bump in 1e-3f64..5.0,
        ) {
            let i = pick.index(terms.len());
            let mut more = terms.clone();
            more[i].0 += bump;
            let base = weighted_flow_objective(&terms, FLOW_GAMMA, FLOW_ALPHA).unwrap();
            prop_assert!(weighted_flow_objective(&more, FLOW_GAMMA, FLOW_ALPHA).unwrap() > base);
        }
    }
}
