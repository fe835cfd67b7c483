use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Error, Result};
use crate::frame::{Frame, PackedRawFrame, Planar};
use crate::imgops;

/// Critic scores. The producer (a discriminator, conditioned however the
/// caller likes) is outside this crate; only its outputs are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

impl ScoreMap {
    pub fn new(shape: Vec<usize>, values: Vec<f32>) -> Result<Self> {
        if shape.iter().product::<usize>() != values.len() {
            return Err(dim_err!("score map shape {:?} does not hold {} values", shape, values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score map"));
        }
        Ok(Self { shape, values })
    }

    pub fn flat(values: Vec<f32>) -> Result<Self> {
        Self::new(vec![values.len()], values)
    }

    fn mean_of<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        if self.values.is_empty() {
            return Err(Error::Empty("score map"));
        }
        Ok(self.values.iter().map(|&v| f(v as f64)).sum::<f64>() / self.values.len() as f64)
    }
}

/// Intermediate activations of a network, one flat buffer per layer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStack {
    pub layers: Vec<Vec<f32>>,
}

impl FeatureStack {
    pub fn new(layers: Vec<Vec<f32>>) -> Self {
        Self { layers }
    }
}

/// Weights of the total objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_f: f64,
    pub lambda_r: f64,
    pub lambda_p: f64,
    pub lambda_g: f64,
    /// sRGB term weight inside the reconstruction loss.
    pub delta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda_f: 1e-2, lambda_r: 1e-1, lambda_p: 5e-3, lambda_g: 5e-5, delta: 0.5 }
    }
}

/// Hinge critic loss:
/// `-E[min(0, -1 + D_real)] - E[min(0, -1 - D_fake)]`.
pub fn hinge_d_loss(real: &ScoreMap, fake: &ScoreMap) -> Result<f64> {
    let r = real.mean_of(|d| -(-1.0 + d).min(0.0))?;
    let f = fake.mean_of(|d| -(-1.0 - d).min(0.0))?;
    Ok(r + f)
}

/// Generator side of the hinge loss: `-lambda_g * E[D_fake]`.
pub fn hinge_g_loss(fake: &ScoreMap, lambda_g: f64) -> Result<f64> {
    Ok(-lambda_g * fake.mean_of(|d| d)?)
}

fn layerwise_mean_l1(a: &FeatureStack, b: &FeatureStack) -> Result<f64> {
    if a.layers.len() != b.layers.len() {
        return Err(dim_err!("feature stacks have {} and {} layers", a.layers.len(), b.layers.len()));
    }
    let mut total = 0.0;
    for (i, (la, lb)) in a.layers.iter().zip(&b.layers).enumerate() {
        if la.len() != lb.len() {
            return Err(dim_err!("layer {i} has {} and {} elements", la.len(), lb.len()));
        }
        if la.is_empty() {
            return Err(Error::Empty("feature layer"));
        }
        let sum: f64 = la.iter().zip(lb).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum();
        total += sum / la.len() as f64;
    }
    Ok(total)
}

/// `sum_i (1 / N_i) ||D_i(real) - D_i(fake)||_1` over critic layers.
pub fn feature_matching_loss(real: &FeatureStack, fake: &FeatureStack) -> Result<f64> {
    layerwise_mean_l1(real, fake)
}

/// `sum_i (1 / M_i) ||V_i(gt) - V_i(pred)||_1` over extractor layers.
pub fn perceptual_loss(gt: &FeatureStack, pred: &FeatureStack) -> Result<f64> {
    layerwise_mean_l1(gt, pred)
}

fn mean_l1<P: Planar>(a: &P, b: &P) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(dim_err!("reconstruction inputs differ in shape"));
    }
    let w = a.width();
    let mut acc = 0.0;
    for (ra, rb) in a.data().chunks(w).zip(b.data().chunks(w)) {
        acc += ra.iter().zip(rb).map(|(x, y)| (*x as f64 - *y as f64).abs()).sum::<f64>();
    }
    Ok(acc / a.data().len() as f64)
}

/// Mean L1 in the raw domain plus `delta` times mean L1 in sRGB.
pub fn reconstruction_loss(
    raw_pred: &PackedRawFrame,
    raw_gt: &PackedRawFrame,
    srgb_pred: &Frame,
    srgb_gt: &Frame,
    delta: f64,
) -> Result<f64> {
    Ok(mean_l1(raw_gt, raw_pred)? + delta * mean_l1(srgb_gt, srgb_pred)?)
}

/// `adv_g + lambda_f feat + lambda_r recn + lambda_p prcp`.
pub fn total_objective(adv_g: f64, feat: f64, recn: f64, prcp: f64, w: &LossWeights) -> f64 {
    adv_g + w.lambda_f * feat + w.lambda_r * recn + w.lambda_p * prcp
}

/// Hand-crafted stand-in for a learned feature extractor: for each of three
/// scales, the luma and the absolute horizontal and vertical central
/// differences. Nine layers in total.
pub fn pyramid_features(frame: &Frame) -> Result<FeatureStack> {
    let luma = frame.luma()?;
    let (mut h, mut w) = (luma.height(), luma.width());
    let mut plane = luma.into_data();
    let mut layers = Vec::with_capacity(9);
    for scale in 0..3 {
        let (gx, gy) = imgops::central_gradients(&plane, h, w);
        layers.push(plane.clone());
        layers.push(gx.into_iter().map(f32::abs).collect());
        layers.push(gy.into_iter().map(f32::abs).collect());
        if scale < 2 {
            let (next, nh, nw) = imgops::pyr_down(&plane, h, w);
            plane = next;
            h = nh;
            w = nw;
        }
    }
    Ok(FeatureStack { layers })
}
