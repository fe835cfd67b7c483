use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::frame::Planar;

/// Mean squared error over all samples.
pub fn mse<P: Planar>(pred: &P, reference: &P) -> Result<f64> {
    if !pred.same_shape(reference) {
        return Err(dim_err!("metric inputs differ in shape"));
    }
    let w = pred.width();
    let mut acc = 0.0f64;
    for (a, b) in pred.data().chunks(w).zip(reference.data().chunks(w)) {
        acc += a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = *x as f64 - *y as f64;
                d * d
            })
            .sum::<f64>();
    }
    Ok(acc / pred.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical inputs.
pub fn psnr<P: Planar>(pred: &P, reference: &P, peak: f64) -> Result<f64> {
    let e = mse(pred, reference)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(peak * peak / e))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let r = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" correlation: output is `(h - 10) x (w - 10)`.
fn filter_valid(plane: &[f64], h: usize, w: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * plane[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..SSIM_WINDOW).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f32], b: &[f32], h: usize, w: usize) -> f64 {
    let k = gaussian_window();
    let a: Vec<f64> = a.iter().map(|&v| v as f64).collect();
    let b: Vec<f64> = b.iter().map(|&v| v as f64).collect();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let [mu_a, mu_b, s_aa, s_bb, s_ab] = [a, b, aa, bb, ab].map(|p| filter_valid(&p, h, w, &k));
    let mut acc = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = s_aa[i] - ma * ma;
        let vb = s_bb[i] - mb * mb;
        let cov = s_ab[i] - ma * mb;
        acc +=
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
    }
    acc / mu_a.len() as f64
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// `C1 = 0.01^2`, `C2 = 0.03^2` for unit dynamic range. Multi-channel inputs
/// are averaged over channels.
pub fn ssim<P: Planar>(pred: &P, reference: &P) -> Result<f64> {
    if !pred.same_shape(reference) {
        return Err(dim_err!("ssim inputs differ in shape"));
    }
    let (h, w) = (pred.height(), pred.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(dim_err!("ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"));
    }
    let c = pred.channels();
    Ok((0..c).map(|i| ssim_plane(pred.plane(i), reference.plane(i), h, w)).sum::<f64>() / c as f64)
}
