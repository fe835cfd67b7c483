use alloc::vec::Vec;

use crate::error::{param_err, Result};
use crate::frame::{Frame, Planar};
use crate::imgops;

/// Normalizer of the texture mask, `0.8 * sqrt(2)`.
pub const DEFAULT_MASK_ALPHA: f32 = 0.8 * core::f32::consts::SQRT_2;

/// Soft texture indicator with values in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMask {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

/// Magnitude of the 3x3 box-filtered central-difference gradients of the
/// luma of `frame`.
pub fn gradient_magnitude(frame: &Frame) -> Result<Vec<f32>> {
    let luma = frame.luma()?;
    let (h, w) = (luma.height(), luma.width());
    let (gx, gy) = imgops::central_gradients(luma.data(), h, w);
    let gx = imgops::box_mean(&gx, h, w, 3);
    let gy = imgops::box_mean(&gy, h, w, 3);
    Ok(gx.iter().zip(&gy).map(|(a, b)| libm::sqrtf(a * a + b * b)).collect())
}

/// `tanh(|grad| / alpha)` on the (box-filtered) luma gradient.
pub fn gradient_mask(frame: &Frame, alpha: f32) -> Result<GradientMask> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(param_err!("mask alpha must be positive, got {alpha}"));
    }
    let values = gradient_magnitude(frame)?.into_iter().map(|m| libm::tanhf(m / alpha)).collect();
    Ok(GradientMask { height: frame.height(), width: frame.width(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::ColorSpace;
    use proptest::prelude::*;

    #[test]
    fn constant_frame_gives_zero_mask() {
        let f = Frame::filled(8, 8, 3, 0.7, ColorSpace::Srgb).unwrap();
        let m = gradient_mask(&f, DEFAULT_MASK_ALPHA).unwrap();
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_ratio_gives_tanh_one() {
        // horizontal ramp with slope s: box-filtered central gradient is s
        // everywhere away from the borders
        let slope = 0.01f32;
        let f = Frame::from_fn(9, 40, 1, ColorSpace::Linear, |_, _, x| slope * x as f32).unwrap();
        let m = gradient_mask(&f, slope).unwrap();
        assert!((m.values[4 * 40 + 20] - libm::tanhf(1.0)).abs() < 1e-6);
        assert!((libm::tanhf(1.0) - 0.761_594_2).abs() < 1e-6);
        assert!(gradient_mask(&f, 0.0).is_err());
    }

    #[test]
    fn step_edge_matches_reference_loop() {
        let (h, w) = (6, 10);
        let f = Frame::from_fn(h, w, 1, ColorSpace::Linear, |_, _, x| if x >= 5 { 1.0 } else { 0.0 }).unwrap();
        let alpha = DEFAULT_MASK_ALPHA as f64;
        let m = gradient_mask(&f, DEFAULT_MASK_ALPHA).unwrap();
        let px = |y: isize, x: isize| {
            let (y, x) = (y.clamp(0, h as isize - 1) as usize, x.clamp(0, w as isize - 1) as usize);
            f.get(0, y, x) as f64
        };
        let gx = |y: isize, x: isize| 0.5 * (px(y, x + 1) - px(y, x - 1));
        let gy = |y: isize, x: isize| 0.5 * (px(y + 1, x) - px(y - 1, x));
        for y in 0..h as isize {
            for x in 0..w as isize {
                let (mut sx, mut sy) = (0.0, 0.0);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (yy, xx) = ((y + dy).clamp(0, h as isize - 1), (x + dx).clamp(0, w as isize - 1));
                        sx += gx(yy, xx) / 9.0;
                        sy += gy(yy, xx) / 9.0;
                    }
                }
                let expected = libm::tanh((sx * sx + sy * sy).sqrt() / alpha);
                let got = m.values[y as usize * w + x as usize] as f64;
                assert!((got - expected).abs() < 1e-6, "({y},{x}) {got} vs {expected}");
            }
        }
    }

    fn random_frame(h: usize, w: usize, seed: u64) -> Frame {
        let mut s = seed;
        Frame::from_fn(h, w, 3, ColorSpace::Srgb, |_, _, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 40) as f32 / (1u64 << 24) as f32
        })
        .unwrap()
    }

    proptest! {
        #[test]
        fn mask_range_and_monotonicity(seed in any::<u64>()) {
            let f = random_frame(7, 9, seed);
            let mags = gradient_magnitude(&f).unwrap();
            let m = gradient_mask(&f, DEFAULT_MASK_ALPHA).unwrap();
            prop_assert!(m.values.iter().all(|v| (0.0..1.0).contains(v)));
            for (i, (&ma, &va)) in mags.iter().zip(&m.values).enumerate() {
                for (&mb, &vb) in mags.iter().zip(&m.values).skip(i + 1) {
                    if ma < mb {
                        prop_assert!(va <= vb);
                    }
                }
            }
        }

        #[test]
        fn mask_ignores_a_constant_offset(seed in any::<u64>(), k in -64i32..64) {
            // values and offset on a 2^-10 grid keep the shifted frame exact
            let mut s = seed;
            let base = Frame::from_fn(6, 6, 3, ColorSpace::Srgb, |_, _, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 40) % 512 + 256) as f32 / 1024.0
            })
            .unwrap();
            let c = k as f32 / 1024.0;
            let shifted = Frame::from_fn(6, 6, 3, ColorSpace::Srgb, |ch, y, x| base.get(ch, y, x) + c).unwrap();
            let (a, b) = (gradient_mask(&base, 0.3).unwrap(), gradient_mask(&shifted, 0.3).unwrap());
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() <= 1e-6);
            }
        }

        #[test]
        fn mask_is_strictly_monotone_in_slope(s1 in 0.0f32..0.5, gap in 1e-3f32..0.5) {
            let ramp = |slope: f32| Frame::from_fn(5, 12, 1, ColorSpace::Linear, |_, _, x| slope * x as f32).unwrap();
            let (a, b) = (gradient_mask(&ramp(s1), DEFAULT_MASK_ALPHA).unwrap(), gradient_mask(&ramp(s1 + gap), DEFAULT_MASK_ALPHA).unwrap());
            prop_assert!(a.values[2 * 12 + 6] < b.values[2 * 12 + 6]);
        }
    }
}
