//! Raw synthesis and rendering.
//!
//! [`unprocess`] turns a display-referred sRGB frame into packed RGGB raw
//! data by inverting a simple camera pipeline, [`add_noise`] applies the
//! heteroscedastic shot + read noise model, and [`process_isp`] renders packed
//! raw back to sRGB with a fixed bilinear-demosaic pipeline.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, param_err, Error, Result};
use crate::frame::{pack_bayer, unpack_bayer, ColorSpace, Frame, PackedRawFrame, Planar, RawBayerFrame};
use crate::rng::NoiseStream;

/// Fixed colour pipeline parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IspParams {
    /// Red, green and blue white-balance multipliers.
    pub wb_gains: [f32; 3],
    /// Camera-to-output colour matrix, row-major. Rows sum to one.
    pub ccm: [[f32; 3]; 3],
    pub apply_tone_curve: bool,
}

pub const IDENTITY_CCM: [[f32; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

impl Default for IspParams {
    fn default() -> Self {
        Self { wb_gains: [2.0, 1.0, 1.5], ccm: IDENTITY_CCM, apply_tone_curve: true }
    }
}

impl IspParams {
    /// Identity colour matrix, unit gains, no tone curve.
    pub fn neutral() -> Self {
        Self { wb_gains: [1.0; 3], ccm: IDENTITY_CCM, apply_tone_curve: false }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(g) = self.wb_gains.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
            return Err(param_err!("white-balance gain {g} must be positive"));
        }
        for (i, row) in self.ccm.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("colour matrix"));
            }
            let sum: f64 = row.iter().map(|&v| v as f64).sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(param_err!("colour matrix row {i} sums to {sum}, expected 1"));
            }
        }
        Ok(())
    }
}

fn ccm_f64(m: &[[f32; 3]; 3]) -> [[f64; 3]; 3] {
    m.map(|row| row.map(|v| v as f64))
}

/// Inverse of a 3x3 matrix by cofactors.
pub fn invert3(m: &[[f64; 3]; 3]) -> Result<[[f64; 3]; 3]> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    if !det.is_finite() || det.abs() < 1e-9 {
        return Err(param_err!("colour matrix is singular (det = {det})"));
    }
    let inv = 1.0 / det;
    Ok([
        [c00 * inv, (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv, (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv],
        [c01 * inv, (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv, (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv],
        [c02 * inv, (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv, (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv],
    ])
}

#[inline]
fn apply3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// sRGB electro-optical decode.
pub fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        libm::pow((v + 0.055) / 1.055, 2.4)
    }
}

/// sRGB encode, inverse of [`srgb_to_linear`].
pub fn linear_to_srgb(v: f64) -> f64 {
    if v <= 0.0031308 {
        v * 12.92
    } else {
        1.055 * libm::pow(v, 1.0 / 2.4) - 0.055
    }
}

/// Smoothstep tone curve `3x^2 - 2x^3`.
pub fn smoothstep(x: f64) -> f64 {
    x * x * (3.0 - 2.0 * x)
}

/// Inverse of [`smoothstep`] on `[0, 1]`.
pub fn inverse_smoothstep(y: f64) -> f64 {
    let y = y.clamp(0.0, 1.0);
    0.5 - libm::sin(libm::asin(1.0 - 2.0 * y) / 3.0)
}

/// Inverts the display pipeline: sRGB decode, inverse tone curve, inverse
/// colour matrix, inverse white balance, clamp, RGGB mosaic, pack.
pub fn unprocess(frame: &Frame, params: &IspParams) -> Result<PackedRawFrame> {
    params.validate()?;
    if frame.channels() != 3 {
        return Err(Error::ChannelCount { expected: 3, found: frame.channels() });
    }
    if frame.color() != ColorSpace::Srgb {
        return Err(param_err!("unprocess expects an sRGB-encoded frame"));
    }
    let (h, w) = (frame.height(), frame.width());
    if h % 2 != 0 || w % 2 != 0 {
        return Err(dim_err!("unprocess needs even dimensions, got {h}x{w}"));
    }
    let inv_ccm = invert3(&ccm_f64(&params.ccm))?;
    let gains = params.wb_gains.map(|g| g as f64);
    let mut mosaic = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut rgb = [0usize, 1, 2].map(|c| {
                let lin = srgb_to_linear(frame.get(c, y, x).clamp(0.0, 1.0) as f64);
                if params.apply_tone_curve {
                    inverse_smoothstep(lin)
                } else {
                    lin
                }
            });
            rgb = apply3(&inv_ccm, rgb);
            let site = bayer_site(y, x);
            mosaic[y * w + x] = (rgb[site] / gains[site]).clamp(0.0, 1.0) as f32;
        }
    }
    Ok(pack_bayer(&RawBayerFrame::new(h, w, mosaic)?))
}

/// Colour index (0 = R, 1 = G, 2 = B) sampled at a mosaic position.
#[inline]
pub fn bayer_site(y: usize, x: usize) -> usize {
    match (y % 2, x % 2) {
        (0, 0) => 0,
        (1, 1) => 2,
        _ => 1,
    }
}

/// Bilinear demosaic of an RGGB mosaic into a linear 3-channel frame.
///
/// Missing samples are the mean of the in-bounds same-colour neighbours:
/// the four edge neighbours for green, the two horizontal or vertical
/// neighbours for red/blue at green sites, the four diagonals for red at
/// blue sites and vice versa.
pub fn demosaic_bilinear(raw: &RawBayerFrame) -> Frame {
    const CROSS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const DIAG: [(isize, isize); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];
    const HORIZ: [(isize, isize); 2] = [(0, -1), (0, 1)];
    const VERT: [(isize, isize); 2] = [(-1, 0), (1, 0)];

    let (h, w) = (raw.height(), raw.width());
    let avg = |y: usize, x: usize, taps: &[(isize, isize)]| -> f32 {
        let mut sum = 0.0;
        let mut n = 0;
        for &(dy, dx) in taps {
            let (sy, sx) = (y as isize + dy, x as isize + dx);
            if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                sum += raw.get(sy as usize, sx as usize);
                n += 1;
            }
        }
        sum / n as f32
    };

    let mut out = vec![0.0f32; 3 * h * w];
    let n = h * w;
    for y in 0..h {
        for x in 0..w {
            let v = raw.get(y, x);
            let (r, g, b) = match (y % 2, x % 2) {
                (0, 0) => (v, avg(y, x, &CROSS), avg(y, x, &DIAG)),
                (0, 1) => (avg(y, x, &HORIZ), v, avg(y, x, &VERT)),
                (1, 0) => (avg(y, x, &VERT), v, avg(y, x, &HORIZ)),
                _ => (avg(y, x, &DIAG), avg(y, x, &CROSS), v),
            };
            let i = y * w + x;
            out[i] = r;
            out[n + i] = g;
            out[2 * n + i] = b;
        }
    }
    Frame::new(h, w, 3, out, ColorSpace::Linear).expect("demosaic preserves finiteness")
}

/// Renders packed raw to sRGB: white balance, bilinear demosaic, colour
/// matrix, optional smoothstep tone curve, sRGB encode.
pub fn process_isp(packed: &PackedRawFrame, params: &IspParams) -> Result<Frame> {
    params.validate()?;
    let raw = unpack_bayer(packed);
    let (h, w) = (raw.height(), raw.width());
    let balanced: Vec<f32> =
        raw.data().iter().enumerate().map(|(i, &v)| v * params.wb_gains[bayer_site(i / w, i % w)]).collect();
    let linear = demosaic_bilinear(&RawBayerFrame::new(h, w, balanced)?);
    let ccm = ccm_f64(&params.ccm);
    let n = h * w;
    let mut out = vec![0.0f32; 3 * n];
    let lin = linear.data();
    for i in 0..n {
        let rgb = apply3(&ccm, [lin[i] as f64, lin[n + i] as f64, lin[2 * n + i] as f64]);
        for (c, v) in rgb.into_iter().enumerate() {
            let mut v = v.clamp(0.0, 1.0);
            if params.apply_tone_curve {
                v = smoothstep(v);
            }
            out[c * n + i] = linear_to_srgb(v).clamp(0.0, 1.0) as f32;
        }
    }
    Frame::new(h, w, 3, out, ColorSpace::Srgb)
}

/// Shot and read noise levels in normalized intensity units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Shot-noise variance scale: a pixel of intensity `y` sees photon
    /// noise with variance `sigma_s_sq * y`.
    pub sigma_s_sq: f64,
    /// Read-noise standard deviation.
    pub sigma_r: f64,
}

impl NoiseParams {
    pub fn new(sigma_s_sq: f64, sigma_r: f64) -> Result<Self> {
        let p = Self { sigma_s_sq, sigma_r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_s_sq.is_finite() && self.sigma_s_sq >= 0.0) {
            return Err(param_err!("sigma_s_sq must be finite and >= 0, got {}", self.sigma_s_sq));
        }
        if !(self.sigma_r.is_finite() && self.sigma_r >= 0.0) {
            return Err(param_err!("sigma_r must be finite and >= 0, got {}", self.sigma_r));
        }
        Ok(())
    }

    /// Variance of the noisy observation of intensity `y` before clamping.
    pub fn variance_at(&self, y: f64) -> f64 {
        self.sigma_s_sq * y + self.sigma_r * self.sigma_r
    }
}

/// Seed plus frame index; together they select an independent noise field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoiseSeed {
    pub seed: u64,
    pub frame_index: u64,
}

/// Poisson draws switch to a rounded normal approximation above this rate.
pub const POISSON_INVERSION_LIMIT: f64 = 50.0;

/// Poisson sample by sequential inversion of the CDF for `lambda <= 50`,
/// rounded `Normal(lambda, lambda)` clamped at zero above that. `u1` and `u2`
/// are uniforms in `[0, 1)`; only `u1` is used by inversion.
pub fn poisson_sample(lambda: f64, u1: f64, u2: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    if lambda > POISSON_INVERSION_LIMIT {
        let z = crate::rng::box_muller(u1, u2);
        return libm::round(lambda + libm::sqrt(lambda) * z).max(0.0);
    }
    let mut p = libm::exp(-lambda);
    let mut cdf = p;
    let mut k = 0u32;
    // the cap only matters when rounding leaves the CDF short of u1
    while u1 >= cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k as f64
}

/// Noisy observation of intensity `y` before clamping, for pixel `pixel` of
/// `plane`.
#[inline]
pub fn noisy_sample(y: f64, params: &NoiseParams, stream: &NoiseStream, plane: u8, pixel: u32) -> f64 {
    let shot = if params.sigma_s_sq > 0.0 {
        let (u1, u2) = stream.uniforms(plane, pixel, 0);
        params.sigma_s_sq * poisson_sample(y.max(0.0) / params.sigma_s_sq, u1, u2)
    } else {
        y
    };
    let read = if params.sigma_r > 0.0 { params.sigma_r * stream.normal(plane, pixel, 1) } else { 0.0 };
    shot + read
}

/// Applies shot + read noise to every sample and clamps to `[0, 1]`.
///
/// Each sample's randomness is keyed by `(seed, frame_index, plane, pixel)`,
/// so the result does not depend on evaluation order.
pub fn add_noise(packed: &PackedRawFrame, params: &NoiseParams, seed: NoiseSeed) -> Result<PackedRawFrame> {
    params.validate()?;
    if params.sigma_s_sq == 0.0 && params.sigma_r == 0.0 {
        return Ok(packed.clone());
    }
    let n = packed.height() * packed.width();
    if n > u32::MAX as usize {
        return Err(dim_err!("frame too large for the noise counter"));
    }
    let stream = NoiseStream::new(seed.seed, seed.frame_index);
    let data = packed
        .data()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let (plane, pixel) = ((i / n) as u8, (i % n) as u32);
            noisy_sample(y as f64, params, &stream, plane, pixel).clamp(0.0, 1.0) as f32
        })
        .collect();
    PackedRawFrame::new(packed.height(), packed.width(), data)
}

pub const ISO_PRESET_NAMES: [&str; 5] = ["iso1", "iso2", "iso3", "iso4", "iso5"];

/// Default shot-noise scales for the five presets (log-spaced, factor 4).
pub const ISO_SIGMA_S_SQ: [f64; 5] = [1e-4, 4e-4, 1.6e-3, 6.4e-3, 2.56e-2];

/// Default noise level for a named preset: `sigma_r = sqrt(sigma_s_sq) / 4`.
pub fn iso_preset(name: &str) -> Result<NoiseParams> {
    let idx = ISO_PRESET_NAMES
        .iter()
        .position(|n| n.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))?;
    let s = ISO_SIGMA_S_SQ[idx];
    Ok(NoiseParams { sigma_s_sq: s, sigma_r: libm::sqrt(s) / 4.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Planar;
    use proptest::prelude::*;

    fn lcg(seed: &mut u64) -> f32 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 40) as f32 / (1u64 << 24) as f32
    }

    #[test]
    fn unprocess_constant_half_grey() {
        let f = Frame::filled(4, 4, 3, 0.5, ColorSpace::Srgb).unwrap();
        let raw = unprocess(&f, &IspParams::neutral()).unwrap();
        for &v in raw.data() {
            assert!((v - 0.21404).abs() < 1e-5, "{v}");
        }
    }

    #[test]
    fn inverse_smoothstep_fixed_point_and_inverse() {
        assert!((inverse_smoothstep(0.5) - 0.5).abs() < 1e-12);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((inverse_smoothstep(smoothstep(x)) - x).abs() < 1e-9);
        }
    }

    #[test]
    fn srgb_transfer_round_trip() {
        for i in 0..=1000 {
            let v = i as f64 / 1000.0;
            assert!((linear_to_srgb(srgb_to_linear(v)) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn isp_of_constant_raw_is_half_grey() {
        let packed = PackedRawFrame::filled(3, 3, 0.21404).unwrap();
        let srgb = process_isp(&packed, &IspParams::neutral()).unwrap();
        assert_eq!((srgb.height(), srgb.width()), (6, 6));
        for &v in srgb.data() {
            assert!((v - 0.5).abs() < 1e-4, "{v}");
        }
    }

    #[test]
    fn demosaic_preserves_constants() {
        let raw = RawBayerFrame::new(6, 8, vec![0.37; 48]).unwrap();
        let rgb = demosaic_bilinear(&raw);
        assert!(rgb.data().iter().all(|&v| v == 0.37));
    }

    #[test]
    fn demosaic_single_red_impulse_stencil() {
        let (h, w) = (8, 8);
        let mut data = vec![0.0f32; h * w];
        data[2 * w + 2] = 1.0;
        let rgb = demosaic_bilinear(&RawBayerFrame::new(h, w, data).unwrap());
        // hand-derived spread of the red sample at (2, 2)
        let mut expected = vec![0.0f32; h * w];
        expected[2 * w + 2] = 1.0;
        for (y, x) in [(2, 1), (2, 3), (1, 2), (3, 2)] {
            expected[y * w + x] = 0.5;
        }
        for (y, x) in [(1, 1), (1, 3), (3, 1), (3, 3)] {
            expected[y * w + x] = 0.25;
        }
        assert_eq!(rgb.plane(0), &expected[..]);
        assert!(rgb.plane(1).iter().all(|&v| v == 0.0));
        assert!(rgb.plane(2).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn demosaic_edge_uses_available_neighbours() {
        // red sample at the top-left corner; the green site to its right has
        // only one red neighbour in-row
        let (h, w) = (4, 4);
        let mut data = vec![0.0f32; h * w];
        data[0] = 0.8;
        let rgb = demosaic_bilinear(&RawBayerFrame::new(h, w, data).unwrap());
        assert_eq!(rgb.get(0, 0, 1), 0.4);
        assert_eq!(rgb.get(0, 1, 0), 0.4);
        assert_eq!(rgb.get(0, 1, 1), 0.2);
    }

    #[test]
    fn isp_round_trip_on_flat_patches() {
        // 8x8 flat colour patches; away from patch borders the demosaic is
        // exact, so the round trip is limited by arithmetic only
        let params = IspParams {
            wb_gains: [2.0, 1.0, 1.5],
            ccm: [[1.2, -0.1, -0.1], [-0.15, 1.25, -0.1], [0.05, -0.2, 1.15]],
            apply_tone_curve: true,
        };
        let mut s = 99;
        let patches: Vec<[f32; 3]> =
            (0..16).map(|_| [0.2 + 0.6 * lcg(&mut s), 0.2 + 0.6 * lcg(&mut s), 0.2 + 0.6 * lcg(&mut s)]).collect();
        let frame = Frame::from_fn(32, 32, 3, ColorSpace::Srgb, |c, y, x| patches[(y / 8) * 4 + x / 8][c]).unwrap();
        let raw = unprocess(&frame, &params).unwrap();
        let back = process_isp(&raw, &params).unwrap();
        let mut worst = 0.0f32;
        for c in 0..3 {
            for y in 0..32 {
                for x in 0..32 {
                    if (2..6).contains(&(y % 8)) && (2..6).contains(&(x % 8)) {
                        worst = worst.max((back.get(c, y, x) - frame.get(c, y, x)).abs());
                    }
                }
            }
        }
        assert!(worst <= 2e-3, "round trip error {worst}");
    }

    #[test]
    fn singular_ccm_rejected() {
        let params = IspParams { ccm: [[0.5, 0.5, 0.0], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]], ..IspParams::neutral() };
        let f = Frame::filled(2, 2, 3, 0.5, ColorSpace::Srgb).unwrap();
        assert!(matches!(unprocess(&f, &params), Err(Error::Parameter(_))));
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = IspParams::neutral();
        p.wb_gains[0] = 0.0;
        assert!(p.validate().is_err());
        let mut p = IspParams::neutral();
        p.ccm[1][1] = 1.1;
        assert!(p.validate().is_err());
        assert!(NoiseParams::new(-1.0, 0.0).is_err());
        assert!(NoiseParams::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn noise_free_limit_is_identity() {
        let mut s = 5;
        let packed = PackedRawFrame::from_fn(8, 8, |_, _, _| lcg(&mut s)).unwrap();
        let out = add_noise(&packed, &NoiseParams::new(0.0, 0.0).unwrap(), NoiseSeed::default()).unwrap();
        assert_eq!(out, packed);
    }

    #[test]
    fn read_only_noise_has_expected_spread() {
        let packed = PackedRawFrame::filled(128, 128, 0.5).unwrap();
        let params = NoiseParams::new(0.0, 0.05).unwrap();
        let out = add_noise(&packed, &params, NoiseSeed { seed: 1, frame_index: 0 }).unwrap();
        let n = out.data().len() as f64;
        let mean = out.data().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = out.data().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!((mean - 0.5).abs() < 1e-3);
        assert!((var.sqrt() - 0.05).abs() < 1e-3);
    }

    #[test]
    fn noise_is_deterministic_per_frame_index() {
        let packed = PackedRawFrame::filled(16, 16, 0.3).unwrap();
        let p = NoiseParams::new(0.01, 0.02).unwrap();
        let a = add_noise(&packed, &p, NoiseSeed { seed: 7, frame_index: 2 }).unwrap();
        let b = add_noise(&packed, &p, NoiseSeed { seed: 7, frame_index: 2 }).unwrap();
        let c = add_noise(&packed, &p, NoiseSeed { seed: 7, frame_index: 3 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn poisson_inversion_small_rate_moments() {
        let stream = NoiseStream::new(3, 0);
        let lambda = 4.0;
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let (u1, u2) = stream.uniforms(0, i, 0);
            let k = poisson_sample(lambda, u1, u2);
            assert_eq!(k, libm::floor(k));
            s1 += k;
            s2 += k * k;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - lambda).abs() < 0.02, "{mean}");
        assert!((var - lambda).abs() < 0.06, "{var}");
    }

    #[test]
    fn poisson_normal_branch_is_non_negative_integer() {
        for i in 0..100 {
            let u = i as f64 / 100.0;
            let k = poisson_sample(60.0, u, 1.0 - u);
            assert!(k >= 0.0 && k == libm::round(k));
        }
    }

    #[test]
    fn iso_presets() {
        let p = iso_preset("iso1").unwrap();
        assert_eq!(p.sigma_s_sq, 1e-4);
        assert!((p.sigma_r - 2.5e-3).abs() < 1e-15);
        let values: Vec<f64> = ISO_PRESET_NAMES.iter().map(|n| iso_preset(n).unwrap().sigma_s_sq).collect();
        assert!(values.windows(2).all(|w| w[0] < w[1]));
        assert!(matches!(iso_preset("iso9"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn neighbouring_pixels_are_uncorrelated() {
        let params = NoiseParams::new(0.01, 0.02).unwrap();
        let stream = NoiseStream::new(17, 0);
        let n = 1_000_000u32;
        let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            let a = noisy_sample(0.25, &params, &stream, 0, 2 * i);
            let b = noisy_sample(0.25, &params, &stream, 0, 2 * i + 1);
            sa += a;
            sb += b;
            saa += a * a;
            sbb += b * b;
            sab += a * b;
        }
        let m = n as f64;
        let cov = sab / m - (sa / m) * (sb / m);
        let rho = cov / ((saa / m - (sa / m) * (sa / m)) * (sbb / m - (sb / m) * (sb / m))).sqrt();
        assert!(rho.abs() < 0.01, "{rho}");
    }

    proptest! {
        #[test]
        fn isp_and_unprocess_stay_in_unit_range(seed in any::<u64>(), tone in any::<bool>()) {
            let mut s = seed;
            let f = Frame::from_fn(4, 6, 3, ColorSpace::Srgb, |_, _, _| lcg(&mut s)).unwrap();
            let params = IspParams { apply_tone_curve: tone, ..IspParams::default() };
            let raw = unprocess(&f, &params).unwrap();
            prop_assert!(raw.data().iter().all(|v| (0.0..=1.0).contains(v)));
            let back = process_isp(&raw, &params).unwrap();
            prop_assert!(back.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn add_noise_is_a_pure_function_of_its_key(seed in any::<u64>(), frame_index in 0u64..1000, level in 0.0f32..1.0) {
            let p = PackedRawFrame::filled(4, 4, level).unwrap();
            let params = NoiseParams::new(0.01, 0.02).unwrap();
            let key = NoiseSeed { seed, frame_index };
            let a = add_noise(&p, &params, key).unwrap();
            prop_assert_eq!(&a, &add_noise(&p, &params, key).unwrap());
            prop_assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
