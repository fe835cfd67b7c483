//! Frame containers and Bayer packing.
//!
//! All image data is stored channel-planar and row-major as `f32`, with a
//! nominal range of `[0, 1]`. Constructors reject non-finite samples so the
//! containers never carry NaN or infinity.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::camera::NoiseParams;
use crate::error::{dim_err, Error, Result};

/// Rec.709 luma weights.
pub const LUMA_WEIGHTS: [f32; 3] = [0.2126, 0.7152, 0.0722];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorSpace {
    /// Display-referred, sRGB transfer function applied.
    Srgb,
    /// Scene-linear.
    Linear,
}

mod sealed {
    pub trait Rebuild: Sized {
        /// Same shape and metadata, new samples. Length must match.
        fn rebuild(&self, data: alloc::vec::Vec<f32>) -> Self;
    }
}

pub(crate) use sealed::Rebuild;

/// Read access to planar image data shared by every frame type.
pub trait Planar: sealed::Rebuild {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    fn channels(&self) -> usize;
    fn data(&self) -> &[f32];

    fn plane(&self, c: usize) -> &[f32] {
        let n = self.height() * self.width();
        &self.data()[c * n..(c + 1) * n]
    }

    fn same_shape<P: Planar>(&self, other: &P) -> bool {
        self.height() == other.height() && self.width() == other.width() && self.channels() == other.channels()
    }
}

fn check_finite(data: &[f32], what: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

macro_rules! impl_planar {
    ($ty:ty, $channels:expr) => {
        impl Planar for $ty {
            fn height(&self) -> usize {
                self.height
            }
            fn width(&self) -> usize {
                self.width
            }
            fn channels(&self) -> usize {
                $channels(self)
            }
            fn data(&self) -> &[f32] {
                &self.data
            }
        }
    };
}

/// A display-referred or linear frame with 1 or 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
    color: ColorSpace,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>, color: ColorSpace) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(dim_err!("frame must have 1 or 3 channels, got {channels}"));
        }
        if height == 0 || width == 0 {
            return Err(dim_err!("frame dimensions must be non-zero"));
        }
        if data.len() != height * width * channels {
            return Err(dim_err!("data length {} does not match {height}x{width}x{channels}", data.len()));
        }
        check_finite(&data, "frame")?;
        Ok(Self { height, width, channels, data, color })
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f32, color: ColorSpace) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels], color)
    }

    /// Builds a frame from `f(channel, y, x)`.
    pub fn from_fn<F>(height: usize, width: usize, channels: usize, color: ColorSpace, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f32,
    {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(height, width, channels, data, color)
    }

    pub fn color(&self) -> ColorSpace {
        self.color
    }

    pub fn with_color(mut self, color: ColorSpace) -> Self {
        self.color = color;
        self
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Rec.709 luma of a 3-channel frame. Single-channel frames are returned
    /// unchanged.
    pub fn luma(&self) -> Result<Frame> {
        match self.channels {
            1 => Ok(self.clone()),
            _ => to_luma(self),
        }
    }
}

impl Rebuild for Frame {
    fn rebuild(&self, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { height: self.height, width: self.width, channels: self.channels, data, color: self.color }
    }
}

impl_planar!(Frame, |f: &Frame| f.channels);

/// Single-plane RGGB mosaic with even dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBayerFrame {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl RawBayerFrame {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || !height.is_multiple_of(2) || !width.is_multiple_of(2) {
            return Err(dim_err!("bayer frame must have even non-zero dimensions, got {height}x{width}"));
        }
        if data.len() != height * width {
            return Err(dim_err!("data length {} does not match {height}x{width}", data.len()));
        }
        check_finite(&data, "bayer frame")?;
        Ok(Self { height, width, data })
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }
}

impl Rebuild for RawBayerFrame {
    fn rebuild(&self, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { height: self.height, width: self.width, data }
    }
}

impl_planar!(RawBayerFrame, |_: &RawBayerFrame| 1);

/// Half-resolution four-plane raw frame, planes ordered R, G1, G2, B.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedRawFrame {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PackedRawFrame {
    pub const PLANES: usize = 4;

    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(dim_err!("packed frame dimensions must be non-zero"));
        }
        if data.len() != height * width * Self::PLANES {
            return Err(dim_err!("data length {} does not match {height}x{width}x4", data.len()));
        }
        check_finite(&data, "packed raw frame")?;
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * Self::PLANES])
    }

    /// Builds a packed frame from `f(plane, y, x)`.
    pub fn from_fn<F>(height: usize, width: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize) -> f32,
    {
        let mut data = Vec::with_capacity(height * width * Self::PLANES);
        for c in 0..Self::PLANES {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::new(height, width, data)
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Mean of the two green planes as a single-channel linear frame. This is
    /// the channel flow is estimated on.
    pub fn green_mean(&self) -> Frame {
        let g1 = self.plane(1);
        let g2 = self.plane(2);
        let data = g1.iter().zip(g2).map(|(a, b)| 0.5 * (a + b)).collect();
        Frame { height: self.height, width: self.width, channels: 1, data, color: ColorSpace::Linear }
    }
}

impl Rebuild for PackedRawFrame {
    fn rebuild(&self, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self { height: self.height, width: self.width, data }
    }
}

impl_planar!(PackedRawFrame, |_: &PackedRawFrame| PackedRawFrame::PLANES);

/// Rearranges an RGGB mosaic into four half-resolution planes.
pub fn pack_bayer(raw: &RawBayerFrame) -> PackedRawFrame {
    let (h, w) = (raw.height / 2, raw.width / 2);
    let mut data = vec![0.0; h * w * 4];
    for (c, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let plane = &mut data[c * h * w..(c + 1) * h * w];
        for y in 0..h {
            let src = &raw.data[(2 * y + dy) * raw.width..];
            for x in 0..w {
                plane[y * w + x] = src[2 * x + dx];
            }
        }
    }
    PackedRawFrame { height: h, width: w, data }
}

/// Exact inverse of [`pack_bayer`].
pub fn unpack_bayer(packed: &PackedRawFrame) -> RawBayerFrame {
    let (h, w) = (packed.height, packed.width);
    let width = 2 * w;
    let mut data = vec![0.0; 4 * h * w];
    for (c, (dy, dx)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        let plane = packed.plane(c);
        for y in 0..h {
            let dst = &mut data[(2 * y + dy) * width..];
            for x in 0..w {
                dst[2 * x + dx] = plane[y * w + x];
            }
        }
    }
    RawBayerFrame { height: 2 * h, width, data }
}

/// Rec.709 luma of a 3-channel frame.
pub fn to_luma(frame: &Frame) -> Result<Frame> {
    if frame.channels != 3 {
        return Err(Error::ChannelCount { expected: 3, found: frame.channels });
    }
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let (r, g, b) = (frame.plane(0), frame.plane(1), frame.plane(2));
    let data = r
        .iter()
        .zip(g)
        .zip(b)
        .map(|((&r, &g), &b)| {
            // convex combination; the clamp only absorbs rounding
            let y = wr * r + wg * g + wb * b;
            y.clamp(r.min(g).min(b), r.max(g).max(b))
        })
        .collect();
    Frame::new(frame.height, frame.width, 1, data, frame.color)
}

/// Per-frame provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMeta {
    pub source: Option<String>,
    pub noise: Option<NoiseParams>,
}

/// An ordered run of same-shaped frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence<T> {
    frames: Vec<T>,
    meta: Vec<FrameMeta>,
    pub frame_rate: Option<f32>,
}

impl<T: Planar> Sequence<T> {
    pub fn new(frames: Vec<T>) -> Result<Self> {
        let meta = vec![FrameMeta::default(); frames.len()];
        Self::with_meta(frames, meta)
    }

    pub fn with_meta(frames: Vec<T>, meta: Vec<FrameMeta>) -> Result<Self> {
        if meta.len() != frames.len() {
            return Err(dim_err!("{} metadata entries for {} frames", meta.len(), frames.len()));
        }
        if let Some(first) = frames.first() {
            if let Some(i) = frames.iter().position(|f| !f.same_shape(first)) {
                return Err(dim_err!("frame {i} differs in shape from frame 0"));
            }
        }
        Ok(Self { frames, meta, frame_rate: None })
    }

    pub fn frames(&self) -> &[T] {
        &self.frames
    }

    pub fn meta(&self) -> &[FrameMeta] {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<FrameMeta>) {
        (self.frames, self.meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pack_two_by_two() {
        let raw = RawBayerFrame::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let packed = pack_bayer(&raw);
        assert_eq!((packed.height(), packed.width()), (1, 1));
        assert_eq!(packed.data(), &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(unpack_bayer(&packed), raw);
    }

    #[test]
    fn odd_dimensions_rejected() {
        assert!(matches!(RawBayerFrame::new(3, 4, vec![0.0; 12]), Err(Error::Dimension(_))));
        assert!(matches!(RawBayerFrame::new(4, 5, vec![0.0; 20]), Err(Error::Dimension(_))));
    }

    #[test]
    fn non_finite_rejected() {
        let err = Frame::new(1, 2, 1, vec![0.0, f32::NAN], ColorSpace::Linear).unwrap_err();
        assert_eq!(err, Error::NonFinite("frame"));
        assert!(PackedRawFrame::new(1, 1, vec![0.0, 0.0, f32::INFINITY, 0.0]).is_err());
    }

    fn lcg(seed: &mut u64) -> f32 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*seed >> 40) as f32 / (1u64 << 24) as f32
    }

    #[test]
    fn pack_matches_index_oracle() {
        let mut s = 7;
        let data: Vec<f32> = (0..16).map(|_| lcg(&mut s)).collect();
        let raw = RawBayerFrame::new(4, 4, data.clone()).unwrap();
        let packed = pack_bayer(&raw);
        for c in 0..4 {
            for y in 0..2 {
                for x in 0..2 {
                    let (dy, dx) = (c / 2, c % 2);
                    assert_eq!(packed.get(c, y, x), data[(2 * y + dy) * 4 + 2 * x + dx]);
                }
            }
        }
    }

    #[test]
    fn unpack_matches_index_oracle() {
        let mut s = 11;
        let data: Vec<f32> = (0..8 * 8 * 4).map(|_| lcg(&mut s)).collect();
        let packed = PackedRawFrame::new(8, 8, data.clone()).unwrap();
        let raw = unpack_bayer(&packed);
        for y in 0..16 {
            for x in 0..16 {
                let c = (y % 2) * 2 + x % 2;
                assert_eq!(raw.get(y, x), data[(c * 8 + y / 2) * 8 + x / 2]);
            }
        }
    }

    #[test]
    fn luma_weights() {
        let white = Frame::filled(1, 1, 3, 1.0, ColorSpace::Srgb).unwrap();
        assert!((to_luma(&white).unwrap().data()[0] - 1.0).abs() < 1e-6);
        let green = Frame::new(1, 1, 3, vec![0.0, 1.0, 0.0], ColorSpace::Srgb).unwrap();
        assert_eq!(to_luma(&green).unwrap().data()[0], 0.7152);
        let gray = Frame::filled(2, 2, 1, 0.5, ColorSpace::Srgb).unwrap();
        assert_eq!(to_luma(&gray), Err(Error::ChannelCount { expected: 3, found: 1 }));
    }

    #[test]
    fn luma_matches_reference_loop() {
        let mut s = 3;
        let frame = Frame::from_fn(5, 7, 3, ColorSpace::Srgb, |_, _, _| lcg(&mut s)).unwrap();
        let luma = to_luma(&frame).unwrap();
        for y in 0..5 {
            for x in 0..7 {
                let expected = 0.2126 * frame.get(0, y, x) as f64
                    + 0.7152 * frame.get(1, y, x) as f64
                    + 0.0722 * frame.get(2, y, x) as f64;
                assert!((luma.get(0, y, x) as f64 - expected).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sequence_rejects_mixed_shapes() {
        let a = Frame::filled(2, 2, 1, 0.0, ColorSpace::Linear).unwrap();
        let b = Frame::filled(2, 3, 1, 0.0, ColorSpace::Linear).unwrap();
        assert!(Sequence::new(vec![a.clone(), a.clone()]).is_ok());
        assert!(Sequence::new(vec![a, b]).is_err());
    }

    proptest! {
        #[test]
        fn bayer_round_trip(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
            let mut s = seed;
            let data: Vec<f32> = (0..4 * h * w).map(|_| lcg(&mut s)).collect();
            let raw = RawBayerFrame::new(2 * h, 2 * w, data).unwrap();
            prop_assert_eq!(&unpack_bayer(&pack_bayer(&raw)), &raw);
            let packed = pack_bayer(&raw);
            prop_assert_eq!(pack_bayer(&unpack_bayer(&packed)), packed);
        }

        #[test]
        fn luma_stays_in_unit_range(r in 0.0f32..=1.0, g in 0.0f32..=1.0, b in 0.0f32..=1.0) {
            let f = Frame::new(1, 1, 3, vec![r, g, b], ColorSpace::Srgb).unwrap();
            let y = to_luma(&f).unwrap().data()[0];
            prop_assert!((0.0..=1.0).contains(&y));
        }
    }
}
