//! Deterministic synthetic content for tests, benchmarks and demos.
//!
//! [`Texture`] is a continuous fractal value-noise field, so translated or
//! rotated versions can be rendered exactly instead of being resampled.

use alloc::vec::Vec;

use crate::flow::FlowField;
use crate::frame::{ColorSpace, Frame, Planar};
use crate::imgops;
use crate::rng::{philox4x32, unit_f64};

const OCTAVES: [(f32, f32); 4] = [(32.0, 0.45), (16.0, 0.25), (8.0, 0.18), (4.0, 0.12)];

/// Band-limited random texture with values in `[0.05, 0.95]`.
#[derive(Debug, Clone, Copy)]
pub struct Texture {
    seed: u64,
}

impl Texture {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn lattice(&self, octave: usize, ix: i64, iy: i64) -> f32 {
        let w = philox4x32(
            [ix as u32, iy as u32, octave as u32, 0x5ce7_e000],
            [self.seed as u32, (self.seed >> 32) as u32],
        );
        unit_f64(w[0], w[1]) as f32
    }

    /// Field value at continuous pixel coordinates.
    pub fn eval(&self, x: f32, y: f32) -> f32 {
        let mut acc = 0.0;
        for (o, &(cell, amp)) in OCTAVES.iter().enumerate() {
            let (gx, gy) = (x / cell, y / cell);
            let (fx0, fy0) = (libm::floorf(gx), libm::floorf(gy));
            let (ix, iy) = (fx0 as i64, fy0 as i64);
            let tx = smooth(gx - fx0);
            let ty = smooth(gy - fy0);
            let a = self.lattice(o, ix, iy);
            let b = self.lattice(o, ix + 1, iy);
            let c = self.lattice(o, ix, iy + 1);
            let d = self.lattice(o, ix + 1, iy + 1);
            let top = a + tx * (b - a);
            let bot = c + tx * (d - c);
            acc += amp * (top + ty * (bot - top));
        }
        0.05 + 0.9 * acc
    }

    pub fn render(&self, height: usize, width: usize) -> Frame {
        self.render_mapped(height, width, |x, y| (x, y))
    }

    /// Renders `eval(map(x, y))` for every pixel.
    pub fn render_mapped<F: Fn(f32, f32) -> (f32, f32)>(&self, height: usize, width: usize, map: F) -> Frame {
        Frame::from_fn(height, width, 1, ColorSpace::Linear, |_, y, x| {
            let (sx, sy) = map(x as f32, y as f32);
            self.eval(sx, sy)
        })
        .expect("texture values are finite")
    }
}

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

/// Single-channel linear texture.
pub fn textured(height: usize, width: usize, seed: u64) -> Frame {
    Texture::new(seed).render(height, width)
}

/// Three-channel sRGB texture; channels share structure so luma carries it.
pub fn textured_rgb(height: usize, width: usize, seed: u64) -> Frame {
    textured_rgb_mapped(height, width, seed, |x, y| (x, y))
}

/// Three-channel sRGB texture sampled through a coordinate map.
pub fn textured_rgb_mapped<F: Fn(f32, f32) -> (f32, f32)>(height: usize, width: usize, seed: u64, map: F) -> Frame {
    let base = Texture::new(seed);
    let tint = [Texture::new(seed ^ 0xa1), Texture::new(seed ^ 0xb2), Texture::new(seed ^ 0xc3)];
    Frame::from_fn(height, width, 3, ColorSpace::Srgb, |c, y, x| {
        let (sx, sy) = map(x as f32, y as f32);
        0.7 * base.eval(sx, sy) + 0.3 * tint[c].eval(sx, sy)
    })
    .expect("texture values are finite")
}

/// Shifts content by `(dx, dy)`: `out(x, y) = in(x - dx, y - dy)`, bilinear
/// with clamp-to-edge padding. The flow from `frame` to the result is
/// `(dx, dy)` everywhere.
pub fn translate(frame: &Frame, dx: f32, dy: f32) -> Frame {
    let (h, w) = (frame.height(), frame.width());
    let mut out = Vec::with_capacity(frame.data().len());
    for c in 0..frame.channels() {
        let plane = frame.plane(c);
        for y in 0..h {
            for x in 0..w {
                out.push(imgops::sample_bilinear(plane, h, w, x as f32 - dx, y as f32 - dy));
            }
        }
    }
    Frame::new(h, w, frame.channels(), out, frame.color()).expect("same shape")
}

/// Rotation about the image centre by `degrees`, as a point map.
pub fn rotation_map(height: usize, width: usize, degrees: f32) -> impl Fn(f32, f32) -> (f32, f32) {
    let (cx, cy) = ((width as f32 - 1.0) / 2.0, (height as f32 - 1.0) / 2.0);
    let t = degrees.to_radians();
    let (s, c) = (libm::sinf(t), libm::cosf(t));
    move |x, y| {
        let (px, py) = (x - cx, y - cy);
        (cx + c * px - s * py, cy + s * px + c * py)
    }
}

/// Texture and its copy rotated by `degrees`, together with the exact flow
/// from the first to the second.
pub fn rotated_pair(height: usize, width: usize, degrees: f32, seed: u64) -> (Frame, Frame, FlowField) {
    let tex = Texture::new(seed);
    let fwd = rotation_map(height, width, degrees);
    let inv = rotation_map(height, width, -degrees);
    let reference = tex.render(height, width);
    // target(q) = reference(R^-1 q), so target(R p) = reference(p)
    let target = tex.render_mapped(height, width, inv);
    let truth = FlowField::from_fn(height, width, |y, x| {
        let (qx, qy) = fwd(x as f32, y as f32);
        (qx - x as f32, qy - y as f32)
    });
    (reference, target, truth)
}

/// sRGB frames of a texture panning by `(dx, dy)` pixels per frame.
pub fn panning_sequence(height: usize, width: usize, len: usize, dx: f32, dy: f32, seed: u64) -> Vec<Frame> {
    (0..len)
        .map(|t| {
            let (ox, oy) = (t as f32 * dx, t as f32 * dy);
            textured_rgb_mapped(height, width, seed, move |x, y| (x - ox, y - oy))
        })
        .collect()
}

/// Static background with a bright square of side `size` whose top-left
/// corner sits at `(x0, y0)`.
pub fn square_over_background(height: usize, width: usize, x0: usize, y0: usize, size: usize, seed: u64) -> Frame {
    let tex = Texture::new(seed);
    let fg = Texture::new(seed ^ 0xff);
    Frame::from_fn(height, width, 1, ColorSpace::Linear, |_, y, x| {
        if (x0..x0 + size).contains(&x) && (y0..y0 + size).contains(&y) {
            0.5 + 0.5 * fg.eval(x as f32, y as f32)
        } else {
            0.5 * tex.eval(x as f32, y as f32)
        }
    })
    .expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_deterministic_and_bounded() {
        let a = textured(32, 32, 4);
        assert_eq!(a, textured(32, 32, 4));
        assert_ne!(a, textured(32, 32, 5));
        assert!(a.data().iter().all(|&v| (0.05..=0.95).contains(&v)));
    }

    #[test]
    fn integer_translation_is_an_index_shift() {
        let a = textured(16, 16, 1);
        let b = translate(&a, 3.0, 0.0);
        for y in 0..16 {
            for x in 3..16 {
                assert_eq!(b.get(0, y, x), a.get(0, y, x - 3));
            }
            assert_eq!(b.get(0, y, 0), a.get(0, y, 0));
        }
    }

    #[test]
    fn rotated_pair_flow_is_consistent() {
        let (r, t, flow) = rotated_pair(64, 64, 2.0, 9);
        let (warped, _) = crate::flow::warp(&t, &flow).unwrap();
        let mut err = 0.0f32;
        for y in 16..48 {
            for x in 16..48 {
                err = err.max((warped.get(0, y, x) - r.get(0, y, x)).abs());
            }
        }
        assert!(err < 0.05, "{err}");
    }
}
