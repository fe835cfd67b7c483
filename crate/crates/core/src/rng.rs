//! Counter-based random numbers (Philox4x32-10).
//!
//! Every draw is a pure function of a 64-bit key and a 128-bit counter, so
//! noise synthesis can be evaluated in any order or on any number of threads
//! and still produce identical output.

const MUL0: u32 = 0xD251_1F53;
const MUL1: u32 = 0xCD9E_8D57;
const WEYL0: u32 = 0x9E37_79B9;
const WEYL1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// Philox4x32 with 10 rounds.
pub fn philox4x32(counter: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let mut ctr = counter;
    let mut k = key;
    for round in 0..10 {
        if round > 0 {
            k[0] = k[0].wrapping_add(WEYL0);
            k[1] = k[1].wrapping_add(WEYL1);
        }
        let (hi0, lo0) = mulhilo(MUL0, ctr[0]);
        let (hi1, lo1) = mulhilo(MUL1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ k[0], lo1, hi0 ^ ctr[3] ^ k[1], lo0];
    }
    ctr
}

/// Converts 64 random bits to a double in `[0, 1)` with 53-bit resolution.
#[inline]
pub fn unit_f64(hi: u32, lo: u32) -> f64 {
    let bits = ((hi as u64) << 32) | lo as u64;
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Key and counter layout used by noise synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    key: [u32; 2],
    frame: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, frame_index: u64) -> Self {
        Self { key: [seed as u32, (seed >> 32) as u32], frame: frame_index }
    }

    /// Four raw words for `(plane, pixel, draw)`.
    #[inline]
    pub fn words(&self, plane: u8, pixel: u32, draw: u32) -> [u32; 4] {
        debug_assert!(draw < (1 << 24));
        let ctr = [pixel, plane as u32 | (draw << 8), self.frame as u32, (self.frame >> 32) as u32];
        philox4x32(ctr, self.key)
    }

    /// Two independent uniforms in `[0, 1)`.
    #[inline]
    pub fn uniforms(&self, plane: u8, pixel: u32, draw: u32) -> (f64, f64) {
        let w = self.words(plane, pixel, draw);
        (unit_f64(w[0], w[1]), unit_f64(w[2], w[3]))
    }

    /// One standard normal via Box-Muller.
    #[inline]
    pub fn normal(&self, plane: u8, pixel: u32, draw: u32) -> f64 {
        let (u1, u2) = self.uniforms(plane, pixel, draw);
        box_muller(u1, u2)
    }
}

/// Standard normal from two uniforms in `[0, 1)`.
#[inline]
pub fn box_muller(u1: f64, u2: f64) -> f64 {
    // 1 - u1 lies in (0, 1], keeping the log finite
    let r = libm::sqrt(-2.0 * libm::log(1.0 - u1));
    r * libm::cos(core::f64::consts::TAU * u2)
}
