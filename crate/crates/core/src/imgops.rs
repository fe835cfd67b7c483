//! Single-plane helpers shared by flow, fusion and the metrics.

use alloc::vec;
use alloc::vec::Vec;

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Bilinear sample at `(sx, sy)` with clamp-to-edge addressing.
#[inline]
pub fn sample_bilinear(plane: &[f32], h: usize, w: usize, sx: f32, sy: f32) -> f32 {
    let sx = sx.clamp(0.0, (w - 1) as f32);
    let sy = sy.clamp(0.0, (h - 1) as f32);
    let x0 = libm::floorf(sx) as usize;
    let y0 = libm::floorf(sy) as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = sx - x0 as f32;
    let fy = sy - y0 as f32;
    let top = (1.0 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1];
    let bot = (1.0 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1];
    (1.0 - fy) * top + fy * bot
}

/// Fraction of a bilinear footprint at `(sx, sy)` that falls inside the grid.
#[inline]
pub fn coverage(h: usize, w: usize, sx: f32, sy: f32) -> f32 {
    axis_coverage(sx, w) * axis_coverage(sy, h)
}

#[inline]
fn axis_coverage(s: f32, n: usize) -> f32 {
    let hi = (n - 1) as f32;
    if (0.0..=hi).contains(&s) {
        1.0
    } else if s < 0.0 {
        (1.0 + s).max(0.0)
    } else {
        (1.0 - (s - hi)).max(0.0)
    }
}

/// Separable correlation with an odd kernel and replicated borders.
pub fn convolve_separable(plane: &[f32], h: usize, w: usize, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * row[clamp_idx(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for (k, kv) in kernel.iter().enumerate() {
            let sy = clamp_idx(y as isize + k as isize - r, h);
            let src = &tmp[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Box mean over a `size x size` window, replicated borders.
pub fn box_mean(plane: &[f32], h: usize, w: usize, size: usize) -> Vec<f32> {
    let k = vec![1.0 / size as f32; size];
    convolve_separable(plane, h, w, &k)
}

/// Box sum over a `size x size` window; pixels outside the grid contribute
/// nothing.
pub fn box_sum_truncated(plane: &[f32], h: usize, w: usize, size: usize) -> Vec<f32> {
    let r = size / 2;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        // running sum along the row
        let mut acc: f32 = row[..r.min(w)].iter().sum();
        for x in 0..w {
            if x + r < w {
                acc += row[x + r];
            }
            if x > r {
                acc -= row[x - r - 1];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let lo = y.saturating_sub(r);
        let hi = (y + r).min(h - 1);
        let dst = &mut out[y * w..(y + 1) * w];
        for sy in lo..=hi {
            for (d, s) in dst.iter_mut().zip(&tmp[sy * w..(sy + 1) * w]) {
                *d += s;
            }
        }
    }
    out
}

const BINOMIAL5: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Binomial blur followed by 2x decimation. Output pixel `(y, x)` sits at
/// input `(2y, 2x)`.
pub fn pyr_down(plane: &[f32], h: usize, w: usize) -> (Vec<f32>, usize, usize) {
    let blurred = convolve_separable(plane, h, w, &BINOMIAL5);
    let (nh, nw) = (h.div_ceil(2), w.div_ceil(2));
    let mut out = Vec::with_capacity(nh * nw);
    for y in 0..nh {
        for x in 0..nw {
            out.push(blurred[2 * y * w + 2 * x]);
        }
    }
    (out, nh, nw)
}

/// Central-difference gradients with replicated borders.
pub fn central_gradients(plane: &[f32], h: usize, w: usize) -> (Vec<f32>, Vec<f32>) {
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h {
        let up = y.saturating_sub(1);
        let down = (y + 1).min(h - 1);
        for x in 0..w {
            let left = x.saturating_sub(1);
            let right = (x + 1).min(w - 1);
            gx[y * w + x] = 0.5 * (plane[y * w + right] - plane[y * w + left]);
            gy[y * w + x] = 0.5 * (plane[down * w + x] - plane[up * w + x]);
        }
    }
    (gx, gy)
}

/// 3x3 median with replicated borders.
pub fn median3x3(plane: &[f32], h: usize, w: usize) -> Vec<f32> {
    let mut out = vec![0.0; h * w];
    let mut win = [0.0f32; 9];
    for y in 0..h {
        for x in 0..w {
            let mut i = 0;
            for dy in -1..=1isize {
                let sy = clamp_idx(y as isize + dy, h);
                for dx in -1..=1isize {
                    win[i] = plane[sy * w + clamp_idx(x as isize + dx, w)];
                    i += 1;
                }
            }
            let (_, m, _) = win.select_nth_unstable_by(4, f32::total_cmp);
            out[y * w + x] = *m;
        }
    }
    out
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &mut [f32]) -> f32 {
    let n = values.len();
    debug_assert!(n > 0);
    let (lo, upper, _) = values.select_nth_unstable_by(n / 2, f32::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        0.5 * (lower + upper)
    }
}
