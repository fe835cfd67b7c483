use crate::error::{dim_err, Error, Result};
use crate::flow::{estimate_flow, fb_consistency, warp, FlowConfig};
use crate::frame::{Frame, Planar};

/// Masked L1 between `denoised[t]` and `denoised[s]` warped onto frame `t`
/// with flow measured on the clean frames. Returns `None` when the mask is
/// empty.
pub fn pair_warping_error(
    denoised_t: &Frame,
    denoised_s: &Frame,
    clean_t: &Frame,
    clean_s: &Frame,
    cfg: &FlowConfig,
) -> Result<Option<f64>> {
    let (lt, ls) = (clean_t.luma()?, clean_s.luma()?);
    let forward = estimate_flow(&lt, &ls, cfg)?.final_flow;
    let backward = estimate_flow(&ls, &lt, cfg)?.final_flow;
    let (warped, coverage) = warp(denoised_s, &forward)?;
    let mask = coverage.product(&fb_consistency(&forward, &backward)?)?;

    let (h, w, c) = (denoised_t.height(), denoised_t.width(), denoised_t.channels());
    let n = h * w;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for y in 0..h {
        let (mut rn, mut rd) = (0.0f64, 0.0f64);
        for x in 0..w {
            let i = y * w + x;
            let m = mask.values()[i] as f64;
            if m == 0.0 {
                continue;
            }
            let mut diff = 0.0f64;
            for ch in 0..c {
                diff += (denoised_t.data()[ch * n + i] as f64 - warped.data()[ch * n + i] as f64).abs();
            }
            rn += m * diff / c as f64;
            rd += m;
        }
        num += rn;
        den += rd;
    }
    Ok((den > 0.0).then(|| num / den))
}

/// Flow-based warping error: the mean over interior frames `t` and
/// neighbours `s = t +/- 1` of the masked L1 between the denoised frame `t`
/// and the denoised frame `s` warped onto it. Flows are estimated on the
/// clean frames; the mask combines warp coverage with forward-backward
/// consistency.
pub fn temporal_warping_error(denoised: &[Frame], clean: &[Frame], cfg: &FlowConfig) -> Result<f64> {
    if denoised.len() != clean.len() {
        return Err(dim_err!("{} denoised frames for {} clean frames", denoised.len(), clean.len()));
    }
    if denoised.len() < 3 {
        return Err(Error::FrameCount { expected: 3, found: denoised.len() });
    }
    let first = &denoised[0];
    if denoised.iter().chain(clean).any(|f| !f.same_shape(first)) {
        return Err(dim_err!("warping error inputs differ in shape"));
    }
    let (mut sum, mut pairs) = (0.0f64, 0usize);
    for t in 1..denoised.len() - 1 {
        for s in [t - 1, t + 1] {
            if let Some(e) = pair_warping_error(&denoised[t], &denoised[s], &clean[t], &clean[s], cfg)? {
                sum += e;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(Error::Empty("warping error mask"));
    }
    Ok(sum / pairs as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene;
    use alloc::vec;

    #[test]
    fn static_identical_sequence_is_zero() {
        let f = scene::textured_rgb(48, 48, 2);
        let seq = vec![f.clone(), f.clone(), f.clone(), f];
        let e = temporal_warping_error(&seq, &seq, &FlowConfig::default()).unwrap();
        assert!(e <= 1e-6, "{e}");
    }

    #[test]
    fn short_or_mismatched_inputs() {
        let f = scene::textured_rgb(16, 16, 2);
        let two = vec![f.clone(), f.clone()];
        assert!(temporal_warping_error(&two, &two, &FlowConfig::default()).is_err());
        let three = vec![f.clone(), f.clone(), f];
        assert!(temporal_warping_error(&three, &two, &FlowConfig::default()).is_err());
    }
}
