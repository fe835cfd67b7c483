use std::path::Path;

use ravden_core::camera::{NoiseParams, NoiseSeed};

use super::{at, read_file, write_file, FormatError, IoError};

/// Noise parameters recorded next to a synthesized raw frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sidecar {
    pub params: NoiseParams,
    pub seed: NoiseSeed,
}

impl Sidecar {
    pub fn to_text(&self) -> String {
        format!(
            "sigma_s_sq = {}\nsigma_r = {}\nseed = {}\nframe_index = {}\n",
            self.params.sigma_s_sq, self.params.sigma_r, self.seed.seed, self.seed.frame_index
        )
    }
}

fn parse_value<T: std::str::FromStr>(value: &str, key: &str, line: usize) -> Result<T, FormatError> {
    value.parse().map_err(|_| FormatError::new(format!("line {}: bad value for {key}", line + 1)))
}

pub fn parse_sidecar(text: &str) -> Result<Sidecar, FormatError> {
    let (mut s, mut r, mut seed, mut idx) = (None, None, None, None);
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| FormatError::new(format!("line {}: expected `key = value`", n + 1)))?;
        match key {
            "sigma_s_sq" => s = Some(parse_value(value, key, n)?),
            "sigma_r" => r = Some(parse_value(value, key, n)?),
            "seed" => seed = Some(parse_value(value, key, n)?),
            "frame_index" => idx = Some(parse_value(value, key, n)?),
            other => return Err(FormatError::new(format!("line {}: unknown key `{other}`", n + 1))),
        }
    }
    let missing = |k: &str| FormatError::new(format!("missing key `{k}`"));
    Ok(Sidecar {
        params: NoiseParams::new(s.ok_or_else(|| missing("sigma_s_sq"))?, r.ok_or_else(|| missing("sigma_r"))?)?,
        seed: NoiseSeed {
            seed: seed.ok_or_else(|| missing("seed"))?,
            frame_index: idx.ok_or_else(|| missing("frame_index"))?,
        },
    })
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| FormatError::new("sidecar is not UTF-8")).map_err(at(path))?;
    parse_sidecar(&text).map_err(at(path))
}

pub fn save_sidecar(path: &Path, sidecar: &Sidecar) -> Result<(), IoError> {
    write_file(path, sidecar.to_text().as_bytes())
}
