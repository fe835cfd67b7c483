//! Flat `key = value` run configuration. Command-line flags are parsed into
//! the same structure and layered over the file, so flags take precedence.

use std::path::Path;

use ravden_core::camera::{iso_preset, IspParams, NoiseParams};
use ravden_core::flow::FlowConfig;
use ravden_core::fuse::FusionConfig;
use ravden_core::multistage::DenoiseConfig;

/// Invalid configuration text or an inconsistent combination of settings.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

fn cfg_err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Every recognised configuration key.
pub const KEYS: &[&str] = &[
    "iso",
    "sigma_s_sq",
    "sigma_r",
    "seed",
    "threads",
    "stages",
    "reuse_flows",
    "spatial_filter",
    "spatial_filter_strength",
    "bandwidth_scale",
    "residual_box",
    "pyramid_levels",
    "flow_iters",
    "flow_window",
    "median_filter",
    "wb_gains",
    "ccm",
    "tone_curve",
    "mask_alpha",
];

/// Optional settings; `None` falls through to the next layer or the
/// library default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub iso: Option<String>,
    pub sigma_s_sq: Option<f64>,
    pub sigma_r: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub stages: Option<usize>,
    pub reuse_flows: Option<bool>,
    pub spatial_filter: Option<bool>,
    pub spatial_filter_strength: Option<f32>,
    pub bandwidth_scale: Option<f32>,
    pub residual_box: Option<usize>,
    pub pyramid_levels: Option<usize>,
    pub flow_iters: Option<usize>,
    pub flow_window: Option<usize>,
    pub median_filter: Option<bool>,
    pub wb_gains: Option<[f32; 3]>,
    pub ccm: Option<[[f32; 3]; 3]>,
    pub tone_curve: Option<bool>,
    pub mask_alpha: Option<f32>,
}

/// Parses `on/off`, `true/false`, `yes/no` and `1/0`.
pub fn parse_bool(s: &str) -> Result<bool, ConfigError> {
    match s.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(format!("expected on/off, got `{s}`"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, ConfigError> {
    s.parse().map_err(|_| cfg_err(format!("bad value for {key}: `{s}`")))
}

fn parse_list<const N: usize>(key: &str, s: &str) -> Result<[f32; N], ConfigError> {
    let vals: Vec<f32> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| parse_num(key, t))
        .collect::<Result<_, _>>()?;
    vals.try_into().map_err(|v: Vec<f32>| cfg_err(format!("{key} needs {N} values, got {}", v.len())))
}

impl Settings {
    /// Parses configuration text. Blank lines and `#` comments are ignored;
    /// unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        let mut seen = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| cfg_err(format!("line {}: expected `key = value`", n + 1)))?;
            if seen.contains(&key) {
                return Err(cfg_err(format!("line {}: `{key}` given twice", n + 1)));
            }
            seen.push(key);
            s.set(key, value).map_err(|e| cfg_err(format!("line {}: {}", n + 1, e.0)))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| cfg_err(format!("{}: {}", path.display(), e.0)))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "iso" => self.iso = Some(value.to_owned()),
            "sigma_s_sq" => self.sigma_s_sq = Some(parse_num(key, value)?),
            "sigma_r" => self.sigma_r = Some(parse_num(key, value)?),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "threads" => self.threads = Some(parse_num(key, value)?),
            "stages" => self.stages = Some(parse_num(key, value)?),
            "reuse_flows" => self.reuse_flows = Some(parse_bool(value)?),
            "spatial_filter" => self.spatial_filter = Some(parse_bool(value)?),
            "spatial_filter_strength" => self.spatial_filter_strength = Some(parse_num(key, value)?),
            "bandwidth_scale" => self.bandwidth_scale = Some(parse_num(key, value)?),
            "residual_box" => self.residual_box = Some(parse_num(key, value)?),
            "pyramid_levels" => self.pyramid_levels = Some(parse_num(key, value)?),
            "flow_iters" => self.flow_iters = Some(parse_num(key, value)?),
            "flow_window" => self.flow_window = Some(parse_num(key, value)?),
            "median_filter" => self.median_filter = Some(parse_bool(value)?),
            "wb_gains" => self.wb_gains = Some(parse_list::<3>(key, value)?),
            "ccm" => {
                let v = parse_list::<9>(key, value)?;
                self.ccm = Some([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]);
            }
            "tone_curve" => self.tone_curve = Some(parse_bool(value)?),
            "mask_alpha" => self.mask_alpha = Some(parse_num(key, value)?),
            _ => return Err(cfg_err(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Field-wise overlay: values present in `over` replace those in `self`.
    pub fn overlay(self, over: Settings) -> Settings {
        macro_rules! pick {
            ($($f:ident),*) => { Settings { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(
            iso,
            sigma_s_sq,
            sigma_r,
            seed,
            threads,
            stages,
            reuse_flows,
            spatial_filter,
            spatial_filter_strength,
            bandwidth_scale,
            residual_box,
            pyramid_levels,
            flow_iters,
            flow_window,
            median_filter,
            wb_gains,
            ccm,
            tone_curve,
            mask_alpha
        )
    }

    /// Noise level: the ISO preset if named, with explicit `sigma_s_sq` and
    /// `sigma_r` replacing the preset's values. Without a preset both
    /// sigmas are required.
    pub fn noise_params(&self) -> Result<NoiseParams, ConfigError> {
        let base = match &self.iso {
            Some(name) => Some(iso_preset(name).map_err(|e| cfg_err(e.to_string()))?),
            None => None,
        };
        let s = self.sigma_s_sq.or(base.map(|p| p.sigma_s_sq));
        let r = self.sigma_r.or(base.map(|p| p.sigma_r));
        match (s, r) {
            (Some(s), Some(r)) => NoiseParams::new(s, r).map_err(|e| cfg_err(e.to_string())),
            _ => Err(cfg_err("noise level needs --iso or both --sigma-s-sq and --sigma-r")),
        }
    }

    pub fn flow_config(&self) -> Result<FlowConfig, ConfigError> {
        let d = FlowConfig::default();
        let cfg = FlowConfig {
            pyramid_levels: self.pyramid_levels.or(d.pyramid_levels),
            iters_per_level: self.flow_iters.unwrap_or(d.iters_per_level),
            window: self.flow_window.unwrap_or(d.window),
            median_filter: self.median_filter.unwrap_or(d.median_filter),
        };
        cfg.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn fusion_config(&self) -> Result<FusionConfig, ConfigError> {
        let d = FusionConfig::default();
        let cfg = FusionConfig {
            bandwidth_scale: self.bandwidth_scale.unwrap_or(d.bandwidth_scale),
            residual_box: self.residual_box.unwrap_or(d.residual_box),
            spatial_filter: self.spatial_filter.unwrap_or(d.spatial_filter),
            spatial_filter_strength: self.spatial_filter_strength.unwrap_or(d.spatial_filter_strength),
        };
        cfg.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn denoise_config(&self) -> Result<DenoiseConfig, ConfigError> {
        let d = DenoiseConfig::default();
        let cfg = DenoiseConfig {
            stages: self.stages.unwrap_or(d.stages),
            flow: self.flow_config()?,
            fusion: self.fusion_config()?,
            reuse_flows: self.reuse_flows.unwrap_or(d.reuse_flows),
        };
        cfg.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn isp_params(&self) -> Result<IspParams, ConfigError> {
        let d = IspParams::default();
        let p = IspParams {
            wb_gains: self.wb_gains.unwrap_or(d.wb_gains),
            ccm: self.ccm.unwrap_or(d.ccm),
            apply_tone_curve: self.tone_curve.unwrap_or(d.apply_tone_curve),
        };
        p.validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_settable() {
        let values = [
            "iso3",
            "0.001",
            "0.01",
            "5",
            "2",
            "3",
            "on",
            "off",
            "0.5",
            "1.5",
            "5",
            "3",
            "2",
            "7",
            "no",
            "1 1 1",
            "1,0,0, 0,1,0, 0,0,1",
            "false",
            "0.9",
        ];
        let mut s = Settings::default();
        for (k, v) in KEYS.iter().zip(values) {
            s.set(k, v).unwrap();
        }
        assert_eq!(s.stages, Some(3));
        assert_eq!(s.wb_gains, Some([1.0; 3]));
        assert_eq!(s.ccm, Some(ravden_core::camera::IDENTITY_CCM));
        assert_eq!(s.tone_curve, Some(false));
    }

    #[test]
    fn parse_comments_and_errors() {
        let s = Settings::parse("# header\nstages = 1 # trailing\n\nreuse_flows = on\n").unwrap();
        assert_eq!((s.stages, s.reuse_flows), (Some(1), Some(true)));
        assert!(Settings::parse("bogus = 1\n").is_err());
        assert!(Settings::parse("stages 1\n").is_err());
        assert!(Settings::parse("stages = x\n").is_err());
        assert!(Settings::parse("stages = 1\nstages = 2\n").is_err());
        assert!(Settings::parse("wb_gains = 1 2\n").is_err());
    }

    #[test]
    fn overlay_prefers_the_upper_layer() {
        let file = Settings::parse("stages = 3\nseed = 9\n").unwrap();
        let flags = Settings { stages: Some(1), ..Default::default() };
        let s = file.overlay(flags);
        assert_eq!((s.stages, s.seed), (Some(1), Some(9)));
    }

    #[test]
    fn explicit_sigma_overrides_preset() {
        let s = Settings::parse("iso = iso1\nsigma_s_sq = 0.02\n").unwrap();
        let p = s.noise_params().unwrap();
        assert_eq!((p.sigma_s_sq, p.sigma_r), (0.02, 2.5e-3));
        assert!(Settings::parse("sigma_r = 0.1\n").unwrap().noise_params().is_err());
        assert!(Settings::parse("iso = iso9\n").unwrap().noise_params().is_err());
        let both = Settings::parse("sigma_s_sq = 0\nsigma_r = 0\n").unwrap().noise_params().unwrap();
        assert_eq!((both.sigma_s_sq, both.sigma_r), (0.0, 0.0));
    }

    #[test]
    fn invalid_values_are_rejected_when_resolved() {
        assert!(Settings::parse("residual_box = 4\n").unwrap().fusion_config().is_err());
        assert!(Settings::parse("stages = 0\n").unwrap().denoise_config().is_err());
        assert!(Settings::parse("flow_window = 2\n").unwrap().flow_config().is_err());
        assert!(Settings::parse("wb_gains = 1 0 1\n").unwrap().isp_params().is_err());
    }
}
