//! Subcommands of the `ravden` binary.
//!
//! Exit codes: 0 success, 1 processing or write failure, 2 too few input
//! frames (including an empty directory), 3 an input frame could not be
//! read or decoded, 4 invalid arguments or configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use ravden_core::camera::{add_noise, process_isp, unprocess, NoiseSeed};
use ravden_core::flow::{estimate_flow, FlowConfig};
use ravden_core::multistage::{StageSchedule, StreamState};
use ravden_core::quality::{gradient_mask, psnr, ssim, temporal_warping_error, DEFAULT_MASK_ALPHA};
use ravden_core::{ColorSpace, Frame, Planar};

use crate::config::Settings;
use crate::io::{self, BitDepth, IoError, Sidecar};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INSUFFICIENT_INPUT: u8 = 2;
pub const EXIT_UNREADABLE_FRAME: u8 = 3;
pub const EXIT_USAGE: u8 = 4;

const IMAGE_EXTS: &[&str] = &["ppm", "pgm", "pnm"];
const RAW_EXTS: &[&str] = &["rpf"];

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    InsufficientInput(String),
    #[error("{0}")]
    UnreadableFrame(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => EXIT_FAILURE,
            CliError::InsufficientInput(_) => EXIT_INSUFFICIENT_INPUT,
            CliError::UnreadableFrame(_) => EXIT_UNREADABLE_FRAME,
            CliError::Usage(_) => EXIT_USAGE,
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

fn unreadable(e: impl std::fmt::Display) -> CliError {
    CliError::UnreadableFrame(e.to_string())
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "ravden", version, about = "Multi-stage raw video denoising toolkit")]
pub struct Cli {
    /// Configuration file of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "RAVDEN_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize noisy and clean raw frames from a directory of sRGB PNM frames.
    Synth(SynthArgs),
    /// Denoise a directory of RPF1 raw frames.
    Denoise(DenoiseArgs),
    /// Score denoised raw frames against clean ones and write a CSV.
    Eval(EvalArgs),
    /// Write the gradient texture mask of an image as 16-bit PGM.
    Mask(MaskArgs),
    /// Estimate optical flow between two images.
    Flow(FlowArgs),
    /// Render an RPF1 raw frame to sRGB.
    Isp(IspArgs),
    /// Convert an sRGB image to a packed raw RPF1 frame.
    Unprocess(UnprocessArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl From<Switch> for bool {
    fn from(s: Switch) -> bool {
        s == Switch::On
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory of clean sRGB PNM frames.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Noise preset, iso1 (low) to iso5 (high).
    #[arg(long)]
    pub iso: Option<String>,
    #[arg(long = "sigma_s_sq", visible_alias = "sigma-s-sq")]
    pub sigma_s_sq: Option<f64>,
    #[arg(long = "sigma_r", visible_alias = "sigma-r")]
    pub sigma_r: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FlowFlags {
    #[arg(long)]
    pub pyramid_levels: Option<usize>,
    #[arg(long)]
    pub flow_iters: Option<usize>,
    #[arg(long)]
    pub flow_window: Option<usize>,
    #[arg(long, value_enum)]
    pub median_filter: Option<Switch>,
}

impl FlowFlags {
    fn settings(&self) -> Settings {
        Settings {
            pyramid_levels: self.pyramid_levels,
            flow_iters: self.flow_iters,
            flow_window: self.flow_window,
            median_filter: self.median_filter.map(bool::from),
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Directory of RPF1 frames, processed in file-name order.
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub stages: Option<usize>,
    #[arg(long)]
    pub reuse_flows: bool,
    #[arg(long, value_enum)]
    pub spatial_filter: Option<Switch>,
    #[arg(long)]
    pub spatial_filter_strength: Option<f32>,
    #[arg(long)]
    pub bandwidth_scale: Option<f32>,
    #[arg(long)]
    pub residual_box: Option<usize>,
    /// Also write each output rendered to sRGB as 16-bit PPM.
    #[arg(long)]
    pub srgb: bool,
    #[command(flatten)]
    pub flow: FlowFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of denoised RPF1 frames.
    pub denoised: PathBuf,
    /// Directory of clean RPF1 frames with matching file names.
    pub clean: PathBuf,
    /// CSV destination.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub flow: FlowFlags,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub alpha: Option<f32>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    pub reference: PathBuf,
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every refinement pass as `iter_NNN.flo`.
    #[arg(long)]
    pub iterations_dir: Option<PathBuf>,
    #[command(flatten)]
    pub flow: FlowFlags,
}

#[derive(Debug, Args)]
pub struct IspArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 16, value_parser = parse_depth)]
    pub depth: u8,
}

#[derive(Debug, Args)]
pub struct UnprocessArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_depth(s: &str) -> Result<u8, String> {
    match s {
        "8" => Ok(8),
        "16" => Ok(16),
        _ => Err(format!("depth must be 8 or 16, got {s}")),
    }
}

fn depth_of(bits: u8) -> BitDepth {
    if bits == 8 {
        BitDepth::Eight
    } else {
        BitDepth::Sixteen
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.unwrap_or(0)).build().map_err(failed)?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(a, file),
        Command::Denoise(a) => cmd_denoise(a, file),
        Command::Eval(a) => cmd_eval(a, file),
        Command::Mask(a) => cmd_mask(a, file),
        Command::Flow(a) => cmd_flow(a, file),
        Command::Isp(a) => cmd_isp(a, file),
        Command::Unprocess(a) => cmd_unprocess(a, file),
    })
}

fn list_inputs(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
    }
    io::list_frames(dir, exts).map_err(failed)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| failed(format!("{}: {e}", dir.display())))
}

fn file_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// First error in input order, so the reported failure does not depend on
/// scheduling.
fn first_error<T>(results: Vec<Result<T, CliError>>) -> Result<Vec<T>, CliError> {
    results.into_iter().collect()
}

fn load_rgb(path: &Path) -> Result<Frame, CliError> {
    let frame = io::load_image(path).map_err(unreadable)?;
    if frame.channels() != 3 {
        return Err(unreadable(format!("{}: expected a colour (P6) image", path.display())));
    }
    Ok(frame)
}

pub fn cmd_synth(args: &SynthArgs, file: Settings) -> Result<(), CliError> {
    let s = file.overlay(Settings {
        iso: args.iso.clone(),
        sigma_s_sq: args.sigma_s_sq,
        sigma_r: args.sigma_r,
        seed: args.seed,
        ..Default::default()
    });
    let noise = s.noise_params()?;
    let isp = s.isp_params()?;
    let seed = s.seed.unwrap_or(0);
    let inputs = list_inputs(&args.input, IMAGE_EXTS)?;
    if inputs.is_empty() {
        return Err(CliError::InsufficientInput(format!("no PNM frames in {}", args.input.display())));
    }
    let (noisy_dir, clean_dir) = (args.out.join("noisy"), args.out.join("clean"));
    create_dir(&noisy_dir)?;
    create_dir(&clean_dir)?;

    let results: Vec<Result<(), CliError>> = inputs
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let frame = load_rgb(path)?;
            let clean = unprocess(&frame, &isp).map_err(|e| unreadable(format!("{}: {e}", path.display())))?;
            let key = NoiseSeed { seed, frame_index: i as u64 };
            let noisy = add_noise(&clean, &noise, key).map_err(failed)?;
            let name = file_stem(path);
            io::save_raw(&clean_dir.join(format!("{name}.rpf")), &clean).map_err(failed)?;
            io::save_raw(&noisy_dir.join(format!("{name}.rpf")), &noisy).map_err(failed)?;
            io::save_sidecar(&noisy_dir.join(format!("{name}.txt")), &Sidecar { params: noise, seed: key })
                .map_err(failed)
        })
        .collect();
    first_error(results)?;
    println!(
        "synthesized {} frames (sigma_s_sq = {}, sigma_r = {}, seed = {seed}) into {}",
        inputs.len(),
        noise.sigma_s_sq,
        noise.sigma_r,
        args.out.display()
    );
    Ok(())
}

pub fn cmd_denoise(args: &DenoiseArgs, file: Settings) -> Result<(), CliError> {
    let s = file.overlay(
        Settings {
            stages: args.stages,
            reuse_flows: args.reuse_flows.then_some(true),
            spatial_filter: args.spatial_filter.map(bool::from),
            spatial_filter_strength: args.spatial_filter_strength,
            bandwidth_scale: args.bandwidth_scale,
            residual_box: args.residual_box,
            ..Default::default()
        }
        .overlay(args.flow.settings()),
    );
    let cfg = s.denoise_config()?;
    let isp = if args.srgb { Some(s.isp_params()?) } else { None };
    let inputs = list_inputs(&args.input, RAW_EXTS)?;
    let window = StageSchedule::new(cfg.stages).map_err(failed)?.window_len();
    if inputs.len() < window {
        return Err(CliError::InsufficientInput(format!(
            "{} stage(s) need at least {window} frames, found {}",
            cfg.stages,
            inputs.len()
        )));
    }
    create_dir(&args.out)?;

    let mut stream = StreamState::new(cfg).map_err(failed)?;
    let mut shape = None;
    for (i, path) in inputs.iter().enumerate() {
        let frame = io::load_raw(path).map_err(unreadable)?;
        let dims = (frame.height(), frame.width());
        if *shape.get_or_insert(dims) != dims {
            return Err(unreadable(format!("{}: frame size differs from the first frame", path.display())));
        }
        let before = stream.stats().blocks;
        let start = Instant::now();
        let emitted = stream.push(frame).map_err(failed)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let blocks = stream.stats().blocks - before;
        println!("frame {i} ({}): {blocks} blocks, {elapsed:.1} ms", file_stem(path));
        if let Some((t, out)) = emitted {
            let name = file_stem(&inputs[t]);
            io::save_raw(&args.out.join(format!("{name}.rpf")), &out).map_err(failed)?;
            if let Some(isp) = &isp {
                let rgb = process_isp(&out, isp).map_err(failed)?;
                io::save_image(&args.out.join(format!("{name}.ppm")), &rgb, BitDepth::Sixteen).map_err(failed)?;
            }
            println!("  denoised frame {t} -> {name}.rpf");
        }
    }
    let stats = stream.stats();
    println!("{} blocks, {} alignments", stats.blocks, stats.alignments);
    Ok(())
}

/// Metrics of one frame as reported by `eval`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub frame_index: usize,
    pub psnr_raw: f64,
    pub psnr_srgb: f64,
    pub ssim_srgb: f64,
}

/// Formats a metric for CSV output: shortest round-trip decimal, with
/// `inf`, `-inf` and `nan` for non-finite values.
pub fn format_metric(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

/// CSV with one row per frame and a final `mean` row whose last column is
/// the warping error.
pub fn eval_csv(scores: &[FrameScore], e_w: f64) -> String {
    let mut out = String::from("frame_index,psnr_raw,psnr_srgb,ssim_srgb,e_w\n");
    for s in scores {
        let _ = writeln!(
            out,
            "{},{},{},{},",
            s.frame_index,
            format_metric(s.psnr_raw),
            format_metric(s.psnr_srgb),
            format_metric(s.ssim_srgb)
        );
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&FrameScore) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let _ = writeln!(
        out,
        "mean,{},{},{},{}",
        format_metric(mean(|s| s.psnr_raw)),
        format_metric(mean(|s| s.psnr_srgb)),
        format_metric(mean(|s| s.ssim_srgb)),
        format_metric(e_w)
    );
    out
}

pub fn cmd_eval(args: &EvalArgs, file: Settings) -> Result<(), CliError> {
    let s = file.overlay(args.flow.settings());
    let flow_cfg = s.flow_config()?;
    let isp = s.isp_params()?;
    let denoised = list_inputs(&args.denoised, RAW_EXTS)?;
    if denoised.is_empty() {
        return Err(CliError::InsufficientInput(format!("no RPF1 frames in {}", args.denoised.display())));
    }
    let clean = list_inputs(&args.clean, RAW_EXTS)?;

    struct Scored {
        score: FrameScore,
        srgb: (Frame, Frame),
    }
    let results: Vec<Result<Scored, CliError>> = denoised
        .par_iter()
        .map(|path| {
            let name = path.file_name().unwrap_or_default();
            let index = clean
                .iter()
                .position(|c| c.file_name() == Some(name))
                .ok_or_else(|| unreadable(format!("no clean frame named {}", name.to_string_lossy())))?;
            let d = io::load_raw(path).map_err(unreadable)?;
            let c = io::load_raw(&clean[index]).map_err(unreadable)?;
            if !d.same_shape(&c) {
                return Err(failed(format!("{}: size differs from the clean frame", path.display())));
            }
            let (ds, cs) = (process_isp(&d, &isp).map_err(failed)?, process_isp(&c, &isp).map_err(failed)?);
            let score = FrameScore {
                frame_index: index,
                psnr_raw: psnr(&d, &c, 1.0).map_err(failed)?,
                psnr_srgb: psnr(&ds, &cs, 1.0).map_err(failed)?,
                ssim_srgb: ssim(&ds, &cs).map_err(failed)?,
            };
            Ok(Scored { score, srgb: (ds, cs) })
        })
        .collect();
    let mut scored = first_error(results)?;
    scored.sort_by_key(|s| s.score.frame_index);

    let consecutive = scored.windows(2).all(|w| w[1].score.frame_index == w[0].score.frame_index + 1);
    let e_w = if scored.len() >= 3 && consecutive {
        let (ds, cs): (Vec<Frame>, Vec<Frame>) = scored.iter().map(|s| s.srgb.clone()).unzip();
        match temporal_warping_error(&ds, &cs, &flow_cfg) {
            Ok(v) => v,
            Err(ravden_core::Error::Empty(_)) => f64::NAN,
            Err(e) => return Err(failed(e)),
        }
    } else {
        f64::NAN
    };
    let scores: Vec<FrameScore> = scored.iter().map(|s| s.score).collect();
    let csv = eval_csv(&scores, e_w);
    fs::write(&args.out, &csv).map_err(|e| failed(format!("{}: {e}", args.out.display())))?;
    print!("{}", csv.lines().last().map(|l| format!("{l}\n")).unwrap_or_default());
    Ok(())
}

pub fn cmd_mask(args: &MaskArgs, file: Settings) -> Result<(), CliError> {
    let s = file.overlay(Settings { mask_alpha: args.alpha, ..Default::default() });
    let alpha = s.mask_alpha.unwrap_or(DEFAULT_MASK_ALPHA);
    let frame = io::load_image(&args.input).map_err(unreadable)?;
    let mask = gradient_mask(&frame, alpha).map_err(|e| CliError::Usage(e.to_string()))?;
    let out = Frame::new(mask.height, mask.width, 1, mask.values, ColorSpace::Linear).map_err(failed)?;
    io::save_image(&args.out, &out, BitDepth::Sixteen).map_err(failed)
}

pub fn cmd_flow(args: &FlowArgs, file: Settings) -> Result<(), CliError> {
    let cfg: FlowConfig = file.overlay(args.flow.settings()).flow_config()?;
    let load =
        |p: &Path| -> Result<Frame, CliError> { io::load_image(p).map_err(unreadable)?.luma().map_err(unreadable) };
    let (reference, target) = (load(&args.reference)?, load(&args.target)?);
    let result = estimate_flow(&reference, &target, &cfg).map_err(failed)?;
    io::save_flow(&args.out, &result.final_flow).map_err(failed)?;
    if let Some(dir) = &args.iterations_dir {
        create_dir(dir)?;
        for (i, f) in result.iterations.iter().enumerate() {
            io::save_flow(&dir.join(format!("iter_{i:03}.flo")), f).map_err(failed)?;
        }
    }
    println!(
        "{} refinement passes{}",
        result.iterations.len(),
        if result.flat { " (flat input, zero flow)" } else { "" }
    );
    Ok(())
}

pub fn cmd_isp(args: &IspArgs, file: Settings) -> Result<(), CliError> {
    let isp = file.isp_params()?;
    let raw = io::load_raw(&args.input).map_err(unreadable)?;
    let rgb = process_isp(&raw, &isp).map_err(failed)?;
    io::save_image(&args.out, &rgb, depth_of(args.depth)).map_err(failed)
}

pub fn cmd_unprocess(args: &UnprocessArgs, file: Settings) -> Result<(), CliError> {
    let isp = file.isp_params()?;
    let frame = load_rgb(&args.input)?;
    let raw = unprocess(&frame, &isp).map_err(|e| unreadable(format!("{}: {e}", args.input.display())))?;
    io::save_raw(&args.out, &raw).map_err(failed)
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        failed(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_bool;

    #[test]
    fn metric_formatting() {
        assert_eq!(format_metric(f64::INFINITY), "inf");
        assert_eq!(format_metric(f64::NAN), "nan");
        assert_eq!(format_metric(0.1), "0.1");
        assert_eq!(format_metric(35.25), "35.25");
        assert!(parse_bool("maybe").is_err());
    }

    #[test]
    fn csv_shape() {
        let s = |i, p| FrameScore { frame_index: i, psnr_raw: p, psnr_srgb: p, ssim_srgb: 1.0 };
        let csv = eval_csv(&[s(2, 30.0), s(3, 40.0)], 0.5);
        assert_eq!(csv, "frame_index,psnr_raw,psnr_srgb,ssim_srgb,e_w\n2,30,30,1,\n3,40,40,1,\nmean,35,35,1,0.5\n");
    }
}
