//! Recursive multi-stage denoising.
//!
//! A window of `2N + 1` frames is reduced by `N` stages of three-frame
//! blocks: stage `i` turns `2(N - i) + 3` frames into `2(N - i) + 1`. All
//! stages share one flow and fusion configuration.
//!
//! [`StreamState`] evaluates the same recursion over an unbounded sequence,
//! running one block per stage for each new input frame, and produces
//! results bit-identical to calling [`denoise_window`] on every window.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;
use core::ops::RangeInclusive;

use crate::error::{dim_err, param_err, Error, Result};
use crate::flow::FlowConfig;
use crate::frame::{FrameMeta, PackedRawFrame, Planar, Sequence};
use crate::fuse::{align_pair, denoise_block_aligned, Alignment, FusionConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Number of stages `N`; a window holds `2N + 1` frames.
    pub stages: usize,
    pub flow: FlowConfig,
    pub fusion: FusionConfig,
    /// Reuse the first stage's flows in later stages instead of estimating
    /// new ones. Faster, approximate.
    pub reuse_flows: bool,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self { stages: 2, flow: FlowConfig::default(), fusion: FusionConfig::default(), reuse_flows: false }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stages == 0 {
            return Err(param_err!("at least one stage is required"));
        }
        self.flow.validate()?;
        self.fusion.validate()
    }
}

/// Index bookkeeping for an `N`-stage window centred on frame `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSchedule {
    stages: usize,
}

impl StageSchedule {
    pub fn new(stages: usize) -> Result<Self> {
        if stages == 0 {
            return Err(param_err!("at least one stage is required"));
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn window_len(&self) -> usize {
        2 * self.stages + 1
    }

    /// Frame offsets relative to `t` consumed by stage `i` (1-based).
    pub fn stage_inputs(&self, stage: usize) -> RangeInclusive<isize> {
        let r = (self.stages - stage + 1) as isize;
        -r..=r
    }

    /// Frame offsets relative to `t` emitted by stage `i` (1-based).
    pub fn stage_outputs(&self, stage: usize) -> RangeInclusive<isize> {
        let r = (self.stages - stage) as isize;
        -r..=r
    }

    /// Blocks run by stage `i` of one window: `2(N - i) + 1`.
    pub fn blocks_in_stage(&self, stage: usize) -> usize {
        2 * (self.stages - stage) + 1
    }

    /// Blocks for one independent window: `N^2`.
    pub fn blocks_per_window(&self) -> usize {
        self.stages * self.stages
    }

    /// Blocks run by the streaming evaluator over `len` frames:
    /// `(len - 2) N - N (N - 1)`, zero when the sequence is shorter than a
    /// window.
    pub fn stream_blocks(&self, len: usize) -> usize {
        if len < self.window_len() {
            return 0;
        }
        let n = self.stages;
        (len - 2) * n - n * (n - 1)
    }
}

/// Work counters for a denoising run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Denoiser blocks executed.
    pub blocks: usize,
    /// Neighbour alignments that required flow estimation (each is a
    /// forward and a backward flow). Reused alignments are not counted.
    pub alignments: usize,
}

impl core::ops::AddAssign for RunStats {
    fn add_assign(&mut self, rhs: Self) {
        self.blocks += rhs.blocks;
        self.alignments += rhs.alignments;
    }
}

/// Stage-one alignments keyed by `(center, neighbor)` frame index.
type AlignmentCache = BTreeMap<(usize, usize), Alignment>;

/// Runs one block on `frames[k-1..=k+1]`, with alignments either freshly
/// estimated or taken from `reuse`. Fresh alignments are handed to `record`.
fn run_block(
    frames: [&PackedRawFrame; 3],
    center_index: usize,
    cfg: &DenoiseConfig,
    reuse: Option<&AlignmentCache>,
    mut record: impl FnMut((usize, usize), &Alignment),
    stats: &mut RunStats,
) -> Result<PackedRawFrame> {
    let [prev, center, next] = frames;
    let keys = [(center_index, center_index - 1), (center_index, center_index + 1)];
    let out = match reuse {
        Some(cache) => {
            let to_prev = cache.get(&keys[0]).ok_or_else(|| param_err!("missing stage-one flow {:?}", keys[0]))?;
            let to_next = cache.get(&keys[1]).ok_or_else(|| param_err!("missing stage-one flow {:?}", keys[1]))?;
            denoise_block_aligned(prev, center, next, [to_prev, to_next], &cfg.fusion)?
        }
        None => {
            let to_prev = align_pair(center, prev, &cfg.flow)?;
            let to_next = align_pair(center, next, &cfg.flow)?;
            stats.alignments += 2;
            let out = denoise_block_aligned(prev, center, next, [&to_prev, &to_next], &cfg.fusion)?;
            record(keys[0], &to_prev);
            record(keys[1], &to_next);
            out
        }
    };
    stats.blocks += 1;
    Ok(out)
}

fn check_window(frames: &[PackedRawFrame], cfg: &DenoiseConfig) -> Result<()> {
    cfg.validate()?;
    let expected = 2 * cfg.stages + 1;
    if frames.len() != expected {
        return Err(Error::FrameCount { expected, found: frames.len() });
    }
    if frames.iter().any(|f| !f.same_shape(&frames[0])) {
        return Err(dim_err!("window frames differ in shape"));
    }
    Ok(())
}

/// Denoises the centre of a `2N + 1` frame window, returning work counters
/// alongside the frame. Honours `cfg.reuse_flows`.
pub fn denoise_window_with_stats(frames: &[PackedRawFrame], cfg: &DenoiseConfig) -> Result<(PackedRawFrame, RunStats)> {
    check_window(frames, cfg)?;
    let mut stats = RunStats::default();
    let mut cache = AlignmentCache::new();
    // frame indices are window positions; stage outputs keep their centre's index
    let mut current: Vec<PackedRawFrame> = frames.to_vec();
    for stage in 1..=cfg.stages {
        let first_index = stage - 1;
        let reuse = (cfg.reuse_flows && stage > 1).then_some(&cache);
        let mut fresh = Vec::new();
        let mut next = Vec::with_capacity(current.len() - 2);
        for k in 1..current.len() - 1 {
            let triple = [&current[k - 1], &current[k], &current[k + 1]];
            let out = run_block(
                triple,
                first_index + k,
                cfg,
                reuse,
                |key, a| {
                    if cfg.reuse_flows && stage == 1 {
                        fresh.push((key, a.clone()));
                    }
                },
                &mut stats,
            )?;
            next.push(out);
        }
        cache.extend(fresh);
        current = next;
    }
    debug_assert_eq!(current.len(), 1);
    Ok((current.pop().expect("one output"), stats))
}

/// Denoises the centre frame of a `2N + 1` frame window.
pub fn denoise_window(frames: &[PackedRawFrame], cfg: &DenoiseConfig) -> Result<PackedRawFrame> {
    denoise_window_with_stats(frames, cfg).map(|(f, _)| f)
}

/// [`denoise_window`] with stage-one flow reuse forced on.
pub fn denoise_window_reuse_flows(frames: &[PackedRawFrame], cfg: &DenoiseConfig) -> Result<PackedRawFrame> {
    let cfg = DenoiseConfig { reuse_flows: true, ..*cfg };
    denoise_window(frames, &cfg)
}

/// Per-stage sliding buffer of `(frame index, frame)`.
#[derive(Debug, Clone, Default)]
struct StageBuffer {
    frames: VecDeque<(usize, PackedRawFrame)>,
}

/// Incremental multi-stage denoiser over a frame stream.
///
/// Each pushed frame runs at most one block per stage. Stage buffers hold at
/// most three frames; in flow-reuse mode the stage-one alignments needed by
/// later stages are cached and evicted once no stage can reference them.
#[derive(Debug, Clone)]
pub struct StreamState {
    cfg: DenoiseConfig,
    stages: Vec<StageBuffer>,
    cache: AlignmentCache,
    consumed: usize,
    stats: RunStats,
}

impl StreamState {
    pub fn new(cfg: DenoiseConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            stages: (0..cfg.stages).map(|_| StageBuffer::default()).collect(),
            cache: AlignmentCache::new(),
            consumed: 0,
            stats: RunStats::default(),
        })
    }

    pub fn frames_consumed(&self) -> usize {
        self.consumed
    }

    pub fn stats(&self) -> RunStats {
        self.stats
    }

    /// Feeds the next frame. Returns `(index, frame)` when a fully denoised
    /// frame becomes available; index `t` is emitted once frame `t + N` has
    /// been pushed.
    pub fn push(&mut self, frame: PackedRawFrame) -> Result<Option<(usize, PackedRawFrame)>> {
        if let Some((_, first)) = self.stages[0].frames.front() {
            if !frame.same_shape(first) {
                return Err(dim_err!("stream frame differs in shape"));
            }
        }
        let index = self.consumed;
        self.consumed += 1;
        let mut carry = Some((index, frame));
        for stage in 0..self.cfg.stages {
            let Some(item) = carry.take() else { break };
            let buf = &mut self.stages[stage].frames;
            buf.push_back(item);
            if buf.len() < 3 {
                break;
            }
            let center_index = buf[1].0;
            let triple = [&buf[0].1, &buf[1].1, &buf[2].1];
            let reuse = (self.cfg.reuse_flows && stage > 0).then_some(&self.cache);
            let mut fresh = Vec::new();
            let record_fresh = self.cfg.reuse_flows && stage == 0 && self.cfg.stages > 1;
            let out = run_block(
                triple,
                center_index,
                &self.cfg,
                reuse,
                |key, a| {
                    if record_fresh {
                        fresh.push((key, a.clone()));
                    }
                },
                &mut self.stats,
            )?;
            self.cache.extend(fresh);
            self.stages[stage].frames.pop_front();
            carry = Some((center_index, out));
        }
        if self.cfg.reuse_flows {
            // on the next push stage s (1-based) centres on index + 1 - s
            let stages = self.cfg.stages;
            self.cache.retain(|&(c, _), _| c + stages > index);
        }
        Ok(carry)
    }
}

/// Denoises every frame with a full window: outputs frames `N ..= len-1-N`.
pub fn denoise_stream(
    input: &Sequence<PackedRawFrame>,
    cfg: &DenoiseConfig,
) -> Result<(Sequence<PackedRawFrame>, RunStats)> {
    cfg.validate()?;
    let window = 2 * cfg.stages + 1;
    if input.len() < window {
        return Err(Error::FrameCount { expected: window, found: input.len() });
    }
    let mut state = StreamState::new(*cfg)?;
    let mut frames = Vec::with_capacity(input.len() - 2 * cfg.stages);
    let mut meta: Vec<FrameMeta> = Vec::with_capacity(frames.capacity());
    for f in input.frames() {
        if let Some((t, out)) = state.push(f.clone())? {
            frames.push(out);
            meta.push(input.meta()[t].clone());
        }
    }
    let mut seq = Sequence::with_meta(frames, meta)?;
    seq.frame_rate = input.frame_rate;
    Ok((seq, state.stats()))
}
