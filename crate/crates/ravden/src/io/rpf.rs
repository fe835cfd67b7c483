use std::path::Path;

use ravden_core::{PackedRawFrame, Planar};

use super::{at, read_file, write_file, FormatError, IoError};

pub const RPF_MAGIC: [u8; 4] = *b"RPF1";
const HEADER_LEN: usize = 16;

/// Plane-major float tensor as stored in an RPF1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl<P: Planar> From<&P> for Tensor {
    fn from(p: &P) -> Self {
        Self { height: p.height(), width: p.width(), channels: p.channels(), data: p.data().to_vec() }
    }
}

pub fn read_tensor(bytes: &[u8]) -> Result<Tensor, FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::new("truncated RPF1 header"));
    }
    if bytes[..4] != RPF_MAGIC {
        return Err(FormatError::new("bad magic (expected RPF1)"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (height, width, channels) = (word(0), word(1), word(2));
    let count = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(channels))
        .ok_or_else(|| FormatError::new("RPF1 dimensions overflow"))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 4 {
        return Err(FormatError::new(format!(
            "RPF1 payload is {} bytes, expected {} for {height}x{width}x{channels}",
            body.len(),
            count * 4
        )));
    }
    let data = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Ok(Tensor { height, width, channels, data })
}

pub fn write_tensor(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * t.data.len());
    out.extend_from_slice(&RPF_MAGIC);
    for d in [t.height, t.width, t.channels] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_tensor(path: &Path) -> Result<Tensor, IoError> {
    read_tensor(&read_file(path)?).map_err(at(path))
}

pub fn save_tensor(path: &Path, t: &Tensor) -> Result<(), IoError> {
    write_file(path, &write_tensor(t))
}

/// Loads a 4-channel RPF1 file as a packed raw frame.
pub fn load_raw(path: &Path) -> Result<PackedRawFrame, IoError> {
    let t = load_tensor(path)?;
    let raw = if t.channels != PackedRawFrame::PLANES {
        Err(FormatError::new(format!("expected 4 packed planes, found {}", t.channels)))
    } else {
        PackedRawFrame::new(t.height, t.width, t.data).map_err(FormatError::from)
    };
    raw.map_err(at(path))
}

pub fn save_raw(path: &Path, packed: &PackedRawFrame) -> Result<(), IoError> {
    save_tensor(path, &Tensor::from(packed))
}
