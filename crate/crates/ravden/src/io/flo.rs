use std::path::Path;

use ravden_core::flow::FlowField;

use super::{at, read_file, write_file, FormatError, IoError};

/// Float tag at the start of every flow file; reads as "PIEH" in ASCII.
pub const FLO_MAGIC: f32 = 202021.25;

pub fn read_flow(bytes: &[u8]) -> Result<FlowField, FormatError> {
    if bytes.len() < 12 {
        return Err(FormatError::new("truncated flow header"));
    }
    let word = |i: usize| -> [u8; 4] { bytes[4 * i..4 * i + 4].try_into().unwrap() };
    if f32::from_le_bytes(word(0)) != FLO_MAGIC {
        return Err(FormatError::new("bad flow magic"));
    }
    let (width, height) = (i32::from_le_bytes(word(1)), i32::from_le_bytes(word(2)));
    if width <= 0 || height <= 0 {
        return Err(FormatError::new(format!("invalid flow dimensions {width}x{height}")));
    }
    let (w, h) = (width as usize, height as usize);
    let expected =
        w.checked_mul(h).and_then(|n| n.checked_mul(8)).ok_or_else(|| FormatError::new("flow dimensions overflow"))?;
    let body = &bytes[12..];
    if body.len() != expected {
        return Err(FormatError::new(format!("flow payload is {} bytes, expected {expected}", body.len())));
    }
    let data = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect();
    Ok(FlowField::from_interleaved(h, w, data)?)
}

pub fn write_flow(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * flow.interleaved().len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for v in flow.interleaved() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn load_flow(path: &Path) -> Result<FlowField, IoError> {
    read_flow(&read_file(path)?).map_err(at(path))
}

pub fn save_flow(path: &Path, flow: &FlowField) -> Result<(), IoError> {
    write_file(path, &write_flow(flow))
}
