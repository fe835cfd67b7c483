use std::path::Path;

use ravden_core::{ColorSpace, Frame, Planar};

use super::{at, read_file, write_file, FormatError, IoError};

/// Sample depth of a written PNM file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, FormatError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(FormatError::new("not a binary PNM (expected P5 or P6)")),
    };
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for field in fields.iter_mut() {
        // whitespace and comments before each field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(FormatError::new("truncated PNM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or("");
        *field = text.parse().map_err(|_| FormatError::new("malformed PNM header field"))?;
    }
    // exactly one whitespace byte separates the header from the samples
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(FormatError::new("truncated PNM header")),
    }
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(FormatError::new("PNM dimensions must be non-zero"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(FormatError::new(format!("PNM maxval {maxval} out of range")));
    }
    Ok(Header { channels, width: width as usize, height: height as usize, maxval, data_start: pos })
}

/// Decodes a P5/P6 image into a display-referred frame with samples
/// normalized by `maxval`.
pub fn read_image(bytes: &[u8]) -> Result<Frame, FormatError> {
    let hd = parse_header(bytes)?;
    let bytes_per_sample = if hd.maxval > 255 { 2 } else { 1 };
    let n = hd.height * hd.width;
    let needed =
        n.checked_mul(hd.channels * bytes_per_sample).ok_or_else(|| FormatError::new("PNM dimensions overflow"))?;
    let body = &bytes[hd.data_start..];
    if body.len() < needed {
        return Err(FormatError::new(format!("truncated PNM data: {} of {needed} bytes", body.len())));
    }
    let scale = hd.maxval as f32;
    let mut data = vec![0.0f32; n * hd.channels];
    for i in 0..n {
        for c in 0..hd.channels {
            let k = i * hd.channels + c;
            let v = if bytes_per_sample == 2 {
                u16::from_be_bytes([body[2 * k], body[2 * k + 1]]) as u32
            } else {
                body[k] as u32
            };
            if v > hd.maxval {
                return Err(FormatError::new(format!("PNM sample {v} exceeds maxval {}", hd.maxval)));
            }
            data[c * n + i] = v as f32 / scale;
        }
    }
    Ok(Frame::new(hd.height, hd.width, hd.channels, data, ColorSpace::Srgb)?)
}

/// Encodes a 1- or 3-channel frame as P5/P6, clamping to `[0, 1]` and
/// rounding to the nearest code.
pub fn write_image(frame: &Frame, depth: BitDepth) -> Vec<u8> {
    let (h, w, c) = (frame.height(), frame.width(), frame.channels());
    let magic = if c == 1 { "P5" } else { "P6" };
    let maxval = depth.maxval();
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    let n = h * w;
    let data = frame.data();
    for i in 0..n {
        for ch in 0..c {
            let code = (data[ch * n + i].clamp(0.0, 1.0) * maxval as f32).round() as u16;
            match depth {
                BitDepth::Eight => out.push(code as u8),
                BitDepth::Sixteen => out.extend_from_slice(&code.to_be_bytes()),
            }
        }
    }
    out
}

pub fn load_image(path: &Path) -> Result<Frame, IoError> {
    read_image(&read_file(path)?).map_err(at(path))
}

pub fn save_image(path: &Path, frame: &Frame, depth: BitDepth) -> Result<(), IoError> {
    write_file(path, &write_image(frame, depth))
}
