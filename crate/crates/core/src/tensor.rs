//! The `LGT1` tensor file format and PPM previews.
//!
//! Layout: magic `LGT1`, then little-endian `u32` channels, height, width,
//! then `channels * height * width` little-endian `f32` values in
//! channel-major, row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridMap;

pub const MAGIC: &[u8; 4] = b"LGT1";
const HEADER_LEN: usize = 16;

/// Encodes a map into `LGT1` bytes.
pub fn encode_tensor(map: &GridMap) -> Result<Vec<u8>> {
    if let Some(k) = map.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(k));
    }
    let (c, h, w) = map.shape();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * map.data().len());
    out.extend_from_slice(MAGIC);
    for dim in [c, h, w] {
        let d = u32::try_from(dim)
            .map_err(|_| Error::Shape(format!("dimension {dim} does not fit in u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in map.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Decodes `LGT1` bytes; `what` names the source in error messages.
pub fn decode_tensor(bytes: &[u8], what: &str) -> Result<GridMap> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::UnrecognizedFormat(what.to_string()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedTensor(format!("{what}: header incomplete")));
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (c, h, w) = (dim(0), dim(1), dim(2));
    let n = c
        .checked_mul(h)
        .and_then(|x| x.checked_mul(w))
        .ok_or_else(|| Error::UnrecognizedFormat(format!("{what}: absurd dimensions")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < n * 4 {
        return Err(Error::TruncatedTensor(format!(
            "{what}: expected {n} values, found {}",
            payload.len() / 4
        )));
    }
    if payload.len() > n * 4 {
        return Err(Error::UnrecognizedFormat(format!(
            "{what}: {} trailing bytes",
            payload.len() - n * 4
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect();
    GridMap::from_vec(c, h, w, data)
}

/// Writes a map as an `LGT1` file.
pub fn write_tensor(map: &GridMap, path: &Path) -> Result<()> {
    let bytes = encode_tensor(map)?;
    write_atomic(path, &bytes)
}

/// Reads an `LGT1` file.
pub fn read_tensor(path: &Path) -> Result<GridMap> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, &path.display().to_string())
}

/// Writes one channel as a binary PPM (P6), grey value triplicated.
pub fn write_ppm(map: &GridMap, channel: usize, path: &Path) -> Result<()> {
    if channel >= map.channels() {
        return Err(Error::Shape(format!(
            "channel {channel} out of range for {} channels",
            map.channels()
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", map.width(), map.height()).into_bytes();
    for &v in map.channel(channel) {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        out.extend_from_slice(&[g, g, g]);
    }
    write_atomic(path, &out)
}

/// Writes bytes to a sibling temp file, then renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
