//! NPFW fusion weight files.
//!
//! ```text
//! "NPFW"  u32 version (1)  u32 layer_count
//! per layer:
//!   u16 name_len  name (UTF-8)
//!   u32 in  u32 out  u32 kh  u32 kw
//!   f32 weights[out·in·kh·kw]   (out, in, kh, kw) order
//!   f32 bias[out]
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use passthrough_core::fusion::{ConvLayer, FusionWeights};

use crate::error::{Error, Result};
use crate::io::write_file;

pub const MAGIC: &[u8; 4] = b"NPFW";
pub const VERSION: u32 = 1;

pub fn encode(weights: &FusionWeights) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * weights.param_count() + 64 * weights.layers.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(weights.layers.len() as u32).to_le_bytes());
    for l in &weights.layers {
        out.extend_from_slice(&(l.name.len() as u16).to_le_bytes());
        out.extend_from_slice(l.name.as_bytes());
        for d in [l.in_channels, l.out_channels, l.kernel_h, l.kernel_w] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in l.weights.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        if self.bytes.len() - self.pos < n {
            return Err(format!("file ends inside {what}"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> std::result::Result<Vec<f32>, String> {
        let raw = self.take(n.checked_mul(4).ok_or("size overflow")?, what)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
}

/// Parses NPFW bytes without checking the layers against the network.
pub fn decode(bytes: &[u8]) -> std::result::Result<FusionWeights, String> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "the header")? != MAGIC {
        return Err("not an NPFW file".into());
    }
    let version = c.u32("the header")?;
    if version != VERSION {
        return Err(format!("unsupported NPFW version {version}"));
    }
    let count = c.u32("the header")? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for i in 0..count {
        let len = c.u16(&format!("layer {i} header"))? as usize;
        let name = std::str::from_utf8(c.take(len, &format!("layer {i} name"))?)
            .map_err(|_| format!("layer {i}: name is not UTF-8"))?
            .to_string();
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = c.u32(&format!("layer {name} header"))? as usize;
        }
        let [ic, oc, kh, kw] = dims;
        let n = oc.checked_mul(ic).and_then(|v| v.checked_mul(kh)).and_then(|v| v.checked_mul(kw));
        let n = n.ok_or_else(|| format!("layer {name}: absurd shape"))?;
        let weights = c.f32s(n, &format!("layer {name} weights"))?;
        let bias = c.f32s(oc, &format!("layer {name} bias"))?;
        layers.push(ConvLayer { name, in_channels: ic, out_channels: oc, kernel_h: kh, kernel_w: kw, weights, bias });
    }
    if c.pos != bytes.len() {
        return Err(format!("{} trailing bytes after the last layer", bytes.len() - c.pos));
    }
    Ok(FusionWeights { layers })
}

/// Loads and validates weights; shape errors name the offending layer.
pub fn load(path: &Path) -> Result<FusionWeights> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let w = decode(&bytes).map_err(|m| Error::format(path, m))?;
    w.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(w)
}

pub fn save(weights: &FusionWeights, path: &Path) -> Result<()> {
    weights.validate()?;
    write_file(path, &encode(weights))
}
