//! Color PNG and float PFM files.
//!
//! Color is held linear in memory; PNGs are 8-bit sRGB on disk. PFM rows are
//! stored bottom to top as the format prescribes, little-endian with scale
//! −1 when written.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{ColorType, ImageReader, RgbImage};
use passthrough_core::image::{srgb_decode_table, srgb_encode_u8};
use passthrough_core::ImagePlane;

use crate::error::{Error, Result};

/// Loads an 8-bit PNG as linear RGB in `[0, 1]`. Gray and alpha variants are
/// widened to RGB; alpha is dropped.
pub fn load_color(path: &Path) -> Result<ImagePlane> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?.with_guessed_format().map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| Error::format(path, e.to_string()))?;
    match img.color() {
        ColorType::L8 | ColorType::La8 | ColorType::Rgb8 | ColorType::Rgba8 => {}
        other => return Err(Error::format(path, format!("unsupported pixel format {other:?}; expected 8-bit RGB"))),
    }
    let rgb = img.to_rgb8();
    let lut = srgb_decode_table();
    let data = rgb.as_raw().iter().map(|&b| lut[b as usize]).collect();
    Ok(ImagePlane::new(rgb.width() as usize, rgb.height() as usize, 3, data)?)
}

/// Writes a linear RGB plane as an 8-bit sRGB PNG. One-channel planes are
/// written as gray RGB.
pub fn save_color(plane: &ImagePlane, path: &Path) -> Result<()> {
    let (w, h) = (plane.width(), plane.height());
    let bytes: Vec<u8> = match plane.channels() {
        3 => plane.data().iter().map(|&v| srgb_encode_u8(v)).collect(),
        1 => plane.data().iter().flat_map(|&v| [srgb_encode_u8(v); 3]).collect(),
        c => return Err(Error::format(path, format!("cannot write a {c}-channel plane as PNG"))),
    };
    let img = RgbImage::from_raw(w as u32, h as u32, bytes).expect("buffer matches dimensions");
    create_parent(path)?;
    img.save_with_format(path, image::ImageFormat::Png).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes a 1- or 3-channel float map as PFM.
pub fn save_pfm(plane: &ImagePlane, path: &Path) -> Result<()> {
    let tag = match plane.channels() {
        1 => "Pf",
        3 => "PF",
        c => return Err(Error::format(path, format!("PFM holds 1 or 3 channels, not {c}"))),
    };
    let (w, h) = (plane.width(), plane.height());
    let mut buf = Vec::with_capacity(32 + plane.data().len() * 4);
    write!(buf, "{tag}\n{w} {h}\n-1.0\n").expect("write to vec");
    for y in (0..h).rev() {
        for v in plane.row(y) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    write_file(path, &buf)
}

pub fn load_pfm(path: &Path) -> Result<ImagePlane> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes).map_err(|m| Error::format(path, m))
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<ImagePlane, String> {
    // three whitespace-separated header tokens, then exactly one whitespace byte
    let mut pos = 0;
    let mut token = || -> std::result::Result<&str, String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated PFM header".into());
        }
        std::str::from_utf8(&bytes[start..pos]).map_err(|_| "PFM header is not ASCII".to_string())
    };
    let channels = match token()? {
        "Pf" => 1,
        "PF" => 3,
        t => return Err(format!("not a PFM file (magic {t:?})")),
    };
    let w: usize = token()?.parse().map_err(|_| "bad PFM width")?;
    let h: usize = token()?.parse().map_err(|_| "bad PFM height")?;
    let scale: f32 = token()?.parse().map_err(|_| "bad PFM scale")?;
    if scale == 0.0 || !scale.is_finite() {
        return Err("PFM scale must be non-zero".into());
    }
    let little = scale < 0.0;
    let body = &bytes[pos + 1..];
    let n = w * h * channels;
    if body.len() < n * 4 {
        return Err(format!("PFM data truncated: {} of {} bytes", body.len(), n * 4));
    }
    let mut data = vec![0.0f32; n];
    let row = w * channels;
    for (i, chunk) in body[..n * 4].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(b) } else { f32::from_be_bytes(b) };
        let (file_row, col) = (i / row, i % row);
        data[(h - 1 - file_row) * row + col] = v;
    }
    ImagePlane::new(w, h, channels, data).map_err(|e| e.to_string())
}

/// Binary mask plane from a PFM, checking that it only holds 0 and 1.
pub fn load_mask(path: &Path) -> Result<ImagePlane> {
    let m = load_pfm(path)?;
    if m.channels() != 1 || !m.is_binary_mask() {
        return Err(Error::format(path, "expected a 1-channel mask of zeros and ones"));
    }
    Ok(m)
}

pub(crate) fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pfm_header_and_row_order() {
        let m = ImagePlane::from_fn(4, 3, |x, y| (y * 4 + x) as f32);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.pfm");
        save_pfm(&m, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"Pf\n4 3\n-1.0\n"));
        assert_eq!(bytes.len(), 12 + 48);
        // first stored row is the bottom one
        assert_eq!(f32::from_le_bytes(bytes[12..16].try_into().unwrap()), 8.0);
        assert_eq!(load_pfm(&p).unwrap(), m);
    }

    #[test]
    fn big_endian_pfm_is_read() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        for v in [1.5f32, -2.0] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        assert_eq!(parse_pfm(&bytes).unwrap().data(), &[1.5, -2.0]);
        assert!(parse_pfm(&bytes[..bytes.len() - 1]).is_err());
        assert!(parse_pfm(b"P6\n1 1\n255\n").is_err());
    }

    #[test]
    fn png_decode_examples() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        RgbImage::from_raw(3, 1, vec![255, 255, 255, 0, 0, 0, 128, 128, 128]).unwrap().save(&p).unwrap();
        let img = load_color(&p).unwrap();
        assert_eq!(&img.data()[..6], &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((img.data()[6] - 0.2159).abs() < 1e-4);

        let out = dir.path().join("z.png");
        save_color(&ImagePlane::zeros(2, 2, 3), &out).unwrap();
        assert!(image::open(&out).unwrap().to_rgb8().as_raw().iter().all(|&b| b == 0));
    }

    #[test]
    fn truncated_png_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        RgbImage::from_raw(8, 8, vec![90; 192]).unwrap().save(&p).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_color(&p), Err(Error::Format { .. })));
        assert!(matches!(load_color(&dir.path().join("missing.png")), Err(Error::Io { .. })));
    }
}
