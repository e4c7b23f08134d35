//! Binary PGM (P5) codec.
//!
//! Reading accepts the usual netpbm liberties in the header: any run of
//! whitespace between tokens and `#` comments through end of line. Writing is
//! canonical: `P5\n{width} {height}\n{maxval}\n` followed by the payload, with
//! maxval 255 when the image peak fits in 8 bits and 65535 otherwise (16-bit
//! samples are big-endian). Values are rounded half to even; a value outside
//! `[0, peak]` or too large for the chosen depth is an error, never clipped.

use std::path::Path;

use crate::error::{Error, Result};
use crate::imgio::Image;

/// Decodes a P5 image from raw bytes. Errors cite the byte offset.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(bad(0, "expected magic \"P5\""));
    }
    let mut pos = 2usize;
    let width = parse_header_int(bytes, &mut pos, "width")?;
    let height = parse_header_int(bytes, &mut pos, "height")?;
    let maxval = parse_header_int(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(bad(pos, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(pos, format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad(pos, "expected single whitespace before payload")),
    }

    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let expected = (width as usize)
        .checked_mul(height as usize)
        .and_then(|n| n.checked_mul(bytes_per_sample))
        .ok_or_else(|| bad(pos, "image dimensions overflow"))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(bad(
            pos + payload.len(),
            format!("payload truncated: expected {expected} bytes, found {}", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(bad(pos + expected, "trailing bytes after payload"));
    }

    let mut data = Vec::with_capacity((width * height) as usize);
    if bytes_per_sample == 1 {
        data.extend(payload.iter().map(|&b| b as f64));
    } else {
        for pair in payload.chunks_exact(2) {
            data.push((u16::from_be_bytes([pair[0], pair[1]])) as f64);
        }
    }
    for (i, &v) in data.iter().enumerate() {
        if v > maxval as f64 {
            return Err(bad(
                pos + i * bytes_per_sample,
                format!("sample {v} exceeds maxval {maxval}"),
            ));
        }
    }
    Image::new(width as usize, height as usize, maxval as f64, data)
}

/// Encodes to canonical P5 bytes.
pub fn encode_pgm(img: &Image) -> Result<Vec<u8>> {
    let maxval: u32 = if img.peak() <= 255.0 { 255 } else { 65535 };
    let bytes_per_sample = if maxval == 255 { 1 } else { 2 };
    let header = format!("P5\n{} {}\n{}\n", img.width(), img.height(), maxval);
    let mut out = Vec::with_capacity(header.len() + img.pixel_count() * bytes_per_sample);
    out.extend_from_slice(header.as_bytes());
    for (index, &value) in img.data().iter().enumerate() {
        if value > img.peak() {
            return Err(Error::Range {
                index,
                value,
                peak: img.peak(),
            });
        }
        let q = value.round_ties_even();
        if q > maxval as f64 {
            return Err(Error::Range {
                index,
                value,
                peak: maxval as f64,
            });
        }
        let q = q as u32;
        if maxval == 255 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<Image> {
    parse_pgm(&std::fs::read(path)?)
}

pub fn write_pgm(img: &Image, path: &Path) -> Result<()> {
    std::fs::write(path, encode_pgm(img)?)?;
    Ok(())
}

fn bad(offset: usize, reason: impl Into<String>) -> Error {
    Error::PgmFormat {
        offset,
        reason: reason.into(),
    }
}

/// Skips whitespace and `#` comments, then parses a decimal integer.
fn parse_header_int(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' {
                        break;
                    }
                }
            }
            _ => break,
        }
    }
    let start = *pos;
    let mut value: u64 = 0;
    while let Some(&b) = bytes.get(*pos) {
        if !b.is_ascii_digit() {
            break;
        }
        value = value * 10 + (b - b'0') as u64;
        if value > u32::MAX as u64 {
            return Err(bad(start, format!("{what} out of range")));
        }
        *pos += 1;
    }
    if *pos == start {
        return Err(bad(start, format!("expected {what}")));
    }
    Ok(value as u32)
}
