//! Payloads hidden past the end of the image data in BMP, PNG and JPEG files.
//!
//! Image readers stop at the end of the pixel data, so anything appended after
//! it is invisible to viewers. `raw` mode appends bytes verbatim; `framed`
//! mode adds a 16-byte footer at the very end of the file:
//!
//! ```text
//! "SEOF" | 0x01 | 00 00 00 | payload length (u64, big-endian)
//! ```

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const TRAILER_MAGIC: [u8; 4] = *b"SEOF";
pub const TRAILER_VERSION: u8 = 1;
pub const TRAILER_LEN: usize = 16;

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContainerKind {
    Bmp,
    Png,
    Jpeg,
}

impl ContainerKind {
    pub fn detect(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(&PNG_SIGNATURE) {
            Some(ContainerKind::Png)
        } else if bytes.starts_with(&[0xFF, 0xD8]) {
            Some(ContainerKind::Jpeg)
        } else if bytes.starts_with(b"BM") {
            Some(ContainerKind::Bmp)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AppendMode {
    Raw,
    Framed,
}

impl FromStr for AppendMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(AppendMode::Raw),
            "framed" => Ok(AppendMode::Framed),
            other => Err(Error::InvalidParameter(format!(
                "unknown append mode {other:?} (expected raw or framed)"
            ))),
        }
    }
}

impl fmt::Display for AppendMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AppendMode::Raw => "raw",
            AppendMode::Framed => "framed",
        })
    }
}

fn invalid(reason: impl Into<String>) -> Error {
    Error::InvalidContainer(reason.into())
}

/// Index one past the last byte of legitimate image data.
pub fn find_payload_boundary(bytes: &[u8]) -> Result<usize> {
    match ContainerKind::detect(bytes).ok_or(Error::UnrecognizedContainer)? {
        ContainerKind::Bmp => bmp_boundary(bytes),
        ContainerKind::Png => png_boundary(bytes),
        ContainerKind::Jpeg => jpeg_boundary(bytes),
    }
}

fn le_u32(bytes: &[u8], off: usize) -> Option<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
}

fn bmp_boundary(bytes: &[u8]) -> Result<usize> {
    let declared = le_u32(bytes, 2).ok_or_else(|| invalid("BMP shorter than its file header"))?;
    let end = if declared != 0 {
        declared as usize
    } else {
        // computed extent: pixel offset + padded rows
        let short = || invalid("BMP shorter than its info header");
        let offset = le_u32(bytes, 10).ok_or_else(short)? as usize;
        let width = le_u32(bytes, 18).ok_or_else(short)? as i32;
        let height = le_u32(bytes, 22).ok_or_else(short)? as i32;
        let bpp = bytes
            .get(28..30)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .ok_or_else(short)? as usize;
        let stride = crate::raster::bmp_row_stride(width.unsigned_abs() as usize, bpp);
        offset + stride * height.unsigned_abs() as usize
    };
    if end > bytes.len() {
        return Err(invalid(format!(
            "BMP declares {end} bytes but the file has {}",
            bytes.len()
        )));
    }
    if end < 14 {
        return Err(invalid(format!(
            "BMP size field {end} smaller than the header"
        )));
    }
    Ok(end)
}

fn png_boundary(bytes: &[u8]) -> Result<usize> {
    let mut pos = PNG_SIGNATURE.len();
    loop {
        let header = bytes
            .get(pos..pos + 8)
            .ok_or_else(|| invalid("PNG ends before IEND"))?;
        let len = u32::from_be_bytes(header[..4].try_into().unwrap()) as usize;
        let end = pos
            .checked_add(12)
            .and_then(|p| p.checked_add(len))
            .ok_or_else(|| invalid("PNG chunk length overflows"))?;
        if end > bytes.len() {
            return Err(invalid(format!("PNG chunk at {pos} overruns the file")));
        }
        if &header[4..8] == b"IEND" {
            return Ok(end);
        }
        pos = end;
    }
}

fn jpeg_boundary(bytes: &[u8]) -> Result<usize> {
    let no_eoi = || invalid("JPEG ends before EOI");
    let mut pos = 2;
    loop {
        if *bytes.get(pos).ok_or_else(no_eoi)? != 0xFF {
            return Err(invalid(format!("expected JPEG marker at offset {pos}")));
        }
        // fill bytes
        while bytes.get(pos + 1) == Some(&0xFF) {
            pos += 1;
        }
        let marker = *bytes.get(pos + 1).ok_or_else(no_eoi)?;
        pos += 2;
        match marker {
            0xD9 => return Ok(pos),
            0xD8 | 0xD0..=0xD7 | 0x01 => continue,
            0x00 => return Err(invalid(format!("stray 0xFF00 at offset {}", pos - 2))),
            _ => {}
        }
        let seg = bytes.get(pos..pos + 2).ok_or_else(no_eoi)?;
        let len = u16::from_be_bytes([seg[0], seg[1]]) as usize;
        if len < 2 {
            return Err(invalid(format!(
                "JPEG segment length {len} at offset {pos}"
            )));
        }
        pos += len;
        if pos > bytes.len() {
            return Err(no_eoi());
        }
        if marker == 0xDA {
            pos = skip_entropy_coded(bytes, pos).ok_or_else(no_eoi)?;
        }
    }
}

/// Scan entropy-coded data after SOS; returns the offset of the next real
/// marker, stepping over stuffed `FF 00` and restart markers.
fn skip_entropy_coded(bytes: &[u8], mut pos: usize) -> Option<usize> {
    loop {
        let ff = pos + bytes.get(pos..)?.iter().position(|&b| b == 0xFF)?;
        let mut next = ff + 1;
        while bytes.get(next) == Some(&0xFF) {
            next += 1;
        }
        match *bytes.get(next)? {
            0x00 | 0xD0..=0xD7 => pos = next + 1,
            _ => return Some(next - 1),
        }
    }
}

fn footer(len: u64) -> [u8; TRAILER_LEN] {
    let mut f = [0u8; TRAILER_LEN];
    f[..4].copy_from_slice(&TRAILER_MAGIC);
    f[4] = TRAILER_VERSION;
    f[8..].copy_from_slice(&len.to_be_bytes());
    f
}

/// Bytes already trailing the image data, if any.
pub fn trailing_len(container: &[u8]) -> Result<usize> {
    Ok(container.len() - find_payload_boundary(container)?)
}

pub fn append_payload(container: &[u8], payload: &[u8], mode: AppendMode) -> Result<Vec<u8>> {
    find_payload_boundary(container)?;
    let extra = match mode {
        AppendMode::Raw => 0,
        AppendMode::Framed => TRAILER_LEN,
    };
    let mut out = Vec::with_capacity(container.len() + payload.len() + extra);
    out.extend_from_slice(container);
    out.extend_from_slice(payload);
    if mode == AppendMode::Framed {
        let len = u64::try_from(payload.len())
            .map_err(|_| Error::InvalidParameter("payload length overflows 64 bits".into()))?;
        out.extend_from_slice(&footer(len));
    }
    Ok(out)
}

pub fn extract_payload(bytes: &[u8], mode: AppendMode) -> Result<Vec<u8>> {
    let boundary = find_payload_boundary(bytes)?;
    match mode {
        AppendMode::Raw => Ok(bytes[boundary..].to_vec()),
        AppendMode::Framed => {
            let trailing = bytes.len() - boundary;
            if trailing < TRAILER_LEN {
                return Err(Error::MissingTrailer(format!(
                    "only {trailing} bytes follow the image data"
                )));
            }
            let foot = &bytes[bytes.len() - TRAILER_LEN..];
            if foot[..4] != TRAILER_MAGIC || foot[4] != TRAILER_VERSION || foot[5..8] != [0, 0, 0] {
                return Err(Error::MissingTrailer(
                    "footer magic or version mismatch".into(),
                ));
            }
            let len = u64::from_be_bytes(foot[8..].try_into().unwrap());
            let room = (trailing - TRAILER_LEN) as u64;
            if len > room {
                return Err(Error::CorruptFrame(format!(
                    "footer declares {len} bytes, only {room} available"
                )));
            }
            let end = bytes.len() - TRAILER_LEN;
            Ok(bytes[end - len as usize..end].to_vec())
        }
    }
}
