//! Uncompressed BMP: 8-bit grayscale-paletted and 24-bit BGR.

use super::Image;
use crate::error::{Error, Result};

/// File header (14) + BITMAPINFOHEADER (40).
pub const BMP_HEADER_LEN: usize = 54;
/// Header plus the 256-entry palette of an 8-bit file.
pub const BMP8_HEADER_LEN: usize = BMP_HEADER_LEN + 1024;

const PIXELS_PER_METER: u32 = 2835;

/// Bytes per stored row, padded to a 4-byte boundary.
pub fn bmp_row_stride(width: usize, bits_per_pixel: usize) -> usize {
    (width * bits_per_pixel).div_ceil(32) * 4
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        format: "BMP",
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], off: usize) -> u16 {
    u16::from_le_bytes([b[off], b[off + 1]])
}

fn u32_at(b: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

pub(super) fn decode(bytes: &[u8], expected_bpp: u16) -> Result<Image> {
    if bytes.len() < BMP_HEADER_LEN {
        return Err(malformed("shorter than 54-byte header"));
    }
    if &bytes[..2] != b"BM" {
        return Err(malformed("missing BM signature"));
    }
    let data_offset = u32_at(bytes, 10) as usize;
    let info_len = u32_at(bytes, 14) as usize;
    if info_len < 40 {
        return Err(Error::Unsupported(format!(
            "BMP info header of {info_len} bytes"
        )));
    }
    let width = u32_at(bytes, 18) as i32;
    let raw_height = u32_at(bytes, 22) as i32;
    let bpp = u16_at(bytes, 28);
    let compression = u32_at(bytes, 30);
    if compression != 0 {
        return Err(Error::Unsupported(format!(
            "compressed BMP (method {compression})"
        )));
    }
    if bpp != expected_bpp {
        return Err(Error::Unsupported(format!(
            "BMP with {bpp} bits per pixel, expected {expected_bpp}"
        )));
    }
    if width <= 0 || raw_height == 0 {
        return Err(malformed(format!("bad dimensions {width}x{raw_height}")));
    }
    let width = width as usize;
    let top_down = raw_height < 0;
    let height = raw_height.unsigned_abs() as usize;

    let palette = if bpp == 8 {
        let declared = u32_at(bytes, 46) as usize;
        let entries = if declared == 0 {
            256
        } else {
            declared.min(256)
        };
        let start = 14 + info_len;
        let end = start + entries * 4;
        if end > bytes.len() || end > data_offset {
            return Err(malformed("palette overruns pixel data"));
        }
        let mut table = [0u8; 256];
        for (i, entry) in bytes[start..end].chunks_exact(4).enumerate() {
            let (b, g, r) = (entry[0], entry[1], entry[2]);
            if r != g || g != b {
                return Err(Error::Unsupported(
                    "8-bit BMP with a non-gray palette".into(),
                ));
            }
            table[i] = r;
        }
        Some((table, entries))
    } else {
        None
    };

    let stride = bmp_row_stride(width, bpp as usize);
    let needed = stride * height;
    let available = bytes.len().saturating_sub(data_offset);
    if data_offset > bytes.len() || available < needed {
        return Err(Error::Truncated {
            expected: needed,
            found: available,
        });
    }
    let data = &bytes[data_offset..data_offset + needed];
    let channels: u8 = if bpp == 8 { 1 } else { 3 };
    let mut pixels = Vec::with_capacity(width * height * channels as usize);
    for row in 0..height {
        let stored = if top_down { row } else { height - 1 - row };
        let line = &data[stored * stride..stored * stride + stride];
        match &palette {
            Some((table, entries)) => {
                for &idx in &line[..width] {
                    if idx as usize >= *entries {
                        return Err(malformed(format!("palette index {idx} out of range")));
                    }
                    pixels.push(table[idx as usize]);
                }
            }
            None => {
                for bgr in line[..width * 3].chunks_exact(3) {
                    pixels.extend([bgr[2], bgr[1], bgr[0]]);
                }
            }
        }
    }
    Image::new(width, height, channels, pixels)
}

fn write_headers(out: &mut Vec<u8>, img: &Image, bpp: u16, data_offset: usize, palette_len: u32) {
    let stride = bmp_row_stride(img.width(), bpp as usize);
    let image_size = stride * img.height();
    let file_size = data_offset + image_size;
    out.extend_from_slice(b"BM");
    out.extend_from_slice(&(file_size as u32).to_le_bytes());
    out.extend_from_slice(&[0; 4]);
    out.extend_from_slice(&(data_offset as u32).to_le_bytes());
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(&(img.width() as i32).to_le_bytes());
    out.extend_from_slice(&(img.height() as i32).to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&bpp.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&(image_size as u32).to_le_bytes());
    out.extend_from_slice(&PIXELS_PER_METER.to_le_bytes());
    out.extend_from_slice(&PIXELS_PER_METER.to_le_bytes());
    out.extend_from_slice(&palette_len.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
}

pub(super) fn encode_gray8(img: &Image) -> Vec<u8> {
    let stride = bmp_row_stride(img.width(), 8);
    let mut out = Vec::with_capacity(BMP8_HEADER_LEN + stride * img.height());
    write_headers(&mut out, img, 8, BMP8_HEADER_LEN, 256);
    for i in 0..=255u8 {
        out.extend_from_slice(&[i, i, i, 0]);
    }
    let pad = stride - img.width();
    for row in img.pixels().chunks_exact(img.width()).rev() {
        out.extend_from_slice(row);
        out.extend(std::iter::repeat_n(0, pad));
    }
    out
}

pub(super) fn encode_rgb24(img: &Image) -> Vec<u8> {
    let stride = bmp_row_stride(img.width(), 24);
    let mut out = Vec::with_capacity(BMP_HEADER_LEN + stride * img.height());
    write_headers(&mut out, img, 24, BMP_HEADER_LEN, 0);
    let pad = stride - img.width() * 3;
    for row in img.pixels().chunks_exact(img.width() * 3).rev() {
        for rgb in row.chunks_exact(3) {
            out.extend_from_slice(&[rgb[2], rgb[1], rgb[0]]);
        }
        out.extend(std::iter::repeat_n(0, pad));
    }
    out
}
