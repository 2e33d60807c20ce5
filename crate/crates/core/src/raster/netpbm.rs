//! Binary PGM (P5) and PPM (P6) with maxval 255.

use super::Image;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::MalformedHeader {
            format: self.format,
            reason: reason.into(),
        }
    }

    /// Skip whitespace and `#` comments running to end of line.
    fn skip_separators(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_separators();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err(format!("{what} does not fit in usize")))
    }
}

pub(super) fn decode(bytes: &[u8], magic: &[u8; 2], channels: u8) -> Result<Image> {
    let format = if channels == 1 { "PGM" } else { "PPM" };
    if bytes.len() < 2 || &bytes[..2] != magic {
        return Err(Error::MalformedHeader {
            format,
            reason: format!("missing magic {}", String::from_utf8_lossy(magic)),
        });
    }
    let mut cur = Cursor {
        bytes,
        pos: 2,
        format,
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!("{format} maxval {maxval}")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("missing whitespace after maxval")),
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels as usize))
        .ok_or_else(|| cur.err("dimensions overflow"))?;
    let data = &bytes[cur.pos..];
    if data.len() < needed {
        return Err(Error::Truncated {
            expected: needed,
            found: data.len(),
        });
    }
    Image::new(width, height, channels, data[..needed].to_vec())
}

pub(super) fn encode(img: &Image, magic: &str) -> Vec<u8> {
    let header = format!("{magic}\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}
