//! Post-embedding image manipulations used to measure robustness: resizing,
//! rotation, JPEG-like compression, requantization, noise and format change.
//!
//! Every attack is deterministic. Attack specs have a compact text form used
//! by the CLI and report columns, colon-separated within an attack and
//! comma-separated in a series:
//!
//! ```text
//! resize:0.5:bilinear:roundtrip   rotate:90:roundtrip   jpeg:75
//! requantize:6   noise:4:1234   format:bmp8
//! ```

pub mod dct;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::keys::keystream_bytes;
use crate::raster::{load_image, save_image, Image, ImageFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interp {
    Nearest,
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackSpec {
    Resize {
        scale: f64,
        interp: Interp,
        roundtrip: bool,
    },
    /// Clockwise, nearest neighbour, zero fill.
    Rotate {
        degrees: f64,
        roundtrip: bool,
    },
    JpegLike {
        quality: u8,
    },
    Requantize {
        bits: u8,
    },
    /// Uniform integer noise in `[-amplitude, amplitude]`.
    Noise {
        amplitude: u8,
        seed: u64,
    },
    FormatRoundtrip {
        format: ImageFormat,
    },
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match *self {
            AttackSpec::Resize { scale, .. } if !(scale.is_finite() && scale > 0.0) => {
                bad(format!("resize scale {scale} must be positive"))
            }
            AttackSpec::Rotate { degrees, .. } if !degrees.is_finite() => {
                bad(format!("rotation {degrees} must be finite"))
            }
            AttackSpec::JpegLike { quality } if !(1..=100).contains(&quality) => {
                bad(format!("jpeg quality {quality} outside 1..=100"))
            }
            AttackSpec::Requantize { bits } if !(1..=8).contains(&bits) => {
                bad(format!("requantize bits {bits} outside 1..=8"))
            }
            _ => Ok(()),
        }
    }

    /// True for attacks that never change a pixel.
    pub fn is_lossless_roundtrip(&self) -> bool {
        matches!(self, AttackSpec::FormatRoundtrip { .. })
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackSpec::Resize {
                scale,
                interp,
                roundtrip,
            } => {
                let i = match interp {
                    Interp::Nearest => "nearest",
                    Interp::Bilinear => "bilinear",
                };
                write!(f, "resize:{scale}:{i}")?;
                if *roundtrip {
                    f.write_str(":roundtrip")?;
                }
                Ok(())
            }
            AttackSpec::Rotate { degrees, roundtrip } => {
                write!(f, "rotate:{degrees}")?;
                if *roundtrip {
                    f.write_str(":roundtrip")?;
                }
                Ok(())
            }
            AttackSpec::JpegLike { quality } => write!(f, "jpeg:{quality}"),
            AttackSpec::Requantize { bits } => write!(f, "requantize:{bits}"),
            AttackSpec::Noise { amplitude, seed } => write!(f, "noise:{amplitude}:{seed}"),
            AttackSpec::FormatRoundtrip { format } => write!(f, "format:{format}"),
        }
    }
}

fn parse_num<T: FromStr>(field: Option<&str>, what: &str, whole: &str) -> Result<T> {
    field
        .ok_or_else(|| Error::InvalidParameter(format!("{whole:?}: missing {what}")))?
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{whole:?}: bad {what}")))
}

impl FromStr for AttackSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let spec = match name {
            "resize" => {
                let scale = parse_num(parts.next(), "scale", s)?;
                let mut interp = Interp::Bilinear;
                let mut roundtrip = false;
                for p in parts.by_ref() {
                    match p {
                        "nearest" => interp = Interp::Nearest,
                        "bilinear" => interp = Interp::Bilinear,
                        "roundtrip" => roundtrip = true,
                        other => {
                            return Err(Error::InvalidParameter(format!(
                                "{s:?}: unknown resize option {other:?}"
                            )))
                        }
                    }
                }
                AttackSpec::Resize {
                    scale,
                    interp,
                    roundtrip,
                }
            }
            "rotate" => {
                let degrees = parse_num(parts.next(), "degrees", s)?;
                let roundtrip = match parts.next() {
                    None => false,
                    Some("roundtrip") => true,
                    Some(other) => {
                        return Err(Error::InvalidParameter(format!(
                            "{s:?}: unknown rotate option {other:?}"
                        )))
                    }
                };
                AttackSpec::Rotate { degrees, roundtrip }
            }
            "jpeg" => AttackSpec::JpegLike {
                quality: parse_num(parts.next(), "quality", s)?,
            },
            "requantize" => AttackSpec::Requantize {
                bits: parse_num(parts.next(), "bits", s)?,
            },
            "noise" => AttackSpec::Noise {
                amplitude: parse_num(parts.next(), "amplitude", s)?,
                seed: parse_num(parts.next(), "seed", s)?,
            },
            "format" => AttackSpec::FormatRoundtrip {
                format: parts
                    .next()
                    .ok_or_else(|| Error::InvalidParameter(format!("{s:?}: missing format")))?
                    .parse()?,
            },
            other => return Err(Error::InvalidParameter(format!("unknown attack {other:?}"))),
        };
        if parts.next().is_some() {
            return Err(Error::InvalidParameter(format!("{s:?}: too many fields")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Parse a comma-separated attack series. An empty string is an empty series.
pub fn parse_series(s: &str) -> Result<Vec<AttackSpec>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(str::parse)
        .collect()
}

pub fn apply_attack(img: &Image, spec: &AttackSpec) -> Result<Image> {
    spec.validate()?;
    match *spec {
        AttackSpec::Resize {
            scale,
            interp,
            roundtrip,
        } => {
            let dw = ((img.width() as f64 * scale).round() as usize).max(1);
            let dh = ((img.height() as f64 * scale).round() as usize).max(1);
            let small = resize(img, dw, dh, interp);
            Ok(if roundtrip {
                resize(&small, img.width(), img.height(), interp)
            } else {
                small
            })
        }
        AttackSpec::Rotate { degrees, roundtrip } => {
            let turned = rotate(img, degrees);
            Ok(if roundtrip {
                rotate(&turned, -degrees)
            } else {
                turned
            })
        }
        AttackSpec::JpegLike { quality } => Ok(jpeg_like(img, quality)),
        AttackSpec::Requantize { bits } => Ok(requantize(img, bits)),
        AttackSpec::Noise { amplitude, seed } => Ok(noise(img, amplitude, seed)),
        AttackSpec::FormatRoundtrip { format } => load_image(&save_image(img, format)?, format),
    }
}

/// Apply `specs` left to right.
pub fn attack_series(img: &Image, specs: &[AttackSpec]) -> Result<Image> {
    specs
        .iter()
        .try_fold(img.clone(), |acc, spec| apply_attack(&acc, spec))
}

fn with_pixels(w: usize, h: usize, c: u8, pixels: Vec<u8>) -> Image {
    Image::new(w, h, c, pixels).expect("attack output shape is consistent")
}

/// Center-aligned source coordinate for destination index `i`.
fn source_coord(i: usize, src: usize, dst: usize) -> f64 {
    ((i as f64 + 0.5) * src as f64 / dst as f64 - 0.5).clamp(0.0, (src - 1) as f64)
}

fn resize(img: &Image, dw: usize, dh: usize, interp: Interp) -> Image {
    let (sw, sh, c) = (img.width(), img.height(), img.channels() as usize);
    let src = img.pixels();
    let mut out = Vec::with_capacity(dw * dh * c);
    for y in 0..dh {
        let fy = source_coord(y, sh, dh);
        for x in 0..dw {
            let fx = source_coord(x, sw, dw);
            match interp {
                Interp::Nearest => {
                    let (sx, sy) = (fx.round() as usize, fy.round() as usize);
                    let at = (sy * sw + sx) * c;
                    out.extend_from_slice(&src[at..at + c]);
                }
                Interp::Bilinear => {
                    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                    let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
                    let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
                    for ch in 0..c {
                        let p = |xx: usize, yy: usize| src[(yy * sw + xx) * c + ch] as f64;
                        let top = p(x0, y0) * (1.0 - ax) + p(x1, y0) * ax;
                        let bottom = p(x0, y1) * (1.0 - ax) + p(x1, y1) * ax;
                        let v = top * (1.0 - ay) + bottom * ay;
                        out.push(v.round().clamp(0.0, 255.0) as u8);
                    }
                }
            }
        }
    }
    with_pixels(dw, dh, img.channels(), out)
}

fn rotate(img: &Image, degrees: f64) -> Image {
    let turns = degrees / 90.0;
    if (turns - turns.round()).abs() < 1e-12 {
        let q = (turns.round() as i64).rem_euclid(4);
        return (0..q).fold(img.clone(), |acc, _| quarter_turn(&acc));
    }
    let (w, h, c) = (img.width(), img.height(), img.channels() as usize);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let src = img.pixels();
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let sx = (cx + dx * cos + dy * sin).round();
            let sy = (cy - dx * sin + dy * cos).round();
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                let from = (sy as usize * w + sx as usize) * c;
                let to = (y * w + x) * c;
                out[to..to + c].copy_from_slice(&src[from..from + c]);
            }
        }
    }
    with_pixels(w, h, img.channels(), out)
}

/// 90 degrees clockwise; output is `height x width`.
fn quarter_turn(img: &Image) -> Image {
    let (w, h, c) = (img.width(), img.height(), img.channels() as usize);
    let src = img.pixels();
    let mut out = Vec::with_capacity(src.len());
    for r in 0..w {
        for col in 0..h {
            let at = ((h - 1 - col) * w + r) * c;
            out.extend_from_slice(&src[at..at + c]);
        }
    }
    with_pixels(h, w, img.channels(), out)
}

fn jpeg_like(img: &Image, quality: u8) -> Image {
    let (w, h, c) = (img.width(), img.height(), img.channels() as usize);
    let mut out = vec![0u8; img.pixels().len()];
    for ch in 0..c {
        let plane: Vec<u8> = img.pixels().iter().skip(ch).step_by(c).copied().collect();
        let q = dct::quantize_plane(&plane, w, h, quality);
        for (i, v) in q.into_iter().enumerate() {
            out[i * c + ch] = v;
        }
    }
    with_pixels(w, h, img.channels(), out)
}

/// Keep the top `bits` bits, reconstructing each level as
/// `round(level * 255 / (2^bits - 1))`.
fn requantize(img: &Image, bits: u8) -> Image {
    let levels = (1u32 << bits) - 1;
    let lut: Vec<u8> = (0..=255u32)
        .map(|p| {
            let level = p >> (8 - bits);
            ((level * 255 * 2 + levels) / (2 * levels)) as u8
        })
        .collect();
    let pixels = img.pixels().iter().map(|&p| lut[p as usize]).collect();
    with_pixels(img.width(), img.height(), img.channels(), pixels)
}

fn noise(img: &Image, amplitude: u8, seed: u64) -> Image {
    let span = 2 * amplitude as u32 + 1;
    let stream = keystream_bytes(seed, img.pixels().len() * 2);
    let pixels = img
        .pixels()
        .iter()
        .zip(stream.chunks_exact(2))
        .map(|(&p, r)| {
            let offset = (u16::from_be_bytes([r[0], r[1]]) as u32 % span) as i32 - amplitude as i32;
            (p as i32 + offset).clamp(0, 255) as u8
        })
        .collect();
    with_pixels(img.width(), img.height(), img.channels(), pixels)
}
