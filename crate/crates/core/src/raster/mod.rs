//! 8-bit raster images, bit-plane slicing and the PGM/PPM/BMP codecs.
//!
//! Pixels are stored row-major with channels interleaved, so channel byte `i`
//! of pixel `(row, col)` lives at `(row * width + col) * channels + i`.
//! Monochrome data is carried as grayscale `{0, 255}` at I/O boundaries.

mod bmp;
mod netpbm;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub use bmp::{bmp_row_stride, BMP8_HEADER_LEN, BMP_HEADER_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    channels: u8,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: u8, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidImage(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels as usize))
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "pixel buffer holds {} bytes, {width}x{height}x{channels} needs {expected}",
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// A constant image.
    pub fn filled(width: usize, height: usize, channels: u8, value: u8) -> Result<Self> {
        let n = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels as usize))
            .ok_or_else(|| Error::InvalidImage("dimensions overflow".into()))?;
        Image::new(width, height, channels, vec![value; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    /// Number of pixels (not channel bytes).
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn is_grayscale(&self) -> bool {
        self.channels == 1
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Channel byte at `(row, col, channel)`.
    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.pixels[(row * self.width + col) * self.channels as usize + channel]
    }

    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: u8) {
        let c = self.channels as usize;
        self.pixels[(row * self.width + col) * c + channel] = value;
    }
}

/// One bit plane of an [`Image`]; same layout as the source pixels with every
/// element 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    width: usize,
    height: usize,
    channels: u8,
    plane_index: u8,
    bits: Vec<u8>,
}

impl BitPlane {
    pub fn new(
        width: usize,
        height: usize,
        channels: u8,
        plane_index: u8,
        bits: Vec<u8>,
    ) -> Result<Self> {
        check_plane(plane_index)?;
        if bits.len() != width * height * channels as usize {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for a {width}x{height}x{channels} plane",
                bits.len()
            )));
        }
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(bad));
        }
        Ok(BitPlane {
            width,
            height,
            channels,
            plane_index,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn plane_index(&self) -> u8 {
        self.plane_index
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Render the plane as an image with 0 → 0 and 1 → 255.
    pub fn to_image(&self) -> Image {
        let pixels = self.bits.iter().map(|&b| b * 255).collect();
        Image::new(self.width, self.height, self.channels, pixels).expect("plane shape is valid")
    }
}

fn check_plane(plane_index: u8) -> Result<()> {
    if plane_index > 7 {
        Err(Error::InvalidPlane(plane_index))
    } else {
        Ok(())
    }
}

pub fn get_bit_plane(img: &Image, plane_index: u8) -> Result<BitPlane> {
    check_plane(plane_index)?;
    let bits = img.pixels.iter().map(|&p| (p >> plane_index) & 1).collect();
    Ok(BitPlane {
        width: img.width,
        height: img.height,
        channels: img.channels,
        plane_index,
        bits,
    })
}

/// Replace bit plane `plane_index` of `img` with `plane`. Every other plane is
/// left as it was.
pub fn set_bit_plane(img: &Image, plane_index: u8, plane: &BitPlane) -> Result<Image> {
    check_plane(plane_index)?;
    if plane.width != img.width || plane.height != img.height || plane.channels != img.channels {
        return Err(Error::ShapeMismatch(format!(
            "plane is {}x{}x{}, image is {}x{}x{}",
            plane.width, plane.height, plane.channels, img.width, img.height, img.channels
        )));
    }
    let mask = 1u8 << plane_index;
    let mut out = img.clone();
    for (p, &b) in out.pixels.iter_mut().zip(&plane.bits) {
        if b > 1 {
            return Err(Error::InvalidBit(b));
        }
        *p = (*p & !mask) | (b << plane_index);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ImageFormat {
    PgmP5,
    PpmP6,
    Bmp8Gray,
    Bmp24,
}

impl ImageFormat {
    pub fn required_channels(self) -> u8 {
        match self {
            ImageFormat::PgmP5 | ImageFormat::Bmp8Gray => 1,
            ImageFormat::PpmP6 | ImageFormat::Bmp24 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImageFormat::PgmP5 => "pgm",
            ImageFormat::PpmP6 => "ppm",
            ImageFormat::Bmp8Gray => "bmp8",
            ImageFormat::Bmp24 => "bmp24",
        }
    }

    /// Guess the format of an encoded file from its leading bytes.
    pub fn sniff(bytes: &[u8]) -> Result<Self> {
        match bytes {
            [b'P', b'5', ..] => Ok(ImageFormat::PgmP5),
            [b'P', b'6', ..] => Ok(ImageFormat::PpmP6),
            [b'B', b'M', ..] => match bytes.get(28..30) {
                Some([8, 0]) => Ok(ImageFormat::Bmp8Gray),
                Some([24, 0]) => Ok(ImageFormat::Bmp24),
                Some(bpp) => Err(Error::Unsupported(format!(
                    "BMP with {} bits per pixel",
                    u16::from_le_bytes([bpp[0], bpp[1]])
                ))),
                None => Err(Error::MalformedHeader {
                    format: "BMP",
                    reason: "file shorter than the info header".into(),
                }),
            },
            _ => Err(Error::Unsupported("unknown raster signature".into())),
        }
    }

    /// The natural format for a file extension and channel count.
    pub fn for_extension(ext: &str, channels: u8) -> Option<Self> {
        match ext.to_ascii_lowercase().as_str() {
            "pgm" => Some(ImageFormat::PgmP5),
            "ppm" => Some(ImageFormat::PpmP6),
            "bmp" if channels == 1 => Some(ImageFormat::Bmp8Gray),
            "bmp" => Some(ImageFormat::Bmp24),
            _ => None,
        }
    }
}

impl fmt::Display for ImageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pgm" | "p5" => Ok(ImageFormat::PgmP5),
            "ppm" | "p6" => Ok(ImageFormat::PpmP6),
            "bmp8" => Ok(ImageFormat::Bmp8Gray),
            "bmp24" => Ok(ImageFormat::Bmp24),
            other => Err(Error::InvalidParameter(format!(
                "unknown image format {other:?} (expected pgm, ppm, bmp8 or bmp24)"
            ))),
        }
    }
}

pub fn load_image(bytes: &[u8], format: ImageFormat) -> Result<Image> {
    match format {
        ImageFormat::PgmP5 => netpbm::decode(bytes, b"P5", 1),
        ImageFormat::PpmP6 => netpbm::decode(bytes, b"P6", 3),
        ImageFormat::Bmp8Gray => bmp::decode(bytes, 8),
        ImageFormat::Bmp24 => bmp::decode(bytes, 24),
    }
}

pub fn save_image(img: &Image, format: ImageFormat) -> Result<Vec<u8>> {
    let expected = format.required_channels();
    if img.channels != expected {
        return Err(Error::ChannelMismatch {
            format: format.name(),
            expected,
            found: img.channels,
        });
    }
    Ok(match format {
        ImageFormat::PgmP5 => netpbm::encode(img, "P5"),
        ImageFormat::PpmP6 => netpbm::encode(img, "P6"),
        ImageFormat::Bmp8Gray => bmp::encode_gray8(img),
        ImageFormat::Bmp24 => bmp::encode_rgb24(img),
    })
}
