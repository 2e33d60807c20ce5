//! Visible and invisible watermarking of grayscale hosts.
//!
//! Visible marks overwrite one high bit plane inside a rectangle, so they show
//! as a ±128 pattern at plane 7. Invisible marks are serialized MSB-first,
//! each bit repeated `R` times, and written into one low bit plane at keyed
//! pixel positions; extraction majority-votes the copies.

use crate::error::{Error, Result};
use crate::keys::{keyed_permutation, scramble_point, ScrambleMap, ScrambleSpec};
use crate::metrics::bytes_to_bits;
use crate::raster::Image;

pub const DEFAULT_VISIBLE_PLANE: u8 = 7;
pub const DEFAULT_INVISIBLE_PLANE: u8 = 1;
pub const DEFAULT_REDUNDANCY: usize = 5;

/// Binary mark, one 0/1 value per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoMark {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl MonoMark {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} bits for a {width}x{height} mark",
                bits.len()
            )));
        }
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidBit(bad));
        }
        Ok(MonoMark {
            width,
            height,
            bits,
        })
    }

    /// Threshold a grayscale image at 128.
    pub fn from_image(img: &Image) -> Result<Self> {
        if !img.is_grayscale() {
            return Err(Error::Unsupported(
                "monochrome marks come from grayscale images".into(),
            ));
        }
        let bits = img.pixels().iter().map(|&p| (p >= 128) as u8).collect();
        MonoMark::new(img.width(), img.height(), bits)
    }

    /// Render as 0/255 grayscale.
    pub fn to_image(&self) -> Image {
        Image::new(
            self.width,
            self.height,
            1,
            self.bits.iter().map(|&b| b * 255).collect(),
        )
        .expect("mark shape is valid")
    }

    /// A copyright-style glyph: a ring with a "C" inside.
    pub fn glyph(size: usize) -> Self {
        let r = size as f64 / 2.0;
        let mut bits = Vec::with_capacity(size * size);
        for y in 0..size {
            for x in 0..size {
                let dx = x as f64 + 0.5 - r;
                let dy = y as f64 + 0.5 - r;
                let d = (dx * dx + dy * dy).sqrt() / r;
                let ring = (0.78..=0.95).contains(&d);
                let c = (0.32..=0.52).contains(&d) && !(dx > 0.0 && dy.abs() < 0.5 * dx);
                bits.push((ring || c) as u8);
            }
        }
        MonoMark::new(size, size, bits).expect("glyph shape is valid")
    }

    pub fn checkerboard(width: usize, height: usize, cell: usize) -> Self {
        let cell = cell.max(1);
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| ((x / cell + y / cell) % 2) as u8))
            .collect();
        MonoMark::new(width, height, bits).expect("checkerboard shape is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }
}

/// Grayscale mark, one byte per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayMark {
    width: usize,
    height: usize,
    bytes: Vec<u8>,
}

impl GrayMark {
    pub fn new(width: usize, height: usize, bytes: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || bytes.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes for a {width}x{height} mark",
                bytes.len()
            )));
        }
        Ok(GrayMark {
            width,
            height,
            bytes,
        })
    }

    pub fn from_image(img: &Image) -> Result<Self> {
        if !img.is_grayscale() {
            return Err(Error::Unsupported(
                "gray marks come from grayscale images".into(),
            ));
        }
        GrayMark::new(img.width(), img.height(), img.pixels().to_vec())
    }

    pub fn to_image(&self) -> Image {
        Image::new(self.width, self.height, 1, self.bytes.clone()).expect("mark shape is valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Where invisible-mark copies go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOrder {
    /// First entries of the keyed permutation of all host pixels.
    Permutation,
    /// Fibonacci-Lucas scrambling of the pixel grid; square hosts with an odd
    /// side only. The seed picks the iteration count.
    FiboLucas { index: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WmKey {
    seed: u64,
    redundancy: usize,
    plane: u8,
    order: SlotOrder,
}

impl WmKey {
    pub fn new(seed: u64, redundancy: usize, plane: u8) -> Result<Self> {
        if redundancy == 0 || redundancy.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "redundancy {redundancy} must be odd and >= 1"
            )));
        }
        if plane > 7 {
            return Err(Error::InvalidPlane(plane));
        }
        Ok(WmKey {
            seed,
            redundancy,
            plane,
            order: SlotOrder::Permutation,
        })
    }

    /// Default redundancy 5 at plane 1.
    pub fn with_seed(seed: u64) -> Self {
        WmKey::new(seed, DEFAULT_REDUNDANCY, DEFAULT_INVISIBLE_PLANE).expect("defaults are valid")
    }

    pub fn with_order(mut self, order: SlotOrder) -> Self {
        self.order = order;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn plane(&self) -> u8 {
        self.plane
    }

    pub fn order(&self) -> SlotOrder {
        self.order
    }
}

fn require_gray(host: &Image) -> Result<()> {
    if host.is_grayscale() {
        Ok(())
    } else {
        Err(Error::Unsupported(
            "watermark hosts must be grayscale".into(),
        ))
    }
}

fn check_rect(host: &Image, origin: (usize, usize), dims: (usize, usize)) -> Result<()> {
    let (row, col) = origin;
    let (w, h) = dims;
    if w == 0 || h == 0 || row + h > host.height() || col + w > host.width() {
        return Err(Error::OutOfBounds(format!(
            "{w}x{h} mark at row {row}, col {col} does not fit a {}x{} host",
            host.width(),
            host.height()
        )));
    }
    Ok(())
}

/// Write `mark` into bit plane `plane` of the rectangle at `origin = (row, col)`.
pub fn embed_visible(
    host: &Image,
    mark: &MonoMark,
    origin: (usize, usize),
    plane: u8,
) -> Result<Image> {
    require_gray(host)?;
    if plane > 7 {
        return Err(Error::InvalidPlane(plane));
    }
    check_rect(host, origin, (mark.width, mark.height))?;
    let mut out = host.clone();
    let mask = 1u8 << plane;
    for y in 0..mark.height {
        for x in 0..mark.width {
            let (r, c) = (origin.0 + y, origin.1 + x);
            let bit = mark.bits[y * mark.width + x];
            let p = out.get(r, c, 0);
            out.set(r, c, 0, (p & !mask) | (bit << plane));
        }
    }
    Ok(out)
}

/// Read a `dims = (width, height)` mark back from bit plane `plane`.
pub fn extract_visible(
    marked: &Image,
    origin: (usize, usize),
    dims: (usize, usize),
    plane: u8,
) -> Result<MonoMark> {
    require_gray(marked)?;
    if plane > 7 {
        return Err(Error::InvalidPlane(plane));
    }
    check_rect(marked, origin, dims)?;
    let (w, h) = dims;
    let bits = (0..h)
        .flat_map(|y| (0..w).map(move |x| (y, x)))
        .map(|(y, x)| (marked.get(origin.0 + y, origin.1 + x, 0) >> plane) & 1)
        .collect();
    MonoMark::new(w, h, bits)
}

/// Host pixel indices for the first `needed` mark-copy bits.
pub fn invisible_slots(host: &Image, key: &WmKey, needed: usize) -> Result<Vec<usize>> {
    let n = host.pixel_count();
    if needed > n {
        return Err(Error::InvalidParameter(format!(
            "{needed} mark-copy bits exceed the {n} host pixels"
        )));
    }
    match key.order {
        SlotOrder::Permutation => {
            let mut slots = keyed_permutation(key.seed, n);
            slots.truncate(needed);
            Ok(slots)
        }
        SlotOrder::FiboLucas { index } => {
            if host.width() != host.height() {
                return Err(Error::InvalidParameter(
                    "Fibonacci-Lucas placement needs a square host".into(),
                ));
            }
            let side = host.width();
            let spec = ScrambleSpec::new(ScrambleMap::FiboLucas(index), 1 + key.seed % 4096, side)?;
            (0..needed)
                .map(|j| {
                    let (x, y) = scramble_point((j % side, j / side), &spec)?;
                    Ok(y * side + x)
                })
                .collect()
        }
    }
}

fn copy_bits_needed(dims: (usize, usize), redundancy: usize) -> usize {
    dims.0 * dims.1 * 8 * redundancy
}

pub fn embed_invisible(host: &Image, mark: &GrayMark, key: &WmKey) -> Result<Image> {
    require_gray(host)?;
    let needed = copy_bits_needed((mark.width, mark.height), key.redundancy);
    if needed > host.pixel_count() {
        return Err(Error::MessageTooLong {
            len: needed,
            capacity: host.pixel_count(),
        });
    }
    let slots = invisible_slots(host, key, needed)?;
    let bits = bytes_to_bits(&mark.bytes);
    let mask = 1u8 << key.plane;
    let mut out = host.clone();
    let pixels = out.pixels_mut();
    for (i, &slot) in slots.iter().enumerate() {
        let bit = bits[i / key.redundancy];
        pixels[slot] = (pixels[slot] & !mask) | (bit << key.plane);
    }
    Ok(out)
}

/// Majority vote over consecutive groups of `redundancy` copies.
pub fn majority_vote(copies: &[u8], redundancy: usize) -> Vec<u8> {
    copies
        .chunks(redundancy)
        .map(|group| {
            let ones = group.iter().filter(|&&b| b & 1 == 1).count();
            (2 * ones > group.len()) as u8
        })
        .collect()
}

/// `dims = (width, height)` of the mark, known to the verifier.
pub fn extract_invisible(marked: &Image, key: &WmKey, dims: (usize, usize)) -> Result<GrayMark> {
    require_gray(marked)?;
    let needed = copy_bits_needed(dims, key.redundancy);
    if needed == 0 || needed > marked.pixel_count() {
        return Err(Error::InvalidParameter(format!(
            "a {}x{} mark at redundancy {} needs {needed} pixels, host has {}",
            dims.0,
            dims.1,
            key.redundancy,
            marked.pixel_count()
        )));
    }
    let slots = invisible_slots(marked, key, needed)?;
    let pixels = marked.pixels();
    let copies: Vec<u8> = slots
        .iter()
        .map(|&s| (pixels[s] >> key.plane) & 1)
        .collect();
    let bits = majority_vote(&copies, key.redundancy);
    let bytes = bits
        .chunks_exact(8)
        .map(|b| b.iter().fold(0u8, |acc, &bit| (acc << 1) | bit))
        .collect();
    GrayMark::new(dims.0, dims.1, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::keystream_bytes;
    use crate::metrics::psnr;
    use crate::raster::get_bit_plane;

    fn host(n: usize, seed: u64) -> Image {
        Image::new(n, n, 1, keystream_bytes(seed, n * n)).unwrap()
    }

    fn gray_mark(w: usize, h: usize, seed: u64) -> GrayMark {
        GrayMark::new(w, h, keystream_bytes(seed, w * h)).unwrap()
    }

    #[test]
    fn visible_roundtrip_and_positional_value() {
        let h = Image::filled(64, 64, 1, 0).unwrap();
        let m = MonoMark::glyph(32);
        let marked = embed_visible(&h, &m, (10, 20), 7).unwrap();
        assert_eq!(extract_visible(&marked, (10, 20), (32, 32), 7).unwrap(), m);
        let (y, x) = (0..32 * 32)
            .map(|i| (i / 32, i % 32))
            .find(|&(y, x)| m.bits()[y * 32 + x] == 1)
            .unwrap();
        assert_eq!(marked.get(10 + y, 20 + x, 0), 128);
    }

    #[test]
    fn visible_errors() {
        let h = Image::filled(16, 16, 1, 0).unwrap();
        let m = MonoMark::checkerboard(8, 8, 2);
        assert!(matches!(
            embed_visible(&h, &m, (10, 0), 7),
            Err(Error::OutOfBounds(_))
        ));
        let rgb = Image::filled(16, 16, 3, 0).unwrap();
        assert!(embed_visible(&rgb, &m, (0, 0), 7).is_err());
        assert!(extract_visible(&h, (0, 9), (8, 8), 7).is_err());
        assert!(embed_visible(&h, &m, (0, 0), 8).is_err());
    }

    #[test]
    fn visible_worst_case_psnr() {
        // every one of the 1024 marked pixels flips its MSB
        let h = Image::filled(256, 256, 1, 0).unwrap();
        let all_ones = MonoMark::new(32, 32, vec![1; 1024]).unwrap();
        let marked = embed_visible(&h, &all_ones, (0, 0), 7).unwrap();
        let r = psnr(&h, &marked).unwrap();
        let bound = 10.0 * (255.0f64.powi(2) * 65536.0 / (1024.0 * 128.0f64.powi(2))).log10();
        assert!((r.psnr - bound).abs() < 1e-9);
        assert!((bound - 24.048).abs() < 0.001);
    }

    #[test]
    fn visible_touches_only_its_plane() {
        let h = host(64, 3);
        let marked = embed_visible(&h, &MonoMark::glyph(32), (5, 5), 7).unwrap();
        for q in 0..7 {
            assert_eq!(
                get_bit_plane(&marked, q).unwrap(),
                get_bit_plane(&h, q).unwrap()
            );
        }
    }

    #[test]
    fn wm_key_validation() {
        assert!(WmKey::new(1, 4, 1).is_err());
        assert!(WmKey::new(1, 0, 1).is_err());
        assert!(WmKey::new(1, 3, 8).is_err());
        let k = WmKey::with_seed(9);
        assert_eq!((k.redundancy(), k.plane()), (5, 1));
    }

    #[test]
    fn invisible_roundtrip_and_psnr() {
        let h = host(256, 11);
        let m = gray_mark(20, 20, 12);
        let key = WmKey::with_seed(99);
        let marked = embed_invisible(&h, &m, &key).unwrap();
        assert_eq!(extract_invisible(&marked, &key, (20, 20)).unwrap(), m);
        // at most 16000 pixels move by 2
        let floor = 10.0 * (255.0f64.powi(2) / (16000.0 / 65536.0 * 4.0)).log10();
        assert!(psnr(&h, &marked).unwrap().psnr >= floor);
        for q in (0..8).filter(|&q| q != 1) {
            assert_eq!(
                get_bit_plane(&marked, q).unwrap(),
                get_bit_plane(&h, q).unwrap()
            );
        }
    }

    #[test]
    fn invisible_capacity_and_dims() {
        let h = host(16, 1);
        let m = gray_mark(8, 8, 2);
        assert!(matches!(
            embed_invisible(&h, &m, &WmKey::with_seed(1)),
            Err(Error::MessageTooLong { .. })
        ));
        assert!(extract_invisible(&h, &WmKey::with_seed(1), (8, 8)).is_err());
    }

    #[test]
    fn fibolucas_order_roundtrip() {
        let h = host(101, 5);
        let m = gray_mark(10, 10, 6);
        let key = WmKey::with_seed(42).with_order(SlotOrder::FiboLucas { index: 2 });
        let marked = embed_invisible(&h, &m, &key).unwrap();
        assert_eq!(extract_invisible(&marked, &key, (10, 10)).unwrap(), m);
        let slots = invisible_slots(&h, &key, 101 * 101).unwrap();
        let mut sorted = slots.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), slots.len());
        let even = host(64, 1);
        assert!(invisible_slots(&even, &key, 10).is_err());
    }

    #[test]
    fn majority_vote_basic() {
        assert_eq!(majority_vote(&[1, 1, 0, 0, 0, 1], 3), vec![1, 0]);
        assert_eq!(majority_vote(&[1], 1), vec![1]);
    }

    #[test]
    fn seeds_share_few_slots() {
        let h = Image::filled(256, 256, 1, 0).unwrap();
        let a = invisible_slots(&h, &WmKey::with_seed(1), 16000).unwrap();
        let b = invisible_slots(&h, &WmKey::with_seed(2), 16000).unwrap();
        let shared = a.iter().zip(&b).filter(|(x, y)| x == y).count();
        assert!((shared as f64) < 0.01 * 16000.0, "{shared}");
    }

    #[test]
    fn mono_mark_image_roundtrip() {
        let m = MonoMark::glyph(16);
        assert_eq!(MonoMark::from_image(&m.to_image()).unwrap(), m);
        assert!(m.bits().contains(&0) && m.bits().contains(&1));
    }
}
