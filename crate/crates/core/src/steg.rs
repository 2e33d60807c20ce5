//! k-LSB substitution steganography.
//!
//! A message travels inside a 7-byte frame header:
//!
//! | bytes | content                               |
//! |-------|---------------------------------------|
//! | 0..2  | magic `0x53 0x47` ("SG")              |
//! | 2     | control = `(1 << 4) \| k`              |
//! | 3..7  | payload length, u32 big-endian        |
//! | 7..   | payload                               |
//!
//! In keyed modes the whole frame is XORed with the keystream, so a wrong key
//! almost always fails the magic check. Frame bits go out MSB-first. Slots are
//! channel bytes in row-major order (keyless) or in keyed-permutation order;
//! each slot takes `k` bits, filled from bit `k-1` down to bit 0.

use crate::error::{Error, Result};
use crate::keys::{dh_shared_seed, keyed_permutation, keystream_bytes, KeyPair};
use crate::raster::Image;

pub const FRAME_MAGIC: [u8; 2] = [0x53, 0x47];
pub const FRAME_VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 7;
pub const MAX_BITS_PER_BYTE: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyMode {
    /// No key; pure steganography.
    Nks,
    /// Shared secret key.
    Sks,
    /// Key pair plus the peer's public key.
    Pks,
}

impl KeyMode {
    pub fn label(self) -> &'static str {
        match self {
            KeyMode::Nks => "NKS",
            KeyMode::Sks => "SKS",
            KeyMode::Pks => "PKS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StegKey {
    Nks,
    Sks { secret: u64 },
    Pks { own: KeyPair, peer_public: u64 },
}

impl StegKey {
    pub fn mode(&self) -> KeyMode {
        match self {
            StegKey::Nks => KeyMode::Nks,
            StegKey::Sks { .. } => KeyMode::Sks,
            StegKey::Pks { .. } => KeyMode::Pks,
        }
    }

    /// Keystream seed for keyed modes; `None` for NKS.
    pub fn seed(&self) -> Result<Option<u64>> {
        match self {
            StegKey::Nks => Ok(None),
            StegKey::Sks { secret } => Ok(Some(*secret)),
            StegKey::Pks { own, peer_public } => dh_shared_seed(own, *peer_public).map(Some),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedParams {
    k: u8,
    key: StegKey,
}

impl EmbedParams {
    pub fn new(k: u8, key: StegKey) -> Result<Self> {
        check_k(k)?;
        Ok(EmbedParams { k, key })
    }

    pub fn k(&self) -> u8 {
        self.k
    }

    pub fn key(&self) -> &StegKey {
        &self.key
    }
}

fn check_k(k: u8) -> Result<()> {
    if (1..=MAX_BITS_PER_BYTE).contains(&k) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "k = {k} outside 1..={MAX_BITS_PER_BYTE}"
        )))
    }
}

/// Payload bytes that fit in `cover` at `k` bits per channel byte.
pub fn capacity(cover: &Image, k: u8) -> Result<usize> {
    check_k(k)?;
    let bits = cover.pixels().len() * k as usize;
    (bits / 8)
        .checked_sub(FRAME_HEADER_LEN)
        .ok_or(Error::ZeroCapacity { bits })
}

fn slot_order(n: usize, seed: Option<u64>) -> Vec<usize> {
    match seed {
        Some(s) => keyed_permutation(s, n),
        None => (0..n).collect(),
    }
}

fn build_frame(k: u8, message: &[u8]) -> Vec<u8> {
    let mut frame = Vec::with_capacity(FRAME_HEADER_LEN + message.len());
    frame.extend_from_slice(&FRAME_MAGIC);
    frame.push((FRAME_VERSION << 4) | k);
    frame.extend_from_slice(&(message.len() as u32).to_be_bytes());
    frame.extend_from_slice(message);
    frame
}

fn xor_in_place(buf: &mut [u8], keystream: &[u8]) {
    for (b, k) in buf.iter_mut().zip(keystream) {
        *b ^= k;
    }
}

/// Embedding function: hide `message` in a copy of `cover`.
pub fn embed(cover: &Image, message: &[u8], params: &EmbedParams) -> Result<Image> {
    let k = params.k;
    check_k(k)?;
    let cap = capacity(cover, k)?;
    if message.len() > cap || message.len() > u32::MAX as usize {
        return Err(Error::MessageTooLong {
            len: message.len(),
            capacity: cap,
        });
    }
    let seed = params.key.seed()?;
    let mut frame = build_frame(k, message);
    if let Some(s) = seed {
        let ks = keystream_bytes(s, frame.len());
        xor_in_place(&mut frame, &ks);
    }

    let mut stego = cover.clone();
    let pixels = stego.pixels_mut();
    let order = slot_order(pixels.len(), seed);
    let total_bits = frame.len() * 8;
    let mut bit_index = 0;
    'slots: for &slot in &order {
        for pos in (0..k).rev() {
            if bit_index == total_bits {
                break 'slots;
            }
            let bit = (frame[bit_index / 8] >> (7 - bit_index % 8)) & 1;
            pixels[slot] = (pixels[slot] & !(1 << pos)) | (bit << pos);
            bit_index += 1;
        }
    }
    Ok(stego)
}

struct SlotReader<'a> {
    pixels: &'a [u8],
    order: &'a [usize],
    k: u8,
    next_bit: usize,
}

impl SlotReader<'_> {
    fn read_bytes(&mut self, n: usize) -> Vec<u8> {
        let k = self.k as usize;
        let mut out = vec![0u8; n];
        for byte in out.iter_mut() {
            for _ in 0..8 {
                let slot = self.order[self.next_bit / k];
                let pos = k - 1 - self.next_bit % k;
                *byte = (*byte << 1) | ((self.pixels[slot] >> pos) & 1);
                self.next_bit += 1;
            }
        }
        out
    }
}

/// Extraction function: recover the message hidden by [`embed`].
pub fn extract(stego: &Image, params: &EmbedParams) -> Result<Vec<u8>> {
    let k = params.k;
    let cap = capacity(stego, k)?;
    let seed = params.key.seed()?;
    let pixels = stego.pixels();
    let order = slot_order(pixels.len(), seed);
    let mut reader = SlotReader {
        pixels,
        order: &order,
        k,
        next_bit: 0,
    };
    let mut header = reader.read_bytes(FRAME_HEADER_LEN);
    let ks_header = seed.map(|s| keystream_bytes(s, FRAME_HEADER_LEN));
    if let Some(ks) = &ks_header {
        xor_in_place(&mut header, ks);
    }
    if header[..2] != FRAME_MAGIC || header[2] != (FRAME_VERSION << 4) | k {
        return Err(Error::NoFrame);
    }
    let len = u32::from_be_bytes(header[3..7].try_into().unwrap()) as usize;
    if len > cap {
        return Err(Error::CorruptFrame(format!(
            "declared length {len} exceeds capacity {cap}"
        )));
    }
    let mut payload = reader.read_bytes(len);
    if let Some(s) = seed {
        let ks = keystream_bytes(s, FRAME_HEADER_LEN + len);
        xor_in_place(&mut payload, &ks[FRAME_HEADER_LEN..]);
    }
    Ok(payload)
}

/// Fraction of the `k` low bits of every channel byte that differ between
/// `cover` and `stego`.
pub fn altered_bit_fraction(cover: &Image, stego: &Image, k: u8) -> Result<f64> {
    check_k(k)?;
    cover.ensure_same_shape(stego)?;
    let mask = (1u8 << k) - 1;
    let differing: u64 = cover
        .pixels()
        .iter()
        .zip(stego.pixels())
        .map(|(a, b)| ((a ^ b) & mask).count_ones() as u64)
        .sum();
    Ok(differing as f64 / (cover.pixels().len() as f64 * k as f64))
}
