//! Orthonormal 8x8 DCT-II and the JPEG-style quantization pipeline.

use std::sync::OnceLock;

/// Standard luminance quantization table (ITU-T T.81 Annex K), row-major.
pub const LUMINANCE_TABLE: [u16; 64] = [
    16, 11, 10, 16, 24, 40, 51, 61, //
    12, 12, 14, 19, 26, 58, 60, 55, //
    14, 13, 16, 24, 40, 57, 69, 56, //
    14, 17, 22, 29, 51, 87, 80, 62, //
    18, 22, 37, 56, 68, 109, 103, 77, //
    24, 35, 55, 64, 81, 104, 113, 92, //
    49, 64, 78, 87, 103, 121, 120, 101, //
    72, 92, 95, 98, 112, 100, 103, 99,
];

pub type Block = [f64; 64];

/// `basis[u][x] = c(u) * cos((2x + 1) u pi / 16)` with the orthonormal scale.
fn basis() -> &'static [[f64; 8]; 8] {
    static BASIS: OnceLock<[[f64; 8]; 8]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut b = [[0.0; 8]; 8];
        for (u, row) in b.iter_mut().enumerate() {
            let scale = if u == 0 { (1.0f64 / 8.0).sqrt() } else { 0.5 };
            for (x, v) in row.iter_mut().enumerate() {
                *v =
                    scale * ((2.0 * x as f64 + 1.0) * u as f64 * std::f64::consts::PI / 16.0).cos();
            }
        }
        b
    })
}

/// Forward 2-D DCT-II, separable rows then columns.
pub fn dct8x8(block: &Block) -> Block {
    let b = basis();
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            tmp[y * 8 + u] = (0..8).map(|x| b[u][x] * block[y * 8 + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            out[v * 8 + u] = (0..8).map(|y| b[v][y] * tmp[y * 8 + u]).sum();
        }
    }
    out
}

/// Inverse of [`dct8x8`] (DCT-III with the same scaling).
pub fn idct8x8(coeffs: &Block) -> Block {
    let b = basis();
    let mut tmp = [0.0; 64];
    for v in 0..8 {
        for x in 0..8 {
            tmp[v * 8 + x] = (0..8).map(|u| b[u][x] * coeffs[v * 8 + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            out[y * 8 + x] = (0..8).map(|v| b[v][y] * tmp[v * 8 + x]).sum();
        }
    }
    out
}

/// Luminance table scaled to `quality` in 1..=100 (libjpeg convention).
pub fn scaled_table(quality: u8) -> [u16; 64] {
    let q = quality.clamp(1, 100) as u32;
    let scale = if q < 50 { 5000 / q } else { 200 - 2 * q };
    let mut out = [0u16; 64];
    for (o, &e) in out.iter_mut().zip(&LUMINANCE_TABLE) {
        *o = ((e as u32 * scale + 50) / 100).clamp(1, 255) as u16;
    }
    out
}

/// Quantize one plane (row-major, `width x height`) block by block. Edges are
/// replicated out to a multiple of 8 and cropped afterwards.
pub(crate) fn quantize_plane(plane: &[u8], width: usize, height: usize, quality: u8) -> Vec<u8> {
    let table = scaled_table(quality);
    let pw = width.div_ceil(8) * 8;
    let ph = height.div_ceil(8) * 8;
    let sample = |x: usize, y: usize| plane[y.min(height - 1) * width + x.min(width - 1)];
    let mut out = vec![0u8; width * height];
    for by in (0..ph).step_by(8) {
        for bx in (0..pw).step_by(8) {
            let mut block = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    block[y * 8 + x] = sample(bx + x, by + y) as f64 - 128.0;
                }
            }
            let mut coeffs = dct8x8(&block);
            for (c, &q) in coeffs.iter_mut().zip(&table) {
                *c = (*c / q as f64).round() * q as f64;
            }
            let rec = idct8x8(&coeffs);
            for y in 0..8 {
                for x in 0..8 {
                    let (px, py) = (bx + x, by + y);
                    if px < width && py < height {
                        out[py * width + px] =
                            (rec[y * 8 + x] + 128.0).round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::Keystream;

    /// Direct O(n^4) definition of the 2-D DCT-II.
    fn reference_dct(block: &Block) -> Block {
        let pi = std::f64::consts::PI;
        let c = |k: usize| if k == 0 { (0.125f64).sqrt() } else { 0.5 };
        let mut out = [0.0; 64];
        for v in 0..8 {
            for u in 0..8 {
                let mut s = 0.0;
                for y in 0..8 {
                    for x in 0..8 {
                        s += block[y * 8 + x]
                            * ((2 * x + 1) as f64 * u as f64 * pi / 16.0).cos()
                            * ((2 * y + 1) as f64 * v as f64 * pi / 16.0).cos();
                    }
                }
                out[v * 8 + u] = c(u) * c(v) * s;
            }
        }
        out
    }

    fn random_block(ks: &mut Keystream) -> Block {
        let mut b = [0.0; 64];
        for v in b.iter_mut() {
            *v = (ks.next_u64() % 256) as f64 - 128.0;
        }
        b
    }

    #[test]
    fn matches_direct_definition() {
        let mut ks = Keystream::new(17);
        for _ in 0..20 {
            let b = random_block(&mut ks);
            let fast = dct8x8(&b);
            let slow = reference_dct(&b);
            for (a, r) in fast.iter().zip(&slow) {
                assert!((a - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_block_has_only_dc() {
        let c = dct8x8(&[10.0; 64]);
        assert!((c[0] - 80.0).abs() < 1e-9);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn table_scaling() {
        assert_eq!(scaled_table(50), LUMINANCE_TABLE);
        assert!(scaled_table(100).iter().all(|&e| e == 1));
        assert_eq!(scaled_table(1)[0], 255);
        // q = 75: scale 50, 16 -> floor((800 + 50) / 100) = 8
        assert_eq!(scaled_table(75)[0], 8);
    }

    #[test]
    fn odd_sized_plane_keeps_shape() {
        let plane: Vec<u8> = (0..13 * 7).map(|i| (i * 3) as u8).collect();
        let out = quantize_plane(&plane, 13, 7, 90);
        assert_eq!(out.len(), plane.len());
    }
}
