//! MSE, PSNR and bit-error rate.

use std::fmt;

use crate::error::{Error, Result};
use crate::raster::Image;

const PEAK_SQUARED: f64 = 255.0 * 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub mse: f64,
    /// `f64::INFINITY` when the images are identical.
    pub psnr: f64,
    pub ber: Option<f64>,
}

impl QualityReport {
    pub fn is_lossless(&self) -> bool {
        self.mse == 0.0
    }
}

/// Formats `value` with two decimals, or `inf`.
pub fn format_db(value: f64) -> String {
    if value.is_infinite() {
        "inf".to_string()
    } else {
        format!("{value:.2}")
    }
}

impl fmt::Display for QualityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mse={:.2} psnr={}", self.mse, format_db(self.psnr))?;
        if let Some(ber) = self.ber {
            write!(f, " ber={ber:.4}")?;
        }
        Ok(())
    }
}

/// PSNR from an MSE value.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (PEAK_SQUARED / mse).log10()
    }
}

/// Mean squared error over every channel byte, and the matching PSNR.
pub fn psnr(a: &Image, b: &Image) -> Result<QualityReport> {
    a.ensure_same_shape(b)?;
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    let mse = sum as f64 / a.pixels().len() as f64;
    Ok(QualityReport {
        mse,
        psnr: psnr_from_mse(mse),
        ber: None,
    })
}

/// Fraction of positions where two bit sequences (elements 0/1) differ.
pub fn ber(a: &[u8], b: &[u8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "bit sequences of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter("BER of empty sequences".into()));
    }
    let differing = a
        .iter()
        .zip(b)
        .filter(|(x, y)| (**x & 1) != (**y & 1))
        .count();
    Ok(differing as f64 / a.len() as f64)
}

/// Unpack bytes MSB-first into 0/1 values.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

/// Bit-error rate between two byte strings of equal length.
pub fn byte_ber(a: &[u8], b: &[u8]) -> Result<f64> {
    ber(&bytes_to_bits(a), &bytes_to_bits(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keys::keystream_bytes;

    #[test]
    fn identical_is_infinite() {
        let a = Image::filled(4, 4, 1, 9).unwrap();
        let r = psnr(&a, &a).unwrap();
        assert_eq!(r.mse, 0.0);
        assert!(r.psnr.is_infinite());
        assert_eq!(r.to_string(), "mse=0.00 psnr=inf");
    }

    #[test]
    fn off_by_one_everywhere() {
        let a = Image::filled(256, 256, 1, 100).unwrap();
        let b = Image::filled(256, 256, 1, 101).unwrap();
        let r = psnr(&a, &b).unwrap();
        assert_eq!(r.mse, 1.0);
        assert!((r.psnr - 48.1308).abs() < 1e-3, "{}", r.psnr);
    }

    #[test]
    fn black_vs_white() {
        let a = Image::filled(3, 3, 3, 0).unwrap();
        let b = Image::filled(3, 3, 3, 255).unwrap();
        let r = psnr(&a, &b).unwrap();
        assert_eq!(r.mse, 65025.0);
        assert_eq!(r.psnr, 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let a = Image::filled(3, 3, 1, 0).unwrap();
        let b = Image::filled(3, 3, 3, 0).unwrap();
        assert!(psnr(&a, &b).is_err());
    }

    #[test]
    fn ber_cases() {
        let x = bytes_to_bits(&keystream_bytes(3, 100));
        assert_eq!(ber(&x, &x).unwrap(), 0.0);
        let flipped: Vec<u8> = x.iter().map(|b| 1 - b).collect();
        assert_eq!(ber(&x, &flipped).unwrap(), 1.0);
        assert!(ber(&x, &x[1..]).is_err());
        assert!(ber(&[], &[]).is_err());
    }

    #[test]
    fn independent_random_sequences() {
        // P(|BER - 0.5| > 0.05) for n = 10^4 is about 2e-23 (Hoeffding)
        for seed in 0..20u64 {
            let a = bytes_to_bits(&keystream_bytes(2 * seed + 1, 1250));
            let b = bytes_to_bits(&keystream_bytes(2 * seed + 2, 1250));
            let r = ber(&a, &b).unwrap();
            assert!((0.45..=0.55).contains(&r), "{r}");
        }
    }

    #[test]
    fn bits_msb_first() {
        assert_eq!(bytes_to_bits(&[0b1000_0001]), vec![1, 0, 0, 0, 0, 0, 0, 1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn psnr_symmetric(a in proptest::collection::vec(any::<u8>(), 16), b in proptest::collection::vec(any::<u8>(), 16)) {
                let ia = Image::new(4, 4, 1, a).unwrap();
                let ib = Image::new(4, 4, 1, b).unwrap();
                prop_assert_eq!(psnr(&ia, &ib).unwrap(), psnr(&ib, &ia).unwrap());
            }

            #[test]
            fn psnr_decreases_with_nested_perturbations(base in proptest::collection::vec(0u8..200, 64), steps in 1usize..10) {
                let a = Image::new(8, 8, 1, base.clone()).unwrap();
                let mut last = f64::INFINITY;
                let mut cur = base;
                for s in 0..steps {
                    cur[s] += 50;
                    let r = psnr(&a, &Image::new(8, 8, 1, cur.clone()).unwrap()).unwrap();
                    prop_assert!(r.psnr < last);
                    last = r.psnr;
                }
            }
        }
    }
}
