//! Key machinery: an xorshift64* keystream, Fisher-Yates keyed permutations,
//! Arnold and Fibonacci-Lucas coordinate scrambling, and a toy Diffie-Hellman
//! exchange.
//!
//! None of this is cryptographically secure. The keystream is a plain PRNG and
//! the exchange runs in a 61-bit group; both exist to make the secret-key and
//! public-key hiding modes deterministic and testable.

use crate::error::{Error, Result};
use crate::raster::Image;

/// Replacement for a zero seed; xorshift has an all-zero fixed point.
pub const ZERO_SEED_REPLACEMENT: u64 = 0x9E37_79B9_7F4A_7C15;
const XORSHIFT_MULTIPLIER: u64 = 0x2545_F491_4F6C_DD1D;

/// xorshift64* generator state. Never zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Keystream {
    state: u64,
}

impl Keystream {
    pub fn new(seed: u64) -> Self {
        let state = if seed == 0 {
            ZERO_SEED_REPLACEMENT
        } else {
            seed
        };
        Keystream { state }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut s = self.state;
        s ^= s >> 12;
        s ^= s << 25;
        s ^= s >> 27;
        self.state = s;
        s.wrapping_mul(XORSHIFT_MULTIPLIER)
    }

    /// Fill `buf` with big-endian output words, truncating the last one.
    pub fn fill_bytes(&mut self, buf: &mut [u8]) {
        for chunk in buf.chunks_mut(8) {
            let word = self.next_u64().to_be_bytes();
            chunk.copy_from_slice(&word[..chunk.len()]);
        }
    }
}

pub fn keystream_bytes(seed: u64, n: usize) -> Vec<u8> {
    let mut out = vec![0; n];
    Keystream::new(seed).fill_bytes(&mut out);
    out
}

/// Fisher-Yates shuffle of `0..n` driven by the keystream. Index `i` (from
/// `n-1` down to 1) swaps with `next_u64() % (i + 1)`; the modulo bias is
/// below 2^-50 for `n < 2^13`.
pub fn keyed_permutation(seed: u64, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut ks = Keystream::new(seed);
    for i in (1..n).rev() {
        let j = (ks.next_u64() % (i as u64 + 1)) as usize;
        perm.swap(i, j);
    }
    perm
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScrambleMap {
    Arnold,
    /// Fibonacci-Lucas map with index `i >= 1`.
    FiboLucas(u32),
}

/// A validated coordinate scrambling map on the `side x side` grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScrambleSpec {
    map: ScrambleMap,
    iterations: u64,
    side: u64,
    forward: [[u64; 2]; 2],
    inverse: [[u64; 2]; 2],
}

type Mat = [[u64; 2]; 2];

fn mat_mul(a: &Mat, b: &Mat, n: u64) -> Mat {
    let m = |x: u64, y: u64| ((x as u128 * y as u128) % n as u128) as u64;
    let mut out = [[0; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = (m(a[r][0], b[0][c]) + m(a[r][1], b[1][c])) % n;
        }
    }
    out
}

fn mat_pow(base: &Mat, mut exp: u64, n: u64) -> Mat {
    let mut acc = [[1 % n, 0], [0, 1 % n]];
    let mut b = *base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mat_mul(&acc, &b, n);
        }
        b = mat_mul(&b, &b, n);
        exp >>= 1;
    }
    acc
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mod_inverse(a: u64, n: u64) -> Option<u64> {
    let (mut old_r, mut r) = (a as i128, n as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    (old_r == 1).then(|| old_s.rem_euclid(n as i128) as u64)
}

/// `(F_i mod n, F_{i+1} mod n)` with F_1 = F_2 = 1.
fn fibonacci_pair(i: u32, n: u64) -> (u64, u64) {
    let (mut a, mut b) = (1 % n, 1 % n);
    for _ in 1..i {
        (a, b) = (b, (a + b) % n);
    }
    (a, b)
}

/// `(L_i mod n, L_{i+1} mod n)` with L_1 = 1, L_2 = 3.
fn lucas_pair(i: u32, n: u64) -> (u64, u64) {
    let (mut a, mut b) = (1 % n, 3 % n);
    for _ in 1..i {
        (a, b) = (b, (a + b) % n);
    }
    (a, b)
}

impl ScrambleSpec {
    pub fn new(map: ScrambleMap, iterations: u64, side: usize) -> Result<Self> {
        if iterations < 1 {
            return Err(Error::InvalidParameter(
                "scramble iterations must be >= 1".into(),
            ));
        }
        if side < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid side {side} must be >= 2"
            )));
        }
        let n = side as u64;
        let forward = match map {
            ScrambleMap::Arnold => [[1, 1], [1, 2 % n]],
            ScrambleMap::FiboLucas(0) => {
                return Err(Error::InvalidParameter(
                    "Fibonacci-Lucas index must be >= 1".into(),
                ))
            }
            ScrambleMap::FiboLucas(i) => {
                let (f0, f1) = fibonacci_pair(i, n);
                let (l0, l1) = lucas_pair(i, n);
                [[f0, f1], [l0, l1]]
            }
        };
        let det = ((forward[0][0] as u128 * forward[1][1] as u128
            + (n - forward[0][1]) as u128 * forward[1][0] as u128)
            % n as u128) as u64;
        if gcd(det, n) != 1 {
            return Err(Error::InvalidParameter(format!(
                "{map:?} is not a bijection on a {side}x{side} grid (determinant {det} shares a factor with {side})"
            )));
        }
        let det_inv = mod_inverse(det, n).expect("determinant is a unit");
        let scale = |v: u64| ((v as u128 * det_inv as u128) % n as u128) as u64;
        let neg = |v: u64| (n - v % n) % n;
        let adjugate = [
            [forward[1][1], neg(forward[0][1])],
            [neg(forward[1][0]), forward[0][0]],
        ];
        let step_inverse = [
            [scale(adjugate[0][0]), scale(adjugate[0][1])],
            [scale(adjugate[1][0]), scale(adjugate[1][1])],
        ];
        Ok(ScrambleSpec {
            map,
            iterations,
            side: n,
            forward: mat_pow(&forward, iterations, n),
            inverse: mat_pow(&step_inverse, iterations, n),
        })
    }

    pub fn map(&self) -> ScrambleMap {
        self.map
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn side(&self) -> usize {
        self.side as usize
    }

    fn apply(&self, m: &Mat, (x, y): (usize, usize)) -> Result<(usize, usize)> {
        let n = self.side;
        if x as u64 >= n || y as u64 >= n {
            return Err(Error::OutOfBounds(format!(
                "point ({x},{y}) outside the {n}x{n} grid"
            )));
        }
        let (x, y) = (x as u128, y as u128);
        let n128 = n as u128;
        let nx = (m[0][0] as u128 * x + m[0][1] as u128 * y) % n128;
        let ny = (m[1][0] as u128 * x + m[1][1] as u128 * y) % n128;
        Ok((nx as usize, ny as usize))
    }
}

/// Apply the map `iterations` times to `pt = (x, y)`.
pub fn scramble_point(pt: (usize, usize), spec: &ScrambleSpec) -> Result<(usize, usize)> {
    spec.apply(&spec.forward, pt)
}

/// Exact inverse of [`scramble_point`].
pub fn unscramble_point(pt: (usize, usize), spec: &ScrambleSpec) -> Result<(usize, usize)> {
    spec.apply(&spec.inverse, pt)
}

fn permute_image(img: &Image, spec: &ScrambleSpec, inverse: bool) -> Result<Image> {
    let n = spec.side();
    if img.width() != img.height() {
        return Err(Error::InvalidParameter(format!(
            "scrambling needs a square image, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    if img.width() != n {
        return Err(Error::InvalidParameter(format!(
            "spec is for side {n}, image side is {}",
            img.width()
        )));
    }
    let c = img.channels() as usize;
    let src = img.pixels();
    let mut out = vec![0u8; src.len()];
    for y in 0..n {
        for x in 0..n {
            let (tx, ty) = if inverse {
                unscramble_point((x, y), spec)?
            } else {
                scramble_point((x, y), spec)?
            };
            let from = (y * n + x) * c;
            let to = (ty * n + tx) * c;
            out[to..to + c].copy_from_slice(&src[from..from + c]);
        }
    }
    Image::new(n, n, img.channels(), out)
}

/// Output pixel at `scramble_point(p)` takes the input pixel at `p`. Points
/// are `(x, y) = (column, row)`.
pub fn scramble_image(img: &Image, spec: &ScrambleSpec) -> Result<Image> {
    permute_image(img, spec, false)
}

pub fn unscramble_image(img: &Image, spec: &ScrambleSpec) -> Result<Image> {
    permute_image(img, spec, true)
}

/// Toy group modulus, the Mersenne prime 2^61 - 1.
pub const DH_MODULUS: u64 = (1 << 61) - 1;
pub const DH_GENERATOR: u64 = 3;

pub(crate) fn pow_mod(base: u64, mut exp: u64, modulus: u64) -> u64 {
    let m = modulus as u128;
    let mut acc: u128 = 1 % m;
    let mut b = base as u128 % m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b % m;
        }
        b = b * b % m;
        exp >>= 1;
    }
    acc as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyPair {
    private: u64,
    public: u64,
}

impl KeyPair {
    pub fn from_private(private: u64) -> Result<Self> {
        if !(2..=DH_MODULUS - 2).contains(&private) {
            return Err(Error::InvalidParameter(format!(
                "private key {private} outside [2, p-2]"
            )));
        }
        Ok(KeyPair {
            private,
            public: pow_mod(DH_GENERATOR, private, DH_MODULUS),
        })
    }

    /// Derive a key pair deterministically from a seed.
    pub fn generate(seed: u64) -> Self {
        let private = 2 + Keystream::new(seed).next_u64() % (DH_MODULUS - 3);
        KeyPair::from_private(private).expect("private key in range")
    }

    pub fn private(&self) -> u64 {
        self.private
    }

    pub fn public(&self) -> u64 {
        self.public
    }
}

/// `peer_public ^ own.private mod p`. Both sides of an exchange derive the
/// same value.
pub fn dh_shared_seed(own: &KeyPair, peer_public: u64) -> Result<u64> {
    if !(1..DH_MODULUS).contains(&peer_public) {
        return Err(Error::InvalidParameter(format!(
            "peer public key {peer_public} outside [1, p-1]"
        )));
    }
    Ok(pow_mod(peer_public, own.private, DH_MODULUS))
}
