//! Benchmark runner for the comparison matrix.
//!
//! Every technique is run on every cover. A row records capacity, PSNR after
//! embedding, BER after each attack, wrong-key rejection and embed time.
//! Grades come from the threshold table in `config/grades.toml`.
//!
//! BER conventions: steganography rows compare payload bits, watermark rows
//! compare mark bits, and a failed extraction counts as BER 1.0.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Deserialize;

use crate::attacks::{apply_attack, AttackSpec};
use crate::container::{append_payload, extract_payload, AppendMode};
use crate::error::{Error, Result};
use crate::keys::{keystream_bytes, KeyPair, Keystream};
use crate::metrics::{byte_ber, format_db, psnr};
use crate::raster::{get_bit_plane, load_image, save_image, Image, ImageFormat};
use crate::steg::{self, EmbedParams, KeyMode, StegKey};
use crate::watermark::{
    embed_invisible, embed_visible, extract_invisible, extract_visible, GrayMark, MonoMark, WmKey,
    DEFAULT_VISIBLE_PLANE,
};

pub const GRADES_TOML: &str = include_str!("../config/grades.toml");
pub const DEFAULT_BENCH_TOML: &str = include_str!("../config/bench_default.toml");
pub const CSV_SCHEMA: &str = "# schema=1";

/// Standard visible mark side.
pub const VWM_SIDE: usize = 32;
/// Standard invisible mark side.
pub const IVWM_SIDE: usize = 20;
/// Wrong-seed watermark extractions with at least this BER count as rejected.
const IVWM_REJECT_BER: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Grade {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
    NotApplicable,
    NotImplemented,
}

impl Grade {
    pub fn label(self) -> &'static str {
        match self {
            Grade::VeryLow => "Very Low",
            Grade::Low => "Low",
            Grade::Medium => "Medium",
            Grade::High => "High",
            Grade::VeryHigh => "Very High",
            Grade::NotApplicable => "N/A",
            Grade::NotImplemented => "not implemented",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Lower bounds, higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Ladder {
    pub very_high: f64,
    pub high: f64,
    pub medium: f64,
    pub low: f64,
}

impl Ladder {
    fn grade(&self, value: f64) -> Grade {
        if value >= self.very_high {
            Grade::VeryHigh
        } else if value >= self.high {
            Grade::High
        } else if value >= self.medium {
            Grade::Medium
        } else if value >= self.low {
            Grade::Low
        } else {
            Grade::VeryLow
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct RobustnessThresholds {
    pub lossless_very_low: f64,
    pub very_high: f64,
    pub high: f64,
    pub medium: f64,
    pub exclude_jpeg_below: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct SecrecyThresholds {
    pub very_high_rejection: f64,
    pub very_high_key_bits: u32,
    pub high_rejection: f64,
    pub high_key_bits: u32,
    pub medium_rejection: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct GradeTable {
    pub capacity: Ladder,
    pub imperceptibility: Ladder,
    pub robustness: RobustnessThresholds,
    pub secrecy: SecrecyThresholds,
}

impl GradeTable {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// The shipped table.
    pub fn standard() -> Self {
        GradeTable::from_toml_str(GRADES_TOML).expect("shipped grade table parses")
    }

    pub fn grade_capacity(&self, capacity_bytes: usize, pixels: usize) -> Grade {
        self.capacity
            .grade(capacity_bytes as f64 * 8.0 / pixels as f64)
    }

    pub fn grade_imperceptibility(&self, psnr_db: f64) -> Grade {
        self.imperceptibility.grade(psnr_db)
    }

    /// Whether an attack counts toward the robustness grade.
    pub fn is_graded_attack(&self, spec: &AttackSpec) -> bool {
        !matches!(spec, AttackSpec::JpegLike { quality } if *quality < self.robustness.exclude_jpeg_below)
    }

    /// Mean BER over the attacks that count toward robustness.
    pub fn graded_mean(&self, battery: &[AttackSpec], bers: &[f64]) -> Option<f64> {
        let graded: Vec<f64> = battery
            .iter()
            .zip(bers)
            .filter(|(s, _)| self.is_graded_attack(s))
            .map(|(_, &b)| b)
            .collect();
        (!graded.is_empty()).then(|| graded.iter().sum::<f64>() / graded.len() as f64)
    }

    pub fn grade_robustness(&self, battery: &[AttackSpec], bers: &[f64]) -> Grade {
        let r = &self.robustness;
        let lossless = battery
            .iter()
            .position(AttackSpec::is_lossless_roundtrip)
            .map(|i| bers[i]);
        if lossless.is_some_and(|b| b > r.lossless_very_low) {
            return Grade::VeryLow;
        }
        let Some(mean) = self.graded_mean(battery, bers) else {
            return Grade::NotApplicable;
        };
        if mean <= r.very_high {
            Grade::VeryHigh
        } else if mean <= r.high {
            Grade::High
        } else if mean <= r.medium {
            Grade::Medium
        } else {
            Grade::Low
        }
    }

    pub fn grade_secrecy(&self, key: &KeyProfile, rejection: Option<f64>) -> Grade {
        let s = &self.secrecy;
        match (key.key_bits, rejection) {
            (0, _) | (_, None) => Grade::Low,
            (bits, Some(rate)) => {
                if rate >= s.very_high_rejection && bits >= s.very_high_key_bits && key.encrypted {
                    Grade::VeryHigh
                } else if rate >= s.high_rejection && bits >= s.high_key_bits {
                    Grade::High
                } else if rate >= s.medium_rejection {
                    Grade::Medium
                } else {
                    Grade::Low
                }
            }
        }
    }
}

/// Key properties of a technique that feed the secrecy grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyProfile {
    /// Size of the effective key space in bits; 0 when there is no key.
    pub key_bits: u32,
    /// Whether the hidden bits are encrypted, not just placed by key.
    pub encrypted: bool,
    pub management: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Technique {
    AfterEof,
    Lsb { mode: KeyMode, k: u8 },
    Tds,
    Vwm,
    Ivwm,
}

impl Technique {
    pub fn key_profile(&self) -> KeyProfile {
        match self {
            Technique::AfterEof
            | Technique::Lsb {
                mode: KeyMode::Nks, ..
            } => KeyProfile {
                key_bits: 0,
                encrypted: false,
                management: "not required",
            },
            Technique::Lsb {
                mode: KeyMode::Sks, ..
            } => KeyProfile {
                key_bits: 64,
                encrypted: true,
                management: "shared secret",
            },
            // shared seeds live in Z_p with p = 2^61 - 1
            Technique::Lsb {
                mode: KeyMode::Pks, ..
            } => KeyProfile {
                key_bits: 61,
                encrypted: true,
                management: "public/private pair",
            },
            Technique::Ivwm => KeyProfile {
                key_bits: 64,
                encrypted: false,
                management: "placement seed",
            },
            Technique::Vwm | Technique::Tds => KeyProfile {
                key_bits: 0,
                encrypted: false,
                management: "n/a",
            },
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Technique::AfterEof => f.write_str("AfterEOF"),
            Technique::Lsb { mode, k } => write!(f, "{}-{k}", mode.label()),
            Technique::Tds => f.write_str("TDS"),
            Technique::Vwm => f.write_str("VWM"),
            Technique::Ivwm => f.write_str("IVWM"),
        }
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = match s {
            "AfterEOF" => Technique::AfterEof,
            "TDS" => Technique::Tds,
            "VWM" => Technique::Vwm,
            "IVWM" => Technique::Ivwm,
            _ => {
                let (mode, k) = s
                    .split_once('-')
                    .ok_or_else(|| Error::Config(format!("unknown technique {s:?}")))?;
                let mode = match mode {
                    "NKS" => KeyMode::Nks,
                    "SKS" => KeyMode::Sks,
                    "PKS" => KeyMode::Pks,
                    _ => return Err(Error::Config(format!("unknown technique {s:?}"))),
                };
                let k: u8 = k
                    .parse()
                    .ok()
                    .filter(|k| (1..=steg::MAX_BITS_PER_BYTE).contains(k))
                    .ok_or_else(|| Error::Config(format!("bad bit count in {s:?}")))?;
                Technique::Lsb { mode, k }
            }
        };
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoverSource {
    /// Uniform random pixels.
    Noise {
        side: usize,
    },
    /// Smooth sinusoidal texture with a little dither.
    Smooth {
        side: usize,
    },
    File(PathBuf),
}

impl CoverSource {
    pub fn label(&self) -> String {
        match self {
            CoverSource::Noise { side } => format!("noise{side}"),
            CoverSource::Smooth { side } => format!("smooth{side}"),
            CoverSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }

    fn parse(s: &str, base: &Path) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("synthetic:") {
            let (kind, side) = rest
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("bad synthetic cover {s:?}")))?;
            let side: usize = side
                .parse()
                .ok()
                .filter(|&n| n >= 8)
                .ok_or_else(|| Error::Config(format!("bad cover side in {s:?}")))?;
            match kind {
                "noise" => Ok(CoverSource::Noise { side }),
                "smooth" => Ok(CoverSource::Smooth { side }),
                _ => Err(Error::Config(format!("unknown synthetic cover {kind:?}"))),
            }
        } else {
            Ok(CoverSource::File(base.join(s)))
        }
    }

    pub fn load(&self, seed: u64) -> Result<Image> {
        match self {
            CoverSource::Noise { side } => {
                Image::new(*side, *side, 1, keystream_bytes(seed, side * side))
            }
            CoverSource::Smooth { side } => {
                let n = *side;
                let dither = keystream_bytes(seed, n * n);
                let px = (0..n * n)
                    .map(|i| {
                        let (x, y) = ((i % n) as f64, (i / n) as f64);
                        let v = 128.0
                            + 70.0 * (x * 0.049).sin() * (y * 0.031).cos()
                            + 30.0 * ((x + y) * 0.021).sin()
                            + (dither[i] % 5) as f64
                            - 2.0;
                        v.round().clamp(0.0, 255.0) as u8
                    })
                    .collect();
                Image::new(n, n, 1, px)
            }
            CoverSource::File(path) => read_image_file(path),
        }
    }
}

/// Load an image file, sniffing the format from its content.
pub fn read_image_file(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    load_image(&bytes, ImageFormat::sniff(&bytes)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadSize {
    Full,
    Half,
    Bytes(usize),
}

impl PayloadSize {
    fn resolve(self, capacity: usize) -> usize {
        match self {
            PayloadSize::Full => capacity,
            PayloadSize::Half => capacity / 2,
            PayloadSize::Bytes(n) => n,
        }
    }
}

impl fmt::Display for PayloadSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PayloadSize::Full => f.write_str("full"),
            PayloadSize::Half => f.write_str("half"),
            PayloadSize::Bytes(n) => write!(f, "{n}"),
        }
    }
}

impl FromStr for PayloadSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(PayloadSize::Full),
            "half" => Ok(PayloadSize::Half),
            n => n
                .parse()
                .map(PayloadSize::Bytes)
                .map_err(|_| Error::Config(format!("bad payload size {s:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    covers: Vec<String>,
    techniques: Vec<String>,
    #[serde(default)]
    attacks: Vec<String>,
    #[serde(default = "default_payloads")]
    payloads: Vec<String>,
    #[serde(default = "default_eof_payload")]
    eof_payload_bytes: usize,
    #[serde(default = "default_trials")]
    wrong_key_trials: usize,
}

fn default_payloads() -> Vec<String> {
    vec!["full".into()]
}

fn default_eof_payload() -> usize {
    1 << 20
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub seed: u64,
    pub covers: Vec<CoverSource>,
    pub techniques: Vec<Technique>,
    pub attacks: Vec<AttackSpec>,
    pub payloads: Vec<PayloadSize>,
    pub eof_payload_bytes: usize,
    pub wrong_key_trials: usize,
}

impl BenchConfig {
    /// Parse a config; relative cover paths resolve against `base_dir`.
    pub fn from_toml_str(s: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if raw.covers.is_empty() {
            return Err(Error::Config("no covers configured".into()));
        }
        if raw.techniques.is_empty() {
            return Err(Error::Config("no techniques configured".into()));
        }
        if raw.payloads.is_empty() {
            return Err(Error::Config("no payload sizes configured".into()));
        }
        Ok(BenchConfig {
            seed: raw.seed,
            covers: raw
                .covers
                .iter()
                .map(|c| CoverSource::parse(c, base_dir))
                .collect::<Result<_>>()?,
            techniques: raw
                .techniques
                .iter()
                .map(|t| t.parse())
                .collect::<Result<_>>()?,
            attacks: raw
                .attacks
                .iter()
                .map(|a| a.parse().map_err(|e: Error| Error::Config(e.to_string())))
                .collect::<Result<_>>()?,
            payloads: raw
                .payloads
                .iter()
                .map(|p| p.parse())
                .collect::<Result<_>>()?,
            eof_payload_bytes: raw.eof_payload_bytes,
            wrong_key_trials: raw.wrong_key_trials,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        BenchConfig::from_toml_str(&text, base)
    }

    /// The shipped default configuration.
    pub fn default_config() -> Self {
        BenchConfig::from_toml_str(DEFAULT_BENCH_TOML, Path::new("."))
            .expect("shipped bench config parses")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grades {
    pub capacity: Grade,
    pub robustness: Grade,
    pub secrecy: Grade,
    pub imperceptibility: Grade,
}

impl Grades {
    fn all(g: Grade) -> Self {
        Grades {
            capacity: g,
            robustness: g,
            secrecy: g,
            imperceptibility: g,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub technique: String,
    pub cover: String,
    pub payload_bytes: Option<usize>,
    pub capacity_bytes: Option<usize>,
    pub psnr_db: Option<f64>,
    /// One entry per battery attack; `None` when the row did not run.
    pub attack_ber: Vec<Option<f64>>,
    /// Mean BER over the graded attacks.
    pub mean_ber: Option<f64>,
    pub wrong_key_rejection: Option<f64>,
    pub embed_ms: Option<f64>,
    pub key_management: &'static str,
    pub grades: Grades,
    pub note: Option<String>,
}

/// Measurements before grading.
struct Measured {
    pixels: usize,
    payload_bytes: usize,
    capacity_bytes: usize,
    psnr_db: f64,
    attack_ber: Vec<f64>,
    wrong_key_rejection: Option<f64>,
    embed_ms: f64,
}

fn cell_seed(base: u64, technique: usize, cover: usize, payload: usize) -> u64 {
    let mixed = base ^ ((technique as u64) << 40) ^ ((cover as u64) << 20) ^ payload as u64;
    Keystream::new(mixed).next_u64()
}

fn container_format(img: &Image) -> ImageFormat {
    if img.is_grayscale() {
        ImageFormat::Bmp8Gray
    } else {
        ImageFormat::Bmp24
    }
}

fn steg_key(mode: KeyMode, seed: u64) -> StegKey {
    match mode {
        KeyMode::Nks => StegKey::Nks,
        KeyMode::Sks => StegKey::Sks { secret: seed },
        KeyMode::Pks => StegKey::Pks {
            own: KeyPair::generate(seed),
            peer_public: KeyPair::generate(!seed).public(),
        },
    }
}

/// Receiver-side parameters matching `steg_key(mode, seed)`.
fn receiver_key(mode: KeyMode, seed: u64) -> StegKey {
    match mode {
        KeyMode::Pks => StegKey::Pks {
            own: KeyPair::generate(!seed),
            peer_public: KeyPair::generate(seed).public(),
        },
        other => steg_key(other, seed),
    }
}

fn payload_ber(expected: &[u8], got: Result<Vec<u8>>) -> f64 {
    match got {
        Ok(bytes) if bytes.len() == expected.len() => {
            if expected.is_empty() {
                0.0
            } else {
                byte_ber(expected, &bytes).unwrap_or(1.0)
            }
        }
        _ => 1.0,
    }
}

fn measure_after_eof(
    cover: &Image,
    payload_len: usize,
    config: &BenchConfig,
    seed: u64,
) -> Result<Measured> {
    let format = container_format(cover);
    let file = save_image(cover, format)?;
    let payload = keystream_bytes(seed, payload_len);
    let t = Instant::now();
    let stego = append_payload(&file, &payload, AppendMode::Framed)?;
    let embed_ms = t.elapsed().as_secs_f64() * 1e3;
    let raster = load_image(&stego, format)?;
    let psnr_db = psnr(cover, &raster)?.psnr;
    let attack_ber = config
        .attacks
        .iter()
        .map(|spec| {
            let got = apply_attack(&raster, spec)
                .and_then(|img| save_image(&img, container_format(&img)))
                .and_then(|bytes| extract_payload(&bytes, AppendMode::Framed));
            payload_ber(&payload, got)
        })
        .collect();
    Ok(Measured {
        pixels: cover.pixel_count(),
        payload_bytes: payload_len,
        capacity_bytes: config.eof_payload_bytes,
        psnr_db,
        attack_ber,
        wrong_key_rejection: None,
        embed_ms,
    })
}

fn measure_lsb(
    cover: &Image,
    mode: KeyMode,
    k: u8,
    size: PayloadSize,
    config: &BenchConfig,
    seed: u64,
) -> Result<Measured> {
    let capacity = steg::capacity(cover, k)?;
    let payload = keystream_bytes(seed ^ 0x5EED, size.resolve(capacity));
    let key_seed = Keystream::new(seed).next_u64();
    let params = EmbedParams::new(k, steg_key(mode, key_seed))?;
    let receiver = EmbedParams::new(k, receiver_key(mode, key_seed))?;
    let t = Instant::now();
    let stego = steg::embed(cover, &payload, &params)?;
    let embed_ms = t.elapsed().as_secs_f64() * 1e3;
    let psnr_db = psnr(cover, &stego)?.psnr;
    let attack_ber = config
        .attacks
        .iter()
        .map(|spec| {
            let got = apply_attack(&stego, spec).and_then(|img| steg::extract(&img, &receiver));
            payload_ber(&payload, got)
        })
        .collect();
    let wrong_key_rejection = match mode {
        KeyMode::Nks => None,
        _ if config.wrong_key_trials == 0 => None,
        _ => {
            let mut ks = Keystream::new(key_seed ^ 0xBAD_C0DE);
            let mut rejected = 0;
            for _ in 0..config.wrong_key_trials {
                let wrong = ks.next_u64();
                let key = match mode {
                    KeyMode::Pks => StegKey::Pks {
                        own: KeyPair::generate(wrong),
                        peer_public: KeyPair::generate(key_seed).public(),
                    },
                    _ => StegKey::Sks { secret: wrong },
                };
                let attempt = steg::extract(&stego, &EmbedParams::new(k, key)?);
                if !matches!(attempt, Ok(ref p) if *p == payload) {
                    rejected += 1;
                }
            }
            Some(rejected as f64 / config.wrong_key_trials as f64)
        }
    };
    Ok(Measured {
        pixels: cover.pixel_count(),
        payload_bytes: payload.len(),
        capacity_bytes: capacity,
        psnr_db,
        attack_ber,
        wrong_key_rejection,
        embed_ms,
    })
}

fn require_gray_cover(cover: &Image) -> Result<()> {
    if cover.is_grayscale() {
        Ok(())
    } else {
        Err(Error::Config(
            "watermark rows need a grayscale cover".into(),
        ))
    }
}

fn measure_vwm(cover: &Image, config: &BenchConfig) -> Result<Measured> {
    require_gray_cover(cover)?;
    let mark = MonoMark::glyph(VWM_SIDE);
    let origin = (
        cover.height().saturating_sub(VWM_SIDE) / 2,
        cover.width().saturating_sub(VWM_SIDE) / 2,
    );
    let dims = (VWM_SIDE, VWM_SIDE);
    let t = Instant::now();
    let marked = embed_visible(cover, &mark, origin, DEFAULT_VISIBLE_PLANE)?;
    let embed_ms = t.elapsed().as_secs_f64() * 1e3;
    let psnr_db = psnr(cover, &marked)?.psnr;
    let attack_ber = config
        .attacks
        .iter()
        .map(|spec| {
            apply_attack(&marked, spec)
                .and_then(|img| extract_visible(&img, origin, dims, DEFAULT_VISIBLE_PLANE))
                .and_then(|got| crate::metrics::ber(mark.bits(), got.bits()))
                .unwrap_or(1.0)
        })
        .collect();
    Ok(Measured {
        pixels: cover.pixel_count(),
        payload_bytes: VWM_SIDE * VWM_SIDE / 8,
        capacity_bytes: VWM_SIDE * VWM_SIDE / 8,
        psnr_db,
        attack_ber,
        wrong_key_rejection: None,
        embed_ms,
    })
}

/// The standard 20x20 gray mark: a diagonal gradient with keyed texture.
pub fn standard_gray_mark(seed: u64) -> GrayMark {
    let n = IVWM_SIDE;
    let tex = keystream_bytes(seed, n * n);
    let bytes = (0..n * n)
        .map(|i| ((i % n + i / n) * 6) as u8 ^ (tex[i] & 0x0F))
        .collect();
    GrayMark::new(n, n, bytes).expect("mark shape is valid")
}

fn measure_ivwm(cover: &Image, config: &BenchConfig, seed: u64) -> Result<Measured> {
    require_gray_cover(cover)?;
    let mark = standard_gray_mark(seed);
    let key = WmKey::with_seed(Keystream::new(seed).next_u64());
    let dims = (IVWM_SIDE, IVWM_SIDE);
    let t = Instant::now();
    let marked = embed_invisible(cover, &mark, &key)?;
    let embed_ms = t.elapsed().as_secs_f64() * 1e3;
    let psnr_db = psnr(cover, &marked)?.psnr;
    let attack_ber = config
        .attacks
        .iter()
        .map(|spec| {
            apply_attack(&marked, spec)
                .and_then(|img| extract_invisible(&img, &key, dims))
                .and_then(|got| byte_ber(mark.bytes(), got.bytes()))
                .unwrap_or(1.0)
        })
        .collect();
    let wrong_key_rejection = (config.wrong_key_trials > 0).then(|| {
        let mut ks = Keystream::new(key.seed() ^ 0xBAD_C0DE);
        let rejected = (0..config.wrong_key_trials)
            .filter(|_| {
                let wrong = WmKey::with_seed(ks.next_u64());
                extract_invisible(&marked, &wrong, dims)
                    .and_then(|got| byte_ber(mark.bytes(), got.bytes()))
                    .map_or(true, |b| b >= IVWM_REJECT_BER)
            })
            .count();
        rejected as f64 / config.wrong_key_trials as f64
    });
    Ok(Measured {
        pixels: cover.pixel_count(),
        payload_bytes: mark.bytes().len(),
        capacity_bytes: mark.bytes().len(),
        psnr_db,
        attack_ber,
        wrong_key_rejection,
        embed_ms,
    })
}

fn grade(technique: Technique, m: &Measured, battery: &[AttackSpec], table: &GradeTable) -> Grades {
    let key = technique.key_profile();
    let capacity = table.grade_capacity(m.capacity_bytes, m.pixels);
    let robustness = if battery.is_empty() {
        Grade::NotApplicable
    } else {
        table.grade_robustness(battery, &m.attack_ber)
    };
    let (secrecy, imperceptibility) = match technique {
        // visible by construction; no message to keep secret
        Technique::Vwm => (Grade::NotApplicable, Grade::NotApplicable),
        _ => (
            table.grade_secrecy(&key, m.wrong_key_rejection),
            table.grade_imperceptibility(m.psnr_db),
        ),
    };
    Grades {
        capacity,
        robustness,
        secrecy,
        imperceptibility,
    }
}

struct Cell {
    technique: Technique,
    ti: usize,
    ci: usize,
    pi: usize,
}

fn run_cell(
    cell: &Cell,
    cover: &Result<Image>,
    cover_label: &str,
    config: &BenchConfig,
    table: &GradeTable,
) -> BenchRow {
    let technique = cell.technique;
    let size = config.payloads[cell.pi];
    let seed = cell_seed(config.seed, cell.ti, cell.ci, cell.pi);
    let mut row = BenchRow {
        technique: technique.to_string(),
        cover: if config.payloads.len() > 1 {
            format!("{cover_label}/{size}")
        } else {
            cover_label.to_string()
        },
        payload_bytes: None,
        capacity_bytes: None,
        psnr_db: None,
        attack_ber: vec![None; config.attacks.len()],
        mean_ber: None,
        wrong_key_rejection: None,
        embed_ms: None,
        key_management: technique.key_profile().management,
        grades: Grades::all(Grade::NotApplicable),
        note: None,
    };
    if technique == Technique::Tds {
        row.grades = Grades::all(Grade::NotImplemented);
        row.note = Some("transform-domain embedding is not implemented".into());
        return row;
    }
    let cover = match cover {
        Ok(c) => c,
        Err(e) => {
            row.note = Some(format!("cover failed to load: {e}"));
            return row;
        }
    };
    let measured = match technique {
        Technique::AfterEof => {
            measure_after_eof(cover, size.resolve(config.eof_payload_bytes), config, seed)
        }
        Technique::Lsb { mode, k } => measure_lsb(cover, mode, k, size, config, seed),
        Technique::Vwm => measure_vwm(cover, config),
        Technique::Ivwm => measure_ivwm(cover, config, seed),
        Technique::Tds => unreachable!(),
    };
    match measured {
        Ok(m) => {
            row.grades = grade(technique, &m, &config.attacks, table);
            row.mean_ber = table.graded_mean(&config.attacks, &m.attack_ber);
            row.payload_bytes = Some(m.payload_bytes);
            row.capacity_bytes = Some(m.capacity_bytes);
            row.psnr_db = Some(m.psnr_db);
            row.attack_ber = m.attack_ber.into_iter().map(Some).collect();
            row.wrong_key_rejection = m.wrong_key_rejection;
            row.embed_ms = Some(m.embed_ms);
        }
        Err(e) => row.note = Some(e.to_string()),
    }
    row
}

/// Run every technique x cover x payload cell with the standard grade table.
pub fn run_benchmark(config: &BenchConfig) -> Vec<BenchRow> {
    run_benchmark_with(config, &GradeTable::standard())
}

/// Cells run concurrently; rows come back in technique, cover, payload order.
pub fn run_benchmark_with(config: &BenchConfig, table: &GradeTable) -> Vec<BenchRow> {
    let covers: Vec<(Result<Image>, String)> = config
        .covers
        .iter()
        .enumerate()
        .map(|(i, c)| (c.load(config.seed ^ (i as u64 + 1)), c.label()))
        .collect();
    let mut cells = Vec::new();
    for (ti, &technique) in config.techniques.iter().enumerate() {
        for ci in 0..covers.len() {
            for pi in 0..config.payloads.len() {
                cells.push(Cell {
                    technique,
                    ti,
                    ci,
                    pi,
                });
            }
        }
    }
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cells.len().max(1));
    let mut rows: Vec<Option<BenchRow>> = vec![None; cells.len()];
    std::thread::scope(|scope| {
        let chunk = cells.len().div_ceil(workers);
        for (cell_chunk, row_chunk) in cells.chunks(chunk).zip(rows.chunks_mut(chunk)) {
            let covers = &covers;
            scope.spawn(move || {
                for (cell, slot) in cell_chunk.iter().zip(row_chunk) {
                    let (cover, label) = &covers[cell.ci];
                    *slot = Some(run_cell(cell, cover, label, config, table));
                }
            });
        }
    });
    rows.into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Measurements: 5 fixed columns plus one BER column per attack.
    Csv,
    /// Grade matrix only; stable across machines.
    GradesCsv,
    /// Human-readable table with measurements, grades and timing.
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "grades" | "grades-csv" => Ok(ReportFormat::GradesCsv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            _ => Err(Error::InvalidParameter(format!(
                "unknown report format {s:?} (expected csv, grades or markdown)"
            ))),
        }
    }
}

fn opt_f(v: Option<f64>) -> String {
    v.map(format_db).unwrap_or_default()
}

fn opt_u(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render rows. `battery` supplies the attack column names.
pub fn emit_report(rows: &[BenchRow], battery: &[AttackSpec], format: ReportFormat) -> Vec<u8> {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(CSV_SCHEMA);
            out.push('\n');
            let mut header = vec![
                "technique".to_string(),
                "cover".into(),
                "payload_bytes".into(),
                "capacity_bytes".into(),
                "psnr_db".into(),
            ];
            header.extend(battery.iter().map(|a| csv_field(&format!("ber[{a}]"))));
            out.push_str(&header.join(","));
            out.push('\n');
            for r in rows {
                let mut fields = vec![
                    csv_field(&r.technique),
                    csv_field(&r.cover),
                    opt_u(r.payload_bytes),
                    opt_u(r.capacity_bytes),
                    opt_f(r.psnr_db),
                ];
                fields.extend(r.attack_ber.iter().map(|b| opt_f(*b)));
                out.push_str(&fields.join(","));
                out.push('\n');
            }
        }
        ReportFormat::GradesCsv => {
            out.push_str(CSV_SCHEMA);
            out.push('\n');
            out.push_str("technique,cover,capacity,robustness,secrecy,imperceptibility\n");
            for r in rows {
                let g = &r.grades;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    csv_field(&r.technique),
                    csv_field(&r.cover),
                    g.capacity,
                    g.robustness,
                    g.secrecy,
                    g.imperceptibility
                );
            }
        }
        ReportFormat::Markdown => {
            out.push_str("| Technique | Cover | Capacity (bytes) | Hiding capacity | PSNR (dB) | Imperceptibility |");
            if !battery.is_empty() {
                out.push_str(" Graded BER | Robustness |");
            }
            out.push_str(
                " Wrong-key rejection | Message secrecy | Key management | Embed (ms) |\n",
            );
            out.push_str("|---|---|---:|---|---:|---|");
            if !battery.is_empty() {
                out.push_str("---:|---|");
            }
            out.push_str("---:|---|---|---:|\n");
            for r in rows {
                let _ = write!(
                    out,
                    "| {} | {} | {} | {} | {} | {} |",
                    r.technique,
                    r.cover,
                    opt_u(r.capacity_bytes),
                    r.grades.capacity,
                    opt_f(r.psnr_db),
                    r.grades.imperceptibility
                );
                if !battery.is_empty() {
                    let _ = write!(out, " {} | {} |", opt_f(r.mean_ber), r.grades.robustness);
                }
                let _ = writeln!(
                    out,
                    " {} | {} | {} | {} |",
                    opt_f(r.wrong_key_rejection),
                    r.grades.secrecy,
                    r.key_management,
                    r.embed_ms.map(|m| format!("{m:.2}")).unwrap_or_default()
                );
            }
            if !battery.is_empty() {
                out.push_str("\nAttack battery: ");
                let names: Vec<String> = battery.iter().map(|a| format!("`{a}`")).collect();
                out.push_str(&names.join(", "));
                out.push('\n');
            }
            let notes: Vec<String> = rows
                .iter()
                .filter_map(|r| {
                    r.note
                        .as_ref()
                        .map(|n| format!("- {} / {}: {n}", r.technique, r.cover))
                })
                .collect();
            if !notes.is_empty() {
                out.push_str("\nNotes:\n");
                out.push_str(&notes.join("\n"));
                out.push('\n');
            }
        }
    }
    out.into_bytes()
}

/// Write `plane_0.pgm` .. `plane_7.pgm` into `out_dir`, each bit as 0/255.
pub fn inspect(img: &Image, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if !img.is_grayscale() {
        return Err(Error::Unsupported("inspect needs a grayscale image".into()));
    }
    fs::create_dir_all(out_dir)?;
    (0..8u8)
        .map(|p| {
            let plane = get_bit_plane(img, p)?.to_image();
            let path = out_dir.join(format!("plane_{p}.pgm"));
            fs::write(&path, save_image(&plane, ImageFormat::PgmP5)?)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(techniques: &str, attacks: &str) -> BenchConfig {
        let toml = format!(
            "seed = 7\ncovers = [\"synthetic:noise:32\"]\ntechniques = [{techniques}]\nattacks = [{attacks}]\neof_payload_bytes = 4096\nwrong_key_trials = 10\n"
        );
        BenchConfig::from_toml_str(&toml, Path::new(".")).unwrap()
    }

    #[test]
    fn shipped_tables_parse() {
        let t = GradeTable::standard();
        assert_eq!(t.imperceptibility.very_high, 36.0);
        assert_eq!(t.robustness.lossless_very_low, 0.45);
        let c = BenchConfig::default_config();
        assert_eq!(c.covers.len(), 2);
        assert!(c.techniques.contains(&Technique::Ivwm));
    }

    #[test]
    fn technique_labels_roundtrip() {
        for s in ["AfterEOF", "NKS-1", "SKS-4", "PKS-2", "TDS", "VWM", "IVWM"] {
            assert_eq!(s.parse::<Technique>().unwrap().to_string(), s);
        }
        for bad in ["NKS-5", "XKS-1", "LSB", "NKS-x"] {
            assert!(bad.parse::<Technique>().is_err());
        }
    }

    #[test]
    fn config_errors() {
        let base = Path::new(".");
        assert!(
            BenchConfig::from_toml_str("seed = 1\ncovers = []\ntechniques = [\"VWM\"]", base)
                .is_err()
        );
        assert!(BenchConfig::from_toml_str(
            "seed = 1\ncovers = [\"a.pgm\"]\ntechniques = []",
            base
        )
        .is_err());
        assert!(BenchConfig::from_toml_str(
            "seed = 1\ncovers = [\"a.pgm\"]\ntechniques = [\"VWM\"]\nbogus = 1",
            base
        )
        .is_err());
        assert!(BenchConfig::from_toml_str(
            "seed = 1\ncovers = [\"synthetic:noise:2\"]\ntechniques = [\"VWM\"]",
            base
        )
        .is_err());
    }

    #[test]
    fn ladder_boundaries() {
        let t = GradeTable::standard();
        assert_eq!(t.grade_imperceptibility(36.0), Grade::VeryHigh);
        assert_eq!(t.grade_imperceptibility(35.99), Grade::High);
        assert_eq!(t.grade_imperceptibility(f64::INFINITY), Grade::VeryHigh);
        assert_eq!(t.grade_imperceptibility(5.0), Grade::VeryLow);
        assert_eq!(t.grade_capacity(8185, 65536), Grade::Low);
        assert_eq!(t.grade_capacity(16377, 65536), Grade::High);
        assert_eq!(t.grade_capacity(1 << 20, 65536), Grade::VeryHigh);
    }

    #[test]
    fn robustness_rules() {
        let t = GradeTable::standard();
        let battery: Vec<AttackSpec> = ["format:bmp8", "jpeg:25", "rotate:90:roundtrip"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(
            t.grade_robustness(&battery, &[1.0, 0.0, 0.0]),
            Grade::VeryLow
        );
        // jpeg:25 is excluded, mean of the other two is 0
        assert_eq!(
            t.grade_robustness(&battery, &[0.0, 1.0, 0.0]),
            Grade::VeryHigh
        );
        assert_eq!(t.grade_robustness(&battery, &[0.0, 1.0, 0.2]), Grade::High);
        assert_eq!(
            t.grade_robustness(&battery, &[0.0, 1.0, 0.5]),
            Grade::Medium
        );
        assert_eq!(t.grade_robustness(&battery, &[0.0, 1.0, 1.0]), Grade::Low);
    }

    #[test]
    fn secrecy_rules() {
        let t = GradeTable::standard();
        let sks = Technique::Lsb {
            mode: KeyMode::Sks,
            k: 1,
        }
        .key_profile();
        let pks = Technique::Lsb {
            mode: KeyMode::Pks,
            k: 1,
        }
        .key_profile();
        let nks = Technique::Lsb {
            mode: KeyMode::Nks,
            k: 1,
        }
        .key_profile();
        assert_eq!(t.grade_secrecy(&sks, Some(1.0)), Grade::VeryHigh);
        assert_eq!(t.grade_secrecy(&pks, Some(1.0)), Grade::High);
        assert_eq!(t.grade_secrecy(&nks, None), Grade::Low);
        assert_eq!(t.grade_secrecy(&sks, Some(0.95)), Grade::Medium);
        assert_eq!(t.grade_secrecy(&sks, Some(0.5)), Grade::Low);
    }

    #[test]
    fn empty_battery_limits_columns() {
        let cfg = tiny_config("\"NKS-1\", \"TDS\"", "");
        let rows = run_benchmark(&cfg);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].grades.robustness, Grade::NotApplicable);
        assert_eq!(rows[1].grades.capacity, Grade::NotImplemented);
        let csv = String::from_utf8(emit_report(&rows, &cfg.attacks, ReportFormat::Csv)).unwrap();
        let header = csv.lines().nth(1).unwrap();
        assert_eq!(
            header,
            "technique,cover,payload_bytes,capacity_bytes,psnr_db"
        );
        let md =
            String::from_utf8(emit_report(&rows, &cfg.attacks, ReportFormat::Markdown)).unwrap();
        assert!(!md.contains("Robustness"));
    }

    #[test]
    fn csv_shape_and_determinism() {
        let cfg = tiny_config(
            "\"AfterEOF\", \"SKS-2\", \"IVWM\"",
            "\"format:bmp8\", \"rotate:90:roundtrip\"",
        );
        let rows = run_benchmark(&cfg);
        let a = emit_report(&rows, &cfg.attacks, ReportFormat::Csv);
        assert_eq!(a, emit_report(&rows, &cfg.attacks, ReportFormat::Csv));
        let text = String::from_utf8(a).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(CSV_SCHEMA));
        for line in lines {
            assert_eq!(line.split(',').count(), 5 + cfg.attacks.len(), "{line}");
        }
        // measurements are reproducible run to run
        let again = run_benchmark(&cfg);
        assert_eq!(
            emit_report(&again, &cfg.attacks, ReportFormat::Csv),
            emit_report(&rows, &cfg.attacks, ReportFormat::Csv)
        );
    }

    #[test]
    fn row_errors_do_not_stop_the_run() {
        let toml = "seed = 1\ncovers = [\"missing-file.pgm\", \"synthetic:noise:16\"]\ntechniques = [\"NKS-1\"]\n";
        let cfg = BenchConfig::from_toml_str(toml, Path::new("/nonexistent")).unwrap();
        let rows = run_benchmark(&cfg);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].note.is_some());
        assert!(rows[1].note.is_none());
        // 16x16 is too small for the IVWM mark; reported in the row
        let cfg = tiny_config("\"IVWM\"", "");
        let cfg = BenchConfig {
            covers: vec![CoverSource::Noise { side: 16 }],
            ..cfg
        };
        let rows = run_benchmark(&cfg);
        assert!(rows[0].note.is_some());
    }

    #[test]
    fn inspect_writes_planes() {
        let dir = std::env::temp_dir().join(format!("stegolab-inspect-{}", std::process::id()));
        let img = Image::filled(4, 4, 1, 255).unwrap();
        let paths = inspect(&img, &dir).unwrap();
        assert_eq!(paths.len(), 8);
        for p in &paths {
            let plane = read_image_file(p).unwrap();
            assert!(plane.pixels().iter().all(|&v| v == 255));
        }
        assert!(inspect(&Image::filled(2, 2, 3, 0).unwrap(), &dir).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
