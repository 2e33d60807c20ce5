//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use stegolab_core::attacks::dct::{dct8x8, idct8x8};
use stegolab_core::attacks::{apply_attack, AttackSpec};
use stegolab_core::container::{append_payload, extract_payload, AppendMode};
use stegolab_core::keys::{
    keystream_bytes, scramble_image, scramble_point, unscramble_image, KeyPair, Keystream,
    ScrambleMap, ScrambleSpec,
};
use stegolab_core::metrics::{ber, psnr};
use stegolab_core::raster::{
    get_bit_plane, load_image, save_image, set_bit_plane, BitPlane, Image, ImageFormat,
};
use stegolab_core::report::{
    emit_report, run_benchmark, BenchConfig, CoverSource, Grade, ReportFormat, Technique,
};
use stegolab_core::steg::{self, altered_bit_fraction, EmbedParams, KeyMode, StegKey};
use stegolab_core::watermark::{
    embed_invisible, embed_visible, extract_invisible, extract_visible, invisible_slots, GrayMark,
    MonoMark, WmKey,
};

const GOLDEN_GRADES: &str = include_str!("golden/default_grades.csv");

fn noise_cover(seed: u64, w: usize, h: usize, channels: u8) -> Image {
    let n = w * h * channels as usize;
    Image::new(w, h, channels, keystream_bytes(seed, n)).unwrap()
}

/// Output row pattern of the 3-LSB table: difference = original - altered.
const TABLE_DIFFERENCES: [i32; 8] = [-7, -5, -3, -1, 1, 3, 5, 7];

fn table_differences() {
    let all: Vec<u8> = (0..=255).collect();
    let img = Image::new(16, 16, 1, all.clone()).unwrap();
    let mut altered = img.clone();
    for p in 0..3 {
        let plane = get_bit_plane(&altered, p).unwrap();
        let flipped: Vec<u8> = plane.bits().iter().map(|b| b ^ 1).collect();
        let plane = BitPlane::new(16, 16, 1, p, flipped).unwrap();
        altered = set_bit_plane(&altered, p, &plane).unwrap();
    }
    let allowed = [-7, -5, -3, -1, 1, 3, 5, 7];
    for (&orig, &alt) in all.iter().zip(altered.pixels()) {
        let diff = orig as i32 - alt as i32;
        assert!(allowed.contains(&diff));
        assert_eq!(diff, TABLE_DIFFERENCES[(orig & 7) as usize], "value {orig}");
        assert_eq!(orig & 0xF8, alt & 0xF8, "high bits of {orig}");
        assert_eq!(alt, orig ^ 7);
    }
}

fn psnr_at_k4() {
    let cover = noise_cover(2012, 256, 256, 1);
    let params = EmbedParams::new(4, StegKey::Nks).unwrap();
    let cap = steg::capacity(&cover, 4).unwrap();
    let stego = steg::embed(&cover, &keystream_bytes(77, cap), &params).unwrap();
    let measured = psnr(&cover, &stego).unwrap().psnr;
    // uniform k-bit replacement: E[(a - b)^2] = (2^2k - 1) / 6
    let k = 4;
    let mse = ((1u32 << (2 * k)) - 1) as f64 / 6.0;
    let expected = 10.0 * (255.0f64 * 255.0 / mse).log10();
    assert!(measured > 30.0, "psnr {measured}");
    assert!((expected - 31.85).abs() < 0.01, "oracle {expected}");
    assert!(
        (measured - expected).abs() <= 0.5,
        "psnr {measured} vs {expected}"
    );
}

fn altered_bits_at_k3() {
    let cover = noise_cover(2012, 256, 256, 1);
    let params = EmbedParams::new(3, StegKey::Nks).unwrap();
    let cap = steg::capacity(&cover, 3).unwrap();
    let stego = steg::embed(&cover, &keystream_bytes(78, cap), &params).unwrap();
    let f = altered_bit_fraction(&cover, &stego, 3).unwrap();
    assert!((0.49..=0.51).contains(&f), "fraction {f}");
    assert!(f <= 0.55);
}

fn eof_capacity() {
    let cover = noise_cover(4, 24, 43, 1);
    let file = save_image(&cover, ImageFormat::Bmp8Gray).unwrap();
    assert_eq!(file.len(), 2110);
    let payload = keystream_bytes(20, 20 * 1024 * 1024);
    let stego = append_payload(&file, &payload, AppendMode::Framed).unwrap();
    assert_eq!(
        extract_payload(&stego, AppendMode::Framed).unwrap(),
        payload
    );
    assert_eq!(load_image(&stego, ImageFormat::Bmp8Gray).unwrap(), cover);
}

fn roundtrip_suite() {
    let mut rng = Keystream::new(5);
    for case in 0..200u64 {
        let mode = [KeyMode::Nks, KeyMode::Sks, KeyMode::Pks][case as usize % 3];
        let k = 1 + (case / 3 % 4) as u8;
        let channels = if case / 12 % 2 == 0 { 1 } else { 3 };
        let w = 4 + (rng.next_u64() % 37) as usize;
        let h = 4 + (rng.next_u64() % 37) as usize;
        let cover = noise_cover(rng.next_u64(), w, h, channels);
        let cap = steg::capacity(&cover, k).unwrap();
        let len = [0, 1.min(cap), cap / 2, cap][(case / 24 % 4) as usize];
        let seed = rng.next_u64();
        let (sender, receiver) = match mode {
            KeyMode::Nks => (StegKey::Nks, StegKey::Nks),
            KeyMode::Sks => (StegKey::Sks { secret: seed }, StegKey::Sks { secret: seed }),
            KeyMode::Pks => {
                let (a, b) = (KeyPair::generate(seed), KeyPair::generate(!seed));
                (
                    StegKey::Pks {
                        own: a,
                        peer_public: b.public(),
                    },
                    StegKey::Pks {
                        own: b,
                        peer_public: a.public(),
                    },
                )
            }
        };
        let payload = keystream_bytes(seed ^ 1, len);
        let stego = steg::embed(&cover, &payload, &EmbedParams::new(k, sender).unwrap()).unwrap();
        let got = steg::extract(&stego, &EmbedParams::new(k, receiver).unwrap()).unwrap();
        assert_eq!(got, payload, "case {case}");
        for p in k..8 {
            assert_eq!(
                get_bit_plane(&cover, p).unwrap(),
                get_bit_plane(&stego, p).unwrap(),
                "case {case} plane {p}"
            );
        }
    }
}

fn wrong_key_rejection() {
    let cover = noise_cover(6, 128, 128, 1);
    let secret = 0x1234_5678_9ABC_DEF0;
    let payload = keystream_bytes(7, 500);
    let stego = steg::embed(
        &cover,
        &payload,
        &EmbedParams::new(2, StegKey::Sks { secret }).unwrap(),
    )
    .unwrap();
    let mut rng = Keystream::new(8);
    let mut rejected = 0;
    for _ in 0..1000 {
        let wrong = rng.next_u64();
        assert_ne!(wrong, secret);
        let r = steg::extract(
            &stego,
            &EmbedParams::new(2, StegKey::Sks { secret: wrong }).unwrap(),
        );
        if matches!(r, Err(ref e) if e.is_no_frame()) {
            rejected += 1;
        }
    }
    assert!(rejected >= 990, "{rejected}/1000 rejected");
}

fn is_bijection(spec: &ScrambleSpec) -> bool {
    let n = spec.side();
    let mut seen = vec![false; n * n];
    for y in 0..n {
        for x in 0..n {
            let (a, b) = scramble_point((x, y), spec).unwrap();
            if seen[b * n + a] {
                return false;
            }
            seen[b * n + a] = true;
        }
    }
    true
}

fn scrambling_maps() {
    for n in 2..=64 {
        let spec = ScrambleSpec::new(ScrambleMap::Arnold, 1, n).unwrap();
        assert!(is_bijection(&spec), "Arnold N={n}");
    }
    // period: smallest t with every point back in place
    let period = (1..=10u64)
        .find(|&t| {
            let spec = ScrambleSpec::new(ScrambleMap::Arnold, t, 2).unwrap();
            (0..4).all(|i| scramble_point((i % 2, i / 2), &spec).unwrap() == (i % 2, i / 2))
        })
        .unwrap();
    assert_eq!(period, 3);
    for i in 1..=5 {
        for n in (3..=101).step_by(2) {
            let spec = ScrambleSpec::new(ScrambleMap::FiboLucas(i), 3, n).unwrap();
            assert!(is_bijection(&spec), "FiboLucas({i}) N={n}");
            let img = noise_cover(n as u64, n, n, 1);
            let back = unscramble_image(&scramble_image(&img, &spec).unwrap(), &spec).unwrap();
            assert_eq!(back, img, "FiboLucas({i}) N={n}");
        }
    }
}

fn visible_watermark() {
    let host = noise_cover(2012, 256, 256, 1);
    let mark = MonoMark::glyph(32);
    let origin = (112, 112);
    let marked = embed_visible(&host, &mark, origin, 7).unwrap();
    let recover = |img: &Image| extract_visible(img, origin, (32, 32), 7).unwrap();
    assert_eq!(recover(&marked), mark);
    for spec in ["rotate:90:roundtrip", "format:bmp8", "format:pgm"] {
        let attacked = apply_attack(&marked, &spec.parse().unwrap()).unwrap();
        assert_eq!(recover(&attacked), mark, "{spec}");
    }
    let resized = apply_attack(&marked, &"resize:0.5:bilinear:roundtrip".parse().unwrap()).unwrap();
    let e = ber(mark.bits(), recover(&resized).bits()).unwrap();
    assert!(e <= 0.20, "resize BER {e}");
}

fn invisible_watermark() {
    let host = noise_cover(9, 256, 256, 1);
    let mark_bytes = keystream_bytes(10, 400);
    let mark = GrayMark::new(20, 20, mark_bytes).unwrap();
    let key = WmKey::new(11, 5, 1).unwrap();
    let marked = embed_invisible(&host, &mark, &key).unwrap();
    assert_eq!(extract_invisible(&marked, &key, (20, 20)).unwrap(), mark);
    let noise_plane = BitPlane::new(
        256,
        256,
        1,
        0,
        keystream_bytes(12, 256 * 256)
            .iter()
            .map(|b| b & 1)
            .collect(),
    )
    .unwrap();
    let scrubbed = set_bit_plane(&marked, 0, &noise_plane).unwrap();
    assert_eq!(extract_invisible(&scrubbed, &key, (20, 20)).unwrap(), mark);

    // R = 3 on a 2x2 mark: every bit survives any single flip among its
    // copies. Bits vote independently, so each byte is enumerated on its own:
    // 4 choices (no flip, flip copy 0, 1 or 2) for each of its 8 bits.
    let host = noise_cover(13, 10, 10, 1);
    let mark = GrayMark::new(2, 2, vec![0x00, 0xFF, 0xA5, 0x3C]).unwrap();
    let key = WmKey::new(14, 3, 1).unwrap();
    let marked = embed_invisible(&host, &mark, &key).unwrap();
    let slots = invisible_slots(&marked, &key, 4 * 8 * 3).unwrap();
    for byte in 0..4 {
        for pattern in 0u32..(1 << 16) {
            let mut px = marked.pixels().to_vec();
            for bit in 0..8 {
                let choice = (pattern >> (2 * bit)) & 3;
                if choice > 0 {
                    let slot = slots[(byte * 8 + bit) * 3 + (choice as usize - 1)];
                    px[slot] ^= 1 << 1;
                }
            }
            let corrupted = Image::new(10, 10, 1, px).unwrap();
            let got = extract_invisible(&corrupted, &key, (2, 2)).unwrap();
            assert_eq!(got, mark, "byte {byte} pattern {pattern:#06x}");
        }
    }
}

fn dct_pipeline() {
    let mut rng = Keystream::new(15);
    for _ in 0..1000 {
        let mut block = [0.0; 64];
        for v in block.iter_mut() {
            *v = (rng.next_u64() % 256) as f64 - 128.0;
        }
        let coeffs = dct8x8(&block);
        let back = idct8x8(&coeffs);
        for (a, b) in block.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-9);
        }
        let e_block: f64 = block.iter().map(|v| v * v).sum();
        let e_coeff: f64 = coeffs.iter().map(|v| v * v).sum();
        assert!((e_block - e_coeff).abs() <= 1e-6 * e_block.max(1.0));
    }
    let q100 = AttackSpec::JpegLike { quality: 100 };
    for source in [
        CoverSource::Noise { side: 256 },
        CoverSource::Smooth { side: 256 },
    ] {
        let img = source.load(16).unwrap();
        let out = apply_attack(&img, &q100).unwrap();
        let db = psnr(&img, &out).unwrap().psnr;
        assert!(db >= 40.0, "{} at q=100: {db}", source.label());
    }
}

fn grade_matrix() {
    let config = BenchConfig::default_config();
    let rows = run_benchmark(&config);
    let grades =
        String::from_utf8(emit_report(&rows, &config.attacks, ReportFormat::GradesCsv)).unwrap();
    assert_eq!(grades, GOLDEN_GRADES, "grade matrix differs from golden");

    let row = |t: &str, cover: &str| {
        rows.iter()
            .find(|r| r.technique == t && r.cover == cover)
            .unwrap_or_else(|| panic!("missing row {t}/{cover}"))
    };
    for cover in config.covers.iter().map(CoverSource::label) {
        let cap = |t: &str| row(t, &cover).capacity_bytes.unwrap();
        for mode in ["NKS", "SKS", "PKS"] {
            let (k4, k1) = (cap(&format!("{mode}-4")), cap(&format!("{mode}-1")));
            assert!(
                cap("AfterEOF") > k4 && k4 > k1 && k1 > cap("IVWM"),
                "{mode} on {cover}"
            );
        }
        assert_eq!(row("AfterEOF", &cover).grades.robustness, Grade::VeryLow);
        assert_eq!(row("VWM", &cover).grades.robustness, Grade::High);
        assert_eq!(row("IVWM", &cover).grades.robustness, Grade::High);
        let ivwm = row("IVWM", &cover);
        assert!(
            ivwm.mean_ber.unwrap() <= 0.15,
            "IVWM mean BER {:?}",
            ivwm.mean_ber
        );
    }
    assert!(config.techniques.contains(&Technique::Tds));
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(), Duration); 11] = [
        (
            "3-LSB intensity differences, all 256 values",
            table_differences,
            secs(1),
        ),
        (
            "PSNR at k=4 near the derived expectation",
            psnr_at_k4,
            secs(1),
        ),
        ("altered-bit fraction at k=3", altered_bits_at_k3, secs(1)),
        (
            "20 MiB framed payload after a 2 KB BMP",
            eof_capacity,
            secs(5),
        ),
        (
            "200-case embed/extract roundtrip",
            roundtrip_suite,
            secs(30),
        ),
        ("wrong SKS key rejection", wrong_key_rejection, secs(60)),
        (
            "Arnold and Fibonacci-Lucas bijections",
            scrambling_maps,
            secs(10),
        ),
        ("visible watermark robustness", visible_watermark, secs(60)),
        (
            "invisible watermark recovery and majority vote",
            invisible_watermark,
            secs(120),
        ),
        (
            "DCT orthonormality, Parseval, q=100 PSNR",
            dct_pipeline,
            secs(60),
        ),
        ("grade matrix against golden", grade_matrix, secs(120)),
    ];
    let quiet_panics = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Ok(()) if elapsed <= *budget => "PASS".to_string(),
            Ok(()) => format!("FAIL (over the {:?} budget)", budget),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                format!("FAIL ({msg})")
            }
        };
        if !verdict.starts_with("PASS") {
            failed += 1;
        }
        println!(
            "criterion {:>2}: {verdict} - {name} [{:.2?}]",
            i + 1,
            elapsed
        );
    }
    panic::set_hook(quiet_panics);
    if failed == 0 {
        println!("acceptance: all {} criteria passed", criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}

fn secs(n: u64) -> Duration {
    Duration::from_secs(n)
}
