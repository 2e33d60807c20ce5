//! `stegolab` command-line front end.
//!
//! Exit status: 0 on success, 1 on I/O, format or argument errors, 2 when no
//! hidden frame is found (including extraction with the wrong key).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use stegolab_core::attacks::{attack_series, parse_series};
use stegolab_core::container::{append_payload, extract_payload, AppendMode};
use stegolab_core::keys::{scramble_image, unscramble_image, KeyPair, ScrambleMap, ScrambleSpec};
use stegolab_core::metrics::psnr;
use stegolab_core::raster::{save_image, Image, ImageFormat};
use stegolab_core::report::{
    emit_report, inspect, read_image_file, run_benchmark, BenchConfig, ReportFormat,
};
use stegolab_core::steg::{self, EmbedParams, StegKey};
use stegolab_core::watermark::{
    embed_invisible, embed_visible, extract_invisible, extract_visible, GrayMark, MonoMark,
    SlotOrder, WmKey, DEFAULT_INVISIBLE_PLANE, DEFAULT_REDUNDANCY, DEFAULT_VISIBLE_PLANE,
};
use stegolab_core::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "stegolab",
    version,
    about = "Steganography and watermarking toolkit"
)]
struct Cli {
    /// Seed for key generation and watermark placement
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Suppress informational messages on stderr
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Hide a message file in the low bit planes of an image
    Embed {
        #[arg(long = "in")]
        input: PathBuf,
        /// Message file
        #[arg(long)]
        msg: PathBuf,
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a message hidden by `embed`
    Extract {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        key: KeyArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Append a payload after the end of a BMP, PNG or JPEG file
    Append {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        payload: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Framed)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a payload written by `append`
    ExtractAppend {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Framed)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Visible and invisible watermarks
    #[command(subcommand)]
    Wm(WmCommand),
    /// Apply a comma-separated attack series, e.g. "resize:0.5:bilinear:roundtrip,jpeg:75"
    Attack {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print MSE and PSNR between two images
    Psnr { a: PathBuf, b: PathBuf },
    /// Permute a square image with the Arnold or Fibonacci-Lucas map
    Scramble {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MapArg::Arnold)]
        map: MapArg,
        /// Fibonacci-Lucas index
        #[arg(long, default_value_t = 1)]
        index: u32,
        #[arg(long, default_value_t = 1)]
        iters: u64,
        /// Undo a previous scramble with the same parameters
        #[arg(long)]
        inverse: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive a key pair from --seed and print it
    Keygen,
    /// Write each bit plane of a grayscale image as plane_N.pgm
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the benchmark matrix
    Report {
        /// Benchmark config (TOML); the built-in default when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum WmCommand {
    /// Write a black/white mark image into a high bit plane
    EmbedVisible {
        #[arg(long = "in")]
        input: PathBuf,
        /// Mark image; pixels >= 128 are set bits
        #[arg(long)]
        mark: PathBuf,
        /// Top-left corner as row,col
        #[arg(long, value_parser = parse_pair, default_value = "0,0")]
        origin: (usize, usize),
        #[arg(long, default_value_t = DEFAULT_VISIBLE_PLANE)]
        plane: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a visible mark back as a 0/255 image
    ExtractVisible {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_pair, default_value = "0,0")]
        origin: (usize, usize),
        /// Mark size as width,height
        #[arg(long, value_parser = parse_pair)]
        dims: (usize, usize),
        #[arg(long, default_value_t = DEFAULT_VISIBLE_PLANE)]
        plane: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hide a grayscale mark at keyed positions (needs --seed)
    EmbedInvisible {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        mark: PathBuf,
        #[command(flatten)]
        wm: WmArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover an invisible mark by majority vote (needs --seed)
    ExtractInvisible {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = parse_pair)]
        dims: (usize, usize),
        #[command(flatten)]
        wm: WmArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct KeyArgs {
    /// Bits per byte, 1 to 4
    #[arg(long, default_value_t = 1)]
    k: u8,
    #[arg(long, value_enum, default_value_t = KeyModeArg::Nks)]
    mode: KeyModeArg,
    /// Shared secret (sks) or own private key (pks)
    #[arg(long)]
    key: Option<u64>,
    /// Peer public key (pks)
    #[arg(long)]
    peer: Option<u64>,
}

#[derive(Args, Debug)]
struct WmArgs {
    #[arg(long, default_value_t = DEFAULT_REDUNDANCY)]
    redundancy: usize,
    #[arg(long, default_value_t = DEFAULT_INVISIBLE_PLANE)]
    plane: u8,
    /// Place copies by Fibonacci-Lucas scrambling with this index (odd square hosts)
    #[arg(long)]
    fibolucas: Option<u32>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KeyModeArg {
    Nks,
    Sks,
    Pks,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    Raw,
    Framed,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MapArg {
    Arnold,
    Fibolucas,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Csv,
    Grades,
    Markdown,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated numbers, got {s:?}"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| format!("not a number: {v:?}"))
    };
    Ok((num(a)?, num(b)?))
}

impl From<ModeArg> for AppendMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Raw => AppendMode::Raw,
            ModeArg::Framed => AppendMode::Framed,
        }
    }
}

impl KeyArgs {
    fn params(&self) -> Result<EmbedParams> {
        let key = match self.mode {
            KeyModeArg::Nks => StegKey::Nks,
            KeyModeArg::Sks => StegKey::Sks {
                secret: self.key.ok_or_else(|| missing("--key", "sks"))?,
            },
            KeyModeArg::Pks => StegKey::Pks {
                own: KeyPair::from_private(self.key.ok_or_else(|| missing("--key", "pks"))?)?,
                peer_public: self.peer.ok_or_else(|| missing("--peer", "pks"))?,
            },
        };
        EmbedParams::new(self.k, key)
    }
}

impl WmArgs {
    fn key(&self, seed: Option<u64>) -> Result<WmKey> {
        let seed =
            seed.ok_or_else(|| Error::InvalidParameter("invisible watermarks need --seed".into()))?;
        let key = WmKey::new(seed, self.redundancy, self.plane)?;
        Ok(match self.fibolucas {
            Some(index) => key.with_order(SlotOrder::FiboLucas { index }),
            None => key,
        })
    }
}

fn missing(flag: &str, mode: &str) -> Error {
    Error::InvalidParameter(format!("{flag} is required with --mode {mode}"))
}

fn output_format(path: &Path, img: &Image) -> Result<ImageFormat> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    ImageFormat::for_extension(ext, img.channels()).ok_or_else(|| {
        Error::InvalidParameter(format!(
            "cannot pick an image format for {}; use .pgm, .ppm or .bmp",
            path.display()
        ))
    })
}

/// Check that an output path names a usable image format before doing work.
fn check_image_out(path: &Path) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    if ImageFormat::for_extension(ext, 1).is_some() || ImageFormat::for_extension(ext, 3).is_some()
    {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "unsupported output extension for {}; use .pgm, .ppm or .bmp",
            path.display()
        )))
    }
}

/// Write through a temporary sibling and rename, so errors never leave a
/// partial file behind.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("bad output path {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
        .and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn write_image(path: &Path, img: &Image) -> Result<()> {
    let format = output_format(path, img)?;
    write_atomic(path, &save_image(img, format)?)
}

fn run(cli: Cli) -> Result<()> {
    let info = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match cli.command {
        Command::Embed {
            input,
            msg,
            key,
            out,
        } => {
            let params = key.params()?;
            check_image_out(&out)?;
            let cover = read_image_file(&input)?;
            let message = fs::read(&msg)?;
            let stego = steg::embed(&cover, &message, &params)?;
            write_image(&out, &stego)?;
            info(format!(
                "embedded {} of {} bytes",
                message.len(),
                steg::capacity(&cover, params.k())?
            ));
        }
        Command::Extract { input, key, out } => {
            let params = key.params()?;
            let stego = read_image_file(&input)?;
            let message = steg::extract(&stego, &params)?;
            write_atomic(&out, &message)?;
            info(format!("extracted {} bytes", message.len()));
        }
        Command::Append {
            input,
            payload,
            mode,
            out,
        } => {
            let container = fs::read(&input)?;
            let payload = fs::read(&payload)?;
            write_atomic(&out, &append_payload(&container, &payload, mode.into())?)?;
            info(format!("appended {} bytes", payload.len()));
        }
        Command::ExtractAppend { input, mode, out } => {
            let bytes = fs::read(&input)?;
            let payload = extract_payload(&bytes, mode.into())?;
            write_atomic(&out, &payload)?;
            info(format!("extracted {} bytes", payload.len()));
        }
        Command::Wm(wm) => run_wm(wm, cli.seed)?,
        Command::Attack { input, spec, out } => {
            let specs = parse_series(&spec)?;
            check_image_out(&out)?;
            let img = read_image_file(&input)?;
            write_image(&out, &attack_series(&img, &specs)?)?;
        }
        Command::Psnr { a, b } => {
            let report = psnr(&read_image_file(&a)?, &read_image_file(&b)?)?;
            println!("{report}");
        }
        Command::Scramble {
            input,
            map,
            index,
            iters,
            inverse,
            out,
        } => {
            check_image_out(&out)?;
            let img = read_image_file(&input)?;
            let map = match map {
                MapArg::Arnold => ScrambleMap::Arnold,
                MapArg::Fibolucas => ScrambleMap::FiboLucas(index),
            };
            let spec = ScrambleSpec::new(map, iters, img.width())?;
            let result = if inverse {
                unscramble_image(&img, &spec)?
            } else {
                scramble_image(&img, &spec)?
            };
            write_image(&out, &result)?;
        }
        Command::Keygen => {
            let seed = cli
                .seed
                .ok_or_else(|| Error::InvalidParameter("keygen needs --seed".into()))?;
            let pair = KeyPair::generate(seed);
            println!("private={}\npublic={}", pair.private(), pair.public());
        }
        Command::Inspect { input, out_dir } => {
            let img = read_image_file(&input)?;
            for path in inspect(&img, &out_dir)? {
                info(format!("wrote {}", path.display()));
            }
        }
        Command::Report {
            config,
            format,
            out,
        } => {
            let config = match config {
                Some(path) => BenchConfig::load(&path)?,
                None => BenchConfig::default_config(),
            };
            let format = match format {
                FormatArg::Csv => ReportFormat::Csv,
                FormatArg::Grades => ReportFormat::GradesCsv,
                FormatArg::Markdown => ReportFormat::Markdown,
            };
            let rows = run_benchmark(&config);
            for row in &rows {
                if let Some(note) = &row.note {
                    info(format!("{} / {}: {note}", row.technique, row.cover));
                }
            }
            write_atomic(&out, &emit_report(&rows, &config.attacks, format))?;
        }
    }
    Ok(())
}

fn run_wm(cmd: WmCommand, seed: Option<u64>) -> Result<()> {
    match cmd {
        WmCommand::EmbedVisible {
            input,
            mark,
            origin,
            plane,
            out,
        } => {
            check_image_out(&out)?;
            let host = read_image_file(&input)?;
            let mark = MonoMark::from_image(&read_image_file(&mark)?)?;
            write_image(&out, &embed_visible(&host, &mark, origin, plane)?)?;
        }
        WmCommand::ExtractVisible {
            input,
            origin,
            dims,
            plane,
            out,
        } => {
            check_image_out(&out)?;
            let marked = read_image_file(&input)?;
            write_image(
                &out,
                &extract_visible(&marked, origin, dims, plane)?.to_image(),
            )?;
        }
        WmCommand::EmbedInvisible {
            input,
            mark,
            wm,
            out,
        } => {
            let key = wm.key(seed)?;
            check_image_out(&out)?;
            let host = read_image_file(&input)?;
            let mark = GrayMark::from_image(&read_image_file(&mark)?)?;
            write_image(&out, &embed_invisible(&host, &mark, &key)?)?;
        }
        WmCommand::ExtractInvisible {
            input,
            dims,
            wm,
            out,
        } => {
            let key = wm.key(seed)?;
            check_image_out(&out)?;
            let marked = read_image_file(&input)?;
            write_image(&out, &extract_invisible(&marked, &key, dims)?.to_image())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stegolab: {e}");
            ExitCode::from(if e.is_no_frame() { 2 } else { 1 })
        }
    }
}
