//! Image data hiding toolkit.
//!
//! * [`container`]: payloads appended past the end of BMP/PNG/JPEG data
//! * [`steg`]: k-LSB substitution with keyless, secret-key and public-key modes
//! * [`watermark`]: visible MSB-plane and invisible keyed redundant marks
//! * [`attacks`] and [`metrics`]: robustness harness and PSNR/BER
//! * [`report`]: benchmark runner that grades every technique

pub mod attacks;
pub mod container;
pub mod error;
pub mod keys;
pub mod metrics;
pub mod raster;
pub mod report;
pub mod steg;
pub mod watermark;

pub use error::{Error, Result};
