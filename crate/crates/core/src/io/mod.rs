//! Images, codecs, synthetic faces, manifests and tabular reports.
//!
//! Pixels are linear-light `f64` intensities. PNM files are mapped linearly
//! to `[0, 1]`; PNG files are treated as sRGB and linearized on decode.

mod image;
mod manifest;
mod pnm;
mod png_codec;
mod synth;
mod table;

pub use self::image::{Channels, Image, ImageError};
pub use manifest::{Condition, Manifest, ManifestEntry, ManifestError};
pub use synth::{place_scaled, synth_face, SynthError, FEATURE_BAND};
pub use table::{write_rate_table, RateRow};

use std::path::Path;
use thiserror::Error;

/// Largest pixel count any decoder will allocate for.
pub const MAX_PIXELS: usize = 1 << 28;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("unsupported format: {0}")]
    Unsupported(String),
    #[error("truncated or malformed data: {0}")]
    Truncated(String),
    #[error("image dimensions {width}x{height}x{channels} exceed limits")]
    DimensionOverflow {
        width: usize,
        height: usize,
        channels: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// On-disk encodings understood by [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// Binary PNM: P5 for gray, P6 for RGB.
    Pnm,
    /// 8-bit non-interlaced PNG with sRGB transfer.
    Png,
}

impl Encoding {
    /// Picks an encoding from a file extension (`pgm`, `ppm`, `pnm`, `png`).
    pub fn from_path(path: &Path) -> Option<Encoding> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "pgm" | "ppm" | "pnm" => Some(Encoding::Pnm),
            "png" => Some(Encoding::Png),
            _ => None,
        }
    }
}

/// Sniffs the magic bytes and decodes a PNM or PNG file.
pub fn decode_image(bytes: &[u8]) -> Result<Image, CodecError> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        png_codec::decode(bytes)
    } else if bytes.len() >= 2 && bytes[0] == b'P' {
        pnm::decode(bytes)
    } else {
        Err(CodecError::Unsupported("unrecognized magic bytes".into()))
    }
}

pub fn encode_image(image: &Image, encoding: Encoding) -> Vec<u8> {
    match encoding {
        Encoding::Pnm => pnm::encode(image),
        Encoding::Png => png_codec::encode(image),
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image, CodecError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_image(&bytes)
}

pub fn save_image(image: &Image, path: impl AsRef<Path>, encoding: Encoding) -> Result<(), CodecError> {
    let path = path.as_ref();
    std::fs::write(path, encode_image(image, encoding)).map_err(|source| CodecError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Clamps to `[0, 1]` and rounds half up to 8 bits.
pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor() as u8
}

pub(crate) fn checked_len(width: usize, height: usize, channels: usize) -> Result<usize, CodecError> {
    width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|&n| n > 0 && n <= MAX_PIXELS)
        .ok_or(CodecError::DimensionOverflow {
            width,
            height,
            channels,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_rounds_half_up() {
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(2.0), 255);
        assert_eq!(quantize(-1.0), 0);
        assert_eq!(quantize(0.5 / 255.0), 1);
        assert_eq!(quantize(0.49 / 255.0), 0);
    }

    #[test]
    fn unknown_magic() {
        assert!(matches!(
            decode_image(b"GIF89a"),
            Err(CodecError::Unsupported(_))
        ));
        assert!(matches!(decode_image(b""), Err(CodecError::Unsupported(_))));
    }

    #[test]
    fn encoding_from_extension() {
        assert_eq!(Encoding::from_path(Path::new("a/b.PGM")), Some(Encoding::Pnm));
        assert_eq!(Encoding::from_path(Path::new("x.png")), Some(Encoding::Png));
        assert_eq!(Encoding::from_path(Path::new("x.jpg")), None);
    }
}
