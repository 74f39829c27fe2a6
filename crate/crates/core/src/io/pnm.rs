//! Binary PGM (P5) and PPM (P6), 8-bit samples only.

use super::{checked_len, quantize, Channels, CodecError, Image};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, CodecError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| CodecError::Truncated(format!("{what} does not fit in usize")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(CodecError::Truncated(format!("missing {what} in PNM header")));
        }
        Ok(value)
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<Image, CodecError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => Channels::Gray,
        Some(b"P6") => Channels::Rgb,
        Some(m) if m[0] == b'P' => {
            return Err(CodecError::Unsupported(format!(
                "PNM variant {} (only binary P5/P6)",
                String::from_utf8_lossy(m)
            )))
        }
        _ => return Err(CodecError::Unsupported("not a PNM file".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(CodecError::Unsupported(format!("PNM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(CodecError::Truncated("missing raster separator".into())),
    }
    let len = checked_len(width, height, channels.count())?;
    let raster = bytes
        .get(cur.pos..)
        .filter(|r| r.len() >= len)
        .ok_or_else(|| CodecError::Truncated(format!("expected {len} raster bytes")))?;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(len);
    for &b in &raster[..len] {
        if b as usize > maxval {
            return Err(CodecError::Truncated(format!("sample {b} exceeds maxval {maxval}")));
        }
        data.push(b as f64 / scale);
    }
    Ok(Image::new(height, width, channels, data)?)
}

pub(super) fn encode(image: &Image) -> Vec<u8> {
    let magic = match image.channels() {
        Channels::Gray => "P5",
        Channels::Rgb => "P6",
    };
    let mut out = format!("{magic}\n{} {}\n255\n", image.cols(), image.rows()).into_bytes();
    out.extend(image.data().iter().map(|&v| quantize(v)));
    out
}
