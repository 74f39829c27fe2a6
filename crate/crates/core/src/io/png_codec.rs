//! 8-bit, non-interlaced PNG with the sRGB transfer curve.

use super::{checked_len, quantize, Channels, CodecError, Image};

pub(crate) fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

pub(crate) fn linear_to_srgb(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        v * 12.92
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<Image, CodecError> {
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| CodecError::Truncated(format!("png header: {e}")))?;
    let info = reader.info();
    if info.interlaced {
        return Err(CodecError::Unsupported("interlaced PNG".into()));
    }
    if info.bit_depth != png::BitDepth::Eight {
        return Err(CodecError::Unsupported(format!(
            "PNG bit depth {:?}",
            info.bit_depth
        )));
    }
    let (src_channels, channels) = match info.color_type {
        png::ColorType::Grayscale => (1, Channels::Gray),
        png::ColorType::GrayscaleAlpha => (2, Channels::Gray),
        png::ColorType::Rgb => (3, Channels::Rgb),
        png::ColorType::Rgba => (4, Channels::Rgb),
        png::ColorType::Indexed => {
            return Err(CodecError::Unsupported("palette PNG".into()));
        }
    };
    let (width, height) = (info.width as usize, info.height as usize);
    checked_len(width, height, src_channels)?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| CodecError::Truncated(format!("png data: {e}")))?;
    let keep = channels.count();
    let mut data = Vec::with_capacity(width * height * keep);
    for row in buf[..frame.buffer_size()].chunks_exact(frame.line_size).take(height) {
        for px in row[..width * src_channels].chunks_exact(src_channels) {
            // alpha, when present, is dropped
            data.extend(px[..keep].iter().map(|&b| srgb_to_linear(b as f64 / 255.0)));
        }
    }
    Ok(Image::new(height, width, channels, data)?)
}

pub(super) fn encode(image: &Image) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, image.cols() as u32, image.rows() as u32);
        enc.set_color(match image.channels() {
            Channels::Gray => png::ColorType::Grayscale,
            Channels::Rgb => png::ColorType::Rgb,
        });
        enc.set_depth(png::BitDepth::Eight);
        let samples: Vec<u8> = image
            .data()
            .iter()
            .map(|&v| quantize(linear_to_srgb(v)))
            .collect();
        let mut writer = enc.write_header().expect("writing to a Vec cannot fail");
        writer
            .write_image_data(&samples)
            .expect("sample count matches the declared dimensions");
    }
    out
}
