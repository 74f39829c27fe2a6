//! Deterministic face-like test targets.
//!
//! Only arithmetic and `sqrt` are used so the output is bit-identical across
//! platforms for a given seed.

use super::{Channels, Image};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Rows (as fractions of the height) holding the eyes, nose and mouth.
pub const FEATURE_BAND: (f64, f64) = (0.4, 0.6);

pub const MIN_SYNTH_DIM: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("synthetic faces need at least {MIN_SYNTH_DIM}x{MIN_SYNTH_DIM} pixels, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
}

struct Ellipse {
    ci: f64,
    cj: f64,
    ri: f64,
    rj: f64,
}

impl Ellipse {
    fn radius(&self, i: f64, j: f64) -> f64 {
        let di = (i - self.ci) / self.ri;
        let dj = (j - self.cj) / self.rj;
        (di * di + dj * dj).sqrt()
    }

    /// 1 inside, 0 outside, smoothstep across a band of `soft` (in radius units).
    fn coverage(&self, i: f64, j: f64, soft: f64) -> f64 {
        let t = ((1.0 - self.radius(i, j)) / soft).clamp(0.0, 1.0);
        t * t * (3.0 - 2.0 * t)
    }
}

/// Bright oval face on a darker background with darker eyes, nose shadow and
/// mouth inside [`FEATURE_BAND`]. Features vary with `seed`.
pub fn synth_face(seed: u64, rows: usize, cols: usize) -> Result<Image, SynthError> {
    if rows < MIN_SYNTH_DIM || cols < MIN_SYNTH_DIM {
        return Err(SynthError::TooSmall { rows, cols });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = rows as f64;
    let w = cols as f64;

    let background = rng.gen_range(0.12..0.22);
    let skin = rng.gen_range(0.55..0.75);
    let hair = rng.gen_range(0.05..0.15);
    let face = Ellipse {
        ci: h * rng.gen_range(0.48..0.52),
        cj: w * rng.gen_range(0.47..0.53),
        ri: h * rng.gen_range(0.34..0.42),
        rj: w * rng.gen_range(0.24..0.31),
    };
    let hairline = face.ci - face.ri * rng.gen_range(0.45..0.75);

    let eye_row = h * rng.gen_range(0.43..0.46);
    let eye_gap = face.rj * rng.gen_range(0.38..0.48);
    let eye_ri = h * rng.gen_range(0.015..0.03);
    let eye_rj = w * rng.gen_range(0.04..0.07);
    let eye_depth = rng.gen_range(0.35..0.55);
    let eyes = [
        Ellipse { ci: eye_row, cj: face.cj - eye_gap, ri: eye_ri, rj: eye_rj },
        Ellipse { ci: eye_row, cj: face.cj + eye_gap, ri: eye_ri, rj: eye_rj },
    ];
    let nose = Ellipse {
        ci: h * rng.gen_range(0.50..0.53),
        cj: face.cj,
        ri: h * rng.gen_range(0.02..0.035),
        rj: w * rng.gen_range(0.025..0.04),
    };
    let nose_depth = rng.gen_range(0.15..0.3);
    let mouth = Ellipse {
        ci: h * rng.gen_range(0.56..0.585),
        cj: face.cj,
        ri: h * rng.gen_range(0.01..0.02),
        rj: w * rng.gen_range(0.06..0.1),
    };
    let mouth_depth = rng.gen_range(0.3..0.5);
    let texture = rng.gen_range(0.01..0.03);

    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let fi = i as f64 + 0.5;
        for j in 0..cols {
            let fj = j as f64 + 0.5;
            let cover = face.coverage(fi, fj, 0.05);
            let mut v = skin;
            if fi < hairline {
                v = hair;
            }
            for e in &eyes {
                v *= 1.0 - eye_depth * e.coverage(fi, fj, 0.3);
            }
            v *= 1.0 - nose_depth * nose.coverage(fi, fj, 0.5);
            v *= 1.0 - mouth_depth * mouth.coverage(fi, fj, 0.3);
            let mut px = background + (v - background) * cover;
            px *= 1.0 + texture * rng.gen_range(-1.0..1.0);
            data.push(px.clamp(0.0, 1.0));
        }
    }
    Ok(Image::from_parts_unchecked(rows, cols, Channels::Gray, data))
}

/// Resamples `image` about its center by `scale` into a frame of the same
/// size, filling uncovered pixels with `background`. A face shot from twice
/// the distance is approximated by `scale = 0.5`.
pub fn place_scaled(image: &Image, scale: f64, background: f64) -> Image {
    let (rows, cols) = (image.rows(), image.cols());
    let nc = image.channels().count();
    let ci = rows as f64 / 2.0;
    let cj = cols as f64 / 2.0;
    let mut data = Vec::with_capacity(rows * cols * nc);
    for i in 0..rows {
        for j in 0..cols {
            // source coordinates in pixel-center convention
            let si = ci + (i as f64 + 0.5 - ci) / scale - 0.5;
            let sj = cj + (j as f64 + 0.5 - cj) / scale - 0.5;
            if si < 0.0 || sj < 0.0 || si > (rows - 1) as f64 || sj > (cols - 1) as f64 {
                data.extend(std::iter::repeat_n(background.max(0.0), nc));
                continue;
            }
            let i0 = si.floor() as usize;
            let j0 = sj.floor() as usize;
            let i1 = (i0 + 1).min(rows - 1);
            let j1 = (j0 + 1).min(cols - 1);
            let fi = si - i0 as f64;
            let fj = sj - j0 as f64;
            for c in 0..nc {
                let top = image.get(i0, j0, c) * (1.0 - fj) + image.get(i0, j1, c) * fj;
                let bot = image.get(i1, j0, c) * (1.0 - fj) + image.get(i1, j1, c) * fj;
                data.push(top * (1.0 - fi) + bot * fi);
            }
        }
    }
    Image::from_parts_unchecked(rows, cols, image.channels(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = synth_face(3, 96, 128).unwrap();
        let b = synth_face(3, 96, 128).unwrap();
        assert_eq!(a, b);
        assert!(Image::new(a.rows(), a.cols(), a.channels(), a.data().to_vec()).is_ok());
        assert_ne!(a, synth_face(4, 96, 128).unwrap());
    }

    #[test]
    fn too_small() {
        assert_eq!(
            synth_face(0, 63, 100),
            Err(SynthError::TooSmall { rows: 63, cols: 100 })
        );
    }

    #[test]
    fn face_is_brighter_than_corners() {
        let img = synth_face(11, 120, 160).unwrap();
        assert!(img.get(72, 80, 0) > 2.0 * img.get(2, 2, 0));
    }

    #[test]
    fn identity_scale_is_lossless() {
        let img = synth_face(1, 64, 64).unwrap();
        let same = place_scaled(&img, 1.0, 0.0);
        for (a, b) in img.data().iter().zip(same.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        let small = place_scaled(&img, 0.5, 0.1);
        assert_eq!(small.get(0, 0, 0), 0.1);
    }
}
