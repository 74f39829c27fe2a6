use anyhow::{bail, Context, Result};
use rsfringe::io::{load_image, synth_face, Channels, Encoding};
use rsfringe::Image;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Parses "a,b,c" or an arithmetic progression "a,b,...,z".
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| -> Result<f64> {
        let v: f64 = s.parse().with_context(|| format!("{s:?} in {text:?} is not a number"))?;
        if !v.is_finite() {
            bail!("{s:?} in {text:?} is not finite");
        }
        Ok(v)
    };
    match parts.as_slice() {
        [a, b, "...", z] => {
            let (a, b, z) = (num(a)?, num(b)?, num(z)?);
            let step = b - a;
            if step == 0.0 || (z - a) / step < 0.0 {
                bail!("{text:?} does not progress from {a} towards {z}");
            }
            let n = ((z - a) / step + 1e-9).floor() as usize;
            if n > 100_000 {
                bail!("{text:?} expands to more than 100000 values");
            }
            Ok((0..=n).map(|k| a + k as f64 * step).collect())
        }
        _ if parts.contains(&"...") => bail!("use \"a,b,...,z\" for a progression, got {text:?}"),
        _ => parts.iter().map(|s| num(s)).collect(),
    }
}

/// The scene image and a stem for output names.
pub fn scene(image: Option<&Path>, seed: u64, rows: usize, cols: usize) -> Result<(Image, String, Encoding)> {
    match image {
        Some(path) => {
            let img = load_image(path).with_context(|| format!("cannot read {}", path.display()))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            let enc = Encoding::from_path(path).unwrap_or(Encoding::Pnm);
            Ok((img, stem, enc))
        }
        None => Ok((synth_face(seed, rows, cols)?, format!("synth-{seed}"), Encoding::Pnm)),
    }
}

pub fn extension(image: &Image, enc: Encoding) -> &'static str {
    match (enc, image.channels()) {
        (Encoding::Png, _) => "png",
        (Encoding::Pnm, Channels::Gray) => "pgm",
        (Encoding::Pnm, Channels::Rgb) => "ppm",
    }
}

pub fn out_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).with_context(|| format!("cannot write {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_list("1000,1200,...,2000").unwrap(), vec![1000.0, 1200.0, 1400.0, 1600.0, 1800.0, 2000.0]);
        assert_eq!(parse_list("5, 3,...,1").unwrap(), vec![5.0, 3.0, 1.0]);
        assert_eq!(parse_list("18,36").unwrap(), vec![18.0, 36.0]);
        assert_eq!(parse_list("-45").unwrap(), vec![-45.0]);
        assert!(parse_list("1,1,...,3").is_err());
        assert!(parse_list("1,2,...,0").is_err());
        assert!(parse_list("1,...,3").is_err());
        assert!(parse_list("x").is_err());
        assert!(parse_list("").is_err());
    }
}
