use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("image dimensions must be positive, got {rows}x{cols}")]
    EmptyDimensions { rows: usize, cols: usize },
    #[error("pixel buffer holds {got} samples, expected {expected}")]
    BufferLength { got: usize, expected: usize },
    #[error("pixel {index} is {value}; pixels must be finite and >= 0")]
    InvalidPixel { index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channels {
    Gray,
    Rgb,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray => 1,
            Channels::Rgb => 3,
        }
    }
}

/// Linear-light raster, row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    channels: Channels,
    data: Vec<f64>,
}

// Rec. 709 luma weights on linear RGB.
const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

impl Image {
    pub fn new(rows: usize, cols: usize, channels: Channels, data: Vec<f64>) -> Result<Self, ImageError> {
        if rows == 0 || cols == 0 {
            return Err(ImageError::EmptyDimensions { rows, cols });
        }
        let expected = rows * cols * channels.count();
        if data.len() != expected {
            return Err(ImageError::BufferLength {
                got: data.len(),
                expected,
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(ImageError::InvalidPixel { index, value });
        }
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn gray(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        Self::new(rows, cols, Channels::Gray, data)
    }

    pub fn filled(rows: usize, cols: usize, channels: Channels, value: f64) -> Result<Self, ImageError> {
        Self::new(rows, cols, channels, vec![value; rows * cols * channels.count()])
    }

    /// Builds a single-channel image from `f(row, col)`.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::gray(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        let c = self.channels.count();
        self.data[(row * self.cols + col) * c + channel]
    }

    pub fn luminance(&self, row: usize, col: usize) -> f64 {
        match self.channels {
            Channels::Gray => self.get(row, col, 0),
            Channels::Rgb => (0..3).map(|c| LUMA[c] * self.get(row, col, c)).sum(),
        }
    }

    /// Mean luminance of every row.
    pub fn row_means(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.luminance(i, j)).sum::<f64>() / self.cols as f64)
            .collect()
    }

    pub fn mean_luminance(&self) -> f64 {
        self.row_means().iter().sum::<f64>() / self.rows as f64
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: f64) -> Result<Image, ImageError> {
        Image::new(
            self.rows,
            self.cols,
            self.channels,
            self.data.iter().map(|v| v * c).collect(),
        )
    }

    /// Collapses RGB to luminance; gray images are returned as-is.
    pub fn to_gray(&self) -> Image {
        match self.channels {
            Channels::Gray => self.clone(),
            Channels::Rgb => {
                let mut data = Vec::with_capacity(self.rows * self.cols);
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        data.push(self.luminance(i, j));
                    }
                }
                Image {
                    rows: self.rows,
                    cols: self.cols,
                    channels: Channels::Gray,
                    data,
                }
            }
        }
    }

    /// SHA-256 over dimensions and the exact bit patterns of every sample.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.rows as u64).to_le_bytes());
        h.update((self.cols as u64).to_le_bytes());
        h.update((self.channels.count() as u64).to_le_bytes());
        for v in &self.data {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().into()
    }

    pub(crate) fn from_parts_unchecked(rows: usize, cols: usize, channels: Channels, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols * channels.count());
        Self {
            rows,
            cols,
            channels,
            data,
        }
    }
}
