//! Raster types and pixel-space conversions.
//!
//! [`ImageBuffer`] holds display-range samples in `[0, 1]`; every producing
//! operation clamps into that range. [`DiffusionTensor`] holds the centered,
//! unbounded values the diffusion math works with (`x = 2s - 1`).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::bail;
use crate::Result;

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major, channel-interleaved raster with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

/// Row-major, channel-interleaved tensor of finite, unbounded samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionTensor {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

fn check_shape(width: usize, height: usize, channels: usize, len: usize) -> Result<()> {
    if width == 0 || height == 0 {
        bail!(Dimension, "image sides must be at least 1, got {width}x{height}");
    }
    if channels == 0 {
        bail!(Dimension, "channel count must be at least 1");
    }
    if width * height * channels != len {
        bail!(
            Dimension,
            "{width}x{height}x{channels} needs {} samples, got {len}",
            width * height * channels
        );
    }
    Ok(())
}

impl ImageBuffer {
    /// Builds an image from raw samples. Samples are clamped into `[0, 1]`;
    /// NaN samples are rejected.
    pub fn new(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        check_shape(width, height, channels, data.len())?;
        if !matches!(channels, 1 | 3 | 4) {
            bail!(Format, "unsupported channel count {channels}");
        }
        for s in &mut data {
            if s.is_nan() {
                bail!(Domain, "NaN sample in image data");
            }
            *s = s.clamp(0.0, 1.0);
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds an image by evaluating `f(x, y, c)` for every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Extracts channel `c` as a planar row-major vector.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Builds an image from planar channel data.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<f64>]) -> Result<Self> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            bail!(Dimension, "every plane must hold {n} samples");
        }
        let channels = planes.len();
        let mut data = Vec::with_capacity(n * channels);
        for i in 0..n {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Self::new(width, height, channels, data)
    }

    /// Mean of all samples.
    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Population variance of all samples.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / self.data.len() as f64
    }

    fn same_dims(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl DiffusionTensor {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(width, height, channels, data.len())?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(Domain, "non-finite sample at index {i}");
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::new(width, height, channels, vec![0.0; width * height * channels])
    }

    /// A tensor shaped as a flat vector (`len x 1 x 1`).
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Self::new(n, 1, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Returns a tensor of the same shape holding `f(a_i, b_i)`.
    ///
    /// The result is not re-validated; callers check finiteness where it
    /// matters (the samplers do so every step).
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.same_shape(other) {
            bail!(
                Shape,
                "{}x{}x{} vs {}x{}x{}",
                self.width,
                self.height,
                self.channels,
                other.width,
                other.height,
                other.channels
            );
        }
        Ok(Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        Self {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// BT.601 luma. One-channel input is returned unchanged; RGBA is rejected.
pub fn to_grayscale(image: &ImageBuffer) -> Result<ImageBuffer> {
    match image.channels {
        1 => Ok(image.clone()),
        3 => {
            let data = image
                .data
                .chunks_exact(3)
                .map(|px| LUMA_WEIGHTS[0] * px[0] + LUMA_WEIGHTS[1] * px[1] + LUMA_WEIGHTS[2] * px[2])
                .collect();
            ImageBuffer::new(image.width, image.height, 1, data)
        }
        c => bail!(Format, "grayscale conversion needs 1 or 3 channels, got {c}"),
    }
}

/// Maps `[0, 1]` pixels to `[-1, 1]` diffusion space.
pub fn to_diffusion(image: &ImageBuffer) -> DiffusionTensor {
    DiffusionTensor {
        width: image.width,
        height: image.height,
        channels: image.channels,
        data: image.data.iter().map(|&s| 2.0 * s - 1.0).collect(),
    }
}

/// Maps diffusion space back to pixels, clamping into `[0, 1]`.
pub fn from_diffusion(t: &DiffusionTensor) -> Result<ImageBuffer> {
    ImageBuffer::new(
        t.width,
        t.height,
        t.channels,
        t.data.iter().map(|&x| (x + 1.0) * 0.5).collect(),
    )
}

/// Tiles equally sized images row-major into a `rows x cols` grid; empty
/// cells stay black.
pub fn make_grid(images: &[ImageBuffer], rows: usize, cols: usize) -> Result<ImageBuffer> {
    let Some(first) = images.first() else {
        bail!(Dimension, "grid needs at least one image");
    };
    if rows == 0 || cols == 0 {
        bail!(Dimension, "grid must have at least one row and column");
    }
    if images.len() > rows * cols {
        bail!(Dimension, "{} images do not fit a {rows}x{cols} grid", images.len());
    }
    if let Some(bad) = images
        .iter()
        .position(|im| !im.same_dims(first) || im.channels != first.channels)
    {
        bail!(Dimension, "tile {bad} differs in size or channel count from tile 0");
    }
    let (tw, th, ch) = (first.width, first.height, first.channels);
    let width = cols * tw;
    let height = rows * th;
    let mut data = vec![0.0; width * height * ch];
    for (k, tile) in images.iter().enumerate() {
        let (r, c) = (k / cols, k % cols);
        for y in 0..th {
            let dst = ((r * th + y) * width + c * tw) * ch;
            let src = y * tw * ch;
            data[dst..dst + tw * ch].copy_from_slice(&tile.data[src..src + tw * ch]);
        }
    }
    ImageBuffer::new(width, height, ch, data)
}

/// Bilinear sample of channel `c` at fractional coordinates, replicating
/// the border for out-of-range positions.
pub(crate) fn sample_bilinear(image: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let max_x = (image.width - 1) as f64;
    let max_y = (image.height - 1) as f64;
    let x = x.clamp(0.0, max_x);
    let y = y.clamp(0.0, max_y);
    let x0 = libm::floor(x);
    let y0 = libm::floor(y);
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as usize;
    let y0 = y0 as usize;
    let x1 = (x0 + 1).min(image.width - 1);
    let y1 = (y0 + 1).min(image.height - 1);
    let top = image.get(x0, y0, c) * (1.0 - fx) + image.get(x1, y0, c) * fx;
    let bottom = image.get(x0, y1, c) * (1.0 - fx) + image.get(x1, y1, c) * fx;
    top * (1.0 - fy) + bottom * fy
}
