//! Full-reference image metrics: SSIM, MS-SSIM and PSNR.
//!
//! SSIM uses gaussian-weighted local moments over every *valid* window
//! position (no padding), with `C1 = (k1·L)²` and `C2 = (k2·L)²`, and averages
//! the per-window index over the image.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log10, pow};

use crate::error::bail;
use crate::image::{to_grayscale, ImageBuffer};
use crate::{Error, Result};

/// Canonical five-scale MS-SSIM exponents.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

/// How multi-channel images are reduced to a single score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelPolicy {
    /// Convert to BT.601 luma first.
    Luma,
    /// Score each channel and average.
    #[default]
    PerChannelMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimParams {
    pub window_size: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
    pub channel_policy: ChannelPolicy,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window_size: 11,
            window_sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            channel_policy: ChannelPolicy::PerChannelMean,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 3 || self.window_size.is_multiple_of(2) {
            bail!(Domain, "SSIM window must be odd and >= 3, got {}", self.window_size);
        }
        if !(self.window_sigma > 0.0) {
            bail!(Domain, "SSIM window sigma must be positive");
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            bail!(Domain, "SSIM constants k1, k2 must be positive");
        }
        if !(self.dynamic_range > 0.0) {
            bail!(Domain, "dynamic range must be positive");
        }
        Ok(())
    }

    /// Normalized 1-D gaussian taps.
    pub fn kernel(&self) -> Vec<f64> {
        let r = (self.window_size / 2) as f64;
        let two_var = 2.0 * self.window_sigma * self.window_sigma;
        let mut k: Vec<f64> = (0..self.window_size)
            .map(|i| {
                let d = i as f64 - r;
                exp(-d * d / two_var)
            })
            .collect();
        let sum: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= sum);
        k
    }
}

/// Valid-mode separable filtering of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = kernel.len();
    let ow = w - n + 1;
    let oh = h - n + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &plane[y * w..(y + 1) * w];
        let dst = &mut rows[y * ow..(y + 1) * ow];
        for (x, out) in dst.iter_mut().enumerate() {
            *out = kernel.iter().zip(&src[x..x + n]).map(|(k, v)| k * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for (j, k) in kernel.iter().enumerate() {
                acc += k * rows[(y + j) * ow + x];
            }
            out[y * ow + x] = acc;
        }
    }
    (out, ow, oh)
}

/// Mean SSIM index and mean contrast-structure term of one plane pair.
fn ssim_components(a: &[f64], b: &[f64], w: usize, h: usize, p: &SsimParams) -> (f64, f64) {
    let kernel = p.kernel();
    let c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    let c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let (mu_a, ow, oh) = filter_valid(a, w, h, &kernel);
    let (mu_b, _, _) = filter_valid(b, w, h, &kernel);
    let (e_aa, _, _) = filter_valid(&aa, w, h, &kernel);
    let (e_bb, _, _) = filter_valid(&bb, w, h, &kernel);
    let (e_ab, _, _) = filter_valid(&ab, w, h, &kernel);
    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let cs = (2.0 * cov + c2) / (var_a + var_b + c2);
        let lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        ssim_sum += lum * cs;
        cs_sum += cs;
    }
    let n = (ow * oh) as f64;
    (ssim_sum / n, cs_sum / n)
}

fn check_plane_pair(a: &[f64], b: &[f64], w: usize, h: usize, window: usize) -> Result<()> {
    if a.len() != w * h || b.len() != w * h {
        bail!(Dimension, "planes must hold {}x{} samples", w, h);
    }
    if w < window || h < window {
        return Err(Error::Window {
            width: w,
            height: h,
            window,
        });
    }
    Ok(())
}

/// SSIM of two single-channel planes.
pub fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize, p: &SsimParams) -> Result<f64> {
    p.validate()?;
    check_plane_pair(a, b, width, height, p.window_size)?;
    Ok(ssim_components(a, b, width, height, p).0)
}

/// 2x2 mean downsampling (odd trailing row/column dropped).
pub fn downsample2(plane: &[f64], w: usize, h: usize) -> (Vec<f64>, usize, usize) {
    let (ow, oh) = (w / 2, h / 2);
    let mut out = Vec::with_capacity(ow * oh);
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out.push(0.25 * (plane[i] + plane[i + 1] + plane[i + w] + plane[i + w + 1]));
        }
    }
    (out, ow, oh)
}

/// MS-SSIM of two single-channel planes. Negative per-scale terms are
/// clipped to zero before exponentiation.
pub fn ms_ssim_plane(
    a: &[f64],
    b: &[f64],
    width: usize,
    height: usize,
    p: &SsimParams,
    weights: &[f64],
) -> Result<f64> {
    p.validate()?;
    if weights.is_empty() {
        bail!(Domain, "MS-SSIM needs at least one scale weight");
    }
    if a.len() != width * height || b.len() != width * height {
        bail!(Dimension, "planes must hold {}x{} samples", width, height);
    }
    let scales = weights.len();
    let required = p.window_size << (scales - 1);
    if width.min(height) < required {
        return Err(Error::Scale {
            width,
            height,
            scales,
            required,
        });
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    let (mut w, mut h) = (width, height);
    let mut score = 1.0;
    for (j, &weight) in weights.iter().enumerate() {
        let (ssim, cs) = ssim_components(&a, &b, w, h, p);
        let term = if j + 1 == scales { ssim } else { cs };
        score *= pow(term.max(0.0), weight);
        if j + 1 < scales {
            let (da, nw, nh) = downsample2(&a, w, h);
            let (db, _, _) = downsample2(&b, w, h);
            a = da;
            b = db;
            w = nw;
            h = nh;
        }
    }
    Ok(score)
}

fn check_pair(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        bail!(
            Dimension,
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        );
    }
    Ok(())
}

/// Applies `metric` per the channel policy.
fn reduce_channels(
    a: &ImageBuffer,
    b: &ImageBuffer,
    policy: ChannelPolicy,
    metric: impl Fn(&[f64], &[f64]) -> Result<f64>,
) -> Result<f64> {
    check_pair(a, b)?;
    match policy {
        ChannelPolicy::Luma => {
            let (ga, gb) = (to_grayscale(a)?, to_grayscale(b)?);
            metric(ga.data(), gb.data())
        }
        ChannelPolicy::PerChannelMean => {
            let ch = a.channels();
            let mut sum = 0.0;
            for c in 0..ch {
                sum += metric(&a.plane(c), &b.plane(c))?;
            }
            Ok(sum / ch as f64)
        }
    }
}

/// SSIM between two images of equal shape.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, p: &SsimParams) -> Result<f64> {
    p.validate()?;
    let (w, h) = (a.width(), a.height());
    if w.min(h) < p.window_size {
        check_pair(a, b)?;
        return Err(Error::Window {
            width: w,
            height: h,
            window: p.window_size,
        });
    }
    reduce_channels(a, b, p.channel_policy, |x, y| Ok(ssim_components(x, y, w, h, p).0))
}

/// MS-SSIM between two images of equal shape.
pub fn ms_ssim(a: &ImageBuffer, b: &ImageBuffer, p: &SsimParams, weights: &[f64]) -> Result<f64> {
    let (w, h) = (a.width(), a.height());
    reduce_channels(a, b, p.channel_policy, |x, y| ms_ssim_plane(x, y, w, h, p, weights))
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` when the images are
/// identical.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer, dynamic_range: f64) -> Result<f64> {
    check_pair(a, b)?;
    if !(dynamic_range > 0.0) {
        bail!(Domain, "dynamic range must be positive");
    }
    let n = a.data().len() as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * log10(dynamic_range * dynamic_range / mse))
}
