//! Construction of the 4-channel conditioning input: an XDoG line sketch of
//! the target plus a geometrically distorted (TPS warp, then rotation) copy
//! used as the color reference.

use alloc::vec::Vec;

use libm::{cos, log, round, sin, tanh};
use rand::Rng;

use crate::error::bail;
use crate::filter::gaussian_blur;
use crate::image::{sample_bilinear, to_grayscale, ImageBuffer};
use crate::linalg;
use crate::rng::standard_normal;
use crate::{Error, Result};

/// Parameters of the extended difference-of-Gaussians operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XdogParams {
    /// Standard deviation of the narrow blur, in pixels.
    pub sigma_small: f64,
    /// Ratio of the wide blur to the narrow one.
    pub k: f64,
    /// Weight of the wide blur, in `(0, 1)`.
    pub tau: f64,
    /// Threshold below which the response darkens.
    pub epsilon: f64,
    /// Steepness of the soft threshold.
    pub phi_sharpness: f64,
}

impl Default for XdogParams {
    fn default() -> Self {
        Self {
            sigma_small: 0.8,
            k: 1.6,
            tau: 0.98,
            epsilon: 0.1,
            phi_sharpness: 10.0,
        }
    }
}

impl XdogParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_small > 0.0) {
            bail!(Domain, "XDoG sigma must be positive");
        }
        if !(self.k > 1.0) {
            bail!(Domain, "XDoG k must exceed 1");
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            bail!(Domain, "XDoG tau must lie in (0, 1)");
        }
        if !(self.phi_sharpness > 0.0) {
            bail!(Domain, "XDoG sharpness must be positive");
        }
        Ok(())
    }
}

/// Single-channel line sketch: white wherever the image is flat, dark strokes
/// along edges.
///
/// The edge-sharpening term `p·(G_σ - G_kσ)` with `p = τ/(1-τ)` is laid over
/// a white base rather than over `G_σ`, so the sketch carries lines only and
/// no tone.
pub fn xdog_sketch(image: &ImageBuffer, params: &XdogParams) -> Result<ImageBuffer> {
    params.validate()?;
    let (w, h) = (image.width(), image.height());
    if w < 3 || h < 3 {
        bail!(Dimension, "XDoG needs at least 3x3 pixels, got {w}x{h}");
    }
    let gray = to_grayscale(image)?;
    let narrow = gaussian_blur(gray.data(), w, h, params.sigma_small);
    let wide = gaussian_blur(gray.data(), w, h, params.k * params.sigma_small);
    let p = params.tau / (1.0 - params.tau);
    let data = narrow
        .iter()
        .zip(&wide)
        .map(|(a, b)| {
            let d = 1.0 + p * (a - b);
            if d >= params.epsilon {
                1.0
            } else {
                1.0 + tanh(params.phi_sharpness * (d - params.epsilon))
            }
        })
        .collect();
    ImageBuffer::new(w, h, 1, data)
}

/// Thin-plate-spline jitter and rotation settings for the reference image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpsWarpParams {
    /// Control points per side.
    pub grid: usize,
    /// Control-point displacement std as a fraction of the image side.
    pub jitter_std: f64,
    /// Maximum absolute rotation, degrees.
    pub rotation_range: f64,
}

impl Default for TpsWarpParams {
    fn default() -> Self {
        Self {
            grid: 4,
            jitter_std: 0.03,
            rotation_range: 15.0,
        }
    }
}

impl TpsWarpParams {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            bail!(Domain, "TPS grid needs at least 2 points per side");
        }
        if !(self.jitter_std >= 0.0) || !self.jitter_std.is_finite() {
            bail!(Domain, "TPS jitter must be finite and >= 0");
        }
        if !(0.0..=45.0).contains(&self.rotation_range) {
            bail!(Domain, "rotation range must lie in [0, 45] degrees");
        }
        Ok(())
    }
}

/// `U(r) = r² log r²` with `U(0) = 0`, taking `r²` directly.
fn tps_kernel(r2: f64) -> f64 {
    if r2 == 0.0 {
        0.0
    } else {
        r2 * log(r2)
    }
}

/// A fitted 2-D thin-plate spline.
#[derive(Debug, Clone)]
pub struct ThinPlateSpline {
    centers: Vec<[f64; 2]>,
    /// Kernel weights followed by affine terms `(1, x, y)`, per output axis.
    coef: Vec<[f64; 2]>,
}

impl ThinPlateSpline {
    /// Interpolates `from[i] ↦ to[i]` exactly.
    pub fn fit(from: &[[f64; 2]], to: &[[f64; 2]]) -> Result<Self> {
        let n = from.len();
        if n != to.len() || n < 3 {
            bail!(Dimension, "TPS needs matching control sets of at least 3 points");
        }
        let size = n + 3;
        let mut a = alloc::vec![0.0; size * size];
        let mut rhs = alloc::vec![0.0; size * 2];
        for i in 0..n {
            for j in 0..n {
                let dx = from[i][0] - from[j][0];
                let dy = from[i][1] - from[j][1];
                a[i * size + j] = tps_kernel(dx * dx + dy * dy);
            }
            let p = [1.0, from[i][0], from[i][1]];
            for (k, v) in p.iter().enumerate() {
                a[i * size + n + k] = *v;
                a[(n + k) * size + i] = *v;
            }
            rhs[i * 2] = to[i][0];
            rhs[i * 2 + 1] = to[i][1];
        }
        let sol = linalg::solve(a, rhs, size, 2, 1e-12).ok_or(Error::SingularSystem)?;
        Ok(Self {
            centers: from.to_vec(),
            coef: sol.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        })
    }

    pub fn eval(&self, p: [f64; 2]) -> [f64; 2] {
        let n = self.centers.len();
        let mut out = [0.0; 2];
        for (c, w) in self.centers.iter().zip(&self.coef[..n]) {
            let dx = p[0] - c[0];
            let dy = p[1] - c[1];
            let u = tps_kernel(dx * dx + dy * dy);
            out[0] += w[0] * u;
            out[1] += w[1] * u;
        }
        let aff = &self.coef[n..];
        for axis in 0..2 {
            out[axis] += aff[0][axis] + aff[1][axis] * p[0] + aff[2][axis] * p[1];
        }
        out
    }
}

/// Rounds coordinates that sit within floating-point noise of a pixel
/// center so that exact permutations resample exactly.
fn snap(v: f64) -> f64 {
    let r = round(v);
    if (v - r).abs() < 1e-9 {
        r
    } else {
        v
    }
}

/// Inverse-maps every output pixel through `source_of` and resamples
/// bilinearly with border replication.
fn resample(image: &ImageBuffer, source_of: impl Fn(f64, f64) -> (f64, f64)) -> Result<ImageBuffer> {
    let ch = image.channels();
    let mut data = Vec::with_capacity(image.data().len());
    for y in 0..image.height() {
        for x in 0..image.width() {
            let (sx, sy) = source_of(x as f64, y as f64);
            let (sx, sy) = (snap(sx), snap(sy));
            for c in 0..ch {
                data.push(sample_bilinear(image, sx, sy, c));
            }
        }
    }
    ImageBuffer::new(image.width(), image.height(), ch, data)
}

/// Warps `image` by jittering a regular grid of control points and
/// resampling through the thin-plate spline that maps jittered positions back
/// to their origins. A singular fit is retried once with fresh jitter.
pub fn tps_warp<R: Rng + ?Sized>(image: &ImageBuffer, params: &TpsWarpParams, rng: &mut R) -> Result<ImageBuffer> {
    params.validate()?;
    if params.jitter_std == 0.0 {
        return Ok(image.clone());
    }
    let (w, h) = (image.width(), image.height());
    let side = w.max(h) as f64;
    let g = params.grid;
    let mut sources = Vec::with_capacity(g * g);
    for j in 0..g {
        for i in 0..g {
            let fx = i as f64 / (g - 1) as f64;
            let fy = j as f64 / (g - 1) as f64;
            // Normalized by the long side so the kernel stays well scaled.
            sources.push([fx * (w - 1) as f64 / side, fy * (h - 1) as f64 / side]);
        }
    }
    let mut attempt = || -> Result<ThinPlateSpline> {
        let targets: Vec<[f64; 2]> = sources
            .iter()
            .map(|s| {
                [
                    s[0] + params.jitter_std * standard_normal(rng),
                    s[1] + params.jitter_std * standard_normal(rng),
                ]
            })
            .collect();
        ThinPlateSpline::fit(&targets, &sources)
    };
    let spline = match attempt() {
        Err(Error::SingularSystem) => attempt()?,
        other => other?,
    };
    resample(image, |x, y| {
        let [sx, sy] = spline.eval([x / side, y / side]);
        (sx * side, sy * side)
    })
}

/// Rotates about the image center by `angle_degrees` (counter-clockwise as
/// displayed), bilinear sampling with border replication.
pub fn rotate(image: &ImageBuffer, angle_degrees: f64) -> Result<ImageBuffer> {
    if !angle_degrees.is_finite() {
        bail!(Domain, "rotation angle must be finite");
    }
    if angle_degrees == 0.0 {
        return Ok(image.clone());
    }
    let theta = angle_degrees.to_radians();
    let (c, s) = (cos(theta), sin(theta));
    let cx = (image.width() - 1) as f64 / 2.0;
    let cy = (image.height() - 1) as f64 / 2.0;
    resample(image, |x, y| {
        let (dx, dy) = (x - cx, y - cy);
        (cx + c * dx - s * dy, cy + s * dx + c * dy)
    })
}

/// Uniform angle in `[-range, range]` degrees.
pub fn random_rotation<R: Rng + ?Sized>(range: f64, rng: &mut R) -> f64 {
    if range == 0.0 {
        return 0.0;
    }
    rng.random_range(-range..=range)
}

/// Warp followed by a random rotation.
pub fn distorted_reference<R: Rng + ?Sized>(
    image: &ImageBuffer,
    params: &TpsWarpParams,
    rng: &mut R,
) -> Result<ImageBuffer> {
    let warped = tps_warp(image, params, rng)?;
    let angle = random_rotation(params.rotation_range, rng);
    rotate(&warped, angle)
}

/// Concatenates a 3-channel reference and a 1-channel sketch into
/// `R, G, B, sketch`.
pub fn build_cond(reference: &ImageBuffer, sketch: &ImageBuffer) -> Result<ImageBuffer> {
    if reference.channels() != 3 || sketch.channels() != 1 {
        bail!(
            Dimension,
            "condition needs a 3-channel reference and 1-channel sketch, got {} and {}",
            reference.channels(),
            sketch.channels()
        );
    }
    if reference.width() != sketch.width() || reference.height() != sketch.height() {
        bail!(
            Dimension,
            "reference is {}x{}, sketch is {}x{}",
            reference.width(),
            reference.height(),
            sketch.width(),
            sketch.height()
        );
    }
    let data = reference
        .data()
        .chunks_exact(3)
        .zip(sketch.data())
        .flat_map(|(rgb, &s)| [rgb[0], rgb[1], rgb[2], s])
        .collect();
    ImageBuffer::new(reference.width(), reference.height(), 4, data)
}

/// Splits a 4-channel condition back into reference and sketch.
pub fn split_cond(cond: &ImageBuffer) -> Result<(ImageBuffer, ImageBuffer)> {
    if cond.channels() != 4 {
        bail!(Dimension, "condition must have 4 channels, got {}", cond.channels());
    }
    let mut rgb = Vec::with_capacity(cond.width() * cond.height() * 3);
    let mut sketch = Vec::with_capacity(cond.width() * cond.height());
    for px in cond.data().chunks_exact(4) {
        rgb.extend_from_slice(&px[..3]);
        sketch.push(px[3]);
    }
    Ok((
        ImageBuffer::new(cond.width(), cond.height(), 3, rgb)?,
        ImageBuffer::new(cond.width(), cond.height(), 1, sketch)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ssim, SsimParams};
    use crate::rng::stream;
    use crate::synth::synth_corpus;

    #[test]
    fn constant_images_sketch_white() {
        for level in [0.0, 0.2, 0.5, 1.0] {
            let im = ImageBuffer::filled(16, 12, 3, level).unwrap();
            let sk = xdog_sketch(&im, &XdogParams::default()).unwrap();
            assert_eq!(sk.channels(), 1);
            assert!(sk.data().iter().all(|&v| v >= 0.99), "level {level}");
        }
    }

    #[test]
    fn step_edge_is_drawn_near_the_edge() {
        let edge = 20;
        let im = ImageBuffer::from_fn(40, 16, 1, |x, _, _| if x < edge { 0.3 } else { 0.9 }).unwrap();
        let sk = xdog_sketch(&im, &XdogParams::default()).unwrap();
        let row = 8;
        let (argmin, min) = (0..40)
            .map(|x| (x, sk.get(x, row, 0)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(min < 0.5);
        assert!((argmin as isize - edge as isize).abs() <= 2, "argmin {argmin}");
    }

    #[test]
    fn sketch_is_deterministic_and_bounded() {
        let im = &synth_corpus(4, 1, 32)[0];
        let a = xdog_sketch(im, &XdogParams::default()).unwrap();
        assert_eq!(a, xdog_sketch(im, &XdogParams::default()).unwrap());
        assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let tiny = ImageBuffer::filled(2, 5, 1, 0.5).unwrap();
        assert!(matches!(
            xdog_sketch(&tiny, &XdogParams::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_jitter_and_zero_angle_are_identities() {
        let im = &synth_corpus(5, 1, 24)[0];
        let p = TpsWarpParams {
            jitter_std: 0.0,
            ..Default::default()
        };
        assert_eq!(&tps_warp(im, &p, &mut stream(1, &[])).unwrap(), im);
        assert_eq!(&rotate(im, 0.0).unwrap(), im);
    }

    #[test]
    fn tps_interpolates_control_points() {
        let from = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        let to = [[0.1, 0.0], [1.0, 0.05], [0.0, 0.9], [1.1, 1.0], [0.45, 0.55]];
        let tps = ThinPlateSpline::fit(&from, &to).unwrap();
        for (f, t) in from.iter().zip(&to) {
            let e = tps.eval(*f);
            assert!((e[0] - t[0]).abs() < 1e-12 && (e[1] - t[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn tps_reproduces_affine_maps() {
        let from = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.3, 0.6]];
        let affine = |p: [f64; 2]| [0.2 + 1.1 * p[0] - 0.3 * p[1], -0.1 + 0.4 * p[0] + 0.9 * p[1]];
        let to: Vec<_> = from.iter().map(|p| affine(*p)).collect();
        let tps = ThinPlateSpline::fit(&from, &to).unwrap();
        let q = tps.eval([0.7, 0.2]);
        let want = affine([0.7, 0.2]);
        assert!((q[0] - want[0]).abs() < 1e-10 && (q[1] - want[1]).abs() < 1e-10);
    }

    #[test]
    fn collinear_controls_are_singular() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        assert!(matches!(ThinPlateSpline::fit(&pts, &pts), Err(Error::SingularSystem)));
    }

    #[test]
    fn warp_is_deterministic_and_nearly_mean_preserving() {
        let p = TpsWarpParams::default();
        for (i, im) in synth_corpus(6, 6, 48).iter().enumerate() {
            let a = tps_warp(im, &p, &mut stream(2, &[i as u64])).unwrap();
            let b = tps_warp(im, &p, &mut stream(2, &[i as u64])).unwrap();
            assert_eq!(a, b);
            assert_ne!(&a, im);
            assert!((a.mean() - im.mean()).abs() < 0.02, "image {i}");
        }
    }

    #[test]
    fn quarter_turn_is_an_index_permutation() {
        let im = &synth_corpus(8, 1, 17)[0];
        let r = rotate(im, 90.0).unwrap();
        let n = 17;
        for y in 0..n {
            for x in 0..n {
                for c in 0..3 {
                    let want = im.get(n - 1 - y, x, c);
                    assert!((r.get(x, y, c) - want).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rotation_round_trip_preserves_interior() {
        let im = &synth_corpus(9, 1, 64)[0];
        let back = rotate(&rotate(im, 12.0).unwrap(), -12.0).unwrap();
        let crop = |m: &ImageBuffer| ImageBuffer::from_fn(32, 32, 3, |x, y, c| m.get(x + 16, y + 16, c)).unwrap();
        let s = ssim(&crop(im), &crop(&back), &SsimParams::default()).unwrap();
        assert!(s > 0.95, "interior SSIM {s}");
    }

    #[test]
    fn condition_channels() {
        let reference = ImageBuffer::from_fn(3, 2, 3, |_, _, c| [0.1, 0.2, 0.3][c]).unwrap();
        let sketch = ImageBuffer::filled(3, 2, 1, 0.9).unwrap();
        let cond = build_cond(&reference, &sketch).unwrap();
        assert_eq!(cond.channels(), 4);
        assert_eq!(&cond.data()[..4], &[0.1, 0.2, 0.3, 0.9]);
        let (r, s) = split_cond(&cond).unwrap();
        assert_eq!((r, s), (reference.clone(), sketch));
        let wrong = ImageBuffer::filled(2, 2, 1, 0.9).unwrap();
        assert!(matches!(build_cond(&reference, &wrong), Err(Error::Dimension(_))));
    }

    #[test]
    fn rotation_range_validation() {
        let p = TpsWarpParams {
            rotation_range: 60.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let mut rng = stream(1, &[]);
        for _ in 0..100 {
            assert!(random_rotation(15.0, &mut rng).abs() <= 15.0);
        }
    }
}
