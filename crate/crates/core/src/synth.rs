//! Deterministic synthetic RGB corpus.
//!
//! Each image layers a smooth two-color gradient, a handful of flat-shaded
//! ellipses and band-limited noise texture, which gives SSIM a mix of flat,
//! edge and textured windows to work with.

use alloc::vec;
use alloc::vec::Vec;

use libm::{cos, sin};
use rand::Rng;

use crate::filter::gaussian_blur;
use crate::image::ImageBuffer;
use crate::rng::{self, standard_normal, StreamRng};

const MIN_ELLIPSES: usize = 3;
const MAX_ELLIPSES: usize = 7;
/// Blur radius (as a fraction of the side) that band-limits the texture.
const TEXTURE_SCALE: f64 = 1.0 / 32.0;
const TEXTURE_AMPLITUDE: f64 = 0.12;

fn color(rng: &mut StreamRng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn synth_image(rng: &mut StreamRng, size: usize) -> ImageBuffer {
    let n = size * size;
    let side = size as f64;
    let mut planes = vec![vec![0.0; n]; 3];

    // Gradient between two colors along a random direction.
    let angle = rng.random::<f64>() * core::f64::consts::TAU;
    let (dx, dy) = (cos(angle), sin(angle));
    let (c0, c1) = (color(rng), color(rng));
    for y in 0..size {
        for x in 0..size {
            let u = ((x as f64 / side - 0.5) * dx + (y as f64 / side - 0.5) * dy) / core::f64::consts::SQRT_2 + 0.5;
            for c in 0..3 {
                planes[c][y * size + x] = c0[c] + (c1[c] - c0[c]) * u;
            }
        }
    }

    let count = rng.random_range(MIN_ELLIPSES..=MAX_ELLIPSES);
    for _ in 0..count {
        let cx = rng.random::<f64>() * side;
        let cy = rng.random::<f64>() * side;
        let rx = (0.08 + 0.25 * rng.random::<f64>()) * side;
        let ry = (0.08 + 0.25 * rng.random::<f64>()) * side;
        let theta = rng.random::<f64>() * core::f64::consts::PI;
        let (ct, st) = (cos(theta), sin(theta));
        let fill = color(rng);
        for y in 0..size {
            for x in 0..size {
                let (px, py) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let u = (px * ct + py * st) / rx;
                let v = (-px * st + py * ct) / ry;
                if u * u + v * v <= 1.0 {
                    for c in 0..3 {
                        planes[c][y * size + x] = fill[c];
                    }
                }
            }
        }
    }

    let texture_sigma = (side * TEXTURE_SCALE).max(0.5);
    for plane in &mut planes {
        let white: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
        let smooth = gaussian_blur(&white, size, size, texture_sigma);
        let rms = libm::sqrt(smooth.iter().map(|v| v * v).sum::<f64>() / n as f64).max(1e-12);
        for (p, s) in plane.iter_mut().zip(&smooth) {
            *p += TEXTURE_AMPLITUDE * s / rms;
        }
    }

    ImageBuffer::from_planes(size, size, &planes).expect("planes are sized by construction")
}

/// `count` square RGB images of side `size`, reproducible from `seed`.
/// Each image draws from its own stream so prefixes of a corpus agree.
pub fn synth_corpus(seed: u64, count: usize, size: usize) -> Vec<ImageBuffer> {
    (0..count)
        .map(|i| {
            let mut rng = rng::stream(seed, &[rng::label_hash("synth"), i as u64]);
            synth_image(&mut rng, size.max(1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(synth_corpus(7, 4, 64), synth_corpus(7, 4, 64));
        assert_ne!(synth_corpus(7, 1, 64), synth_corpus(8, 1, 64));
    }

    #[test]
    fn empty() {
        assert!(synth_corpus(7, 0, 64).is_empty());
    }

    #[test]
    fn nondegenerate_variance() {
        for (i, im) in synth_corpus(1, 32, 64).iter().enumerate() {
            assert_eq!((im.width(), im.height(), im.channels()), (64, 64, 3));
            assert!(im.variance() > 0.005, "image {i}: {}", im.variance());
        }
    }

    #[test]
    fn prefix_stable() {
        let a = synth_corpus(3, 2, 32);
        let b = synth_corpus(3, 5, 32);
        assert_eq!(a[..], b[..2]);
    }
}
