//! Same-size gaussian blur with replicated borders.

use alloc::vec;
use alloc::vec::Vec;

use libm::{ceil, exp};

/// Normalized taps covering ±3σ.
pub fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = ceil(3.0 * sigma).max(1.0) as isize;
    let two_var = 2.0 * sigma * sigma;
    let mut taps: Vec<f64> = (-radius..=radius).map(|d| exp(-((d * d) as f64) / two_var)).collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Blurs a `w x h` plane; samples past the edge repeat the border.
pub fn gaussian_blur(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sx = clamp(x as isize + k as isize - r, w);
                acc += t * plane[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let sy = clamp(y as isize + k as isize - r, h);
                acc += t * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_plane_is_unchanged() {
        let p = vec![0.3; 35];
        for v in gaussian_blur(&p, 7, 5, 1.6) {
            assert!((v - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn taps_sum_to_one() {
        let t = gaussian_taps(0.8);
        assert_eq!(t.len(), 7);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
