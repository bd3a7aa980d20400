//! Independent reference implementations used by integration and
//! acceptance tests. Nothing here calls into the library's metric or
//! sampler code.
#![allow(dead_code)]

/// Direct-convolution SSIM over valid 2-D windows with explicit 2-D
/// gaussian weights and two-pass local moments.
pub mod ssim_oracle {
    pub struct Params {
        pub window: usize,
        pub sigma: f64,
        pub k1: f64,
        pub k2: f64,
        pub range: f64,
    }

    pub const DEFAULT: Params = Params {
        window: 11,
        sigma: 1.5,
        k1: 0.01,
        k2: 0.03,
        range: 1.0,
    };

    fn weights(p: &Params) -> Vec<f64> {
        let r = (p.window / 2) as f64;
        let mut w = Vec::with_capacity(p.window * p.window);
        for j in 0..p.window {
            for i in 0..p.window {
                let (dx, dy) = (i as f64 - r, j as f64 - r);
                w.push((-(dx * dx + dy * dy) / (2.0 * p.sigma * p.sigma)).exp());
            }
        }
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    }

    /// Mean SSIM and mean contrast-structure over all valid windows.
    pub fn components(a: &[f64], b: &[f64], w: usize, h: usize, p: &Params) -> (f64, f64) {
        let wt = weights(p);
        let n = p.window;
        let c1 = (p.k1 * p.range).powi(2);
        let c2 = (p.k2 * p.range).powi(2);
        let (mut ssim, mut cs, mut count) = (0.0, 0.0, 0usize);
        for y0 in 0..=h - n {
            for x0 in 0..=w - n {
                let (mut ma, mut mb) = (0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        let k = (y0 + j) * w + x0 + i;
                        ma += wt[j * n + i] * a[k];
                        mb += wt[j * n + i] * b[k];
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for j in 0..n {
                    for i in 0..n {
                        let k = (y0 + j) * w + x0 + i;
                        let (da, db) = (a[k] - ma, b[k] - mb);
                        va += wt[j * n + i] * da * da;
                        vb += wt[j * n + i] * db * db;
                        cov += wt[j * n + i] * da * db;
                    }
                }
                let l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                let s = (2.0 * cov + c2) / (va + vb + c2);
                ssim += l * s;
                cs += s;
                count += 1;
            }
        }
        (ssim / count as f64, cs / count as f64)
    }

    pub fn ssim(a: &[f64], b: &[f64], w: usize, h: usize, p: &Params) -> f64 {
        components(a, b, w, h, p).0
    }

    fn half(img: &[f64], w: usize, h: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for y in 0..h / 2 {
            for x in 0..w / 2 {
                let at = |dx: usize, dy: usize| img[(2 * y + dy) * w + 2 * x + dx];
                out.push((at(0, 0) + at(1, 0) + at(0, 1) + at(1, 1)) / 4.0);
            }
        }
        out
    }

    /// Contrast-structure terms at every scale but the last, full SSIM at
    /// the last, each clipped at zero and raised to its weight.
    pub fn ms_ssim(a: &[f64], b: &[f64], w: usize, h: usize, p: &Params, weights: &[f64]) -> f64 {
        let (mut a, mut b, mut w, mut h) = (a.to_vec(), b.to_vec(), w, h);
        let mut out = 1.0;
        for (j, &e) in weights.iter().enumerate() {
            let (s, c) = components(&a, &b, w, h, p);
            let t = if j + 1 == weights.len() { s } else { c };
            out *= t.max(0.0).powf(e);
            a = half(&a, w, h);
            b = half(&b, w, h);
            w /= 2;
            h /= 2;
        }
        out
    }
}

/// The scalar Gaussian-oracle problem with `μ = 0`, `v = 1`:
/// `D(x; σ) = x/(1+σ²)` and the flow `dx/dσ = (x - D)/σ` has solution
/// `x(σ) = x(σ₀)·√(1+σ²)/√(1+σ₀²)`.
pub mod unit_gaussian {
    pub fn exact(x_start: f64, sigma_start: f64, sigma_end: f64) -> f64 {
        x_start * (1.0 + sigma_end * sigma_end).sqrt() / (1.0 + sigma_start * sigma_start).sqrt()
    }
}

pub mod stats {
    pub fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(xs: &[f64]) -> f64 {
        let m = mean(xs);
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    }

    /// Least-squares slope of `ys` on `xs`.
    pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
        let (mx, my) = (mean(xs), mean(ys));
        let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    }

    /// Coefficient of determination of the least-squares line.
    pub fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
        let (mx, my) = (mean(xs), mean(ys));
        let b = slope(xs, ys);
        let res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - b * (x - mx)).powi(2)).sum();
        let tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        1.0 - res / tot
    }
}

/// Small deterministic generator for test inputs (xorshift64*).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}
