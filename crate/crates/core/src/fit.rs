//! SSIM degradation profiling and linearity-based transform selection.
//!
//! For a transform `φ`, the corpus is corrupted at the levels of the
//! `φ`-space schedule, the mean SSIM against the clean images is recorded per
//! level, and the coefficient of determination of SSIM regressed on `φ(σ)`
//! scores how evenly that schedule spreads the perceptual degradation.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::bail;
use crate::image::{from_diffusion, to_diffusion, ImageBuffer};
use crate::metrics::{ssim, SsimParams};
use crate::rng::{self, derive_key, label_hash};
use libm::sqrt;

use crate::schedule::{corrupt, ddpm_cosine_alpha_bar, edm_rho_schedule, phi_schedule, Order};
use crate::transforms::TransformSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub sigma: f64,
    pub phi: f64,
    pub mean_ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationProfile {
    pub spec: TransformSpec,
    /// Sorted by ascending `sigma`.
    pub points: Vec<ProfilePoint>,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub n_levels: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub draws_per_level: usize,
    pub seed: u64,
    pub ssim: SsimParams,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            n_levels: 50,
            sigma_min: crate::SIGMA_MIN,
            sigma_max: crate::SIGMA_MAX,
            draws_per_level: 2,
            seed: 0,
            ssim: SsimParams::default(),
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_levels < 3 {
            bail!(Domain, "profiling needs at least 3 levels, got {}", self.n_levels);
        }
        if self.draws_per_level == 0 {
            bail!(Domain, "profiling needs at least one draw per level");
        }
        self.ssim.validate()
    }
}

/// Root seed of a candidate's noise streams. Depends on the candidate's
/// text encoding only, never on its position in a candidate list.
pub fn candidate_seed(seed: u64, spec: &TransformSpec) -> u64 {
    derive_key(seed, &[label_hash(&spec.to_string())])
}

/// SSIM of every `(image, draw)` pair at one noise level, image-major.
///
/// The noise for pair `(i, d)` at level index `level` comes from the stream
/// `(seed, level, i, d)`.
pub fn level_samples(
    corpus: &[ImageBuffer],
    sigma: f64,
    level: usize,
    draws: usize,
    seed: u64,
    params: &SsimParams,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(corpus.len() * draws);
    for (i, clean) in corpus.iter().enumerate() {
        let x0 = to_diffusion(clean);
        for d in 0..draws {
            let mut rng = rng::stream(seed, &[level as u64, i as u64, d as u64]);
            let noisy = from_diffusion(&corrupt(&x0, sigma, &mut rng)?)?;
            out.push(ssim(clean, &noisy, params)?);
        }
    }
    Ok(out)
}

/// Mean of per-pair SSIM values, summed in index order.
pub fn mean_in_order(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Assembles a profile from per-level means (levels ascending in σ).
pub fn assemble_profile(spec: TransformSpec, sigmas: &[f64], means: &[f64]) -> Result<DegradationProfile> {
    if sigmas.len() != means.len() {
        bail!(Dimension, "{} levels but {} means", sigmas.len(), means.len());
    }
    let points: Vec<ProfilePoint> = sigmas
        .iter()
        .zip(means)
        .map(|(&sigma, &mean_ssim)| {
            Ok(ProfilePoint {
                sigma,
                phi: spec.apply(sigma)?,
                mean_ssim,
            })
        })
        .collect::<Result<_>>()?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.phi, p.mean_ssim)).collect();
    let r_squared = r_squared(&pairs)?;
    Ok(DegradationProfile {
        spec,
        points,
        r_squared,
    })
}

/// Profiles `spec` at an explicit, ascending list of levels.
pub fn profile_at(
    corpus: &[ImageBuffer],
    spec: TransformSpec,
    sigmas: &[f64],
    draws: usize,
    seed: u64,
    params: &SsimParams,
) -> Result<DegradationProfile> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if !sigmas.windows(2).all(|w| w[1] > w[0]) {
        bail!(Schedule, "profile levels must be strictly ascending");
    }
    let means = sigmas
        .iter()
        .enumerate()
        .map(|(level, &sigma)| {
            Ok(mean_in_order(&level_samples(
                corpus, sigma, level, draws, seed, params,
            )?))
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_profile(spec, sigmas, &means)
}

/// The levels a candidate is profiled at: its own `φ`-space schedule.
pub fn profile_levels(spec: TransformSpec, cfg: &ProfileConfig) -> Result<Vec<f64>> {
    Ok(
        phi_schedule(spec, cfg.sigma_min, cfg.sigma_max, cfg.n_levels, Order::Ascending)?
            .sigmas()
            .to_vec(),
    )
}

/// Profiles `spec` on its own schedule with noise seeded directly by
/// `cfg.seed`.
pub fn profile(corpus: &[ImageBuffer], spec: TransformSpec, cfg: &ProfileConfig) -> Result<DegradationProfile> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sigmas = profile_levels(spec, cfg)?;
    profile_at(corpus, spec, &sigmas, cfg.draws_per_level, cfg.seed, &cfg.ssim)
}

/// Coefficient of determination of the least-squares line through `points`.
///
/// When every `y` is identical the fit is exact and 1 is returned.
pub fn r_squared(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        bail!(DegenerateInput, "R² needs at least two points");
    }
    let x0 = points[0].0;
    if points.iter().all(|p| p.0 == x0) {
        bail!(DegenerateInput, "all x values are equal");
    }
    let y0 = points[0].1;
    if points.iter().all(|p| p.1 == y0) {
        return Ok(1.0);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = (y - my) - slope * (x - mx);
            r * r
        })
        .sum();
    if syy == 0.0 {
        return Ok(if ss_res == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - ss_res / syy)
}

/// Sorts profiles by descending R²; ties keep their input order.
pub fn rank(profiles: &[DegradationProfile]) -> Vec<(TransformSpec, f64)> {
    let mut ranked: Vec<(TransformSpec, f64)> = profiles.iter().map(|p| (p.spec, p.r_squared)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Profiles every candidate and ranks them by linearity. Each candidate
/// draws noise from streams rooted at [`candidate_seed`].
pub fn select_phi_profiles(
    corpus: &[ImageBuffer],
    candidates: &[TransformSpec],
    cfg: &ProfileConfig,
) -> Result<Vec<DegradationProfile>> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    candidates
        .iter()
        .map(|spec| {
            let sigmas = profile_levels(*spec, cfg)?;
            profile_at(
                corpus,
                *spec,
                &sigmas,
                cfg.draws_per_level,
                candidate_seed(cfg.seed, spec),
                &cfg.ssim,
            )
        })
        .collect()
}

pub fn select_phi(
    corpus: &[ImageBuffer],
    candidates: &[TransformSpec],
    cfg: &ProfileConfig,
) -> Result<Vec<(TransformSpec, f64)>> {
    Ok(rank(&select_phi_profiles(corpus, candidates, cfg)?))
}

/// Schedule family for a per-step degradation curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveSchedule {
    /// Cosine `ᾱ` with variance-preserving scaling `√ᾱ·x + √(1−ᾱ)·ε`.
    DdpmCosine,
    EdmRho(f64),
    Phi(TransformSpec),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// 1-based step index.
    pub step: usize,
    /// Noise level of the step; for the cosine schedule, the equivalent `σ`.
    pub sigma: f64,
    pub ssim: f64,
}

/// `image` corrupted at each of `steps` increasing noise levels of
/// `schedule`, paired with the level's `σ`. A single noise draw is shared
/// by every step so the frames differ only through the schedule.
pub fn degradation_frames(
    image: &ImageBuffer,
    schedule: CurveSchedule,
    steps: usize,
    sigma_min: f64,
    sigma_max: f64,
    seed: u64,
) -> Result<Vec<(f64, ImageBuffer)>> {
    let x0 = to_diffusion(image);
    let mut rng = rng::named_stream(seed, "curve");
    let eps = x0.map(|_| rng::standard_normal(&mut rng));
    let levels: Vec<(f64, f64, f64)> = match schedule {
        CurveSchedule::DdpmCosine => ddpm_cosine_alpha_bar(steps)?[1..]
            .iter()
            .map(|&a| {
                let a = a.clamp(0.0, 1.0);
                (sqrt(a), sqrt(1.0 - a), sqrt((1.0 - a) / a))
            })
            .collect(),
        CurveSchedule::EdmRho(rho) => edm_rho_schedule(rho, sigma_min, sigma_max, steps)?
            .ascending()
            .sigmas()
            .iter()
            .map(|&s| (1.0, s, s))
            .collect(),
        CurveSchedule::Phi(spec) => phi_schedule(spec, sigma_min, sigma_max, steps, Order::Ascending)?
            .sigmas()
            .iter()
            .map(|&s| (1.0, s, s))
            .collect(),
    };
    levels
        .into_iter()
        .map(|(a, b, sigma)| Ok((sigma, from_diffusion(&x0.zip_map(&eps, |x, e| a * x + b * e)?)?)))
        .collect()
}

/// SSIM against `image` of each frame of [`degradation_frames`].
pub fn degradation_curve(
    image: &ImageBuffer,
    schedule: CurveSchedule,
    steps: usize,
    sigma_min: f64,
    sigma_max: f64,
    seed: u64,
    params: &SsimParams,
) -> Result<Vec<CurvePoint>> {
    degradation_frames(image, schedule, steps, sigma_min, sigma_max, seed)?
        .iter()
        .enumerate()
        .map(|(i, (sigma, frame))| {
            Ok(CurvePoint {
                step: i + 1,
                sigma: *sigma,
                ssim: ssim(image, frame, params)?,
            })
        })
        .collect()
}
