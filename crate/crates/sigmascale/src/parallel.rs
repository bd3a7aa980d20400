//! Rayon-parallel versions of the expensive library loops. Every job draws
//! from its own keyed stream and per-level sums keep their index order, so
//! results are bit-identical to the sequential library functions.

use rayon::prelude::*;
use sigmascale_core::fit::{
    assemble_profile, candidate_seed, level_samples, mean_in_order, profile_levels, DegradationProfile, ProfileConfig,
};
use sigmascale_core::sampler::{flow_sample, Denoiser, InitScale, Integrator, RolloutOptions};
use sigmascale_core::{Error, ImageBuffer, Result, SigmaSchedule, TransformSpec};

/// Parallel [`sigmascale_core::fit::select_phi_profiles`].
pub fn select_phi_profiles(
    corpus: &[ImageBuffer],
    candidates: &[TransformSpec],
    cfg: &ProfileConfig,
) -> Result<Vec<DegradationProfile>> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let grids = candidates
        .iter()
        .map(|spec| profile_levels(*spec, cfg))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, f64)> = grids
        .iter()
        .enumerate()
        .flat_map(|(c, sigmas)| sigmas.iter().enumerate().map(move |(l, &s)| (c, l, s)))
        .collect();
    let means = jobs
        .par_iter()
        .map(|&(c, level, sigma)| {
            let seed = candidate_seed(cfg.seed, &candidates[c]);
            level_samples(corpus, sigma, level, cfg.draws_per_level, seed, &cfg.ssim).map(|s| mean_in_order(&s))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut offset = 0;
    candidates
        .iter()
        .zip(&grids)
        .map(|(spec, sigmas)| {
            let m = &means[offset..offset + sigmas.len()];
            offset += sigmas.len();
            assemble_profile(*spec, sigmas, m)
        })
        .collect()
}

/// `count` flow samples `0..count`, in index order.
#[allow(clippy::too_many_arguments)]
pub fn flow_population<D: Denoiser + Sync + ?Sized>(
    integrator: Integrator,
    denoiser: &D,
    shape: (usize, usize, usize),
    schedule: &SigmaSchedule,
    scale: InitScale,
    opts: RolloutOptions,
    seed: u64,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| flow_sample(integrator, denoiser, shape, schedule, scale, opts, seed, k).map(|t| t.into_data()))
        .collect()
}
