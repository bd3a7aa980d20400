//! The analysis commands behind the CLI. Each writes its artifacts under
//! `cfg.out` and returns a short human-readable report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sigmascale_core::conditioning::{distorted_reference, xdog_sketch, TpsWarpParams, XdogParams};
use sigmascale_core::fit::{degradation_frames, rank, CurveSchedule, ProfileConfig};
use sigmascale_core::image::{make_grid, to_diffusion};
use sigmascale_core::metrics::ssim;
use sigmascale_core::rng::named_stream;
use sigmascale_core::sampler::{
    init_noise, trajectory_ssim_curve, GaussianOracleDenoiser, InitScale, Integrator, RolloutOptions, StepSign,
};
use sigmascale_core::schedule::{ddpm_cosine_equivalent_sigmas, edm_rho_schedule, phi_schedule};
use sigmascale_core::transforms::candidate_set;
use sigmascale_core::{ImageBuffer, Order, SigmaSchedule, TransformSpec};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, load_png, save_png, write_csv};
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Phi,
    Edm,
    Ddpm,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phi" => Ok(Self::Phi),
            "edm" => Ok(Self::Edm),
            "ddpm" => Ok(Self::Ddpm),
            _ => Err(Error::Config(format!(
                "unknown schedule `{s}` (expected phi, edm or ddpm)"
            ))),
        }
    }
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Phi => "phi",
            Self::Edm => "edm",
            Self::Ddpm => "ddpm",
        }
    }
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

/// File-name-safe form of a transform's text encoding.
pub fn spec_file_stem(spec: &TransformSpec) -> String {
    spec.to_string().replace(':', "_")
}

fn input_image(cfg: &RunConfig, input: Option<&Path>) -> Result<ImageBuffer> {
    match input {
        Some(p) => load_png(p),
        None => cfg
            .corpus
            .load()?
            .into_iter()
            .next()
            .ok_or(Error::Core(sigmascale_core::Error::EmptyCorpus)),
    }
}

fn profile_config(cfg: &RunConfig) -> ProfileConfig {
    ProfileConfig {
        n_levels: cfg.n_levels,
        sigma_min: cfg.sigma_min,
        sigma_max: cfg.sigma_max,
        draws_per_level: cfg.draws,
        seed: cfg.seed,
        ssim: cfg.ssim_params(),
    }
}

/// Ranks `candidates` (the full candidate set when empty) by SSIM
/// linearity; writes `ranking.csv` and one `profile_<spec>.csv` each.
pub fn select_phi(cfg: &RunConfig, candidates: &[TransformSpec]) -> Result<String> {
    cfg.validate()?;
    let candidates = if candidates.is_empty() {
        candidate_set()
    } else {
        candidates.to_vec()
    };
    let corpus = cfg.corpus.load()?;
    let profiles = parallel::select_phi_profiles(&corpus, &candidates, &profile_config(cfg))?;
    for p in &profiles {
        let rows: Vec<Vec<String>> = p
            .points
            .iter()
            .enumerate()
            .map(|(i, pt)| vec![i.to_string(), fmt_f64(pt.sigma), fmt_f64(pt.phi), fmt_f64(pt.mean_ssim)])
            .collect();
        write_csv(
            out_path(cfg, &format!("profile_{}.csv", spec_file_stem(&p.spec))),
            &["i", "sigma", "phi", "mean_ssim"],
            &rows,
        )?;
    }
    let ranked = rank(&profiles);
    let rows: Vec<Vec<String>> = ranked
        .iter()
        .enumerate()
        .map(|(i, (spec, r2))| vec![(i + 1).to_string(), spec.to_string(), fmt_f64(*r2)])
        .collect();
    write_csv(out_path(cfg, "ranking.csv"), &["rank", "spec", "r2"], &rows)?;

    let mut table = format!("{:>4}  {:<14} {:>8}  formula\n", "rank", "spec", "R^2");
    for (i, (spec, r2)) in ranked.iter().enumerate() {
        let _ = writeln!(
            table,
            "{:>4}  {:<14} {:>8.4}  {}",
            i + 1,
            spec.to_string(),
            r2,
            spec.formula()
        );
    }
    Ok(table)
}

pub fn build_schedule(cfg: &RunConfig, kind: ScheduleKind, steps: usize, order: Order) -> Result<SigmaSchedule> {
    cfg.validate()?;
    let s = match kind {
        ScheduleKind::Phi => phi_schedule(cfg.transform, cfg.sigma_min, cfg.sigma_max, steps, order)?,
        ScheduleKind::Edm => edm_rho_schedule(cfg.rho, cfg.sigma_min, cfg.sigma_max, steps)?.in_order(order),
        ScheduleKind::Ddpm => ddpm_cosine_equivalent_sigmas(steps)?.in_order(order),
    };
    Ok(s)
}

/// Writes `schedule.csv` with columns `i, sigma, phi_sigma`. `i` counts
/// levels from the smallest; rows follow `order`. `phi_sigma` is empty
/// where the transform is undefined (`σ = 0`).
pub fn schedule(cfg: &RunConfig, kind: ScheduleKind, steps: usize, order: Order) -> Result<String> {
    let s = build_schedule(cfg, kind, steps, order)?;
    let n = s.len();
    let rows: Vec<Vec<String>> = s
        .sigmas()
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let i = if order == Order::Ascending { k } else { n - 1 - k };
            let phi = cfg.transform.apply(sigma).map(fmt_f64).unwrap_or_default();
            vec![i.to_string(), fmt_f64(sigma), phi]
        })
        .collect();
    let path = out_path(cfg, "schedule.csv");
    write_csv(&path, &["i", "sigma", "phi_sigma"], &rows)?;
    Ok(format!(
        "{} levels of the {} schedule -> {}\n",
        n,
        kind.name(),
        path.display()
    ))
}

/// Corrupts one image along a schedule; writes `grid_<kind>.png` (up to 5
/// frames per row) and `curve_<kind>.csv` (`step, sigma, ssim`).
pub fn corrupt_grid(cfg: &RunConfig, kind: ScheduleKind, steps: usize, input: Option<&Path>) -> Result<String> {
    cfg.validate()?;
    let image = input_image(cfg, input)?;
    let sch = match kind {
        ScheduleKind::Phi => CurveSchedule::Phi(cfg.transform),
        ScheduleKind::Edm => CurveSchedule::EdmRho(cfg.rho),
        ScheduleKind::Ddpm => CurveSchedule::DdpmCosine,
    };
    let frames = degradation_frames(&image, sch, steps, cfg.sigma_min, cfg.sigma_max, cfg.seed)?;
    let params = cfg.ssim_params();
    let mut rows = Vec::with_capacity(frames.len());
    for (i, (sigma, frame)) in frames.iter().enumerate() {
        rows.push(vec![
            (i + 1).to_string(),
            fmt_f64(*sigma),
            fmt_f64(ssim(&image, frame, &params)?),
        ]);
    }
    let cols = frames.len().min(5);
    let grid_rows = frames.len().div_ceil(cols);
    let tiles: Vec<ImageBuffer> = frames.into_iter().map(|(_, f)| f).collect();
    let grid = make_grid(&tiles, grid_rows, cols)?;
    let png = out_path(cfg, &format!("grid_{}.png", kind.name()));
    let csv = out_path(cfg, &format!("curve_{}.csv", kind.name()));
    save_png(&grid, &png)?;
    write_csv(&csv, &["step", "sigma", "ssim"], &rows)?;
    Ok(format!("{} -> {}, {}\n", kind.name(), png.display(), csv.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleArgs {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub samples: usize,
    pub steps: usize,
    pub integrator: Integrator,
    pub init: InitScale,
    pub sign: StepSign,
}

impl Default for OracleArgs {
    fn default() -> Self {
        Self {
            mean: vec![0.2, -0.1],
            variance: vec![0.04, 0.09],
            samples: 10_000,
            steps: 50,
            integrator: Integrator::Heun,
            init: InitScale::SigmaMax,
            sign: StepSign::TowardDenoiser,
        }
    }
}

/// Samples the Gaussian oracle's flow. Writes `samples.csv` (`sample, x0,
/// x1, …`) and `trace.csv` for sample 0 (`i, sigma, phi_sigma, ssim, x0, …`;
/// `ssim` is empty because there is no reference image).
pub fn sample_oracle(cfg: &RunConfig, args: &OracleArgs) -> Result<String> {
    let oracle = GaussianOracleDenoiser::new(args.mean.clone(), args.variance.clone())?;
    let dim = args.mean.len();
    let schedule = build_schedule(cfg, ScheduleKind::Phi, args.steps, Order::Descending)?;
    let opts = RolloutOptions {
        snapshots: false,
        sign: args.sign,
    };
    let shape = (dim, 1, 1);
    let pop = parallel::flow_population(
        args.integrator,
        &oracle,
        shape,
        &schedule,
        args.init,
        opts,
        cfg.seed,
        args.samples,
    )?;

    let xs = (0..dim).map(|j| format!("x{j}")).collect::<Vec<_>>();
    let mut header = vec!["sample".to_string()];
    header.extend(xs.iter().cloned());
    let rows: Vec<Vec<String>> = pop
        .iter()
        .enumerate()
        .map(|(k, x)| {
            std::iter::once(k.to_string())
                .chain(x.iter().map(|&v| fmt_f64(v)))
                .collect()
        })
        .collect();
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(out_path(cfg, "samples.csv"), &h, &rows)?;

    let traced_opts = RolloutOptions {
        snapshots: true,
        ..opts
    };
    let mut rng = sigmascale_core::rng::stream(cfg.seed, &[sigmascale_core::rng::label_hash("oracle-sample"), 0]);
    let init = init_noise(dim, 1, 1, &schedule, args.init, &mut rng)?;
    let (_, trace) = sigmascale_core::sampler::rollout(args.integrator, &oracle, None, &schedule, &init, traced_opts)?;
    let mut theader = vec!["i", "sigma", "phi_sigma", "ssim"];
    theader.extend(xs.iter().map(String::as_str));
    let trows = trace
        .steps
        .iter()
        .map(|st| {
            let mut row = vec![
                st.index.to_string(),
                fmt_f64(st.sigma),
                fmt_f64(cfg.transform.apply(st.sigma)?),
                String::new(),
            ];
            let snap = st.snapshot.as_ref().expect("snapshots requested");
            row.extend(snap.data().iter().map(|&v| fmt_f64(v)));
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv(out_path(cfg, "trace.csv"), &theader, &trows)?;

    let mut report = String::new();
    for j in 0..dim {
        let col: Vec<f64> = pop.iter().map(|x| x[j]).collect();
        let m = col.iter().sum::<f64>() / col.len() as f64;
        let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (col.len() as f64 - 1.0).max(1.0);
        let _ = writeln!(
            report,
            "x{j}: sample mean {m:.4} (target {:.4}), sample variance {v:.4} (target {:.4})",
            args.mean[j], args.variance[j]
        );
    }
    Ok(report)
}

/// Writes `sketch.png`, the XDoG line sketch of the input.
pub fn sketch(cfg: &RunConfig, input: Option<&Path>, params: &XdogParams) -> Result<String> {
    let image = input_image(cfg, input)?;
    let out = out_path(cfg, "sketch.png");
    save_png(&xdog_sketch(&image, params)?, &out)?;
    Ok(format!("sketch -> {}\n", out.display()))
}

/// Writes `warped.png`: a thin-plate-spline warp plus random rotation of the
/// input, drawn from the `warp` stream of the seed.
pub fn warp(cfg: &RunConfig, input: Option<&Path>, params: &TpsWarpParams) -> Result<String> {
    let image = input_image(cfg, input)?;
    let mut rng = named_stream(cfg.seed, "warp");
    let out = out_path(cfg, "warped.png");
    save_png(&distorted_reference(&image, params, &mut rng)?, &out)?;
    Ok(format!("warp -> {}\n", out.display()))
}

/// Forward (corruption) and reverse (oracle generation) SSIM-vs-φ curves for
/// one image, written to `curves.csv` (`direction, i, sigma, phi, ssim`).
///
/// The reverse process uses the Gaussian oracle centred on the image itself
/// with per-pixel variance `variance`, not a trained network.
pub fn curves(cfg: &RunConfig, input: Option<&Path>, variance: f64) -> Result<String> {
    cfg.validate()?;
    let image = input_image(cfg, input)?;
    let params = cfg.ssim_params();
    let spec = cfg.transform;
    let mut rows = Vec::new();

    let frames = degradation_frames(
        &image,
        CurveSchedule::Phi(spec),
        cfg.n_levels,
        cfg.sigma_min,
        cfg.sigma_max,
        cfg.seed,
    )?;
    for (i, (sigma, frame)) in frames.iter().enumerate() {
        rows.push(vec![
            "forward".to_string(),
            i.to_string(),
            fmt_f64(*sigma),
            fmt_f64(spec.apply(*sigma)?),
            fmt_f64(ssim(&image, frame, &params)?),
        ]);
    }

    let mean = to_diffusion(&image);
    let oracle = GaussianOracleDenoiser::new(mean.data().to_vec(), vec![variance; mean.len()])?;
    let schedule = phi_schedule(spec, cfg.sigma_min, cfg.sigma_max, cfg.n_levels, Order::Descending)?;
    let mut rng = named_stream(cfg.seed, "curves-init");
    let init = init_noise(
        image.width(),
        image.height(),
        image.channels(),
        &schedule,
        InitScale::SigmaMax,
        &mut rng,
    )?;
    let (curve, trace) = trajectory_ssim_curve(&oracle, None, &schedule, &init, &image, &params, spec)?;
    for ((phi, s), st) in curve.iter().zip(&trace.steps) {
        rows.push(vec![
            "reverse".to_string(),
            st.index.to_string(),
            fmt_f64(st.sigma),
            fmt_f64(*phi),
            fmt_f64(*s),
        ]);
    }
    let out = out_path(cfg, "curves.csv");
    write_csv(&out, &["direction", "i", "sigma", "phi", "ssim"], &rows)?;
    Ok(format!("curves -> {}\n", out.display()))
}
