//! Deterministic reverse-time sampling of the probability-flow ODE
//! `dx/dσ = (x - D(x; σ))/σ`.
//!
//! Schedules are consumed from the highest noise level down; the final step
//! always lands on `σ = 0`. Step indices follow the ascending numbering, so a
//! rollout over `N` levels visits `i = N-1, …, 0`.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::bail;
use crate::image::{from_diffusion, DiffusionTensor, ImageBuffer};
use crate::metrics::{ssim, SsimParams};
use crate::rng::standard_normal;
use crate::schedule::{Order, SigmaSchedule};
use crate::transforms::TransformSpec;
use crate::{Error, Result};

/// Maps a noisy tensor at level `σ` (plus an optional condition) to an
/// estimate of the clean tensor. Implementations must be safe to evaluate
/// concurrently through shared references.
pub trait Denoiser {
    fn denoise(&self, x: &DiffusionTensor, cond: Option<&DiffusionTensor>, sigma: f64) -> Result<DiffusionTensor>;
}

impl<F> Denoiser for F
where
    F: Fn(&DiffusionTensor, Option<&DiffusionTensor>, f64) -> Result<DiffusionTensor>,
{
    fn denoise(&self, x: &DiffusionTensor, cond: Option<&DiffusionTensor>, sigma: f64) -> Result<DiffusionTensor> {
        self(x, cond, sigma)
    }
}

/// Exact posterior-mean denoiser for data `~ N(μ, diag(v))`:
/// `D(x; σ) = μ + v/(v + σ²)·(x - μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOracleDenoiser {
    mean: Vec<f64>,
    variance: Vec<f64>,
}

impl GaussianOracleDenoiser {
    pub fn new(mean: Vec<f64>, variance: Vec<f64>) -> Result<Self> {
        if mean.is_empty() || mean.len() != variance.len() {
            bail!(
                Shape,
                "oracle mean ({}) and variance ({}) must be non-empty and equal length",
                mean.len(),
                variance.len()
            );
        }
        if variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            bail!(Domain, "oracle variances must be finite and positive");
        }
        if mean.iter().any(|m| !m.is_finite()) {
            bail!(Domain, "oracle means must be finite");
        }
        Ok(Self { mean, variance })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.variance
    }

    fn check(&self, x: &DiffusionTensor) -> Result<()> {
        if x.len() != self.mean.len() {
            bail!(Shape, "oracle has {} elements, input has {}", self.mean.len(), x.len());
        }
        Ok(())
    }

    /// `∇ log p_σ(x) = -(x - μ)/(v + σ²)`.
    pub fn analytic_score(&self, x: &DiffusionTensor, sigma: f64) -> Result<DiffusionTensor> {
        self.check(x)?;
        let s2 = sigma * sigma;
        let data = x
            .data()
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(&xi, (&m, &v))| -(xi - m) / (v + s2))
            .collect();
        Ok(x.with_data(data))
    }
}

impl Denoiser for GaussianOracleDenoiser {
    fn denoise(&self, x: &DiffusionTensor, _cond: Option<&DiffusionTensor>, sigma: f64) -> Result<DiffusionTensor> {
        self.check(x)?;
        let s2 = sigma * sigma;
        let data = x
            .data()
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(&xi, (&m, &v))| m + v / (v + s2) * (xi - m))
            .collect();
        Ok(x.with_data(data))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    Euler,
    #[default]
    Heun,
}

/// Direction of the drift term in each update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSign {
    /// `x ← x + (Δσ/σ)(D - x)`: integrates the ODE toward the denoiser output.
    #[default]
    TowardDenoiser,
    /// `x ← x - (Δσ/σ)(D - x)`: the opposite sign, kept for comparison runs.
    AwayFromDenoiser,
}

impl StepSign {
    fn factor(self) -> f64 {
        match self {
            Self::TowardDenoiser => 1.0,
            Self::AwayFromDenoiser => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RolloutOptions {
    /// Keep a copy of the state at every visited level.
    pub snapshots: bool,
    pub sign: StepSign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub index: usize,
    pub sigma: f64,
    /// State on entry to the step, i.e. at noise level `sigma`.
    pub snapshot: Option<DiffusionTensor>,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutTrace {
    pub steps: Vec<TraceStep>,
}

/// How the initial state of a rollout is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScale {
    /// `σ_max · ε`
    #[default]
    SigmaMax,
    /// `ε`
    Unit,
}

/// Pure-noise initial state for a rollout over `schedule`.
pub fn init_noise<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    channels: usize,
    schedule: &SigmaSchedule,
    scale: InitScale,
    rng: &mut R,
) -> Result<DiffusionTensor> {
    let s = match scale {
        InitScale::SigmaMax => schedule.sigma_max(),
        InitScale::Unit => 1.0,
    };
    let data = (0..width * height * channels)
        .map(|_| s * standard_normal(rng))
        .collect();
    DiffusionTensor::new(width, height, channels, data)
}

fn evaluate<D: Denoiser + ?Sized>(
    denoiser: &D,
    x: &DiffusionTensor,
    cond: Option<&DiffusionTensor>,
    sigma: f64,
    index: usize,
) -> Result<DiffusionTensor> {
    let d = denoiser.denoise(x, cond, sigma)?;
    if !d.same_shape(x) {
        bail!(Shape, "denoiser changed the tensor shape at step {index}");
    }
    Ok(d)
}

fn descending_levels(schedule: &SigmaSchedule) -> Result<&[f64]> {
    if schedule.order() != Order::Descending {
        bail!(Schedule, "rollouts need a descending schedule");
    }
    let levels = schedule.sigmas();
    if levels.iter().any(|s| !(*s > 0.0)) {
        bail!(Schedule, "rollout levels must be positive");
    }
    Ok(levels)
}

/// Runs `integrator` over `schedule` (which must be descending) from `init`.
pub fn rollout<D: Denoiser + ?Sized>(
    integrator: Integrator,
    denoiser: &D,
    cond: Option<&DiffusionTensor>,
    schedule: &SigmaSchedule,
    init: &DiffusionTensor,
    opts: RolloutOptions,
) -> Result<(DiffusionTensor, RolloutTrace)> {
    let levels = descending_levels(schedule)?;
    let n = levels.len();
    let sign = opts.sign.factor();
    let mut x = init.clone();
    let mut trace = RolloutTrace::default();
    for (k, &sigma) in levels.iter().enumerate() {
        let index = n - 1 - k;
        let next = levels.get(k + 1).copied().unwrap_or(0.0);
        let dt = sigma - next;
        trace.steps.push(TraceStep {
            index,
            sigma,
            snapshot: opts.snapshots.then(|| x.clone()),
            ssim: None,
        });
        let d1 = evaluate(denoiser, &x, cond, sigma, index)?;
        // Slope dx/dσ = (x - D)/σ; stepping σ down by dt.
        let slope1: Vec<f64> = x
            .data()
            .iter()
            .zip(d1.data())
            .map(|(xi, di)| (xi - di) / sigma)
            .collect();
        let euler: Vec<f64> = x.data().iter().zip(&slope1).map(|(xi, s)| xi - sign * dt * s).collect();
        let stepped = match integrator {
            Integrator::Heun if next > 0.0 => {
                let xe = x.with_data(euler);
                let d2 = evaluate(denoiser, &xe, cond, next, index)?;
                let data = x
                    .data()
                    .iter()
                    .zip(&slope1)
                    .zip(xe.data().iter().zip(d2.data()))
                    .map(|((xi, s1), (ei, di))| {
                        let s2 = (ei - di) / next;
                        xi - sign * dt * 0.5 * (s1 + s2)
                    })
                    .collect();
                x.with_data(data)
            }
            _ => x.with_data(euler),
        };
        if !stepped.is_finite() {
            return Err(Error::NonFinite { step: index });
        }
        x = stepped;
    }
    Ok((x, trace))
}

/// First-order rollout: `x ← x + (Δσ_i/σ_i)(D(x; σ_i) - x)`.
pub fn euler_rollout<D: Denoiser + ?Sized>(
    denoiser: &D,
    cond: Option<&DiffusionTensor>,
    schedule: &SigmaSchedule,
    init: &DiffusionTensor,
    opts: RolloutOptions,
) -> Result<(DiffusionTensor, RolloutTrace)> {
    rollout(Integrator::Euler, denoiser, cond, schedule, init, opts)
}

/// Second-order (Heun) rollout; the last step onto `σ = 0` is a plain Euler
/// step.
pub fn heun_rollout<D: Denoiser + ?Sized>(
    denoiser: &D,
    cond: Option<&DiffusionTensor>,
    schedule: &SigmaSchedule,
    init: &DiffusionTensor,
    opts: RolloutOptions,
) -> Result<(DiffusionTensor, RolloutTrace)> {
    rollout(Integrator::Heun, denoiser, cond, schedule, init, opts)
}

/// One independent sample from `denoiser`'s flow: sample `k` starts from
/// noise drawn from the stream `(seed, "oracle-sample", k)`, so a population
/// can be generated in any order or in parallel.
#[allow(clippy::too_many_arguments)]
pub fn flow_sample<D: Denoiser + ?Sized>(
    integrator: Integrator,
    denoiser: &D,
    shape: (usize, usize, usize),
    schedule: &SigmaSchedule,
    scale: InitScale,
    opts: RolloutOptions,
    seed: u64,
    k: u64,
) -> Result<DiffusionTensor> {
    let mut rng = crate::rng::stream(seed, &[crate::rng::label_hash("oracle-sample"), k]);
    let init = init_noise(shape.0, shape.1, shape.2, schedule, scale, &mut rng)?;
    Ok(rollout(integrator, denoiser, None, schedule, &init, opts)?.0)
}

/// Score estimate `(D(x; σ) - x)/σ²`.
pub fn score_estimate<D: Denoiser + ?Sized>(
    denoiser: &D,
    x: &DiffusionTensor,
    cond: Option<&DiffusionTensor>,
    sigma: f64,
) -> Result<DiffusionTensor> {
    if !(sigma > 0.0) {
        bail!(Domain, "score needs sigma > 0, got {sigma}");
    }
    let d = evaluate(denoiser, x, cond, sigma, 0)?;
    let s2 = sigma * sigma;
    d.zip_map(x, |di, xi| (di - xi) / s2)
}

/// SSIM of every intermediate state of an Euler rollout against
/// `reference`, paired with `φ(σ_i)`, in visiting order (highest noise
/// first).
pub fn trajectory_ssim_curve<D: Denoiser + ?Sized>(
    denoiser: &D,
    cond: Option<&DiffusionTensor>,
    schedule: &SigmaSchedule,
    init: &DiffusionTensor,
    reference: &ImageBuffer,
    ssim_params: &SsimParams,
    phi: TransformSpec,
) -> Result<(Vec<(f64, f64)>, RolloutTrace)> {
    if reference.width() != init.width()
        || reference.height() != init.height()
        || reference.channels() != init.channels()
    {
        return Err(Error::Dimension(format!(
            "reference {}x{}x{} does not match state {}x{}x{}",
            reference.width(),
            reference.height(),
            reference.channels(),
            init.width(),
            init.height(),
            init.channels()
        )));
    }
    let opts = RolloutOptions {
        snapshots: true,
        ..RolloutOptions::default()
    };
    let (_, mut trace) = euler_rollout(denoiser, cond, schedule, init, opts)?;
    let mut curve = Vec::with_capacity(trace.steps.len());
    for step in &mut trace.steps {
        let snap = step.snapshot.as_ref().expect("snapshots requested");
        let s = ssim(&from_diffusion(snap)?, reference, ssim_params)?;
        step.ssim = Some(s);
        curve.push((phi.apply(step.sigma)?, s));
    }
    Ok((curve, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{phi_schedule, ScheduleSource};
    use crate::transforms::PHI_STAR;
    use alloc::vec;

    fn scalar(v: f64) -> DiffusionTensor {
        DiffusionTensor::from_vec(vec![v]).unwrap()
    }

    fn identity(x: &DiffusionTensor, _: Option<&DiffusionTensor>, _: f64) -> Result<DiffusionTensor> {
        Ok(x.clone())
    }

    fn zero(x: &DiffusionTensor, _: Option<&DiffusionTensor>, _: f64) -> Result<DiffusionTensor> {
        Ok(x.map(|_| 0.0))
    }

    fn two_level() -> SigmaSchedule {
        SigmaSchedule::from_sigmas(vec![2.0, 1.0], Order::Descending, ScheduleSource::EdmRho(1.0)).unwrap()
    }

    #[test]
    fn hand_iterated_euler() {
        let (out, trace) = euler_rollout(&zero, None, &two_level(), &scalar(4.0), RolloutOptions::default()).unwrap();
        assert_eq!(out.data(), &[0.0]);
        let idx: Vec<_> = trace.steps.iter().map(|s| s.index).collect();
        assert_eq!(idx, vec![1, 0]);
    }

    #[test]
    fn hand_iterated_euler_intermediate() {
        let opts = RolloutOptions {
            snapshots: true,
            ..Default::default()
        };
        let (_, trace) = euler_rollout(&zero, None, &two_level(), &scalar(4.0), opts).unwrap();
        assert_eq!(trace.steps[0].snapshot.as_ref().unwrap().data(), &[4.0]);
        assert_eq!(trace.steps[1].snapshot.as_ref().unwrap().data(), &[2.0]);
    }

    #[test]
    fn opposite_sign_moves_away() {
        let opts = RolloutOptions {
            sign: StepSign::AwayFromDenoiser,
            ..Default::default()
        };
        // 4 + 0.5·4 = 6, then 6 + 1·6 = 12.
        let (out, _) = euler_rollout(&zero, None, &two_level(), &scalar(4.0), opts).unwrap();
        assert_eq!(out.data(), &[12.0]);
    }

    #[test]
    fn identity_denoiser_is_a_fixed_point() {
        let s = phi_schedule(PHI_STAR, 0.002, 80.0, 30, Order::Descending).unwrap();
        let init = DiffusionTensor::from_vec(vec![0.3, -1.7, 12.0]).unwrap();
        for integ in [Integrator::Euler, Integrator::Heun] {
            let (out, _) = rollout(integ, &identity, None, &s, &init, RolloutOptions::default()).unwrap();
            assert_eq!(out, init);
        }
    }

    #[test]
    fn heun_on_two_levels_by_hand() {
        // D ≡ 0: slope = x/σ. Step σ=2→1: d1 = 4/2 = 2, xe = 4 - 2 = 2,
        // d2 = 2/1 = 2, x = 4 - 1·2 = 2. Final Euler step to 0: x = 0.
        let opts = RolloutOptions {
            snapshots: true,
            ..Default::default()
        };
        let (out, trace) = heun_rollout(&zero, None, &two_level(), &scalar(4.0), opts).unwrap();
        assert_eq!(trace.steps[1].snapshot.as_ref().unwrap().data(), &[2.0]);
        assert_eq!(out.data(), &[0.0]);
    }

    #[test]
    fn rejects_ascending_schedule() {
        let s = phi_schedule(PHI_STAR, 0.01, 1.0, 4, Order::Ascending).unwrap();
        let r = euler_rollout(&zero, None, &s, &scalar(1.0), RolloutOptions::default());
        assert!(matches!(r, Err(Error::Schedule(_))));
    }

    #[test]
    fn non_finite_names_the_step() {
        let blow_up = |x: &DiffusionTensor, _: Option<&DiffusionTensor>, s: f64| -> Result<DiffusionTensor> {
            Ok(x.map(|v| if s < 1.5 { f64::INFINITY } else { v }))
        };
        let s =
            SigmaSchedule::from_sigmas(vec![3.0, 2.0, 1.0], Order::Descending, ScheduleSource::EdmRho(1.0)).unwrap();
        let r = euler_rollout(&blow_up, None, &s, &scalar(1.0), RolloutOptions::default());
        assert_eq!(r.unwrap_err(), Error::NonFinite { step: 0 });
    }

    #[test]
    fn oracle_validation() {
        assert!(GaussianOracleDenoiser::new(vec![0.0], vec![0.0]).is_err());
        assert!(GaussianOracleDenoiser::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let o = GaussianOracleDenoiser::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(o.denoise(&scalar(1.0), None, 1.0), Err(Error::Shape(_))));
    }

    #[test]
    fn score_at_mode_is_zero_and_scales() {
        let o = GaussianOracleDenoiser::new(vec![0.2, -0.1], vec![0.04, 0.09]).unwrap();
        let mu = DiffusionTensor::from_vec(vec![0.2, -0.1]).unwrap();
        let s = score_estimate(&o, &mu, None, 0.7).unwrap();
        assert!(s.data().iter().all(|v| v.abs() < 1e-15));

        // v + σ² doubles: 1 + 1 = 2 → 1 + 3 = 4.
        let one = GaussianOracleDenoiser::new(vec![0.0], vec![1.0]).unwrap();
        let a = score_estimate(&one, &scalar(1.0), None, 1.0).unwrap().data()[0];
        let b = score_estimate(&one, &scalar(1.0), None, libm::sqrt(3.0))
            .unwrap()
            .data()[0];
        assert!((b - 0.5 * a).abs() < 1e-12);
    }

    #[test]
    fn deterministic_rollouts() {
        let o = GaussianOracleDenoiser::new(vec![0.2, -0.1], vec![0.04, 0.09]).unwrap();
        let s = phi_schedule(PHI_STAR, 0.002, 80.0, 20, Order::Descending).unwrap();
        let init = DiffusionTensor::from_vec(vec![31.0, -12.5]).unwrap();
        let a = heun_rollout(&o, None, &s, &init, RolloutOptions::default()).unwrap().0;
        let b = heun_rollout(&o, None, &s, &init, RolloutOptions::default()).unwrap().0;
        assert_eq!(a, b);
    }
}
