//! Noise-level schedules, forward corruption and training-time σ sampling.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use libm::{cos, pow, sqrt};
use rand::Rng;

use crate::error::bail;
use crate::image::DiffusionTensor;
use crate::rng::standard_normal;
use crate::transforms::TransformSpec;
use crate::Result;

/// Direction in which a schedule lists its noise levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Ascending,
    Descending,
}

/// How a schedule was constructed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleSource {
    PhiSpace(TransformSpec),
    EdmRho(f64),
    DdpmCosine(usize),
}

/// An ordered list of noise levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    sigmas: Vec<f64>,
    sigma_min: f64,
    sigma_max: f64,
    order: Order,
    source: ScheduleSource,
}

impl SigmaSchedule {
    /// Wraps an explicit list of levels, checking strict monotonicity in the
    /// declared order and that every level is positive.
    pub fn from_sigmas(sigmas: Vec<f64>, order: Order, source: ScheduleSource) -> Result<Self> {
        if sigmas.len() < 2 {
            bail!(Schedule, "a schedule needs at least two levels");
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            bail!(Schedule, "noise levels must be finite and positive");
        }
        Self::checked(sigmas, order, source)
    }

    fn checked(sigmas: Vec<f64>, order: Order, source: ScheduleSource) -> Result<Self> {
        let monotone = sigmas.windows(2).all(|w| match order {
            Order::Ascending => w[1] > w[0],
            Order::Descending => w[1] < w[0],
        });
        if !monotone {
            bail!(Schedule, "levels are not strictly {order:?}");
        }
        let (first, last) = (sigmas[0], sigmas[sigmas.len() - 1]);
        let (sigma_min, sigma_max) = match order {
            Order::Ascending => (first, last),
            Order::Descending => (last, first),
        };
        Ok(Self {
            sigmas,
            sigma_min,
            sigma_max,
            order,
            source,
        })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn source(&self) -> ScheduleSource {
        self.source
    }

    /// The same levels listed in the requested order.
    pub fn in_order(&self, order: Order) -> Self {
        let mut out = self.clone();
        if order != self.order {
            out.sigmas.reverse();
            out.order = order;
        }
        out
    }

    pub fn ascending(&self) -> Self {
        self.in_order(Order::Ascending)
    }

    pub fn descending(&self) -> Self {
        self.in_order(Order::Descending)
    }
}

fn check_endpoints(sigma_min: f64, sigma_max: f64, n: usize) -> Result<()> {
    if !(sigma_min > 0.0 && sigma_min < sigma_max && sigma_max.is_finite()) {
        bail!(Domain, "need 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]");
    }
    if n < 2 {
        bail!(Domain, "a schedule needs at least 2 levels, got {n}");
    }
    Ok(())
}

/// Levels equally spaced in `φ`-space between `σ_min` and `σ_max`.
///
/// `σ_i = φ⁻¹(φ(σ_min) + i/(n-1)·(φ(σ_max) - φ(σ_min)))`, listed from
/// `σ_min` upwards for [`Order::Ascending`]. Endpoints are exact.
pub fn phi_schedule(
    spec: TransformSpec,
    sigma_min: f64,
    sigma_max: f64,
    n: usize,
    order: Order,
) -> Result<SigmaSchedule> {
    check_endpoints(sigma_min, sigma_max, n)?;
    let lo = spec.apply(sigma_min)?;
    let hi = spec.apply(sigma_max)?;
    let last = (n - 1) as f64;
    let mut sigmas = Vec::with_capacity(n);
    sigmas.push(sigma_min);
    for i in 1..n - 1 {
        let t = i as f64 / last;
        sigmas.push(spec.invert(lo + t * (hi - lo))?);
    }
    sigmas.push(sigma_max);
    if order == Order::Descending {
        sigmas.reverse();
    }
    SigmaSchedule::from_sigmas(sigmas, order, ScheduleSource::PhiSpace(spec))
}

/// The EDM `ρ`-schedule, descending from `σ_max` to `σ_min`.
pub fn edm_rho_schedule(rho: f64, sigma_min: f64, sigma_max: f64, n: usize) -> Result<SigmaSchedule> {
    check_endpoints(sigma_min, sigma_max, n)?;
    if !(rho >= 1.0) || !rho.is_finite() {
        bail!(Domain, "rho must be >= 1, got {rho}");
    }
    let inv = 1.0 / rho;
    let (a, b) = (pow(sigma_max, inv), pow(sigma_min, inv));
    let last = (n - 1) as f64;
    let mut sigmas = Vec::with_capacity(n);
    sigmas.push(sigma_max);
    for i in 1..n - 1 {
        sigmas.push(pow(a + i as f64 / last * (b - a), rho));
    }
    sigmas.push(sigma_min);
    SigmaSchedule::from_sigmas(sigmas, Order::Descending, ScheduleSource::EdmRho(rho))
}

/// Offset of the cosine `ᾱ` schedule.
pub const COSINE_OFFSET: f64 = 0.008;

/// Cumulative signal fraction `ᾱ_t` of the cosine schedule, `t = 0..=t_steps`.
pub fn ddpm_cosine_alpha_bar(t_steps: usize) -> Result<Vec<f64>> {
    if t_steps < 2 {
        bail!(Domain, "cosine schedule needs at least 2 steps, got {t_steps}");
    }
    let s = COSINE_OFFSET;
    let f = |t: f64| {
        let c = cos((t + s) / (1.0 + s) * FRAC_PI_2);
        c * c
    };
    let f0 = f(0.0);
    Ok((0..=t_steps).map(|t| f(t as f64 / t_steps as f64) / f0).collect())
}

/// Cosine-schedule timesteps expressed as equivalent noise levels
/// `σ_t = sqrt((1 - ᾱ_t)/ᾱ_t)`, ascending in `t = 0..=t_steps`.
///
/// Unlike the other schedules this one starts at `σ_0 = 0` (the clean
/// endpoint), so its first level is not positive.
pub fn ddpm_cosine_equivalent_sigmas(t_steps: usize) -> Result<SigmaSchedule> {
    let sigmas = ddpm_cosine_alpha_bar(t_steps)?
        .into_iter()
        .map(|a| sqrt(((1.0 - a) / a).max(0.0)))
        .collect();
    SigmaSchedule::checked(sigmas, Order::Ascending, ScheduleSource::DdpmCosine(t_steps))
}

/// `x = x₀ + σ·ε` with `ε ~ N(0, I)`. `σ = 0` returns `x₀` without drawing.
pub fn corrupt<R: Rng + ?Sized>(x0: &DiffusionTensor, sigma: f64, rng: &mut R) -> Result<DiffusionTensor> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        bail!(Domain, "noise level must be finite and >= 0, got {sigma}");
    }
    if sigma == 0.0 {
        return Ok(x0.clone());
    }
    Ok(x0.map(|x| x + sigma * standard_normal(rng)))
}

/// Variance-preserving corruption `sqrt(ᾱ)·x₀ + sqrt(1-ᾱ)·ε`.
pub fn ddpm_corrupt<R: Rng + ?Sized>(x0: &DiffusionTensor, alpha_bar: f64, rng: &mut R) -> Result<DiffusionTensor> {
    if !(0.0..=1.0).contains(&alpha_bar) {
        bail!(Domain, "alpha_bar must lie in [0, 1], got {alpha_bar}");
    }
    let (a, b) = (sqrt(alpha_bar), sqrt(1.0 - alpha_bar));
    if b == 0.0 {
        return Ok(x0.clone());
    }
    Ok(x0.map(|x| a * x + b * standard_normal(rng)))
}

/// Draws `σ` so that `φ(σ)` is uniform on `[φ(σ_min), φ(σ_max)]`.
pub fn sample_sigma_uniform_phi<R: Rng + ?Sized>(
    spec: TransformSpec,
    sigma_min: f64,
    sigma_max: f64,
    rng: &mut R,
) -> Result<f64> {
    check_endpoints(sigma_min, sigma_max, 2)?;
    let lo = spec.apply(sigma_min)?;
    let hi = spec.apply(sigma_max)?;
    let u: f64 = rng.random();
    let sigma = spec.invert(lo + u * (hi - lo))?;
    Ok(sigma.clamp(sigma_min, sigma_max))
}
