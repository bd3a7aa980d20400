//! Noise-aware preconditioning of a raw network into a denoiser.
//!
//! `D(x; σ) = c_skip(σ)·x + c_out(σ)·F(c_in(σ)·x, cond; c_noise(σ))` with
//!
//! ```text
//! c_skip  = σ_data² / (σ² + σ_data²)
//! c_out   = σ / sqrt(σ² + σ_data²)
//! c_in    = 1 / sqrt(σ² + σ_data²)
//! c_noise = ¼·ln σ          (QuarterLog)
//!         = φ(σ)            (PhiStar)
//! ```
//!
//! [`OutputScale::EdmCompat`] multiplies `c_out` by `σ_data`, which is the
//! form used by the original EDM code.

use libm::{log, sqrt};

use crate::error::bail;
use crate::image::DiffusionTensor;
use crate::sampler::Denoiser;
use crate::transforms::TransformSpec;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionCoeffs {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

/// Scalar noise embedding handed to the raw network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseEmbedPolicy {
    /// `¼·ln σ`
    QuarterLog,
    /// `φ(σ)` for a strictly increasing transform.
    PhiStar(TransformSpec),
}

impl NoiseEmbedPolicy {
    pub fn validate(&self) -> Result<()> {
        if let Self::PhiStar(spec) = self {
            spec.validate()?;
            if !spec.is_increasing() {
                bail!(Domain, "noise embedding {spec} must be strictly increasing");
            }
        }
        Ok(())
    }

    pub fn embed(&self, sigma: f64) -> Result<f64> {
        match self {
            Self::QuarterLog => Ok(0.25 * log(sigma)),
            Self::PhiStar(spec) => spec.apply(sigma),
        }
    }
}

/// Which `c_out` variant to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputScale {
    /// `c_out = σ / sqrt(σ² + σ_data²)`
    #[default]
    AsWritten,
    /// `c_out = σ·σ_data / sqrt(σ² + σ_data²)`
    EdmCompat,
}

/// Coefficients for one noise level with the default `c_out`.
pub fn coeffs(sigma: f64, sigma_data: f64, policy: NoiseEmbedPolicy) -> Result<PreconditionCoeffs> {
    coeffs_with(sigma, sigma_data, policy, OutputScale::AsWritten)
}

pub fn coeffs_with(
    sigma: f64,
    sigma_data: f64,
    policy: NoiseEmbedPolicy,
    scale: OutputScale,
) -> Result<PreconditionCoeffs> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        bail!(Domain, "sigma must be finite and positive, got {sigma}");
    }
    if !(sigma_data > 0.0) || !sigma_data.is_finite() {
        bail!(Domain, "sigma_data must be finite and positive, got {sigma_data}");
    }
    policy.validate()?;
    let total = sigma * sigma + sigma_data * sigma_data;
    let root = sqrt(total);
    let c_out = match scale {
        OutputScale::AsWritten => sigma / root,
        OutputScale::EdmCompat => sigma * sigma_data / root,
    };
    Ok(PreconditionCoeffs {
        c_skip: sigma_data * sigma_data / total,
        c_out,
        c_in: 1.0 / root,
        c_noise: policy.embed(sigma)?,
    })
}

/// The learned part `F` of a denoiser: takes the input-scaled tensor, the
/// optional condition, and the noise embedding, and returns a residual of the
/// same shape.
pub trait RawNetwork {
    fn forward(
        &self,
        scaled: &DiffusionTensor,
        cond: Option<&DiffusionTensor>,
        c_noise: f64,
    ) -> Result<DiffusionTensor>;
}

impl<F> RawNetwork for F
where
    F: Fn(&DiffusionTensor, Option<&DiffusionTensor>, f64) -> Result<DiffusionTensor>,
{
    fn forward(
        &self,
        scaled: &DiffusionTensor,
        cond: Option<&DiffusionTensor>,
        c_noise: f64,
    ) -> Result<DiffusionTensor> {
        self(scaled, cond, c_noise)
    }
}

/// A raw network wrapped with skip/in/out scalings.
#[derive(Debug, Clone)]
pub struct PreconditionedDenoiser<N> {
    pub network: N,
    pub sigma_data: f64,
    pub policy: NoiseEmbedPolicy,
    pub output_scale: OutputScale,
}

/// Wraps `raw` with the default `σ_data` and `c_out`.
pub fn compose_denoiser<N: RawNetwork>(raw: N, policy: NoiseEmbedPolicy) -> Result<PreconditionedDenoiser<N>> {
    policy.validate()?;
    Ok(PreconditionedDenoiser {
        network: raw,
        sigma_data: crate::SIGMA_DATA,
        policy,
        output_scale: OutputScale::AsWritten,
    })
}

impl<N: RawNetwork> Denoiser for PreconditionedDenoiser<N> {
    fn denoise(&self, x: &DiffusionTensor, cond: Option<&DiffusionTensor>, sigma: f64) -> Result<DiffusionTensor> {
        let c = coeffs_with(sigma, self.sigma_data, self.policy, self.output_scale)?;
        let scaled = x.map(|v| c.c_in * v);
        let residual = self.network.forward(&scaled, cond, c.c_noise)?;
        if !residual.same_shape(x) {
            bail!(
                Shape,
                "network returned {}x{}x{} for a {}x{}x{} input",
                residual.width(),
                residual.height(),
                residual.channels(),
                x.width(),
                x.height(),
                x.channels()
            );
        }
        x.zip_map(&residual, |xi, fi| c.c_skip * xi + c.c_out * fi)
    }
}
