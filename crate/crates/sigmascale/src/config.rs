//! Run configuration: a flat `key = value` text format.
//!
//! Values come from built-in defaults, then a config file, then command-line
//! flags, each layer overriding the previous one.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sigmascale_core::metrics::{ChannelPolicy, SsimParams};
use sigmascale_core::{TransformSpec, RHO, SIGMA_DATA, SIGMA_MAX, SIGMA_MIN};

use crate::error::{Error, Result};
use crate::io::load_png_dir;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusSource {
    Synth { seed: u64, count: usize, size: usize },
    Directory(PathBuf),
}

impl CorpusSource {
    pub fn load(&self) -> Result<Vec<sigmascale_core::ImageBuffer>> {
        match self {
            Self::Synth { seed, count, size } => Ok(sigmascale_core::synth::synth_corpus(*seed, *count, *size)),
            Self::Directory(dir) => load_png_dir(dir),
        }
    }
}

impl fmt::Display for CorpusSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Synth { seed, count, size } => write!(f, "synth:{seed}:{count}:{size}"),
            Self::Directory(dir) => write!(f, "{}", dir.display()),
        }
    }
}

impl FromStr for CorpusSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("synth:") else {
            if s.is_empty() {
                return Err(Error::Config("empty corpus path".into()));
            }
            return Ok(Self::Directory(PathBuf::from(s)));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let [seed, count, size] = parts[..] else {
            return Err(Error::Config(format!("corpus `{s}` is not synth:seed:count:size")));
        };
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Config(format!("corpus `{s}`: `{v}` is not an integer")))
        };
        let size = num(size)? as usize;
        if size == 0 {
            return Err(Error::Config(format!("corpus `{s}`: size must be positive")));
        }
        Ok(Self::Synth {
            seed: num(seed)?,
            count: num(count)? as usize,
            size,
        })
    }
}

pub fn parse_channel_policy(s: &str) -> Result<ChannelPolicy> {
    match s {
        "per-channel-mean" => Ok(ChannelPolicy::PerChannelMean),
        "luma" => Ok(ChannelPolicy::Luma),
        _ => Err(Error::Config(format!(
            "unknown channel policy `{s}` (expected per-channel-mean or luma)"
        ))),
    }
}

pub fn channel_policy_name(p: ChannelPolicy) -> &'static str {
    match p {
        ChannelPolicy::PerChannelMean => "per-channel-mean",
        ChannelPolicy::Luma => "luma",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub n_levels: usize,
    pub rho: f64,
    pub sigma_data: f64,
    pub transform: TransformSpec,
    pub corpus: CorpusSource,
    pub seed: u64,
    pub draws: usize,
    pub channel_policy: ChannelPolicy,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sigma_min: SIGMA_MIN,
            sigma_max: SIGMA_MAX,
            n_levels: 50,
            rho: RHO,
            sigma_data: SIGMA_DATA,
            transform: sigmascale_core::transforms::PHI_STAR,
            corpus: CorpusSource::Synth {
                seed: 1,
                count: 16,
                size: 64,
            },
            seed: 0,
            draws: 2,
            channel_policy: ChannelPolicy::PerChannelMean,
            out: PathBuf::from("."),
        }
    }
}

pub const KEYS: [&str; 11] = [
    "sigma_min",
    "sigma_max",
    "n_levels",
    "rho",
    "sigma_data",
    "transform",
    "corpus",
    "seed",
    "draws",
    "channel_policy",
    "out",
];

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "sigma_min" => self.sigma_min = num(key, value)?,
            "sigma_max" => self.sigma_max = num(key, value)?,
            "n_levels" => self.n_levels = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "sigma_data" => self.sigma_data = num(key, value)?,
            "transform" => {
                self.transform = value
                    .parse()
                    .map_err(|e: sigmascale_core::Error| Error::Config(format!("transform: {e}")))?
            }
            "corpus" => self.corpus = value.parse()?,
            "seed" => self.seed = num(key, value)?,
            "draws" => self.draws = num(key, value)?,
            "channel_policy" => self.channel_policy = parse_channel_policy(value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return bad(format!("sigma_min must be positive, got {}", self.sigma_min));
        }
        if !(self.sigma_max > self.sigma_min && self.sigma_max.is_finite()) {
            return bad(format!(
                "sigma_max must exceed sigma_min, got {} <= {}",
                self.sigma_max, self.sigma_min
            ));
        }
        if self.n_levels < 2 {
            return bad(format!("n_levels must be at least 2, got {}", self.n_levels));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return bad(format!("rho must be >= 1, got {}", self.rho));
        }
        if !(self.sigma_data > 0.0 && self.sigma_data.is_finite()) {
            return bad(format!("sigma_data must be positive, got {}", self.sigma_data));
        }
        if self.draws == 0 {
            return bad("draws must be at least 1".into());
        }
        self.transform
            .validate()
            .map_err(|e| Error::Config(format!("transform: {e}")))?;
        Ok(())
    }

    pub fn ssim_params(&self) -> SsimParams {
        SsimParams {
            channel_policy: self.channel_policy,
            ..SsimParams::default()
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "sigma_min" => self.sigma_min.to_string(),
            "sigma_max" => self.sigma_max.to_string(),
            "n_levels" => self.n_levels.to_string(),
            "rho" => self.rho.to_string(),
            "sigma_data" => self.sigma_data.to_string(),
            "transform" => self.transform.to_string(),
            "corpus" => self.corpus.to_string(),
            "seed" => self.seed.to_string(),
            "draws" => self.draws.to_string(),
            "channel_policy" => channel_policy_name(self.channel_policy).to_string(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in KEYS {
            writeln!(f, "{key} = {}", self.get(key).expect("known key"))?;
        }
        Ok(())
    }
}
