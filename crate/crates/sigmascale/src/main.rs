use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sigmascale::commands::{self, OracleArgs, ScheduleKind};
use sigmascale::config::RunConfig;
use sigmascale::Error;
use sigmascale_core::conditioning::{TpsWarpParams, XdogParams};
use sigmascale_core::sampler::{InitScale, Integrator, StepSign};
use sigmascale_core::{Order, TransformSpec};

#[derive(Parser, Debug)]
#[command(name = "sigmascale", version, about = "SSIM-aligned sigma-space noise schedules")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Run-configuration overrides shared by every command.
#[derive(Args, Debug)]
struct Common {
    /// Flat key = value file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    sigma_min: Option<f64>,
    #[arg(long, global = true)]
    sigma_max: Option<f64>,
    #[arg(long, global = true)]
    n_levels: Option<usize>,
    #[arg(long, global = true)]
    rho: Option<f64>,
    #[arg(long, global = true)]
    sigma_data: Option<f64>,
    /// Transform spec, e.g. squash:0.3, log, tanh.
    #[arg(long, global = true)]
    transform: Option<String>,
    /// PNG directory or synth:seed:count:size.
    #[arg(long, global = true)]
    corpus: Option<String>,
    #[arg(long, global = true)]
    draws: Option<usize>,
    /// per-channel-mean or luma.
    #[arg(long, global = true)]
    channel_policy: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Rank candidate transforms by SSIM linearity.
    SelectPhi {
        /// Comma-separated transform specs; default is the full candidate set.
        #[arg(long, value_delimiter = ',')]
        candidates: Vec<String>,
    },
    /// Export a noise schedule as CSV.
    Schedule {
        #[arg(long, value_enum, default_value_t = Kind::Phi)]
        kind: Kind,
        /// Number of levels; defaults to n_levels.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value_t = OrderArg::Descending)]
        order: OrderArg,
    },
    /// Corrupt one image along a schedule: grid PNG plus SSIM-vs-step CSV.
    CorruptGrid {
        #[arg(long, value_enum, default_value_t = Kind::Phi)]
        schedule: Kind,
        #[arg(long, default_value_t = 25)]
        steps: usize,
        /// Input PNG; defaults to the first corpus image.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Sample the Gaussian oracle's probability-flow ODE.
    SampleOracle {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [0.2, -0.1])]
        mean: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.04, 0.09])]
        variance: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// Number of schedule levels; defaults to n_levels.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value_t = IntegratorArg::Heun)]
        integrator: IntegratorArg,
        #[arg(long, value_enum, default_value_t = InitArg::SigmaMax)]
        init: InitArg,
        #[arg(long, value_enum, default_value_t = SignArg::Toward)]
        sign: SignArg,
    },
    /// XDoG line sketch of an image.
    Sketch {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Thin-plate-spline warp plus random rotation of an image.
    Warp {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = TpsWarpParams::default().jitter_std)]
        jitter: f64,
        #[arg(long, default_value_t = TpsWarpParams::default().rotation_range)]
        rotation: f64,
    },
    /// Forward and reverse SSIM-vs-phi curves for one image.
    Curves {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Per-pixel variance of the oracle driving the reverse curve.
        #[arg(long, default_value_t = 1e-3)]
        variance: f64,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Phi,
    Edm,
    Ddpm,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OrderArg {
    Ascending,
    Descending,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum IntegratorArg {
    Euler,
    Heun,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InitArg {
    SigmaMax,
    Unit,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SignArg {
    Toward,
    Away,
}

impl From<Kind> for ScheduleKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Phi => Self::Phi,
            Kind::Edm => Self::Edm,
            Kind::Ddpm => Self::Ddpm,
        }
    }
}

fn resolve_config(c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &c.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        cfg.apply_text(&text)?;
    }
    let flags: [(&str, Option<String>); 11] = [
        ("seed", c.seed.map(|v| v.to_string())),
        ("out", c.out.as_ref().map(|p| p.display().to_string())),
        ("sigma_min", c.sigma_min.map(|v| v.to_string())),
        ("sigma_max", c.sigma_max.map(|v| v.to_string())),
        ("n_levels", c.n_levels.map(|v| v.to_string())),
        ("rho", c.rho.map(|v| v.to_string())),
        ("sigma_data", c.sigma_data.map(|v| v.to_string())),
        ("transform", c.transform.clone()),
        ("corpus", c.corpus.clone()),
        ("draws", c.draws.map(|v| v.to_string())),
        ("channel_policy", c.channel_policy.clone()),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, Error> {
    let cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::SelectPhi { candidates } => {
            let specs = candidates
                .iter()
                .map(|s| {
                    s.parse::<TransformSpec>()
                        .map_err(|e| Error::Config(format!("candidate `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            commands::select_phi(&cfg, &specs)
        }
        Command::Schedule { kind, steps, order } => {
            let order = match order {
                OrderArg::Ascending => Order::Ascending,
                OrderArg::Descending => Order::Descending,
            };
            commands::schedule(&cfg, kind.into(), steps.unwrap_or(cfg.n_levels), order)
        }
        Command::CorruptGrid { schedule, steps, input } => {
            commands::corrupt_grid(&cfg, schedule.into(), steps, input.as_deref())
        }
        Command::SampleOracle {
            mean,
            variance,
            samples,
            steps,
            integrator,
            init,
            sign,
        } => {
            let args = OracleArgs {
                mean,
                variance,
                samples,
                steps: steps.unwrap_or(cfg.n_levels),
                integrator: match integrator {
                    IntegratorArg::Euler => Integrator::Euler,
                    IntegratorArg::Heun => Integrator::Heun,
                },
                init: match init {
                    InitArg::SigmaMax => InitScale::SigmaMax,
                    InitArg::Unit => InitScale::Unit,
                },
                sign: match sign {
                    SignArg::Toward => StepSign::TowardDenoiser,
                    SignArg::Away => StepSign::AwayFromDenoiser,
                },
            };
            commands::sample_oracle(&cfg, &args)
        }
        Command::Sketch { input } => commands::sketch(&cfg, input.as_deref(), &XdogParams::default()),
        Command::Warp {
            input,
            jitter,
            rotation,
        } => {
            let params = TpsWarpParams {
                jitter_std: jitter,
                rotation_range: rotation,
                ..TpsWarpParams::default()
            };
            commands::warp(&cfg, input.as_deref(), &params)
        }
        Command::Curves { input, variance } => commands::curves(&cfg, input.as_deref(), variance),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
