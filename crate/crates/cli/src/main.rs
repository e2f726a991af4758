mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, DensityBlock, ExperimentConfig, KernelBlock, PriorMassBlock};

#[derive(Parser, Debug)]
#[command(name = "klkit", version, about = "KL-property experiments for kernel mixture priors")]
struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the main CSV here instead of stdout (check: item table).
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Check a theorem's hypotheses for (f0, kernel).
    Check {
        #[arg(long)]
        theorem: Option<u8>,
        #[command(flatten)]
        f0: F0Args,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Treat the prior's weak-support hypothesis as not established.
        #[arg(long)]
        undeclared_support: bool,
    },
    /// Evaluate one approximant f_m at probe points.
    Approximate {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long)]
        index: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        probes: Option<Vec<f64>>,
    },
    /// KL(f0; f_m) along an index ladder.
    Converge {
        #[command(flatten)]
        seq: SeqArgs,
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
        #[arg(long)]
        target: Option<f64>,
    },
    /// Monte-Carlo prior mass of KL neighbourhoods under a DP mixture.
    Priormass {
        #[command(flatten)]
        f0: F0Args,
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<f64>>,
        #[arg(long)]
        draws: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        concentration: Option<f64>,
        /// Per-draw CSV.
        #[arg(long)]
        draws_output: Option<PathBuf>,
    },
    /// Lower bounds of the gamma and inverse-gamma approximants.
    VerifyBounds {
        #[command(flatten)]
        seq: SeqArgs,
        /// Indices m.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        delta: Option<f64>,
        /// Envelope points (gamma family).
        #[arg(long, value_delimiter = ',')]
        envelope_x: Option<Vec<f64>>,
    },
}

#[derive(Args, Debug, Default)]
struct F0Args {
    /// True density name.
    #[arg(long = "f0")]
    name: Option<String>,
    #[arg(long)]
    loc: Option<f64>,
    #[arg(long)]
    scale: Option<f64>,
    #[arg(long)]
    mean: Option<f64>,
    #[arg(long)]
    sd: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    shape: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "beta-a")]
    a: Option<f64>,
    #[arg(long = "beta-b")]
    b: Option<f64>,
}

impl F0Args {
    fn block(self) -> Option<DensityBlock> {
        let b = DensityBlock {
            name: self.name.unwrap_or_default(),
            loc: self.loc,
            scale: self.scale,
            mean: self.mean,
            sd: self.sd,
            rate: self.rate,
            shape: self.shape,
            mu: self.mu,
            sigma: self.sigma,
            alpha: self.alpha,
            a: self.a,
            b: self.b,
        };
        (b != DensityBlock::default()).then_some(b)
    }
}

#[derive(Args, Debug, Default)]
struct KernelArgs {
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    dim: Option<usize>,
}

impl KernelArgs {
    fn block(self) -> Option<KernelBlock> {
        let b = KernelBlock {
            name: self.kernel.unwrap_or_default(),
            nu: self.nu,
            lambda: self.lambda,
            dim: self.dim,
        };
        (b != KernelBlock::default()).then_some(b)
    }
}

#[derive(Args, Debug, Default)]
struct SeqArgs {
    /// Approximant family or kernel name.
    #[arg(long)]
    family: Option<String>,
    #[command(flatten)]
    f0: F0Args,
    #[command(flatten)]
    kernel: KernelArgs,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
}

impl SeqArgs {
    fn into_config(self, command: Command) -> ExperimentConfig {
        ExperimentConfig {
            command: Some(command),
            family: self.family,
            f0: self.f0.block(),
            kernel: self.kernel.block(),
            eta: self.eta,
            tolerance: self.tolerance,
            ..Default::default()
        }
    }
}

fn flags(sub: Option<Sub>) -> ExperimentConfig {
    let Some(sub) = sub else {
        return ExperimentConfig::default();
    };
    match sub {
        Sub::Check {
            theorem,
            f0,
            kernel,
            eta,
            delta,
            undeclared_support,
        } => ExperimentConfig {
            command: Some(Command::Check),
            theorem,
            f0: f0.block(),
            kernel: kernel.block(),
            eta,
            delta,
            prior_support_declared: undeclared_support.then_some(false),
            ..Default::default()
        },
        Sub::Approximate { seq, index, probes } => ExperimentConfig {
            index,
            probes,
            ..seq.into_config(Command::Approximate)
        },
        Sub::Converge { seq, ladder, target } => ExperimentConfig {
            ladder,
            target,
            ..seq.into_config(Command::Converge)
        },
        Sub::Priormass {
            f0,
            kernel,
            epsilon,
            draws,
            seed,
            concentration,
            draws_output,
        } => {
            let pm = PriorMassBlock {
                epsilon,
                draws,
                draws_output,
                ..Default::default()
            };
            ExperimentConfig {
                command: Some(Command::Priormass),
                f0: f0.block(),
                kernel: kernel.block(),
                seed,
                priormass: (pm != PriorMassBlock::default() || concentration.is_some()).then_some(pm),
                concentration,
                ..Default::default()
            }
        }
        Sub::VerifyBounds {
            seq,
            m,
            grid,
            delta,
            envelope_x,
        } => ExperimentConfig {
            ladder: m,
            probes: grid,
            delta,
            envelope_x,
            ..seq.into_config(Command::VerifyBounds)
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut top = flags(cli.command);
    top.output = cli.output;
    let cfg = match commands::load_config(cli.config.as_deref()) {
        Ok(file) => file.overlay(top),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
