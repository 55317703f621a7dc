use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbm_current::cli;

#[derive(Parser)]
#[command(name = "fbm-current", version, about = "White-noise analysis of fBm stochastic currents")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// experiment config (flat key=value with a [subcommand] section)
    #[arg(long)]
    config: PathBuf,
    /// output directory for CSV + manifest (default: ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides any seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Hida-membership verdicts over an (h, n) grid
    Membership(Common),
    /// Donsker delta S-transform on a z grid
    Stransform(Common),
    /// S-transform of the stochastic current
    Current(Common),
    /// chaos-expansion partial sums against the direct value
    ChaosReconstruct(Common),
    /// Monte Carlo check of the Donsker S-transform
    McVerify(Common),
    /// incomplete-gamma closed form vs direct time integral
    GammaCheck(Common),
    /// fractional Brownian path batches
    FbmSample(Common),
    /// small-time cutoff scan of the current integral
    DivergenceProbe(Common),
}

impl Command {
    fn split(self) -> (&'static str, Common) {
        match self {
            Command::Membership(c) => ("membership", c),
            Command::Stransform(c) => ("stransform", c),
            Command::Current(c) => ("current", c),
            Command::ChaosReconstruct(c) => ("chaos-reconstruct", c),
            Command::McVerify(c) => ("mc-verify", c),
            Command::GammaCheck(c) => ("gamma-check", c),
            Command::FbmSample(c) => ("fbm-sample", c),
            Command::DivergenceProbe(c) => ("divergence-probe", c),
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (name, common) = args.command.split();
    match cli::run(name, &common.config, common.out, common.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
