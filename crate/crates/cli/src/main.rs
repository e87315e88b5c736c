//! `ksw`: verification suites, ModMul cost sweeps, per-level alpha planning
//! and cycle-level hardware simulation for RNS-CKKS key switching, with
//! reproducible CSV/JSON reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ksw_cli::commands::{
    cmd_alpha_plan, cmd_cost, cmd_ksw_verify, cmd_ntt_verify, cmd_simulate, CmdError, CommonArgs,
    Format, ModeArg,
};

#[derive(Parser)]
#[command(name = "ksw", version, about)]
struct Cli {
    /// Flat key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice a run makes.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output directory for reports and the run manifest.
    #[arg(long, global = true, default_value = "ksw-out")]
    out: PathBuf,
    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Both)]
    format: FormatArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimModeArg {
    Serial,
    Parallel,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Variant-equivalence, roundtrip, convolution and fixed-twiddle suites.
    NttVerify,
    /// Key-switch correctness and hybrid/KLSS agreement with a noise table.
    KswVerify,
    /// ModMul sweeps: per-class breakdowns, method comparison, alpha curves,
    /// amortized-multiplication sweep, E-Key sizing.
    Cost,
    /// Per-level alpha schedule as JSON/CSV.
    AlphaPlan {
        /// Re-verify the argmin property by exhaustive re-scan.
        #[arg(long)]
        rescan: bool,
    },
    /// Lower a workload onto a hardware profile and time it.
    Simulate {
        /// Built-in workload: bootstrapping | helr | resnet.
        #[arg(long, default_value = "bootstrapping")]
        workload: String,
        /// Built-in profile (taiyi | sharp-like) or a profile file path.
        #[arg(long, default_value = "taiyi")]
        profile: String,
        #[arg(long, value_enum, default_value_t = SimModeArg::Both)]
        mode: SimModeArg,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = CommonArgs {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        format: match cli.format {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
            FormatArg::Both => Format::Both,
        },
    };
    let result = match cli.command {
        Command::NttVerify => cmd_ntt_verify(&common),
        Command::KswVerify => cmd_ksw_verify(&common),
        Command::Cost => cmd_cost(&common),
        Command::AlphaPlan { rescan } => cmd_alpha_plan(&common, rescan),
        Command::Simulate {
            workload,
            profile,
            mode,
        } => {
            let mode = match mode {
                SimModeArg::Serial => ModeArg::Serial,
                SimModeArg::Parallel => ModeArg::Parallel,
                SimModeArg::Both => ModeArg::Both,
            };
            cmd_simulate(&common, &workload, &profile, mode)
        }
    };
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("one or more checks failed");
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("{e}");
            match e {
                CmdError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
