use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use aoi_tandem::harness::{self, SweepOptions, SweepSpec};
use aoi_tandem::QuadratureSettings;

/// Average peak age of information for a priority-preprocessing /
/// Rayleigh-faded transmission tandem, analytically and by simulation.
#[derive(Parser)]
#[command(name = "aoi-tandem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form analysis; writes one CSV row per source plus globals.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Discrete-event simulation.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
        #[arg(long, default_value_t = 0.05)]
        warmup: f64,
        #[arg(long)]
        out: PathBuf,
        /// Also write every packet's timestamps.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Analysis vs simulation for one scenario.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the basic arrival rate lambda_b (lambda_j = m_j * lambda_b).
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Comma separated m_j; defaults to 1,2,...,J.
        #[arg(long, value_delimiter = ',')]
        multipliers: Option<Vec<f64>>,
        #[arg(long)]
        analytic_only: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000)]
        packets: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze { scenario, out } => harness::cmd_analyze(&scenario, &out),
        Command::Simulate {
            scenario,
            seed,
            packets,
            warmup,
            out,
            trace,
        } => harness::cmd_simulate(&scenario, seed, packets, warmup, &out, trace.as_deref()),
        Command::Compare {
            scenario,
            seed,
            packets,
            out,
        } => harness::cmd_compare(&scenario, seed, packets, &out),
        Command::Sweep {
            scenario,
            from,
            to,
            steps,
            multipliers,
            analytic_only,
            seed,
            packets,
            out,
        } => {
            let multipliers = match multipliers {
                Some(m) => m,
                None => match aoi_tandem::Scenario::load(&scenario) {
                    Ok(sc) => (1..=sc.num_sources()).map(|j| j as f64).collect(),
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(harness::EXIT_INPUT as u8);
                    }
                },
            };
            let spec = SweepSpec {
                from,
                to,
                steps,
                multipliers,
            };
            let opts = SweepOptions {
                seed,
                n_packets: packets,
                analytic_only,
                quadrature: QuadratureSettings::default(),
                ..SweepOptions::default()
            };
            harness::cmd_sweep(&scenario, &spec, &opts, &out)
        }
    };
    ExitCode::from(code as u8)
}
