use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use outersplit::harness;

/// Outer-approximation splitting solvers for constrained inclusion and
/// equilibrium problems.
#[derive(Parser)]
#[command(name = "outersplit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a config file and write its trace.
    Run {
        config: PathBuf,
        /// Trace path; overrides the config's `output` key.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the sampled certificate suites for the configured operators.
    Verify { config: PathBuf },
    /// Describe the columns of trace files.
    TraceFormat,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let code = match cli.command {
        Command::Run { config, output } => harness::cmd_run(&config, output.as_deref(), &mut stdout),
        Command::Verify { config } => harness::cmd_verify(&config, &mut stdout),
        Command::TraceFormat => {
            let _ = stdout.write_all(harness::trace_format().as_bytes());
            harness::EXIT_OK
        }
    };
    let _ = stdout.flush();
    ExitCode::from(code as u8)
}
