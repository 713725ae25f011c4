use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use delayhopf_cli::{run, CliError, Command};

#[derive(Parser)]
#[command(name = "delayhopf", version, about = "Hopf bifurcations in delayed reaction-diffusion-advection models")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config and DELAYHOPF_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for λ sweeps and τ scans.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Cross-check every reported eigenvalue against a dense decomposition.
    #[arg(long, global = true)]
    dense_oracle: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Principal eigenpair of the elliptic operator.
    Eig,
    /// Bifurcation scalars and the steady branch over the λ list.
    Steady,
    /// Hopf crossing, transversality and normal form for each λ.
    Hopf,
    /// Direct simulation of the delayed equation.
    Simulate,
    /// Simulations over a list of delays with a threshold verdict.
    Scan,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = (|| {
        let config = args.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
        if let Some(k) = args.threads {
            if k == 0 {
                return Err(CliError::Config("--threads must be positive".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build_global()
                .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
        }
        let cmd = match args.command {
            Cmd::Eig => Command::Eig,
            Cmd::Steady => Command::Steady,
            Cmd::Hopf => Command::Hopf,
            Cmd::Simulate => Command::Simulate,
            Cmd::Scan => Command::Scan,
        };
        run(cmd, config, args.out.clone(), args.dense_oracle)
    })();
    match result {
        Ok(report) => {
            // A closed pipe (e.g. `| head`) is not a failure of the run.
            let _ = writeln!(
                std::io::stdout(),
                "{}",
                serde_json::to_string_pretty(&report).expect("reports are plain JSON")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
