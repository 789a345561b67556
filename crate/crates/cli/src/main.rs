use std::process::ExitCode;

use aftstab_cli::args::{Cli, Command};
use aftstab_cli::{cmd_benchmark, cmd_fit, cmd_simulate, cmd_stabsel, CliError, CliResult, EXIT_USAGE};
use clap::Parser;

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate(args) => {
            let m = cmd_simulate(&args)?;
            eprintln!(
                "wrote {} (censoring {:.3}, c_max {:?})",
                args.out.display(),
                m.realized_censoring,
                m.c_max
            );
        }
        Command::Fit(args) => {
            cmd_fit(&args)?;
        }
        Command::Stabsel(args) => {
            cmd_stabsel(&args)?;
        }
        Command::Benchmark(args) => {
            let res = cmd_benchmark(&args)?;
            eprintln!("finished {} result cells", res.records.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
