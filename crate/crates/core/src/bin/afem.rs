use std::io;
use std::process::ExitCode;

use afem_stokes::cli::{
    cmd_adapt, cmd_counterexample, cmd_verify, configure_threads, Cli, Command, EXIT_USAGE, EXIT_VERIFY_FAILED,
};
use afem_stokes::output::write_counterexample;
use afem_stokes::Error;
use clap::Parser;

fn run(cli: Cli) -> Result<i32, Error> {
    configure_threads(std::env::var("AFEM_THREADS").ok().as_deref())?;
    match cli.command {
        Command::Adapt(args) => {
            let cfg = args.config()?;
            let outcome = cmd_adapt(&cfg)?;
            println!("{}", outcome.summary());
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            Ok(outcome.exit_code())
        }
        Command::Verify(args) => {
            let report = cmd_verify(&args)?;
            report.write_csv(io::stdout().lock())?;
            Ok(if report.passed() { 0 } else { EXIT_VERIFY_FAILED })
        }
        Command::Counterexample(args) => {
            let study = cmd_counterexample(&args)?;
            write_counterexample(io::stdout().lock(), &study)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidParameter { .. } | Error::Parse { .. } | Error::InsufficientData(_) => EXIT_USAGE,
                _ => 1,
            };
            ExitCode::from(code as u8)
        }
    }
}
