use std::process::ExitCode;

use clap::Parser;

use gridnk_cli::{cmd_certify, cmd_run, cmd_sweep, print_certify, report::Verdict, Cli, Command, EXIT_ERROR, EXIT_VIOLATION};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args).map(|(report, code)| {
            if code != 0 {
                eprintln!(
                    "not converged after {} iterations (gap {:.2}%)",
                    report.iterations, report.rel_gap_pct
                );
            }
            code
        }),
        Command::Sweep(args) => cmd_sweep(args).map(|_| 0),
        Command::Certify(args) => cmd_certify(args).map(|rows| {
            print_certify(&rows);
            if rows.iter().any(|r| r.verdict == Verdict::Violation) {
                EXIT_VIOLATION
            } else {
                0
            }
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
