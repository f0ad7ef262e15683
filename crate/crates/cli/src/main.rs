use clap::Parser;
use mfg_cli::commands::Outcome;
use mfg_cli::Cli;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 64;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match mfg_cli::run(cli) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::MonitorFailure) => {
            eprintln!("mfg: one or more monitors failed; see the run directory");
            ExitCode::from(2)
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("mfg: error: {msg}");
            ExitCode::FAILURE
        }
    }
}
