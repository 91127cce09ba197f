mod args;
mod config;
mod error;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use config::RunConfig;
use error::CliError;

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    match (&cli.replay, &cli.command) {
        (Some(_), Some(_)) => Err(CliError::Usage("--replay cannot be combined with a subcommand".into())),
        (None, None) => Err(CliError::Usage("no subcommand given (try --help)".into())),
        (None, Some(cmd)) => config::resolve(cmd),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let mut rc: RunConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            if let Some(out) = &cli.out {
                rc.out = out.clone();
            }
            Ok(rc)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match resolve(&cli).and_then(|rc| run::execute(&rc)) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("haptix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
