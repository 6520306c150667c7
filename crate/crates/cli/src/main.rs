use std::process::ExitCode;

use clap::Parser;
use curvkit_cli::args::{to_action, Action, Cli};
use curvkit_cli::commands::{load_metric, run};
use curvkit_cli::{exit, CliError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match to_action(cli).and_then(|a| match a {
        Action::Run(job) => run(&job).map(|o| {
            print!("{}", o.stdout);
            for p in &o.artifacts {
                eprintln!("wrote {}", p.display());
            }
            o.exit_code
        }),
        Action::Export { job, output } => {
            let (_, m) = load_metric(&job)?;
            let text = serde_json::to_string(&m).map_err(|e| CliError::Io(e.to_string()))? + "\n";
            std::fs::write(&output, text).map_err(|e| CliError::Io(format!("{}: {e}", output.display())))?;
            eprintln!("wrote {}", output.display());
            Ok(exit::OK)
        }
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("curvkit: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
