use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use kaefam::{load_config, run_experiment, Command, Status};

#[derive(Parser)]
#[command(name = "kaefam", version, about = "Fiberwise twisted Kähler–Einstein experiments")]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `dotted.key=value`, value parsed as JSON when possible. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Cmd {
    Solve,
    Verify,
    Sweep,
    Bergman,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Solve => Command::Solve,
            Cmd::Verify => Command::Verify,
            Cmd::Sweep => Command::Sweep,
            Cmd::Bergman => Command::Bergman,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load_config(&cli.config, &cli.overrides).and_then(|loaded| {
        let bundle = run_experiment(&loaded, cli.command.into())?;
        let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&loaded.config.output.directory));
        bundle.write(&dir)?;
        Ok((bundle.status, dir))
    });
    match result {
        Ok((status, dir)) => {
            let word = match status {
                Status::Pass => "pass",
                Status::VerificationFailure => "verification failure",
                Status::NumericalFailure => "numerical failure",
            };
            eprintln!("{}: {word} (bundle in {})", cli.command.to_possible_value().unwrap().get_name(), dir.display());
            ExitCode::from(status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("kaefam: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
