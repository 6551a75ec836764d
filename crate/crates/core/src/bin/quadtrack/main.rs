mod args;
mod commands;
mod output;
mod source;

use std::process::ExitCode;

use clap::Parser;
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{load_config, merge, Cli, Command, CommonArgs};
use output::Artifacts;
use quadtrack::{Error, Result};

/// Exit status for a missing input file.
const EXIT_MISSING: u8 = 2;

fn run<T, F>(name: &str, flags: &T, config: Option<&toml::Table>, common: fn(&mut T) -> &mut CommonArgs, body: F) -> Result<()>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce(&mut T, &mut Artifacts) -> Result<()>,
{
    let mut resolved = merge(flags, config)?;
    common(&mut resolved).fill();
    let dir = common(&mut resolved).out.clone().expect("filled");
    let mut out = Artifacts::new(&dir)?;
    match body(&mut resolved, &mut out) {
        Ok(()) => {
            let written = out.finish(name, &resolved)?;
            eprintln!("wrote {} files to {}", written.len(), dir.display());
            Ok(())
        }
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let config = cli.config.as_deref().map(load_config).transpose()?;
    let config = config.as_ref();
    match &cli.command {
        Command::Gradients(a) => run("gradients", a, config, |a| &mut a.common, commands::gradients),
        Command::Build(a) => run("build", a, config, |a| &mut a.common, commands::build),
        Command::Track(a) => run("track", a, config, |a| &mut a.common, commands::track_cmd),
        Command::Converge(a) => run("converge", a, config, |a| &mut a.common, commands::converge),
        Command::Efficiency(a) => run("efficiency", a, config, |a| &mut a.common, commands::efficiency),
        Command::Energy(a) => run("energy", a, config, |a| &mut a.common, commands::energy),
        Command::Maxwell(a) => run("maxwell", a, config, |a| &mut a.common, commands::maxwell),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { ref source, .. } if source.kind() == std::io::ErrorKind::NotFound => ExitCode::from(EXIT_MISSING),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
