mod args;
mod commands;
mod config;
mod output;
mod svg;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use output::Outputs;

fn run(cli: &Cli, out: &mut Outputs) -> anyhow::Result<()> {
    match &cli.command {
        Command::Embed(a) => commands::embed(a, out),
        Command::Distance(a) => commands::distance(a, out),
        Command::Global(a) => commands::global(a, out),
        Command::Metagraph(a) => commands::metagraph(a, out),
        Command::TorusExperiment(a) => commands::torus(a, out),
        Command::Convergence(a) => commands::convergence(a, out),
        Command::ChangeDetect(a) => commands::change_detect(a, out),
        Command::GenData(a) => commands::gen_data(a, out),
    }
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    let target = cli.command.output();
    let mut out = match Outputs::new(&target.output_dir, target.format.into()) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    match run(&cli, &mut out) {
        Ok(()) => {
            for p in out.paths() {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            out.discard();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
