//! `uos`: label preparation, scoring, evaluation, toy training, synthetic
//! data generation and benchmarking.

mod cmd;
mod manifest;
mod settings;

use std::process::ExitCode;

use clap::{ArgMatches, Command};
use uos_core::Result;

use settings::{Key, Settings};

type Runner = fn(&Settings) -> Result<()>;

fn commands() -> Vec<(&'static str, &'static str, Vec<Key>, Runner)> {
    vec![
        (
            "prepare-labels",
            cmd::prepare_labels::ABOUT,
            cmd::prepare_labels::KEYS.to_vec(),
            cmd::prepare_labels::run,
        ),
        (
            "score",
            cmd::score::ABOUT,
            cmd::score::KEYS.to_vec(),
            cmd::score::run,
        ),
        (
            "eval",
            cmd::eval::ABOUT,
            cmd::eval::KEYS.to_vec(),
            cmd::eval::run,
        ),
        (
            "train-toy",
            cmd::train_toy::ABOUT,
            cmd::train_toy::keys(),
            cmd::train_toy::run,
        ),
        (
            "gen-synth",
            cmd::gen_synth::ABOUT,
            cmd::gen_synth::keys(),
            cmd::gen_synth::run,
        ),
        (
            "bench",
            cmd::bench::ABOUT,
            cmd::bench::KEYS.to_vec(),
            cmd::bench::run,
        ),
    ]
}

fn cli() -> Command {
    let mut app = Command::new("uos")
        .about("Unknown-objectness scoring for road obstacle detection")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about, keys, _) in commands() {
        app = app.subcommand(Command::new(name).about(about).args(settings::args(&keys)));
    }
    app
}

fn dispatch(matches: &ArgMatches) -> Result<()> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let (_, _, keys, run) = commands()
        .into_iter()
        .find(|(n, ..)| *n == name)
        .expect("registered subcommand");
    run(&Settings::resolve(&keys, sub)?)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    match dispatch(&matches) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("uos {}: {e}", matches.subcommand_name().unwrap_or(""));
            ExitCode::FAILURE
        }
    }
}
