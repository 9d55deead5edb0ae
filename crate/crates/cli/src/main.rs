mod args;
mod commands;
mod record;

use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use gasgrid::decomposition::text_table;

use args::{Cli, Command};

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(a) => {
            for p in commands::gen(&a)? {
                println!("{}", p.display());
            }
            Ok(0)
        }
        Command::Solve(a) => {
            let (records, code) = commands::solve(&a)?;
            let reports: Vec<_> = records.into_iter().map(|r| r.report).collect();
            print!("{}", text_table(&reports));
            Ok(code)
        }
        Command::Validate(a) => {
            let (text, code) = commands::validate_cmd(&a)?;
            print!("{text}");
            Ok(code)
        }
        Command::Relax(a) => {
            let (text, code) = commands::relax(&a)?;
            print!("{text}");
            Ok(code)
        }
        Command::Report(a) => {
            print!("{}", commands::report(&a)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GASGRID_LOG", "warn")).format_timestamp_millis().init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
