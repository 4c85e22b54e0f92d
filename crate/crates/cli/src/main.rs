mod args;
mod bench;
mod fail;
mod model;
mod synth;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Bench(a) => bench::run(&a),
        Command::Fit(a) => model::fit(&a),
        Command::Predict(a) => model::predict(&a),
        Command::Validate(a) => model::validate(&a),
        Command::Synth(a) => synth::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("secmsg: {e}");
            ExitCode::from(e.code())
        }
    }
}
