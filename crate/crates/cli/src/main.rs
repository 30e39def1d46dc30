mod cli;
mod commands;
mod config;
mod error;
mod output;

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match config::expand(std::env::args_os().collect()) {
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Ok(argv) => match cli::Cli::try_parse_from(argv) {
            Err(e) => {
                let _ = e.print();
                if e.use_stderr() {
                    2
                } else {
                    0
                }
            }
            Ok(cli) => match commands::run(cli) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            },
        },
    };
    std::process::exit(code);
}
