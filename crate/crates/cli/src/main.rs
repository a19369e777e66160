use clap::Parser;
use valguard_cli::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
