use clap::Parser;
use viscowave_cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
