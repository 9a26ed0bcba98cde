use clap::Parser;
use gfsim_core::harness::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
