use clap::Parser;
use ncpdrive_cli::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
