use clap::Parser;

fn main() -> anyhow::Result<()> {
    msje_service::cli::run(&msje_service::cli::Cli::parse())
}
