use clap::Parser;

fn main() -> anyhow::Result<()> {
    bdl_bench::commands::run(bdl_bench::cli::Cli::parse())
}
