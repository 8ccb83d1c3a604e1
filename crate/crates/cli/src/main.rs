use clap::Parser;
use idla_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    std::process::exit(idla_cli::run_cli(&cli));
}
