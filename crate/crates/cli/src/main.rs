use clap::Parser;

fn main() {
    let cli = lbforge_cli::Cli::parse();
    std::process::exit(lbforge_cli::run(cli));
}
