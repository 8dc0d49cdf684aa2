use clap::Parser;

fn main() {
    let cli = divcap_cli::Cli::parse();
    std::process::exit(divcap_cli::run(&cli));
}
