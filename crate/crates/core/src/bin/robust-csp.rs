use clap::Parser;

fn main() {
    std::process::exit(robust_csp::cli::run(robust_csp::cli::Cli::parse()));
}
