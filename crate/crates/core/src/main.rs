use clap::Parser;

fn main() {
    std::process::exit(wab::cli::main_with_args(wab::cli::Args::parse()));
}
