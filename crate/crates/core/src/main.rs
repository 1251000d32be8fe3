use clap::Parser;

fn main() {
    let args = meanfield::cli::Args::parse();
    std::process::exit(meanfield::cli::main_with(&args));
}
