use clap::Parser;
use spcv_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", e.record());
        std::process::exit(e.exit_code());
    }
}
