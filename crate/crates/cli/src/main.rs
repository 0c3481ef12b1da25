use clap::Parser;
use corot_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("corot: {e}");
        std::process::exit(e.exit_code());
    }
}
