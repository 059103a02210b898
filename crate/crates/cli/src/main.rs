use clap::Parser;

use egreg_cli::args::Cli;
use egreg_cli::commands::run;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
