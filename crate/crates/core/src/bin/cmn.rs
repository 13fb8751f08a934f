use clap::Parser;
use cmn_verify::cli::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    init_threads();
    let code = run(&cli, &mut std::io::stdout().lock());
    std::process::exit(code);
}
