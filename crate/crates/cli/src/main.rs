use clap::Parser;

use pcmap::{run_with_thread_env, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run_with_thread_env(cli) {
        eprintln!("{}", e.single_line());
        std::process::exit(1);
    }
}
