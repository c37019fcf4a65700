use clap::Parser;

use binls::app::{self, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BINLS_LOG")).init();
    std::process::exit(app::run(&Cli::parse()));
}
