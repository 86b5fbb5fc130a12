use clap::Parser;
use spin7flow_cli::app::{execute, Args};

fn main() {
    let args = Args::parse();
    std::process::exit(execute(&args));
}
