use clap::Parser;
use stochkit_cli::{run, RunConfig};

fn main() {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
